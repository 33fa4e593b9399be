#include "ppro/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "ppro/error.hpp"

namespace ppro {
namespace {

constexpr std::array<char, 4> kMagic{'P', 'P', 'R', 'O'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& source) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw InputError(source + ": truncated checkpoint");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_checkpoint(std::ostream& out, const ParameterList& params) {
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    put_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put_u32(out, static_cast<std::uint32_t>(p->value.rows()));
    put_u32(out, static_cast<std::uint32_t>(p->value.cols()));
    for (double v : p->value.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
}

std::vector<Parameter> read_checkpoint(std::istream& in, const std::string& source) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kMagic) throw InputError(source + ": not a checkpoint file");
  if (const auto version = get_u32(in, source); version != kCheckpointVersion)
    throw InputError(source + ": unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t count = get_u32(in, source);
  std::vector<Parameter> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    Parameter p;
    p.name.resize(get_u32(in, source));
    if (!in.read(p.name.data(), static_cast<std::streamsize>(p.name.size())))
      throw InputError(source + ": truncated checkpoint");
    const std::uint32_t rows = get_u32(in, source);
    const std::uint32_t cols = get_u32(in, source);
    p.value = Matrix(rows, cols);
    for (auto& v : p.value.values()) v = std::bit_cast<float>(get_u32(in, source));
    out.push_back(std::move(p));
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterList& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint " + path.string());
  write_checkpoint(out, params);
}

std::vector<Parameter> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  return read_checkpoint(in, path.string());
}

void assign_checkpoint(const std::vector<Parameter>& loaded, const ParameterList& params) {
  std::map<std::string, const Parameter*> by_name;
  for (const auto& p : loaded) by_name[p.name] = &p;
  for (Parameter* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw InputError("checkpoint lacks parameter '" + p->name + "'");
    if (!it->second->value.same_shape(p->value))
      throw InputError("checkpoint parameter '" + p->name + "' has a different shape");
    p->value = it->second->value;
  }
}

}  // namespace ppro
