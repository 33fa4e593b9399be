#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "ppro/autodiff.hpp"

namespace ppro {

// Binary layout, all integers little-endian:
//   "PPRO" magic | u32 version | u32 count
//   per parameter: u32 name length | name bytes | u32 rows | u32 cols | rows*cols float32
// Values are narrowed to float32 on write.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const ParameterList& params);
std::vector<Parameter> read_checkpoint(std::istream& in, const std::string& source);

void save_checkpoint(const std::filesystem::path& path, const ParameterList& params);
std::vector<Parameter> load_checkpoint(const std::filesystem::path& path);

/// Copies values into `params` by name; every target must be present with a
/// matching shape, otherwise InputError.
void assign_checkpoint(const std::vector<Parameter>& loaded, const ParameterList& params);

}  // namespace ppro
