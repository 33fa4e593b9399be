#include <cmath>
#include <iostream>
#include <mutex>
#include <sstream>
#include <utility>

#include "ppro/error.hpp"
#include "ppro/log.hpp"
#include "ppro/matrix.hpp"
#include "ppro/rng.hpp"

namespace ppro {

namespace detail {
void throw_contract(const char* expr, const char* file, int line, const std::string& msg) {
  std::ostringstream os;
  os << msg << " [" << expr << " at " << file << ":" << line << "]";
  throw ContractViolation(os.str());
}
}  // namespace detail

// ---------------------------------------------------------------- warnings

namespace {
std::mutex g_sink_mutex;
void stderr_sink(const std::string& m) { std::cerr << "warning: " << m << "\n"; }
WarningSink& sink() {
  static WarningSink s = stderr_sink;
  return s;
}
}  // namespace

void set_warning_sink(WarningSink s) {
  std::lock_guard lock(g_sink_mutex);
  sink() = s ? std::move(s) : WarningSink(stderr_sink);
}

void warn(const std::string& message) {
  std::lock_guard lock(g_sink_mutex);
  sink()(message);
}

// ---------------------------------------------------------------- rng

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t Rng::below(std::uint64_t bound) {
  PPRO_EXPECT(bound > 0, "Rng::below needs a positive bound");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * M_PI * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

Rng Rng::derive(std::uint64_t stream) const {
  return Rng(splitmix64(seed_ ^ splitmix64(stream + 0x632be59bd9b4e019ULL)));
}

// ---------------------------------------------------------------- matrix

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  PPRO_EXPECT(data_.size() == rows * cols, "Matrix data size does not match shape");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    PPRO_EXPECT(r.size() == cols_, "ragged Matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

void Matrix::fill(double v) {
  for (auto& x : data_) x = v;
}

bool Matrix::all_finite() const {
  for (double x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  PPRO_EXPECT(a.cols() == b.rows(), "matmul inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  PPRO_EXPECT(a.same_shape(b), "max_abs_diff shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

}  // namespace ppro
