#pragma once

#include <stdexcept>
#include <string>

namespace ppro {

/// Malformed or inconsistent external input (files, configs, edge lists).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (shape mismatch, bad argument).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A forward computation produced NaN or Inf.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
[[noreturn]] void throw_contract(const char* expr, const char* file, int line, const std::string& msg);
}  // namespace detail

}  // namespace ppro

#define PPRO_EXPECT(cond, msg)                                              \
  do {                                                                      \
    if (!(cond)) ::ppro::detail::throw_contract(#cond, __FILE__, __LINE__, (msg)); \
  } while (0)
