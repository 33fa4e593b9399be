#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ppro/autodiff.hpp"

namespace ppro {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;
  bool passed = true;
  double worst() const;
};

/// Builds a scalar loss on a fresh tape; must bind each checked parameter
/// with Tape::parameter and be deterministic.
using LossBuilder = std::function<Var(Tape&)>;

/// Compares backward() gradients with central differences of step `step`.
/// Relative error per entry is |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
GradCheckReport grad_check(const LossBuilder& build, const ParameterList& params, double step = 1e-4,
                           double tol = 1e-3);

}  // namespace ppro
