#include "ppro/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace ppro {

double GradCheckReport::worst() const {
  double w = 0.0;
  for (const auto& e : entries) w = std::max(w, e.max_rel_error);
  return w;
}

GradCheckReport grad_check(const LossBuilder& build, const ParameterList& params, double step, double tol) {
  {
    Tape tape;
    tape.backward(build(tape));
  }
  std::vector<Matrix> analytic;
  for (const Parameter* p : params) analytic.push_back(p->grad);

  auto evaluate = [&] {
    Tape tape;
    return scalar_value(build(tape));
  };

  GradCheckReport report;
  report.tolerance = tol;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Parameter& param = *params[p];
    GradCheckEntry entry{param.name};
    for (std::size_t k = 0; k < param.value.size(); ++k) {
      double& x = param.value.values()[k];
      const double saved = x;
      x = saved + step;
      const double up = evaluate();
      x = saved - step;
      const double down = evaluate();
      x = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[p].empty() ? 0.0 : analytic[p].values()[k];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), 1e-6});
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
      entry.max_rel_error = std::max(entry.max_rel_error, rel);
    }
    report.passed = report.passed && entry.max_rel_error < tol;
    report.entries.push_back(std::move(entry));
  }
  for (std::size_t p = 0; p < params.size(); ++p) params[p]->grad = analytic[p];
  return report;
}

}  // namespace ppro
