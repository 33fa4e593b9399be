#include "ppro/adam.hpp"

#include <cmath>

#include "ppro/error.hpp"

namespace ppro {

Adam::Adam(ParameterList params, AdamConfig config) : params_(std::move(params)), config_(config) {
  for (const Parameter* p : params_) {
    PPRO_EXPECT(p != nullptr, "Adam: null parameter");
    first_.emplace_back(p->value.rows(), p->value.cols());
    second_.emplace_back(p->value.rows(), p->value.cols());
  }
}

void Adam::step() {
  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = config_.learning_rate;
  const double decay = lr * config_.weight_decay;

  for (std::size_t p = 0; p < params_.size(); ++p) {
    Parameter& param = *params_[p];
    auto value = param.value.values();
    auto m = first_[p].values();
    auto v = second_[p].values();
    const bool has_grad = param.grad.same_shape(param.value);
    PPRO_EXPECT(has_grad || param.grad.empty(), "Adam: gradient shape differs for '" + param.name + "'");
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = has_grad ? param.grad.values()[k] : 0.0;
      m[k] = b1 * m[k] + (1.0 - b1) * g;
      v[k] = b2 * v[k] + (1.0 - b2) * g * g;
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      value[k] -= lr * m_hat / (std::sqrt(v_hat) + config_.eps) + decay * value[k];
    }
  }
}

}  // namespace ppro
