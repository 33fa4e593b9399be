#pragma once

#include <cstdint>
#include <vector>

#include "ppro/autodiff.hpp"

namespace ppro {

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Decoupled: p <- p - lr * wd * p, applied alongside the moment update.
  double weight_decay = 0.0;
};

/// Adam with bias correction over a fixed list of parameters. The moments
/// are keyed by position in the list passed at construction.
class Adam {
 public:
  Adam(ParameterList params, AdamConfig config);

  /// One update from the gradients currently stored in each Parameter::grad.
  void step();

  std::int64_t steps_taken() const { return step_; }
  const AdamConfig& config() const { return config_; }
  const ParameterList& parameters() const { return params_; }

 private:
  ParameterList params_;
  AdamConfig config_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  std::int64_t step_ = 0;
};

}  // namespace ppro
