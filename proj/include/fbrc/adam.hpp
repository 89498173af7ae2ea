#pragma once

#include "fbrc/parameters.hpp"

#include <vector>

namespace fbrc {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<ad::Matrix> m;
  std::vector<ad::Matrix> v;
  long step = 0;
};

/// Bias-corrected Adam. Throws std::runtime_error on non-finite gradients,
/// leaving parameters and state untouched.
void adam_step(ParameterSet& params, const std::vector<ad::Matrix>& grads, AdamState& state,
               const AdamConfig& config);

/// Convenience owner of config + state for one parameter set.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}
  void step(ParameterSet& params, const std::vector<ad::Matrix>& grads) {
    adam_step(params, grads, state_, config_);
  }
  void set_lr(double lr) { config_.lr = lr; }
  const AdamConfig& config() const { return config_; }
  const AdamState& state() const { return state_; }

 private:
  AdamConfig config_;
  AdamState state_;
};

/// Gradient matrices of `loss` with respect to every tensor in `params`.
std::vector<ad::Matrix> gradient_values(const ad::Var& loss, const ParameterSet& params);

}  // namespace fbrc
