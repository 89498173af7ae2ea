#include "fbrc/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace fbrc {

void adam_step(ParameterSet& params, const std::vector<ad::Matrix>& grads, AdamState& state,
               const AdamConfig& config) {
  if (grads.size() != params.tensor_count()) {
    throw std::invalid_argument("adam_step: gradient count mismatch");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].allFinite()) {
      throw std::runtime_error("adam_step: non-finite gradient for '" + params.names()[i] +
                               "' (training diverged)");
    }
  }
  if (state.m.empty()) {
    for (const auto& p : params.vars()) {
      state.m.push_back(ad::Matrix::Zero(p.rows(), p.cols()));
      state.v.push_back(ad::Matrix::Zero(p.rows(), p.cols()));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    m = config.beta1 * m + (1.0 - config.beta1) * grads[i];
    v = config.beta2 * v + (1.0 - config.beta2) * grads[i].cwiseAbs2();
    auto& p = params[i].mutable_value();
    p.array() -= config.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config.eps);
  }
}

std::vector<ad::Matrix> gradient_values(const ad::Var& loss, const ParameterSet& params) {
  auto gs = ad::grad(loss, params.vars(), false);
  std::vector<ad::Matrix> out;
  out.reserve(gs.size());
  for (auto& g : gs) out.push_back(g.value());
  return out;
}

}  // namespace fbrc
