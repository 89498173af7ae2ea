#include "fbrc/policy.hpp"

#include "fbrc/binary_io.hpp"

#include <cmath>

namespace fbrc {

using ad::Matrix;
using ad::Var;

PolicyModel::PolicyModel(int state_dim, int action_dim, const PolicyConfig& config, Rng& rng)
    : action_dim_(action_dim), config_(config) {
  arch_.input = state_dim;
  arch_.hidden = config.hidden;
  arch_.output = 2 * action_dim;
  arch_.activation = Activation::kRelu;
  trunk_ = init_mlp(arch_, rng);
  log_temperature_.add("log_alpha",
                       Matrix::Constant(1, 1, std::log(config.initial_temperature)));
  target_entropy_ = config.target_entropy.value_or(-static_cast<double>(action_dim));
}

double PolicyModel::temperature() const { return std::exp(log_temperature_[0].value()(0, 0)); }

dist::SquashedGaussianParams PolicyModel::distribution(const Var& states) const {
  Var head = mlp_apply(trunk_, states, arch_);
  return {ad::slice_cols(head, 0, action_dim_),
          dist::bound_log_std(ad::slice_cols(head, action_dim_, action_dim_))};
}

Matrix PolicyModel::act_deterministic(const Matrix& states) const {
  ad::NoGradGuard no_grad;
  return distribution(ad::constant(states)).mean.value().array().tanh().matrix();
}

Matrix PolicyModel::sample_actions(const Matrix& states, Rng& rng) const {
  return sample_with_log_prob(states, rng).first;
}

std::pair<Matrix, Matrix> PolicyModel::sample_with_log_prob(const Matrix& states, Rng& rng) const {
  ad::NoGradGuard no_grad;
  auto d = distribution(ad::constant(states));
  auto s = dist::sample_with_log_prob(d, standard_normal(states.rows(), action_dim_, rng));
  return {s.action.value(), s.log_prob.value()};
}

std::vector<CheckpointSection> PolicyModel::to_sections() const {
  CheckpointSection temp;
  temp.tag = "TEMP";
  temp.values = {log_temperature_[0].value()(0, 0), target_entropy_,
                 config_.fixed_temperature ? 1.0 : 0.0};
  return {network_section("PLCY", arch_, trunk_), temp};
}

PolicyModel PolicyModel::from_sections(const std::vector<CheckpointSection>& sections) {
  const auto& net = find_section(sections, "PLCY");
  const auto& temp = find_section(sections, "TEMP");
  if (temp.values.size() != 3) throw io::FormatError("TEMP section must hold 3 values");
  MlpArch arch = arch_of(net);
  if (arch.output % 2 != 0) throw io::FormatError("PLCY head width must be even");
  PolicyConfig config;
  config.hidden = arch.hidden;
  config.target_entropy = temp.values[1];
  config.fixed_temperature = temp.values[2] != 0.0;
  Rng unused(0);
  PolicyModel p(arch.input, arch.output / 2, config, unused);
  p.trunk_.assign(net.values);
  p.log_temperature_[0].mutable_value()(0, 0) = temp.values[0];
  return p;
}

}  // namespace fbrc
