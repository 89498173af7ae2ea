#pragma once

#include "fbrc/checkpoint.hpp"
#include "fbrc/distributions.hpp"
#include "fbrc/mlp.hpp"

#include <filesystem>
#include <optional>

namespace fbrc {

struct PolicyConfig {
  std::vector<int> hidden{64, 64};
  double lr = 3e-4;
  double temperature_lr = 3e-4;
  double initial_temperature = 1.0;
  bool fixed_temperature = false;
  std::optional<double> target_entropy;  // defaults to -action_dim
};

/// Tanh-squashed diagonal Gaussian actor with a learnable temperature.
class PolicyModel {
 public:
  PolicyModel() = default;
  PolicyModel(int state_dim, int action_dim, const PolicyConfig& config, Rng& rng);

  int state_dim() const { return arch_.input; }
  int action_dim() const { return action_dim_; }
  const MlpArch& arch() const { return arch_; }
  const PolicyConfig& config() const { return config_; }

  ParameterSet& trunk() { return trunk_; }
  const ParameterSet& trunk() const { return trunk_; }
  ParameterSet& log_temperature() { return log_temperature_; }
  const ParameterSet& log_temperature() const { return log_temperature_; }

  double temperature() const;
  double target_entropy() const { return target_entropy_; }

  dist::SquashedGaussianParams distribution(const ad::Var& states) const;
  /// tanh(mean); used for evaluation.
  ad::Matrix act_deterministic(const ad::Matrix& states) const;
  ad::Matrix sample_actions(const ad::Matrix& states, Rng& rng) const;
  /// Samples with log-probabilities, no graph.
  std::pair<ad::Matrix, ad::Matrix> sample_with_log_prob(const ad::Matrix& states, Rng& rng) const;

  std::vector<CheckpointSection> to_sections() const;
  static PolicyModel from_sections(const std::vector<CheckpointSection>& sections);

 private:
  MlpArch arch_;
  int action_dim_ = 1;
  PolicyConfig config_;
  double target_entropy_ = -1.0;
  ParameterSet trunk_;
  ParameterSet log_temperature_;
};

}  // namespace fbrc
