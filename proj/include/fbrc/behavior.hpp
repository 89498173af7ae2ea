#pragma once

// Behavior density mu(a|s) fitted to an offline dataset. Two families:
// a state-conditional tanh-squashed Gaussian mixture (the general case) and
// a state-independent truncated Laplace (toy bandit).

#include "fbrc/checkpoint.hpp"
#include "fbrc/dataset.hpp"
#include "fbrc/distributions.hpp"
#include "fbrc/mlp.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

namespace fbrc {

struct BCConfig {
  long steps = 20000;
  double base_lr = 1e-3;
  std::vector<double> lr_milestones{0.8, 0.9};  // fractions of `steps`
  double decay_factor = 10.0;
  std::size_t batch_size = 256;
  std::optional<double> target_entropy;  // defaults to -action_dim
  int components = 5;
  std::vector<int> hidden{64, 64};
  double initial_temperature = 1.0;
  int checkpoints = 10;  // loss / log-likelihood trace resolution

  /// Throws std::invalid_argument on a malformed schedule.
  void validate() const;
  /// Learning rate in effect at `step` (0-based).
  double lr_at(long step) const;
};

class BCDivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BehaviorFamily { kMixture, kLaplace };

class BehaviorModel {
 public:
  static BehaviorModel mixture(const MlpArch& arch, int components, int action_dim,
                               ParameterSet trunk);
  static BehaviorModel laplace(dist::LaplaceParams params);

  BehaviorFamily family() const { return family_; }
  int state_dim() const { return family_ == BehaviorFamily::kMixture ? arch_.input : 1; }
  int action_dim() const { return action_dim_; }
  int components() const { return components_; }
  const MlpArch& arch() const { return arch_; }
  const ParameterSet& trunk() const { return trunk_; }
  ParameterSet& trunk() { return trunk_; }
  const dist::LaplaceParams& laplace_params() const { return laplace_; }

  dist::MixtureParams mixture_params(const ad::Var& states) const;
  /// log mu(a|s), rows x 1. Differentiable in `actions`; differentiable in
  /// the trunk only while it has not been frozen.
  ad::Var log_prob(const ad::Var& states, const ad::Var& actions) const;
  ad::Matrix log_prob_values(const ad::Matrix& states, const ad::Matrix& actions) const;
  /// Highest-density action among the squashed component means (mixture) or
  /// the location (Laplace).
  ad::Matrix mode(const ad::Matrix& states) const;

  /// Replaces trainable leaves with constants.
  void freeze();

  std::vector<CheckpointSection> to_sections() const;
  static BehaviorModel from_sections(const std::vector<CheckpointSection>& sections);
  void save(const std::filesystem::path& path) const;
  static BehaviorModel load(const std::filesystem::path& path);

  // Training record.
  BCConfig config;
  std::vector<double> loss_trace;
  std::vector<double> loglik_trace;
  std::vector<double> lr_trace;
  std::vector<double> temperature_trace;

 private:
  BehaviorFamily family_ = BehaviorFamily::kMixture;
  MlpArch arch_;
  int components_ = 1;
  int action_dim_ = 1;
  ParameterSet trunk_;
  dist::LaplaceParams laplace_;
};

/// Maximum likelihood with SAC-style entropy regularization; the temperature
/// follows a dual update toward the target entropy.
BehaviorModel train_bc(const Dataset& data, const BCConfig& config, std::uint64_t seed);

/// Closed-form Laplace maximum likelihood (median, mean absolute deviation),
/// truncated to [-1, 1]. Requires a 1-D action space.
BehaviorModel fit_laplace(const Dataset& data);

/// Mean log mu(a|s) over every transition.
double bc_eval_loglik(const BehaviorModel& model, const Dataset& data);

}  // namespace fbrc
