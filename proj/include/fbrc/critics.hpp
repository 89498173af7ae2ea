#pragma once

// Twin critics. In offset mode each critic is Q(s,a) = O(s,a) + log mu(a|s)
// with a frozen behavior density mu; otherwise Q is a plain network. The
// critic loss is the clipped-double-Q TD error plus an optional penalty on
// the squared action-gradient of the learned network.

#include "fbrc/adam.hpp"
#include "fbrc/behavior.hpp"
#include "fbrc/dataset.hpp"
#include "fbrc/policy.hpp"

#include <functional>
#include <memory>

namespace fbrc {

enum class PenaltySource { kPolicy, kDataset, kUniform };

std::string to_string(PenaltySource p);
PenaltySource penalty_source_from_string(const std::string& s);

struct CriticConfig {
  double lambda = 0.1;
  double gamma = 0.99;
  double tau = 0.005;
  double reward_bonus = 0.0;
  double lr = 3e-4;
  bool use_offset = true;
  PenaltySource penalty_source = PenaltySource::kPolicy;
  // Subtract alpha * log pi(a'|s') inside targets (SAC soft targets).
  bool soft_targets = false;
  int penalty_samples = 1;
  bool penalty_sum_twins = true;  // false: average over the twins
  // With lambda == 0 the penalty is still measured for the metrics unless
  // this is off (online SAC skips it).
  bool penalty_diagnostics = true;
  std::vector<int> hidden{64, 64};

  void validate() const;
};

enum class QSelect { kOnlineMin, kTargetMin, kOnline1, kOnline2 };

class CriticPair {
 public:
  CriticPair(int state_dim, int action_dim, const CriticConfig& config,
             std::shared_ptr<const BehaviorModel> behavior, Rng& rng);

  const CriticConfig& config() const { return config_; }
  CriticConfig& config() { return config_; }
  const MlpArch& arch() const { return arch_; }
  const BehaviorModel* behavior() const { return behavior_.get(); }
  std::shared_ptr<const BehaviorModel> behavior_ptr() const { return behavior_; }

  ParameterSet& online(int i) { return online_[i]; }
  const ParameterSet& online(int i) const { return online_[i]; }
  ParameterSet& target(int i) { return target_[i]; }
  const ParameterSet& target(int i) const { return target_[i]; }

  /// Raw network output: the offset O(s,a) in offset mode, Q(s,a) otherwise.
  ad::Var network(int which, const ad::Var& states, const ad::Var& actions,
                  bool use_target = false) const;
  /// log mu(a|s) (zero when the offset representation is off).
  ad::Var log_behavior(const ad::Var& states, const ad::Var& actions) const;
  /// Composed critic value; `log_mu` may carry a precomputed log mu(a|s).
  ad::Var q_value(const ad::Var& states, const ad::Var& actions, QSelect which,
                  const ad::Var* log_mu = nullptr) const;

  void polyak_update();

  Adam& optimizer(int i) { return optimizers_[i]; }

  std::vector<CheckpointSection> to_sections() const;
  void load_sections(const std::vector<CheckpointSection>& sections);

 private:
  CriticConfig config_;
  MlpArch arch_;
  std::shared_ptr<const BehaviorModel> behavior_;
  ParameterSet online_[2];
  ParameterSet target_[2];
  Adam optimizers_[2];
};

/// Mean over the batch and over both online critics of the squared error to
/// r + bonus + gamma * (1 - done) * (min target Q(s', a') [- alpha log pi]),
/// a' ~ pi(.|s'). The target carries no gradient. `log_mu` optionally holds
/// log mu(a|s) for the batch.
ad::Var td_loss(const CriticPair& critic, const Batch& batch, const PolicyModel& policy, Rng& rng,
                const ad::Matrix* log_mu = nullptr);

/// Actions at which the penalty is evaluated, one row per state and sample.
ad::Matrix penalty_actions(const CriticConfig& config, const Batch& batch,
                           const PolicyModel& policy, Rng& rng);

/// Mean over rows of the (summed or averaged over twins) squared L2 norm of
/// the action-gradient of the learned networks. Re-differentiable in theta.
/// `states` and `actions` must have equal row counts.
ad::Var gradient_penalty(const CriticPair& critic, const ad::Matrix& states,
                         const ad::Matrix& actions, bool create_graph = true);

struct CriticDiagnostics {
  double td = 0.0;
  double penalty = 0.0;  // unweighted gradient penalty
  double extra = 0.0;    // e.g. the CQL term, already weighted
  double total = 0.0;    // td + lambda * penalty + extra
  double mean_q = 0.0;
};

/// Additional critic loss term (already weighted), e.g. a CQL penalty.
using ExtraCriticTerm =
    std::function<ad::Var(const CriticPair&, const Batch&, const PolicyModel&, Rng&)>;

class TrainingCollapse : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One Adam step on td + lambda * penalty (+ extra) followed by the Polyak
/// target update. Throws TrainingCollapse on NaN/inf anywhere in the step.
CriticDiagnostics critic_update(CriticPair& critic, const Batch& batch, const PolicyModel& policy,
                                Rng& rng, const ad::Matrix* log_mu = nullptr,
                                const ExtraCriticTerm& extra = {});

}  // namespace fbrc
