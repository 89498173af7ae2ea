#pragma once

// Policy improvement steps. All losses draw a_phi by reparameterized sampling
// so gradients flow through the critic (and log mu) into the policy; only the
// policy trunk is ever updated by them.

#include "fbrc/critics.hpp"

namespace fbrc {

enum class ActorKind { kFisherBrc, kSac, kBrac };

struct ActorLoss {
  ad::Var loss;            // scalar, differentiable in the policy trunk
  ad::Matrix log_pi;       // log pi(a_phi|s), B x 1, for the temperature step
};

/// -mean[min-twin(O + log mu)(s, a_phi) - alpha * log pi(a_phi|s)].
ActorLoss actor_loss_fbrc(const PolicyModel& policy, const CriticPair& critic,
                          const ad::Matrix& states, Rng& rng);
/// -mean[min Q(s, a_phi) - alpha * log pi(a_phi|s)] on a plain critic.
ActorLoss actor_loss_sac(const PolicyModel& policy, const CriticPair& critic,
                         const ad::Matrix& states, Rng& rng);
/// -mean[Q(s, a_phi) - alpha_kl * (log pi(a_phi|s) - log mu(a_phi|s))], one
/// sample KL estimate. alpha_kl == 0 gives -mean[Q].
ActorLoss actor_loss_brac(const PolicyModel& policy, const CriticPair& critic,
                          const BehaviorModel& behavior, const ad::Matrix& states,
                          double alpha_kl, Rng& rng);

/// d/d(log alpha) of alpha * (entropy - target), entropy = -mean(log_pi).
double temperature_gradient(const PolicyModel& policy, const ad::Matrix& log_pi);

struct ActorOptimizers {
  Adam policy;
  Adam temperature;
  explicit ActorOptimizers(const PolicyConfig& c)
      : policy({.lr = c.lr}), temperature({.lr = c.temperature_lr}) {}
};

/// Adam step on log alpha; no-op when the policy has a fixed temperature.
void temperature_update(PolicyModel& policy, const ad::Matrix& log_pi, Adam& optimizer);

struct ActorDiagnostics {
  double loss = 0.0;
  double entropy = 0.0;      // -mean log pi of the sampled actions
  double temperature = 0.0;  // after the update
};

/// One policy step followed by one temperature step. Throws TrainingCollapse
/// on non-finite values.
ActorDiagnostics actor_update(PolicyModel& policy, const CriticPair& critic,
                              const ad::Matrix& states, ActorKind kind, ActorOptimizers& opt,
                              Rng& rng, double alpha_kl = 0.0);

}  // namespace fbrc
