#include "fbrc/actors.hpp"

#include <cmath>

namespace fbrc {

using ad::Matrix;
using ad::Var;

namespace {

struct Draw {
  Var states;
  Var action;
  Var log_pi;
};

Draw draw(const PolicyModel& policy, const Matrix& states, Rng& rng) {
  Var s = ad::constant(states);
  auto sample = dist::sample_with_log_prob(policy.distribution(s),
                                           standard_normal(states.rows(), policy.action_dim(), rng));
  return {s, sample.action, sample.log_prob};
}

ActorLoss soft_actor(const PolicyModel& policy, const CriticPair& critic, const Matrix& states,
                     Rng& rng) {
  Draw d = draw(policy, states, rng);
  Var q = critic.q_value(d.states, d.action, QSelect::kOnlineMin);
  Var objective = ad::sub(q, ad::scale(d.log_pi, policy.temperature()));
  return {ad::neg(ad::mean(objective)), d.log_pi.value()};
}

}  // namespace

ActorLoss actor_loss_fbrc(const PolicyModel& policy, const CriticPair& critic,
                          const Matrix& states, Rng& rng) {
  if (!critic.config().use_offset) {
    throw std::invalid_argument("actor_loss_fbrc requires an offset critic");
  }
  return soft_actor(policy, critic, states, rng);
}

ActorLoss actor_loss_sac(const PolicyModel& policy, const CriticPair& critic,
                         const Matrix& states, Rng& rng) {
  return soft_actor(policy, critic, states, rng);
}

ActorLoss actor_loss_brac(const PolicyModel& policy, const CriticPair& critic,
                          const BehaviorModel& behavior, const Matrix& states, double alpha_kl,
                          Rng& rng) {
  Draw d = draw(policy, states, rng);
  Var q = critic.q_value(d.states, d.action, QSelect::kOnlineMin);
  if (alpha_kl == 0.0) return {ad::neg(ad::mean(q)), d.log_pi.value()};
  Var kl = ad::sub(d.log_pi, behavior.log_prob(d.states, d.action));
  return {ad::neg(ad::mean(ad::sub(q, ad::scale(kl, alpha_kl)))), d.log_pi.value()};
}

double temperature_gradient(const PolicyModel& policy, const Matrix& log_pi) {
  const double entropy = -log_pi.mean();
  return policy.temperature() * (entropy - policy.target_entropy());
}

void temperature_update(PolicyModel& policy, const Matrix& log_pi, Adam& optimizer) {
  if (policy.config().fixed_temperature) return;
  optimizer.step(policy.log_temperature(),
                 {Matrix::Constant(1, 1, temperature_gradient(policy, log_pi))});
}

ActorDiagnostics actor_update(PolicyModel& policy, const CriticPair& critic,
                              const Matrix& states, ActorKind kind, ActorOptimizers& opt,
                              Rng& rng, double alpha_kl) {
  ActorDiagnostics diag;
  try {
    ActorLoss l;
    switch (kind) {
      case ActorKind::kFisherBrc: l = actor_loss_fbrc(policy, critic, states, rng); break;
      case ActorKind::kSac: l = actor_loss_sac(policy, critic, states, rng); break;
      case ActorKind::kBrac:
        if (!critic.behavior()) throw std::invalid_argument("BRAC actor needs a behavior model");
        l = actor_loss_brac(policy, critic, *critic.behavior(), states, alpha_kl, rng);
        break;
    }
    opt.policy.step(policy.trunk(), gradient_values(l.loss, policy.trunk()));
    temperature_update(policy, l.log_pi, opt.temperature);
    diag.loss = l.loss.item();
    diag.entropy = -l.log_pi.mean();
    diag.temperature = policy.temperature();
  } catch (const ad::NonFiniteError& e) {
    throw TrainingCollapse(std::string("actor update collapsed: ") + e.what());
  } catch (const std::runtime_error& e) {
    if (std::string(e.what()).find("non-finite") != std::string::npos) {
      throw TrainingCollapse(std::string("actor update collapsed: ") + e.what());
    }
    throw;
  }
  return diag;
}

}  // namespace fbrc
