#include "fbrc/critics.hpp"

#include "fbrc/binary_io.hpp"

#include <cmath>

namespace fbrc {

using ad::Matrix;
using ad::Var;

std::string to_string(PenaltySource p) {
  switch (p) {
    case PenaltySource::kPolicy: return "policy";
    case PenaltySource::kDataset: return "data";
    case PenaltySource::kUniform: return "uniform";
  }
  return "policy";
}

PenaltySource penalty_source_from_string(const std::string& s) {
  if (s == "policy") return PenaltySource::kPolicy;
  if (s == "data" || s == "dataset") return PenaltySource::kDataset;
  if (s == "uniform") return PenaltySource::kUniform;
  throw std::invalid_argument("unknown penalty source '" + s + "'");
}

void CriticConfig::validate() const {
  if (!(lambda >= 0)) throw std::invalid_argument("CriticConfig: lambda must be >= 0");
  if (!(gamma >= 0 && gamma < 1)) throw std::invalid_argument("CriticConfig: gamma in [0, 1)");
  if (!(tau > 0 && tau <= 1)) throw std::invalid_argument("CriticConfig: tau in (0, 1]");
  if (!std::isfinite(reward_bonus)) throw std::invalid_argument("CriticConfig: reward_bonus");
  if (penalty_samples < 1) throw std::invalid_argument("CriticConfig: penalty_samples >= 1");
}

CriticPair::CriticPair(int state_dim, int action_dim, const CriticConfig& config,
                       std::shared_ptr<const BehaviorModel> behavior, Rng& rng)
    : config_(config), behavior_(std::move(behavior)) {
  config_.validate();
  if (config_.use_offset) {
    if (!behavior_) throw std::invalid_argument("offset critic requires a behavior model");
    if (behavior_->action_dim() != action_dim) {
      throw std::invalid_argument("behavior model action dim does not match critic");
    }
  }
  arch_.input = state_dim + action_dim;
  arch_.hidden = config_.hidden;
  arch_.output = 1;
  arch_.activation = Activation::kRelu;
  arch_.zero_final = true;
  for (int i = 0; i < 2; ++i) {
    online_[i] = init_mlp(arch_, rng);
    target_[i] = online_[i].clone();
    optimizers_[i] = Adam({.lr = config_.lr});
  }
}

Var CriticPair::network(int which, const Var& states, const Var& actions, bool use_target) const {
  const ParameterSet& p = use_target ? target_[which] : online_[which];
  return mlp_apply(p, ad::concat_cols({states, actions}), arch_);
}

Var CriticPair::log_behavior(const Var& states, const Var& actions) const {
  if (!config_.use_offset) return ad::constant(Matrix::Zero(actions.rows(), 1));
  return behavior_->log_prob(states, actions);
}

Var CriticPair::q_value(const Var& states, const Var& actions, QSelect which,
                        const Var* log_mu) const {
  Var net;
  switch (which) {
    case QSelect::kOnline1: net = network(0, states, actions); break;
    case QSelect::kOnline2: net = network(1, states, actions); break;
    case QSelect::kOnlineMin:
      net = ad::minimum(network(0, states, actions), network(1, states, actions));
      break;
    case QSelect::kTargetMin:
      net = ad::minimum(network(0, states, actions, true), network(1, states, actions, true));
      break;
  }
  if (!config_.use_offset) return net;
  return ad::add(net, log_mu ? *log_mu : log_behavior(states, actions));
}

void CriticPair::polyak_update() {
  for (int i = 0; i < 2; ++i) target_[i].polyak_update(online_[i], config_.tau);
}

std::vector<CheckpointSection> CriticPair::to_sections() const {
  CheckpointSection cfg;
  cfg.tag = "CRCF";
  cfg.values = {config_.use_offset ? 1.0 : 0.0};
  return {network_section("OFF1", arch_, online_[0]), network_section("OFF2", arch_, online_[1]),
          network_section("TGT1", arch_, target_[0]), network_section("TGT2", arch_, target_[1]),
          cfg};
}

void CriticPair::load_sections(const std::vector<CheckpointSection>& sections) {
  const char* tags[4] = {"OFF1", "OFF2", "TGT1", "TGT2"};
  ParameterSet* sets[4] = {&online_[0], &online_[1], &target_[0], &target_[1]};
  for (int i = 0; i < 4; ++i) {
    const auto& s = find_section(sections, tags[i]);
    MlpArch a = arch_of(s);
    if (a.layer_sizes() != arch_.layer_sizes()) {
      throw io::FormatError(std::string("critic section ") + tags[i] + " has a different shape");
    }
    sets[i]->assign(s.values);
  }
}

Var td_loss(const CriticPair& critic, const Batch& batch, const PolicyModel& policy, Rng& rng,
            const Matrix* log_mu) {
  if (batch.s.rows() == 0) throw std::invalid_argument("td_loss: empty batch");
  const auto& cfg = critic.config();
  Matrix y;
  {
    ad::NoGradGuard no_grad;
    auto [a_next, logp_next] = policy.sample_with_log_prob(batch.s_next, rng);
    Matrix next =
        critic.q_value(ad::constant(batch.s_next), ad::constant(a_next), QSelect::kTargetMin)
            .value();
    if (cfg.soft_targets) next -= policy.temperature() * logp_next;
    y = (batch.r.array() + cfg.reward_bonus +
         cfg.gamma * (1.0 - batch.done.array()) * next.array())
            .matrix();
    if (!y.allFinite()) throw ad::NonFiniteError("td_target");
  }
  Var s = ad::constant(batch.s);
  Var a = ad::constant(batch.a);
  Var lm = log_mu ? ad::constant(*log_mu) : critic.log_behavior(s, a);
  Var target = ad::constant(y);
  Var q1 = critic.q_value(s, a, QSelect::kOnline1, &lm);
  Var q2 = critic.q_value(s, a, QSelect::kOnline2, &lm);
  return ad::scale(ad::add(ad::mean(ad::square(ad::sub(q1, target))),
                           ad::mean(ad::square(ad::sub(q2, target)))),
                   0.5);
}

namespace {

Matrix repeat_rows(const Matrix& m, int times) {
  if (times == 1) return m;
  return m.replicate(times, 1);
}

}  // namespace

Matrix penalty_actions(const CriticConfig& config, const Batch& batch, const PolicyModel& policy,
                       Rng& rng) {
  const int n = config.penalty_samples;
  switch (config.penalty_source) {
    case PenaltySource::kPolicy: return policy.sample_actions(repeat_rows(batch.s, n), rng);
    case PenaltySource::kDataset: return repeat_rows(batch.a, n);
    case PenaltySource::kUniform:
      return uniform(batch.s.rows() * n, batch.a.cols(), -1.0, 1.0, rng);
  }
  return batch.a;
}

Var gradient_penalty(const CriticPair& critic, const Matrix& states, const Matrix& actions,
                     bool create_graph) {
  if (states.rows() != actions.rows()) {
    throw ad::ShapeError("gradient_penalty: states and actions row mismatch");
  }
  Var s = ad::constant(states);
  Var a = ad::input(actions, true);
  Var total;
  for (int k = 0; k < 2; ++k) {
    Var out = critic.network(k, s, a);
    Var g = ad::grad(ad::sum(out), a, create_graph);
    Var pen = ad::mean(ad::sum_cols(ad::square(g)));
    total = total.defined() ? ad::add(total, pen) : pen;
  }
  if (!critic.config().penalty_sum_twins) total = ad::scale(total, 0.5);
  return total;
}

CriticDiagnostics critic_update(CriticPair& critic, const Batch& batch, const PolicyModel& policy,
                                Rng& rng, const Matrix* log_mu, const ExtraCriticTerm& extra) {
  const auto& cfg = critic.config();
  CriticDiagnostics diag;
  try {
    Var td = td_loss(critic, batch, policy, rng, log_mu);
    Var loss = td;
    if (cfg.lambda > 0.0 || cfg.penalty_diagnostics) {
      Matrix pa = penalty_actions(cfg, batch, policy, rng);
      Matrix ps = repeat_rows(batch.s, cfg.penalty_samples);
      if (cfg.lambda > 0.0) {
        Var gp = gradient_penalty(critic, ps, pa, true);
        diag.penalty = gp.item();
        loss = ad::add(loss, ad::scale(gp, cfg.lambda));
      } else {
        diag.penalty = gradient_penalty(critic, ps, pa, false).item();
      }
    }
    if (extra) {
      Var e = extra(critic, batch, policy, rng);
      diag.extra = e.item();
      loss = ad::add(loss, e);
    }
    diag.td = td.item();
    diag.total = loss.item();

    std::vector<Var> wrt = critic.online(0).vars();
    const std::size_t n0 = wrt.size();
    wrt.insert(wrt.end(), critic.online(1).vars().begin(), critic.online(1).vars().end());
    auto grads = ad::grad(loss, wrt, false);
    for (int k = 0; k < 2; ++k) {
      std::vector<Matrix> g;
      const std::size_t begin = k == 0 ? 0 : n0;
      const std::size_t end = k == 0 ? n0 : grads.size();
      for (std::size_t i = begin; i < end; ++i) g.push_back(grads[i].value());
      critic.optimizer(k).step(critic.online(k), g);
    }
    critic.polyak_update();
    {
      ad::NoGradGuard no_grad;
      Var s = ad::constant(batch.s);
      Var a = ad::constant(batch.a);
      Var lm = log_mu ? ad::constant(*log_mu) : critic.log_behavior(s, a);
      diag.mean_q = critic.q_value(s, a, QSelect::kOnline1, &lm).value().mean();
    }
  } catch (const ad::NonFiniteError& e) {
    throw TrainingCollapse(std::string("critic update collapsed: ") + e.what());
  } catch (const std::runtime_error& e) {
    if (dynamic_cast<const TrainingCollapse*>(&e)) throw;
    if (std::string(e.what()).find("non-finite") != std::string::npos) {
      throw TrainingCollapse(std::string("critic update collapsed: ") + e.what());
    }
    throw;
  }
  return diag;
}

}  // namespace fbrc
