#include "fbrc/online_sac.hpp"

#include <cmath>

namespace fbrc {

using ad::Matrix;

namespace {

Dataset replay_view(const std::vector<Transition>& replay) {
  Dataset d;
  d.info.state_dim = env::kPointMassStateDim;
  d.info.action_dim = env::kPointMassActionDim;
  d.transitions = replay;
  return d;
}

env::ActionFn deterministic(const PolicyModel& p) {
  return [&p](const Matrix& s) { return p.act_deterministic(s); };
}

env::ActionFn stochastic(const PolicyModel& p, std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [&p, rng](const Matrix& s) { return p.sample_actions(s, *rng); };
}

Transition make_transition(const Matrix& s, const Matrix& a, double r, const Matrix& s2,
                           bool done, Eigen::Index row) {
  Transition t;
  t.s.resize(static_cast<std::size_t>(s.cols()));
  for (Eigen::Index j = 0; j < s.cols(); ++j) t.s[static_cast<std::size_t>(j)] = s(row, j);
  t.a.resize(static_cast<std::size_t>(a.cols()));
  for (Eigen::Index j = 0; j < a.cols(); ++j) t.a[static_cast<std::size_t>(j)] = a(row, j);
  t.s_next.resize(static_cast<std::size_t>(s2.cols()));
  for (Eigen::Index j = 0; j < s2.cols(); ++j) t.s_next[static_cast<std::size_t>(j)] = s2(row, j);
  t.r = r;
  t.done = done;
  return t;
}

constexpr std::uint64_t kEvalStream = 11;
constexpr std::uint64_t kReferenceStream = 12;

}  // namespace

ExpertRun train_pointmass_expert(const OnlineSacConfig& config, std::uint64_t seed) {
  if (config.steps < 1 || config.checkpoint_every < 1) {
    throw std::invalid_argument("OnlineSacConfig: steps and checkpoint_every must be positive");
  }
  Rng rng(derive_seed(seed, 0));
  Rng env_rng(derive_seed(seed, 1));
  const std::uint64_t eval_seed = derive_seed(seed, kEvalStream);
  const auto& spec = config.env;

  PolicyConfig pc;
  pc.hidden = config.hidden;
  PolicyModel policy(env::kPointMassStateDim, env::kPointMassActionDim, pc, rng);
  CriticConfig cc;
  cc.lambda = 0.0;
  cc.use_offset = false;
  cc.soft_targets = true;
  cc.gamma = spec.gamma;
  cc.hidden = config.hidden;
  cc.penalty_diagnostics = false;
  CriticPair critic(env::kPointMassStateDim, env::kPointMassActionDim, cc, nullptr, rng);
  ActorOptimizers actor_opt(pc);

  ExpertRun run;
  const double random_return =
      env::evaluate_policy(env::random_policy(derive_seed(seed, 2)), env::EnvId::kPointMass,
                           config.reference_episodes, derive_seed(seed, kReferenceStream),
                           {0.0, 1.0}, spec)
          .mean_return;

  std::vector<std::vector<CheckpointSection>> snapshots;
  Dataset replay = replay_view({});
  replay.transitions.reserve(static_cast<std::size_t>(config.steps));
  Matrix s = env::pointmass_reset(1, env_rng);
  Matrix s2;
  Eigen::VectorXd r;
  int t_episode = 0;
  for (long step = 0; step < config.steps; ++step) {
    Matrix a = step < config.warmup ? uniform(1, env::kPointMassActionDim, -1.0, 1.0, rng)
                                    : policy.sample_actions(s, rng);
    env::pointmass_step(spec, s, a, s2, r);
    const bool done = ++t_episode == spec.horizon;
    replay.transitions.push_back(make_transition(s, a, r(0), s2, done, 0));
    if (done) {
      s = env::pointmass_reset(1, env_rng);
      t_episode = 0;
    } else {
      s = s2;
    }

    if (step >= config.warmup && replay.size() >= config.batch_size) {
      Batch batch = sample_batch(replay, config.batch_size, rng);
      critic_update(critic, batch, policy, rng);
      actor_update(policy, critic, batch.s, ActorKind::kSac, actor_opt, rng);
    }
    if ((step + 1) % config.checkpoint_every == 0) {
      const double ret =
          env::evaluate_policy(deterministic(policy), env::EnvId::kPointMass, config.eval_episodes,
                               eval_seed, {0.0, 1.0}, spec)
              .mean_return;
      run.checkpoints.push_back({step + 1, ret});
      snapshots.push_back(policy.to_sections());
    }
  }
  if (run.checkpoints.empty()) throw ExpertTrainingError("no checkpoints were taken");

  std::size_t best = 0;
  for (std::size_t i = 1; i < run.checkpoints.size(); ++i) {
    if (run.checkpoints[i].mean_return > run.checkpoints[best].mean_return) best = i;
  }
  run.expert = PolicyModel::from_sections(snapshots[best]);
  run.expert_step = run.checkpoints[best].step;
  const double expert_return =
      env::evaluate_policy(deterministic(run.expert), env::EnvId::kPointMass,
                           config.reference_episodes, derive_seed(seed, kReferenceStream),
                           {0.0, 1.0}, spec)
          .mean_return;
  run.refs = {random_return, expert_return};
  const double required = random_return * (1.0 - config.expert_threshold);
  if (!(expert_return > required)) {
    throw ExpertTrainingError("online SAC expert reached return " + std::to_string(expert_return) +
                              ", below the required " + std::to_string(required));
  }

  const double medium_target = 100.0 * config.medium_fraction;
  for (std::size_t i = 0; i <= best; ++i) {
    if (env::normalize_score(run.checkpoints[i].mean_return, run.refs) >= medium_target) {
      run.medium = PolicyModel::from_sections(snapshots[i]);
      run.medium_step = run.checkpoints[i].step;
      run.medium_return = run.checkpoints[i].mean_return;
      break;
    }
  }
  if (run.medium_step == 0) throw ExpertTrainingError("no checkpoint reached the medium level");
  run.replay = std::move(replay.transitions);
  return run;
}

std::vector<Transition> rollout_transitions(const env::ActionFn& act, std::size_t size,
                                            std::uint64_t seed, const env::PointMassSpec& spec) {
  const auto horizon = static_cast<std::size_t>(spec.horizon);
  const auto episodes = static_cast<Eigen::Index>((size + horizon - 1) / horizon);
  Rng rng(seed);
  Matrix s = env::pointmass_reset(episodes, rng);
  Matrix s2;
  Eigen::VectorXd r;
  // Collected time-major, then reordered episode-major.
  std::vector<std::vector<Transition>> per_episode(static_cast<std::size_t>(episodes));
  for (int t = 0; t < spec.horizon; ++t) {
    Matrix a = act(s);
    env::pointmass_step(spec, s, a, s2, r);
    for (Eigen::Index e = 0; e < episodes; ++e) {
      per_episode[static_cast<std::size_t>(e)].push_back(
          make_transition(s, a, r(e), s2, t + 1 == spec.horizon, e));
    }
    s.swap(s2);
  }
  std::vector<Transition> out;
  out.reserve(size);
  for (auto& ep : per_episode) {
    for (auto& t : ep) {
      if (out.size() == size) break;
      out.push_back(std::move(t));
    }
  }
  return out;
}

const Dataset& PointMassSuite::tier(Tier t) const {
  switch (t) {
    case Tier::kRandom: return random;
    case Tier::kMedium: return medium;
    case Tier::kExpert: return expert;
    case Tier::kMixed: return mixed;
  }
  return random;
}

PointMassSuite gen_pointmass_suite(std::size_t size, std::uint64_t seed,
                                   const OnlineSacConfig& config) {
  if (size < 1) throw std::invalid_argument("dataset size must be positive");
  return gen_pointmass_suite(train_pointmass_expert(config, seed), size, seed, config.env);
}

PointMassSuite gen_pointmass_suite(ExpertRun run, std::size_t size, std::uint64_t seed,
                                   const env::PointMassSpec& spec) {
  if (size < 1) throw std::invalid_argument("dataset size must be positive");
  auto make = [&](Tier tier, std::string behavior, std::vector<Transition> tr) {
    Dataset d;
    d.info.spec_id = "pointmass";
    d.info.tier = tier;
    d.info.seed = seed;
    d.info.behavior = std::move(behavior);
    d.info.state_dim = env::kPointMassStateDim;
    d.info.action_dim = env::kPointMassActionDim;
    d.info.random_score = run.refs.random;
    d.info.expert_score = run.refs.expert;
    d.transitions = std::move(tr);
    return d;
  };
  PointMassSuite suite;
  suite.random = make(Tier::kRandom, "uniform random actions",
                      rollout_transitions(env::random_policy(derive_seed(seed, 20)), size,
                                          derive_seed(seed, 21), spec));
  suite.medium =
      make(Tier::kMedium, "online SAC checkpoint at step " + std::to_string(run.medium_step),
           rollout_transitions(stochastic(run.medium, derive_seed(seed, 22)), size,
                               derive_seed(seed, 23), spec));
  suite.expert =
      make(Tier::kExpert, "online SAC checkpoint at step " + std::to_string(run.expert_step),
           rollout_transitions(stochastic(run.expert, derive_seed(seed, 24)), size,
                               derive_seed(seed, 25), spec));
  std::vector<Transition> replay = std::move(run.replay);
  if (replay.size() > size) replay.resize(size);
  suite.mixed = make(Tier::kMixed, "online SAC replay buffer", std::move(replay));
  return suite;
}

Dataset gen_pointmass_dataset(Tier tier, std::size_t size, std::uint64_t seed,
                              const OnlineSacConfig& config) {
  // Even the random tier needs the expert run for its reference scores.
  PointMassSuite suite = gen_pointmass_suite(size, seed, config);
  return suite.tier(tier);
}

}  // namespace fbrc
