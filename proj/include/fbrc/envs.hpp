#pragma once

// Environments: a one-step continuous bandit and a 2-D point mass, plus
// batched policy evaluation and score normalization.

#include "fbrc/dataset.hpp"

#include <functional>

namespace fbrc::env {

// ---- toy bandit ----

inline constexpr double kBanditSupport = 0.25;
inline constexpr int kBanditDatasetSize = 1000;
// Stand-in for the unobservable reward outside the data support. Synthetic:
// only for plotting and evaluation bookkeeping.
inline constexpr double kSyntheticOutOfSupportReward = -1e6;

/// |a| - 0.125 on [-0.25, 0.25]; -infinity elsewhere in [-1, 1]. Throws
/// std::domain_error outside [-1, 1].
double bandit_reward(double a);
/// bandit_reward with -infinity replaced by kSyntheticOutOfSupportReward.
double bandit_reward_synthetic(double a);

/// `size` single-step transitions with actions uniform on [-0.25, 0.25], a
/// fixed dummy state 0 and done = true.
Dataset gen_bandit_dataset(std::uint64_t seed, int size = kBanditDatasetSize);

// ---- point mass ----

struct PointMassSpec {
  double dt = 0.1;
  double drag = 1.0;
  double goal_x = 0.5;
  double goal_y = 0.5;
  double action_cost = 0.1;
  int horizon = 200;
  double gamma = 0.99;
};

inline constexpr int kPointMassStateDim = 4;   // x, y, vx, vy
inline constexpr int kPointMassActionDim = 2;  // acceleration, clipped to [-1, 1]

/// Start states: position uniform in [-1, 1]^2, zero velocity.
ad::Matrix pointmass_reset(Eigen::Index n, Rng& rng);

/// One step for every row. Velocity follows v += dt * (a - drag * v), the
/// position integrates it and is clipped to the walls [-1, 1] (velocity on a
/// clipped axis is zeroed). Reward = -||p' - goal|| - action_cost * ||a||^2.
void pointmass_step(const PointMassSpec& spec, const ad::Matrix& s, const ad::Matrix& a,
                    ad::Matrix& s_next, Eigen::VectorXd& reward);

// ---- evaluation ----

enum class EnvId { kBandit, kPointMass };
EnvId env_from_spec_id(const std::string& spec_id);
std::string spec_id(EnvId id);

/// Maps a batch of states to actions.
using ActionFn = std::function<ad::Matrix(const ad::Matrix& states)>;

struct References {
  double random = 0.0;
  double expert = 0.0;
};

/// 100 * (score - random) / (expert - random).
double normalize_score(double score, const References& refs);

struct EvalResult {
  double mean_return = 0.0;
  double normalized_return = 0.0;
  std::vector<double> returns;
  // Bandit only: episodes whose action fell outside the data support and got
  // the synthetic reward.
  int out_of_support = 0;
};

inline constexpr int kDefaultEvalEpisodes = 10;

/// Runs `episodes` episodes in lockstep. Deterministic given `seed`.
EvalResult evaluate_policy(const ActionFn& act, EnvId env, int episodes, std::uint64_t seed,
                           const References& refs, const PointMassSpec& spec = {});

/// Bandit references: the uniform data-generating policy (0) and the best
/// in-support action (0.125).
References bandit_references();

/// Uniform-random actions on the point mass.
ActionFn random_policy(std::uint64_t seed);

/// References stored with a dataset; throws when missing.
References references_of(const DatasetInfo& info);

}  // namespace fbrc::env
