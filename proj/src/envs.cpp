#include "fbrc/envs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

namespace fbrc::env {

using ad::Matrix;

double bandit_reward(double a) {
  if (!(a >= -1.0 && a <= 1.0)) throw std::domain_error("bandit action outside [-1, 1]");
  if (std::abs(a) <= kBanditSupport) return std::abs(a) - 0.125;
  return -std::numeric_limits<double>::infinity();
}

double bandit_reward_synthetic(double a) {
  const double r = bandit_reward(a);
  return std::isinf(r) ? kSyntheticOutOfSupportReward : r;
}

Dataset gen_bandit_dataset(std::uint64_t seed, int size) {
  if (size < 1) throw std::invalid_argument("bandit dataset size must be positive");
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-kBanditSupport, kBanditSupport);
  Dataset d;
  d.info.spec_id = "bandit";
  d.info.tier = Tier::kRandom;
  d.info.seed = seed;
  d.info.behavior = "uniform[-0.25,0.25]";
  d.info.state_dim = 1;
  d.info.action_dim = 1;
  const References refs = bandit_references();
  d.info.random_score = refs.random;
  d.info.expert_score = refs.expert;
  d.transitions.reserve(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) {
    const double a = u(rng);
    d.transitions.push_back({{0.0}, {a}, bandit_reward(a), {0.0}, true});
  }
  return d;
}

Matrix pointmass_reset(Eigen::Index n, Rng& rng) {
  Matrix s = Matrix::Zero(n, kPointMassStateDim);
  s.leftCols(2) = uniform(n, 2, -1.0, 1.0, rng);
  return s;
}

void pointmass_step(const PointMassSpec& spec, const Matrix& s, const Matrix& a, Matrix& s_next,
                    Eigen::VectorXd& reward) {
  if (s.cols() != kPointMassStateDim || a.cols() != kPointMassActionDim || s.rows() != a.rows()) {
    throw std::invalid_argument("pointmass_step: shape mismatch");
  }
  const Eigen::Index n = s.rows();
  s_next.resize(n, kPointMassStateDim);
  reward.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double cost = 0.0;
    for (int k = 0; k < 2; ++k) {
      const double ak = std::clamp(a(i, k), -1.0, 1.0);
      cost += ak * ak;
      double v = s(i, 2 + k) + spec.dt * (ak - spec.drag * s(i, 2 + k));
      double p = s(i, k) + spec.dt * v;
      if (p > 1.0 || p < -1.0) {
        p = std::clamp(p, -1.0, 1.0);
        v = 0.0;
      }
      s_next(i, k) = p;
      s_next(i, 2 + k) = v;
    }
    const double dx = s_next(i, 0) - spec.goal_x;
    const double dy = s_next(i, 1) - spec.goal_y;
    reward(i) = -std::sqrt(dx * dx + dy * dy) - spec.action_cost * cost;
  }
}

EnvId env_from_spec_id(const std::string& id) {
  if (id == "bandit") return EnvId::kBandit;
  if (id == "pointmass") return EnvId::kPointMass;
  throw std::invalid_argument("unknown environment '" + id + "'");
}

std::string spec_id(EnvId id) { return id == EnvId::kBandit ? "bandit" : "pointmass"; }

double normalize_score(double score, const References& refs) {
  if (refs.expert == refs.random) throw std::invalid_argument("degenerate reference scores");
  return 100.0 * (score - refs.random) / (refs.expert - refs.random);
}

References bandit_references() { return {0.0, 0.125}; }

References references_of(const DatasetInfo& info) {
  if (!info.random_score || !info.expert_score) {
    throw std::invalid_argument("dataset has no reference scores for normalization");
  }
  return {*info.random_score, *info.expert_score};
}

ActionFn random_policy(std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [rng](const Matrix& s) { return uniform(s.rows(), kPointMassActionDim, -1.0, 1.0, *rng); };
}

EvalResult evaluate_policy(const ActionFn& act, EnvId env, int episodes, std::uint64_t seed,
                           const References& refs, const PointMassSpec& spec) {
  if (episodes < 1) throw std::invalid_argument("evaluate_policy: episodes must be >= 1");
  EvalResult out;
  out.returns.assign(static_cast<std::size_t>(episodes), 0.0);
  if (env == EnvId::kBandit) {
    Matrix a = act(Matrix::Zero(episodes, 1));
    for (int e = 0; e < episodes; ++e) {
      double r = bandit_reward(a(e, 0));
      if (std::isinf(r)) {
        r = kSyntheticOutOfSupportReward;
        ++out.out_of_support;
      }
      out.returns[static_cast<std::size_t>(e)] = r;
    }
  } else {
    Rng rng(seed);
    Matrix s = pointmass_reset(episodes, rng);
    Matrix s_next;
    Eigen::VectorXd r;
    for (int t = 0; t < spec.horizon; ++t) {
      Matrix a = act(s);
      if (!a.allFinite()) throw std::domain_error("policy produced a non-finite action");
      pointmass_step(spec, s, a, s_next, r);
      for (int e = 0; e < episodes; ++e) out.returns[static_cast<std::size_t>(e)] += r(e);
      s.swap(s_next);
    }
  }
  double total = 0.0;
  for (double v : out.returns) total += v;
  out.mean_return = total / episodes;
  out.normalized_return = normalize_score(out.mean_return, refs);
  return out;
}

}  // namespace fbrc::env
