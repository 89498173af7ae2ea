#pragma once

// Densities over the action box (-1, 1)^d: tanh-squashed diagonal Gaussians
// (policies), tanh-squashed Gaussian mixtures (behavior models) and a 1-D
// Laplace (toy bandit behavior model). Log-densities are differentiable with
// respect to the action so their scores can enter training objectives.

#include "fbrc/autodiff.hpp"
#include "fbrc/random.hpp"

namespace fbrc::dist {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
// Actions are clamped to [-1 + eps, 1 - eps] before the inverse tanh.
inline constexpr double kBoundaryEps = 1e-6;

/// Maps an unconstrained head output smoothly into [lo, hi].
ad::Var bound_log_std(const ad::Var& raw, double lo = kLogStdMin, double hi = kLogStdMax);

struct SquashedGaussianParams {
  ad::Var mean;     // B x d, pre-squash
  ad::Var log_std;  // B x d, already inside [kLogStdMin, kLogStdMax]
};

struct MixtureParams {
  ad::Var logits;    // B x K
  ad::Var means;     // B x (K*d), component k occupies columns [k*d, (k+1)*d)
  ad::Var log_stds;  // B x (K*d)
  int components = 1;
  int action_dim = 1;
};

struct LaplaceParams {
  double location = 0.0;
  double scale = 1.0;
  // Renormalized to the interval [-1, 1] when set.
  bool truncated = false;
};

struct SquashedSample {
  ad::Var action;    // tanh(pre_squash)
  ad::Var log_prob;  // B x 1, computed from the pre-squash value (no atanh round trip)
};

/// action = tanh(mean + exp(log_std) * noise); differentiable in the params.
ad::Var sample_reparameterized(const SquashedGaussianParams& params, const ad::Matrix& noise);
SquashedSample sample_with_log_prob(const SquashedGaussianParams& params,
                                    const ad::Matrix& noise);

ad::Var log_prob(const SquashedGaussianParams& params, const ad::Var& action);
ad::Var log_prob(const MixtureParams& params, const ad::Var& action);
ad::Var log_prob(const LaplaceParams& params, const ad::Var& action);

/// Score d/da log p(a), one row per action. Built with create_graph so it can
/// be differentiated again.
template <class Params>
ad::Var log_prob_action_grad(const Params& params, const ad::Matrix& action) {
  ad::Var a = ad::input(action, true);
  return ad::grad(ad::sum(log_prob(params, a)), a, true);
}

/// Draws one action per row. The component index is sampled (not
/// differentiable); the within-component draw is reparameterized.
ad::Var sample_mixture(const MixtureParams& params, Rng& rng);

/// Monte-Carlo entropy -mean(log p(sample)) over `n_samples` draws per row,
/// averaged over rows.
double entropy_estimate(const SquashedGaussianParams& params, int n_samples, Rng& rng);

/// Normalizing mass of a Laplace on [-1, 1].
double laplace_mass_on_box(double location, double scale);

}  // namespace fbrc::dist
