#include "fbrc/distributions.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fbrc::dist {

using ad::Matrix;
using ad::Var;

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

// log(1 - tanh(u)^2) = 2 * (log 2 - u - softplus(-2u)), stable for large |u|.
Var log_one_minus_tanh_sq(const Var& u) {
  return ad::scale(ad::add_scalar(ad::neg(ad::add(u, ad::softplus(ad::scale(u, -2.0)))),
                                  std::log(2.0)),
                   2.0);
}

Var clamp_action(const Var& a) { return ad::clamp(a, -1.0 + kBoundaryEps, 1.0 - kBoundaryEps); }

// Jacobian correction: sum_j log(1 - a_j^2).
Var squash_correction(const Var& a_clamped) {
  return ad::sum_cols(ad::log(ad::sub(ad::constant(1.0), ad::square(a_clamped))));
}

Matrix tile_matrix(int d, int k) {
  Matrix t = Matrix::Zero(d, k * d);
  for (int c = 0; c < k; ++c)
    for (int j = 0; j < d; ++j) t(j, c * d + j) = 1.0;
  return t;
}

Matrix block_sum_matrix(int d, int k) {
  Matrix s = Matrix::Zero(k * d, k);
  for (int c = 0; c < k; ++c)
    for (int j = 0; j < d; ++j) s(c * d + j, c) = 1.0;
  return s;
}

}  // namespace

Var bound_log_std(const Var& raw, double lo, double hi) {
  return ad::add_scalar(ad::scale(ad::add_scalar(ad::tanh(raw), 1.0), 0.5 * (hi - lo)), lo);
}

Var sample_reparameterized(const SquashedGaussianParams& params, const Matrix& noise) {
  if (noise.rows() != params.mean.rows() || noise.cols() != params.mean.cols()) {
    throw ad::ShapeError("sample_reparameterized: noise shape mismatch");
  }
  return ad::tanh(ad::add(params.mean, ad::mul(ad::exp(params.log_std), ad::constant(noise))));
}

SquashedSample sample_with_log_prob(const SquashedGaussianParams& params, const Matrix& noise) {
  if (noise.rows() != params.mean.rows() || noise.cols() != params.mean.cols()) {
    throw ad::ShapeError("sample_with_log_prob: noise shape mismatch");
  }
  Var u = ad::add(params.mean, ad::mul(ad::exp(params.log_std), ad::constant(noise)));
  const double d = static_cast<double>(noise.cols());
  Matrix quad = (-0.5 * noise.array().square()).rowwise().sum().matrix();
  Var gauss = ad::add_scalar(ad::sub(ad::constant(quad), ad::sum_cols(params.log_std)),
                             -d * kHalfLog2Pi);
  Var logp = ad::sub(gauss, ad::sum_cols(log_one_minus_tanh_sq(u)));
  return {ad::tanh(u), logp};
}

Var log_prob(const SquashedGaussianParams& params, const Var& action) {
  if (action.rows() != params.mean.rows() || action.cols() != params.mean.cols()) {
    throw ad::ShapeError("log_prob: action shape mismatch");
  }
  Var a = clamp_action(action);
  Var u = ad::atanh(a);
  Var z = ad::div(ad::sub(u, params.mean), ad::exp(params.log_std));
  const double d = static_cast<double>(action.cols());
  Var gauss = ad::add_scalar(
      ad::neg(ad::add(ad::scale(ad::sum_cols(ad::square(z)), 0.5), ad::sum_cols(params.log_std))),
      -d * kHalfLog2Pi);
  return ad::sub(gauss, squash_correction(a));
}

Var log_prob(const MixtureParams& params, const Var& action) {
  const int k = params.components;
  const int d = params.action_dim;
  if (action.cols() != d || params.logits.cols() != k || params.means.cols() != k * d) {
    throw ad::ShapeError("log_prob(mixture): shape mismatch");
  }
  Var a = clamp_action(action);
  Var u = ad::atanh(a);
  Var u_tiled = ad::matmul(u, ad::constant(tile_matrix(d, k)));
  Var z = ad::mul(ad::sub(u_tiled, params.means), ad::exp(ad::neg(params.log_stds)));
  Var elem = ad::add_scalar(ad::neg(ad::add(ad::scale(ad::square(z), 0.5), params.log_stds)),
                            -kHalfLog2Pi);
  Var comp = ad::matmul(elem, ad::constant(block_sum_matrix(d, k)));  // B x K
  Var log_w = ad::sub(params.logits, ad::logsumexp_cols(params.logits));
  Var ll = ad::logsumexp_cols(ad::add(log_w, comp));
  return ad::sub(ll, squash_correction(a));
}

double laplace_mass_on_box(double location, double scale) {
  auto cdf = [&](double x) {
    const double t = (x - location) / scale;
    return t < 0 ? 0.5 * std::exp(t) : 1.0 - 0.5 * std::exp(-t);
  };
  return cdf(1.0) - cdf(-1.0);
}

Var log_prob(const LaplaceParams& params, const Var& action) {
  if (!(params.scale > 0.0)) throw std::invalid_argument("Laplace scale must be positive");
  if (action.cols() != 1) throw ad::ShapeError("Laplace log_prob is 1-D");
  double log_norm = std::log(2.0 * params.scale);
  if (params.truncated) log_norm += std::log(laplace_mass_on_box(params.location, params.scale));
  Var dev = ad::abs(ad::add_scalar(action, -params.location));
  return ad::add_scalar(ad::scale(dev, -1.0 / params.scale), -log_norm);
}

Var sample_mixture(const MixtureParams& params, Rng& rng) {
  const int k = params.components;
  const int d = params.action_dim;
  const Matrix& logits = params.logits.value();
  const auto batch = logits.rows();
  Matrix select = Matrix::Zero(batch, k * d);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Eigen::Index i = 0; i < batch; ++i) {
    const double mx = logits.row(i).maxCoeff();
    Eigen::RowVectorXd w = (logits.row(i).array() - mx).exp();
    const double u = unif(rng) * w.sum();
    int chosen = k - 1;
    double acc = 0.0;
    for (int c = 0; c < k; ++c) {
      acc += w(c);
      if (u < acc) {
        chosen = c;
        break;
      }
    }
    select.block(i, chosen * d, 1, d).setOnes();
  }
  Matrix collapse = tile_matrix(d, k).transpose();  // (K*d) x d
  Var sel = ad::constant(select);
  Var mean = ad::matmul(ad::mul(params.means, sel), ad::constant(collapse));
  Var log_std = ad::matmul(ad::mul(params.log_stds, sel), ad::constant(collapse));
  return sample_reparameterized({mean, log_std}, standard_normal(batch, d, rng));
}

double entropy_estimate(const SquashedGaussianParams& params, int n_samples, Rng& rng) {
  if (n_samples < 1) throw std::invalid_argument("entropy_estimate needs n_samples >= 1");
  ad::NoGradGuard no_grad;
  double total = 0.0;
  for (int n = 0; n < n_samples; ++n) {
    auto s = sample_with_log_prob(params, standard_normal(params.mean.rows(), params.mean.cols(), rng));
    total += -s.log_prob.value().mean();
  }
  return total / n_samples;
}

}  // namespace fbrc::dist
