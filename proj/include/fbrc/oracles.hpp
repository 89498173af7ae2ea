#pragma once

// Independent numerical ground truth on 1-D grids: trapezoid quadrature,
// grid Boltzmann distributions, Fisher divergence and central differences.

#include <Eigen/Dense>

#include <functional>

namespace fbrc::oracle {

using Vector = Eigen::VectorXd;
/// Evaluates a scalar function at every grid point.
using GridFn = std::function<Vector(const Vector&)>;

class Grid1D {
 public:
  /// count must be odd and >= 3.
  Grid1D(double lower, double upper, int count);
  /// [-1 + 1e-4, 1 - 1e-4] with 4001 points.
  static Grid1D action_box(int count = 4001);

  double lower() const { return lower_; }
  double upper() const { return upper_; }
  int count() const { return count_; }
  double spacing() const { return (upper_ - lower_) / (count_ - 1); }
  Vector points() const;
  /// Same bounds, twice the resolution.
  Grid1D refined() const { return Grid1D(lower_, upper_, 2 * count_ - 1); }

 private:
  double lower_, upper_;
  int count_;
};

/// Composite trapezoid rule of sampled values.
double trapezoid(const Vector& values, const Grid1D& grid);
/// Trapezoid rule on sorted, not necessarily uniform, abscissae.
double trapezoid(const Vector& x, const Vector& values);

/// Softmax with max subtraction.
Vector boltzmann_on_grid(const Vector& q);

/// Integral of p(x) (score_p(x) - score_q(x))^2. `p_density` may be
/// unnormalized; it is normalized by quadrature first.
double fisher_divergence_quadrature(const GridFn& p_score, const GridFn& q_score,
                                    const GridFn& p_density, const Grid1D& grid);

struct FisherIdentity {
  double fisher = 0.0;   // D_F(pi_ebm || mu), pi_ebm ∝ exp(O + log mu)
  double penalty = 0.0;  // E_{pi_ebm}[O'(a)^2]
  double residual = 0.0;
};

/// Both sides by quadrature. `q_score` is the analytic score of
/// Q = O + log mu; `offset_grad` is O' alone.
FisherIdentity fisher_identity_check(const GridFn& q_value, const GridFn& q_score,
                                     const GridFn& log_mu_score, const GridFn& offset_grad,
                                     const Grid1D& grid);

/// Central differences per coordinate.
Vector finite_diff_grad(const std::function<double(const Vector&)>& f, const Vector& x,
                        double step = 1e-4);

}  // namespace fbrc::oracle
