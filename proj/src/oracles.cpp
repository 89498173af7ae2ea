#include "fbrc/oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace fbrc::oracle {

Grid1D::Grid1D(double lower, double upper, int count)
    : lower_(lower), upper_(upper), count_(count) {
  if (count < 3 || count % 2 == 0) throw std::invalid_argument("Grid1D: count must be odd, >= 3");
  if (!(upper > lower)) throw std::invalid_argument("Grid1D: upper must exceed lower");
}

Grid1D Grid1D::action_box(int count) { return Grid1D(-1.0 + 1e-4, 1.0 - 1e-4, count); }

Vector Grid1D::points() const {
  Vector x(count_);
  const double h = spacing();
  for (int i = 0; i < count_; ++i) x(i) = lower_ + h * i;
  x(count_ - 1) = upper_;
  return x;
}

double trapezoid(const Vector& values, const Grid1D& grid) {
  if (values.size() != grid.count()) throw std::invalid_argument("trapezoid: size mismatch");
  const auto n = values.size();
  return grid.spacing() * (values.sum() - 0.5 * (values(0) + values(n - 1)));
}

double trapezoid(const Vector& x, const Vector& values) {
  if (x.size() != values.size() || x.size() < 2) throw std::invalid_argument("trapezoid: size mismatch");
  double total = 0.0;
  for (Eigen::Index i = 1; i < x.size(); ++i) {
    const double h = x(i) - x(i - 1);
    if (!(h >= 0)) throw std::invalid_argument("trapezoid: abscissae must be sorted");
    total += 0.5 * h * (values(i) + values(i - 1));
  }
  return total;
}

Vector boltzmann_on_grid(const Vector& q) {
  Vector e = (q.array() - q.maxCoeff()).exp();
  return e / e.sum();
}

double fisher_divergence_quadrature(const GridFn& p_score, const GridFn& q_score,
                                    const GridFn& p_density, const Grid1D& grid) {
  const Vector x = grid.points();
  Vector p = p_density(x);
  p /= trapezoid(p, grid);
  const Vector diff = p_score(x) - q_score(x);
  return trapezoid((p.array() * diff.array().square()).matrix(), grid);
}

FisherIdentity fisher_identity_check(const GridFn& q_value, const GridFn& q_score,
                                     const GridFn& log_mu_score, const GridFn& offset_grad,
                                     const Grid1D& grid) {
  const Vector x = grid.points();
  // Left side: Fisher divergence with the EBM density exp(Q) - shifted for
  // stability, normalized inside the quadrature.
  auto ebm = [&](const Vector& pts) {
    Vector q = q_value(pts);
    return Vector((q.array() - q.maxCoeff()).exp());
  };
  FisherIdentity out;
  out.fisher = fisher_divergence_quadrature(q_score, log_mu_score, ebm, grid);

  // Right side: grid Boltzmann weights turned into a density.
  Vector w = boltzmann_on_grid(q_value(x));
  w /= trapezoid(w, grid);
  const Vector og = offset_grad(x);
  out.penalty = trapezoid((w.array() * og.array().square()).matrix(), grid);
  out.residual = std::abs(out.fisher - out.penalty);
  return out;
}

Vector finite_diff_grad(const std::function<double(const Vector&)>& f, const Vector& x,
                        double step) {
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = xp(i);
    xp(i) = orig + step;
    const double fp = f(xp);
    xp(i) = orig - step;
    const double fm = f(xp);
    xp(i) = orig;
    g(i) = (fp - fm) / (2.0 * step);
  }
  return g;
}

}  // namespace fbrc::oracle
