// Frisch-Newton interior point for
//
//   min_a  -y'a   s.t.  X'a = (1-theta) X'1,  0 <= a <= 1,
//
// the bounded dual of the check-loss problem. The multiplier of the equality
// constraint is -beta. Mehrotra predictor-corrector steps, as in Koenker and
// Portnoy's rq.fit.fnb.

#include "capstruct/detail/design_operator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace capstruct::detail {
namespace {

constexpr double kStepScale = 0.99995;
constexpr double kBig = 1e20;

struct StepLengths {
  double primal;
  double dual;
};

StepLengths ratio_test(const Vector& a, const Vector& da, const Vector& s, const Vector& ds,
                       const Vector& z, const Vector& dz, const Vector& w, const Vector& dw) {
  double primal = kBig;
  double dual = kBig;
  for (Index i = 0; i < a.size(); ++i) {
    if (da(i) < 0) primal = std::min(primal, -a(i) / da(i));
    if (ds(i) < 0) primal = std::min(primal, -s(i) / ds(i));
    if (dz(i) < 0) dual = std::min(dual, -z(i) / dz(i));
    if (dw(i) < 0) dual = std::min(dual, -w(i) / dw(i));
  }
  return {std::min(kStepScale * primal, 1.0), std::min(kStepScale * dual, 1.0)};
}

}  // namespace

RawSolution interior_point(DesignOperator& op, const Vector& y, double theta,
                           const FitOptions& options) {
  const Index n = op.rows();
  const double init_eps = 1e-6 * std::max(1.0, y.cwiseAbs().maxCoeff());

  RawSolution out;
  out.info.method = "interior-point";

  const Vector c = -y;
  const Vector b = (1.0 - theta) * op.apply_transpose(Vector::Ones(n));

  Vector a = Vector::Constant(n, 1.0 - theta);
  Vector s = Vector::Constant(n, theta);  // upper slack 1 - a
  Vector d = Vector::Ones(n);

  if (!op.factor_gram(d)) {
    out.beta = Vector::Zero(op.cols());
    return out;
  }
  Vector dual = op.solve_gram(op.apply_transpose(c));
  Vector resid = c - op.apply(dual);
  Vector z(n), w(n);
  for (Index i = 0; i < n; ++i) {
    z(i) = std::max(resid(i), 0.0);
    w(i) = std::max(-resid(i), 0.0);
    if (std::abs(resid(i)) < init_eps) {
      z(i) += init_eps;
      w(i) += init_eps;
    }
  }

  double gap = z.dot(a) + w.dot(s);
  Vector da(n), ds(n), dz(n), dw(n), dr(n);
  Vector best_dual = dual;

  int it = 0;
  while (it < options.max_iterations) {
    const double scale = 1.0 + std::abs(c.dot(a));
    if (gap <= options.tolerance * scale) {
      out.info.converged = true;
      break;
    }
    ++it;

    d = (z.cwiseQuotient(a) + w.cwiseQuotient(s)).cwiseInverse();
    Vector zw = z - w;
    dz = d.cwiseProduct(zw);

    // Affine scaling (predictor) direction.
    Vector rhs = b - op.apply_transpose(a) + op.apply_transpose(dz);
    if (!op.factor_gram(d)) break;
    Vector ddual = op.solve_gram(rhs);

    ds = op.apply(ddual) - zw;
    da = d.cwiseProduct(ds);
    ds = -da;
    dz = -z.cwiseProduct(da.cwiseQuotient(a) + Vector::Ones(n));
    dw = -w.cwiseProduct(ds.cwiseQuotient(s) + Vector::Ones(n));

    StepLengths step = ratio_test(a, da, s, ds, z, dz, w, dw);

    if (std::min(step.primal, step.dual) < 1.0) {
      // Centering-corrector direction.
      double mu = z.dot(a) + w.dot(s);
      const double g = (z + step.dual * dz).dot(a + step.primal * da) +
                       (w + step.dual * dw).dot(s + step.primal * ds);
      mu = mu * std::pow(g / mu, 3) / (2.0 * static_cast<double>(n));

      for (Index i = 0; i < n; ++i) {
        dr(i) = d(i) * (mu * (1.0 / s(i) - 1.0 / a(i)) + da(i) * dz(i) / a(i) -
                        ds(i) * dw(i) / s(i));
      }
      ddual = op.solve_gram(rhs + op.apply_transpose(dr));
      const Vector u = op.apply(ddual);
      for (Index i = 0; i < n; ++i) {
        const double dadz = da(i) * dz(i);
        const double dsdw = ds(i) * dw(i);
        da(i) = d(i) * (u(i) - z(i) + w(i)) - dr(i);
        ds(i) = -da(i);
        dz(i) = -z(i) + (mu - z(i) * da(i) - dadz) / a(i);
        dw(i) = -w(i) + (mu - w(i) * ds(i) - dsdw) / s(i);
      }
      step = ratio_test(a, da, s, ds, z, dz, w, dw);
    }

    a += step.primal * da;
    s += step.primal * ds;
    dual += step.dual * ddual;
    z += step.dual * dz;
    w += step.dual * dw;
    const double next_gap = z.dot(a) + w.dot(s);
    if (!std::isfinite(next_gap)) break;
    gap = next_gap;
    best_dual = dual;
  }

  out.beta = -best_dual;
  out.info.iterations = it;
  out.info.duality_gap = gap;
  return out;
}

}  // namespace capstruct::detail
