// Vertex crossover for the check-loss problem.
//
// Optimal solutions of a quantile regression occur at vertices where p observations
// are interpolated (basis h, beta = X_h^{-1} y_h). At a vertex the loss is linear on
// each cone spanned by the 2p edge directions +/- X_h^{-1} e_j, so the vertex is
// optimal iff every edge has a nonnegative directional derivative. Otherwise we walk
// the most negative edge to the minimising breakpoint (a weighted-median line search)
// and swap the observation hit there into the basis. Each pivot strictly lowers the
// loss, so the descent cannot cycle.

#include "capstruct/detail/design_operator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace capstruct::detail {
namespace {

std::vector<Index> select_basis(const DesignOperator& op, const Vector& residual) {
  const Index n = op.rows();
  const Index p = op.cols();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return std::abs(residual(a)) < std::abs(residual(b));
  });

  Matrix q(p, p);
  std::vector<Index> basis;
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  RowVector row(p);
  Vector v(p);

  // A strict pass keeps the basis well conditioned; the loose pass completes it.
  for (double threshold : {1e-6, 1e-11}) {
    for (Index i : order) {
      if (static_cast<Index>(basis.size()) == p) break;
      if (taken[i]) continue;
      op.dense_row(i, row);
      v = row.transpose();
      const double norm0 = v.norm();
      if (norm0 == 0.0) continue;
      const Index m = static_cast<Index>(basis.size());
      for (int pass = 0; pass < 2; ++pass) {
        for (Index j = 0; j < m; ++j) v -= q.col(j).dot(v) * q.col(j);
      }
      const double norm = v.norm();
      if (norm > threshold * norm0) {
        q.col(m) = v / norm;
        basis.push_back(i);
        taken[i] = 1;
      }
    }
  }
  return basis;
}

double directional(double rate, double theta) {
  return rate >= 0.0 ? theta * rate : (theta - 1.0) * rate;
}

}  // namespace

CrossoverResult crossover(const DesignOperator& op, const Vector& y, double theta,
                          const Vector& start, int max_pivots) {
  const Index n = op.rows();
  const Index p = op.cols();
  const double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
  const double zero_band = 1e-10 * scale;

  CrossoverResult out;
  std::vector<Index> basis = select_basis(op, y - op.apply(start));
  if (static_cast<Index>(basis.size()) < p) {
    throw RankDeficientError("design does not have full column rank", {});
  }

  Matrix bmat(p, p);
  Vector yb(p);
  Eigen::PartialPivLU<Matrix> lu;
  auto factor = [&]() {
    for (Index m = 0; m < p; ++m) {
      op.dense_row(basis[m], bmat.row(m));
      yb(m) = y(basis[m]);
    }
    lu.compute(bmat);
    return Vector(lu.solve(yb));
  };

  Vector beta = factor();
  Vector residual = y - op.apply(beta);
  double objective = check_loss(residual, theta);

  std::vector<char> in_basis(static_cast<std::size_t>(n), 0);
  for (Index i : basis) in_basis[i] = 1;

  std::vector<Index> degenerate;
  std::vector<std::pair<double, Index>> breaks;
  Vector g(p), dplus(p), dminus(p), unit(p), v(p);
  RowVector row(p);

  for (int pivot = 0; pivot <= max_pivots; ++pivot) {
    g.setZero();
    degenerate.clear();
    for (Index i = 0; i < n; ++i) {
      if (in_basis[i]) continue;
      if (std::abs(residual(i)) <= zero_band) {
        degenerate.push_back(i);
      } else {
        op.add_row(i, residual(i) > 0 ? theta : theta - 1.0, g);
      }
    }
    const Vector z = lu.transpose().solve(g);
    dplus = (1.0 - theta) - z.array();
    dminus = theta + z.array();
    for (Index i : degenerate) {
      op.dense_row(i, row);
      v = lu.transpose().solve(row.transpose());
      for (Index j = 0; j < p; ++j) {
        dplus(j) += directional(-v(j), theta);
        dminus(j) += directional(v(j), theta);
      }
    }

    Index leave = -1;
    double sign = 0.0;
    double best = 0.0;
    for (Index j = 0; j < p; ++j) {
      const double tol = 1e-9 * (1.0 + std::abs(z(j)));
      if (dplus(j) < -tol && dplus(j) < best) {
        best = dplus(j);
        leave = j;
        sign = 1.0;
      }
      if (dminus(j) < -tol && dminus(j) < best) {
        best = dminus(j);
        leave = j;
        sign = -1.0;
      }
    }
    if (leave < 0) {
      out.certified = true;
      break;
    }
    if (pivot == max_pivots) break;

    unit.setZero();
    unit(leave) = sign;
    const Vector direction = lu.solve(unit);
    const Vector rate = op.apply(direction);
    const double rate_floor = 1e-13 * std::max(1.0, rate.cwiseAbs().maxCoeff());

    breaks.clear();
    for (Index i = 0; i < n; ++i) {
      if (in_basis[i] || std::abs(residual(i)) <= zero_band) continue;
      if (std::abs(rate(i)) <= rate_floor) continue;
      const double t = residual(i) / rate(i);
      if (t > 0.0) breaks.emplace_back(t, i);
    }
    std::sort(breaks.begin(), breaks.end());
    double slope = best;
    Index enter = -1;
    for (const auto& [t, i] : breaks) {
      slope += std::abs(rate(i));
      if (slope >= 0.0) {
        enter = i;
        break;
      }
    }
    if (enter < 0) break;

    const Index leaving_row = basis[leave];
    basis[leave] = enter;
    Vector candidate = factor();
    Vector candidate_residual = y - op.apply(candidate);
    const double candidate_objective = check_loss(candidate_residual, theta);
    if (!(candidate_objective <= objective + 1e-12 * (1.0 + objective))) {
      basis[leave] = leaving_row;
      factor();
      break;
    }
    in_basis[leaving_row] = 0;
    in_basis[enter] = 1;
    beta = std::move(candidate);
    residual = std::move(candidate_residual);
    objective = candidate_objective;
    ++out.pivots;
  }
  out.beta = beta;
  return out;
}

}  // namespace capstruct::detail
