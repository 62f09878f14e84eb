#include "capstruct/lp_oracle.hpp"

#include <cmath>
#include <vector>

namespace capstruct {
namespace {

using Real = long double;

class Tableau {
 public:
  Tableau(Index rows, Index cols)
      : rows_(rows), cols_(cols), a_(static_cast<std::size_t>((rows + 1) * (cols + 1)), 0.0L),
        basis_(static_cast<std::size_t>(rows), -1) {}

  Real& at(Index r, Index c) { return a_[static_cast<std::size_t>(r * (cols_ + 1) + c)]; }
  Real& rhs(Index r) { return at(r, cols_); }
  Real& cost(Index c) { return at(rows_, c); }
  Index& basic(Index r) { return basis_[static_cast<std::size_t>(r)]; }

  void pivot(Index pr, Index pc) {
    const Real inv = 1.0L / at(pr, pc);
    for (Index c = 0; c <= cols_; ++c) at(pr, c) *= inv;
    for (Index r = 0; r <= rows_; ++r) {
      if (r == pr) continue;
      const Real f = at(r, pc);
      if (f == 0.0L) continue;
      for (Index c = 0; c <= cols_; ++c) at(r, c) -= f * at(pr, c);
    }
    basic(pr) = pc;
  }

  /// Bland's rule; returns the pivot count or -1 if unbounded.
  int solve(Real eps) {
    int pivots = 0;
    for (;;) {
      Index enter = -1;
      for (Index c = 0; c < cols_; ++c) {
        if (cost(c) < -eps) {
          enter = c;
          break;
        }
      }
      if (enter < 0) return pivots;
      Index leave = -1;
      Real best = 0.0L;
      for (Index r = 0; r < rows_; ++r) {
        if (at(r, enter) <= eps) continue;
        const Real ratio = rhs(r) / at(r, enter);
        if (leave < 0 || ratio < best - eps ||
            (std::fabs(ratio - best) <= eps && basic(r) < basic(leave))) {
          leave = r;
          best = ratio;
        }
      }
      if (leave < 0) return -1;
      pivot(leave, enter);
      ++pivots;
    }
  }

  Real value_of(Index c) {
    for (Index r = 0; r < rows_; ++r)
      if (basic(r) == c) return rhs(r);
    return 0.0L;
  }

 private:
  Index rows_;
  Index cols_;
  std::vector<Real> a_;
  std::vector<Index> basis_;
};

}  // namespace

OracleSolution fit_quantile_oracle(const DesignMatrix& design, double theta,
                                   const OracleOptions& options) {
  require_quantile(theta);
  const Index n = design.rows();
  const Index k = design.cols();
  if (n > options.max_rows || k > options.max_cols) {
    throw DataError("oracle refuses instance of " + std::to_string(n) + " x " +
                    std::to_string(k) + " (cap " + std::to_string(options.max_rows) + " x " +
                    std::to_string(options.max_cols) + ")");
  }

  // Columns: b+ [0,k), b- [k,2k), u [2k,2k+n), v [2k+n, 2k+2n).
  const Index cols = 2 * k + 2 * n;
  Tableau t(n, cols);
  const auto& x = design.x();
  const auto& y = design.y();
  const Real up = theta;
  const Real down = 1.0L - theta;

  for (Index i = 0; i < n; ++i) {
    const Real sign = y(i) >= 0 ? 1.0L : -1.0L;
    for (Index j = 0; j < k; ++j) {
      t.at(i, j) = sign * x(i, j);
      t.at(i, k + j) = -sign * x(i, j);
    }
    t.at(i, 2 * k + i) = sign;
    t.at(i, 2 * k + n + i) = -sign;
    t.rhs(i) = sign * y(i);
    t.basic(i) = y(i) >= 0 ? 2 * k + i : 2 * k + n + i;
  }
  for (Index i = 0; i < n; ++i) {
    t.cost(2 * k + i) = up;
    t.cost(2 * k + n + i) = down;
  }
  // Price out the starting basis.
  for (Index i = 0; i < n; ++i) {
    const Index b = t.basic(i);
    const Real cb = t.cost(b);
    for (Index c = 0; c <= cols; ++c) t.at(n, c) -= cb * t.at(i, c);
  }

  const Real scale = 1.0L + static_cast<Real>(y.cwiseAbs().maxCoeff()) +
                     static_cast<Real>(x.cwiseAbs().maxCoeff());
  const int pivots = t.solve(1e-15L * scale);
  if (pivots < 0) throw Error("oracle: linear program reported unbounded");

  OracleSolution out;
  out.pivots = pivots;
  out.coefficients.resize(k);
  for (Index j = 0; j < k; ++j)
    out.coefficients(j) = static_cast<double>(t.value_of(j) - t.value_of(k + j));
  out.objective = check_loss(Vector(y - x * out.coefficients), theta);
  return out;
}

}  // namespace capstruct
