#include "capstruct/detail/design_operator.hpp"

#include <algorithm>
#include <cmath>

namespace capstruct::detail {

// Minimises sum_i w_i(r) r_i^2 with w_i = tilt_i / max(|r_i|, eps), where tilt is theta
// for positive and 1-theta for negative residuals. eps shrinks geometrically so the
// surrogate approaches the check loss.
RawSolution smoothed_irls(DesignOperator& op, const Vector& y, double theta,
                          const FitOptions& options, const Vector* start) {
  const Index n = op.rows();
  const double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
  RawSolution out;
  out.info.method = "smoothed-irls";

  Vector beta;
  if (start != nullptr && start->size() == op.cols()) {
    beta = *start;
  } else {
    if (!op.factor_gram(Vector::Ones(n))) {
      out.beta = Vector::Zero(op.cols());
      return out;
    }
    beta = op.solve_gram(op.apply_transpose(y));
  }

  double eps = 1e-2 * scale;
  const double eps_floor = 1e-12 * scale;
  double previous = std::numeric_limits<double>::infinity();
  Vector weight(n);
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const Vector r = y - op.apply(beta);
    const double loss = check_loss(r, theta);
    if (std::abs(previous - loss) <= options.tolerance * (1.0 + loss) && eps <= eps_floor) {
      out.info.converged = true;
      break;
    }
    previous = loss;
    for (Index i = 0; i < n; ++i) {
      const double tilt = r(i) >= 0 ? theta : 1.0 - theta;
      weight(i) = tilt / std::max(std::abs(r(i)), eps);
    }
    if (!op.factor_gram(weight)) break;
    beta = op.solve_gram(op.apply_transpose(weight.cwiseProduct(y)));
    eps = std::max(eps * 0.5, eps_floor);
  }
  out.beta = beta;
  out.info.iterations = it;
  return out;
}

}  // namespace capstruct::detail
