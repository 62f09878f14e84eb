#pragma once

// Linear quantile regression: check-loss minimisation, goodness of fit and
// bootstrap inference.

#include "capstruct/error.hpp"
#include "capstruct/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace capstruct {

inline void require_quantile(double theta) {
  if (!(theta > 0.0 && theta < 1.0))
    throw DomainError("quantile level must lie in (0,1), got " + std::to_string(theta));
}

/// Asymmetric absolute loss: theta*r for r >= 0, (theta-1)*r for r < 0, summed.
template <typename Derived>
typename Derived::Scalar check_loss(const Eigen::MatrixBase<Derived>& residuals, double theta) {
  require_quantile(theta);
  using Scalar = typename Derived::Scalar;
  const Scalar up = static_cast<Scalar>(theta);
  const Scalar down = static_cast<Scalar>(theta - 1.0);
  return residuals.unaryExpr([&](Scalar r) { return r >= Scalar(0) ? up * r : down * r; }).sum();
}

/// Response plus named predictor columns. At most one constant column is allowed and it
/// is taken to be the intercept.
class DesignMatrix {
 public:
  DesignMatrix(Matrix x, Vector y, std::vector<std::string> names);

  /// Prepends a column of ones named "const".
  static DesignMatrix with_intercept(const Matrix& x, const Vector& y,
                                     const std::vector<std::string>& names);

  const Matrix& x() const { return x_; }
  const Vector& y() const { return y_; }
  const std::vector<std::string>& names() const { return names_; }
  Index rows() const { return x_.rows(); }
  Index cols() const { return x_.cols(); }
  std::optional<Index> intercept() const { return intercept_; }

  /// Rows picked by index (repeats allowed). Skips the constructor's invariant checks,
  /// because bootstrap resamples may legitimately be degenerate.
  DesignMatrix select_rows(std::span<const Index> rows) const;
  DesignMatrix with_response(Vector y) const;

 private:
  struct Unchecked {};
  DesignMatrix(Matrix x, Vector y, std::vector<std::string> names, Unchecked);
  void locate_intercept();

  Matrix x_;
  Vector y_;
  std::vector<std::string> names_;
  std::optional<Index> intercept_;
};

enum class QuantileAlgorithm { InteriorPoint, Irls };

struct FitOptions {
  QuantileAlgorithm algorithm = QuantileAlgorithm::InteriorPoint;
  /// Relative duality-gap target for the interior point iterations.
  double tolerance = 1e-9;
  int max_iterations = 500;
  /// Move the approximate solution to an optimal vertex and certify it.
  bool crossover = true;
  /// Residuals with |r| <= zero_tolerance * max(1, max|y|) count as zero.
  double zero_tolerance = 1e-9;
};

struct SolverInfo {
  std::string method;
  int iterations = 0;
  int pivots = 0;
  double duality_gap = 0.0;
  bool used_fallback = false;
  /// True when the returned point passed the vertex optimality certificate (or the
  /// interior point gap test when crossover is off).
  bool converged = false;
};

struct QuantileFit {
  double theta = 0.5;
  NamedVector coefficients;
  std::optional<Vector> std_errors;
  double objective = 0.0;
  double pseudo_r2 = 0.0;
  Index n_neg = 0;
  Index n_pos = 0;
  Index n_zero = 0;
  /// The constant vector lies in the column span, so the sign-count condition applies.
  bool intercept_spanned = false;
  SolverInfo solver;

  Index n() const { return n_neg + n_pos + n_zero; }
  /// n_neg <= n*theta and n_pos <= n*(1-theta).
  bool satisfies_subgradient() const;
};

/// Minimises the check loss of y - X*beta at quantile theta.
QuantileFit fit_quantile(const DesignMatrix& design, double theta, const FitOptions& options = {});

/// Check loss of the best constant at theta (an order statistic of y).
double intercept_only_objective(const Vector& y, double theta);

/// 1 - V(fit) / V(intercept only). Zero when the intercept-only loss is zero.
double pseudo_r2(const QuantileFit& fit, const DesignMatrix& design, double theta);

struct BootstrapOptions {
  int replications = 200;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct BootstrapResult {
  Vector std_errors;
  /// One row per replicate.
  Matrix draws;
  int degenerate_redraws = 0;
};

/// Pairs bootstrap standard errors. With cluster labels, whole clusters are resampled.
BootstrapResult bootstrap_se(const DesignMatrix& design, double theta,
                             const BootstrapOptions& options,
                             std::optional<std::span<const int>> clusters = std::nullopt,
                             const FitOptions& fit_options = {});

/// Indices drawn for one bootstrap replicate and the cluster of each drawn row, with
/// every resampled cluster given a fresh id (0..G-1 in draw order).
struct Resample {
  std::vector<Index> rows;
  std::vector<int> clusters;
};

/// Runs `replicate` B times over resamples of n rows (or of the given clusters) and
/// returns the per-replicate estimates. `replicate` throws DataError for degenerate
/// resamples, which are redrawn; more than 50% degenerate draws is an error.
BootstrapResult bootstrap_statistic(Index n, std::optional<std::span<const int>> clusters,
                                    const BootstrapOptions& options,
                                    const std::function<Vector(const Resample&)>& replicate);

/// Observer called with every fit produced by fit_quantile and the fixed-effects
/// variants. Must be thread safe. Pass an empty function to remove.
void set_fit_observer(std::function<void(const QuantileFit&)> observer);

namespace detail {
void notify_fit_observer(const QuantileFit& fit);
}

}  // namespace capstruct
