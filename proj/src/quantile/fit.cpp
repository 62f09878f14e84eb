#include "capstruct/detail/design_operator.hpp"
#include "capstruct/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>
#include <stdexcept>

namespace capstruct {

NamedVector::NamedVector(std::vector<std::string> n, Vector v)
    : names(std::move(n)), values(std::move(v)) {
  if (static_cast<Index>(names.size()) != values.size())
    throw std::invalid_argument("NamedVector: names and values differ in length");
}

std::optional<Index> NamedVector::find(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<Index>(i);
  return std::nullopt;
}

double NamedVector::operator[](std::string_view name) const {
  auto i = find(name);
  if (!i) throw std::out_of_range("no coefficient named " + std::string(name));
  return values(*i);
}

// ---------------------------------------------------------------------------
// DesignMatrix
// ---------------------------------------------------------------------------

DesignMatrix::DesignMatrix(Matrix x, Vector y, std::vector<std::string> names)
    : x_(std::move(x)), y_(std::move(y)), names_(std::move(names)) {
  if (x_.rows() != y_.size()) throw DataError("design: response length differs from row count");
  if (static_cast<Index>(names_.size()) != x_.cols())
    throw DataError("design: one name per column required");
  if (x_.rows() < x_.cols())
    throw DataError("design: fewer rows (" + std::to_string(x_.rows()) + ") than columns (" +
                    std::to_string(x_.cols()) + ")");
  std::set<std::string> seen;
  for (const auto& n : names_)
    if (!seen.insert(n).second) throw DataError("design: duplicate column name " + n);
  if (!x_.allFinite() || !y_.allFinite()) throw DataError("design: non-finite values");

  std::vector<std::string> constant;
  for (Index j = 0; j < x_.cols(); ++j) {
    if (x_.rows() > 0 && (x_.col(j).array() == x_(0, j)).all()) {
      if (x_(0, j) == 0.0)
        throw RankDeficientError("design: column " + names_[j] + " is identically zero",
                                 {names_[j]});
      constant.push_back(names_[j]);
    }
  }
  if (constant.size() > 1) {
    throw RankDeficientError("design: more than one constant column", constant);
  }
  locate_intercept();
}

DesignMatrix::DesignMatrix(Matrix x, Vector y, std::vector<std::string> names, Unchecked)
    : x_(std::move(x)), y_(std::move(y)), names_(std::move(names)) {
  locate_intercept();
}

void DesignMatrix::locate_intercept() {
  intercept_.reset();
  for (Index j = 0; j < x_.cols(); ++j) {
    if (x_.rows() > 0 && x_(0, j) != 0.0 && (x_.col(j).array() == x_(0, j)).all()) {
      intercept_ = j;
      return;
    }
  }
}

DesignMatrix DesignMatrix::with_intercept(const Matrix& x, const Vector& y,
                                          const std::vector<std::string>& names) {
  Matrix full(x.rows(), x.cols() + 1);
  full.col(0).setOnes();
  full.rightCols(x.cols()) = x;
  std::vector<std::string> all{"const"};
  all.insert(all.end(), names.begin(), names.end());
  return DesignMatrix(std::move(full), y, std::move(all));
}

DesignMatrix DesignMatrix::select_rows(std::span<const Index> rows) const {
  const Index m = static_cast<Index>(rows.size());
  Matrix x(m, x_.cols());
  Vector y(m);
  for (Index i = 0; i < m; ++i) {
    x.row(i) = x_.row(rows[static_cast<std::size_t>(i)]);
    y(i) = y_(rows[static_cast<std::size_t>(i)]);
  }
  return DesignMatrix(std::move(x), std::move(y), names_, Unchecked{});
}

DesignMatrix DesignMatrix::with_response(Vector y) const {
  if (y.size() != y_.size()) throw DataError("design: response length differs from row count");
  return DesignMatrix(x_, std::move(y), names_, Unchecked{});
}

// ---------------------------------------------------------------------------
// Fit observer
// ---------------------------------------------------------------------------

namespace {
std::mutex observer_mutex;
std::function<void(const QuantileFit&)> observer;
}  // namespace

void set_fit_observer(std::function<void(const QuantileFit&)> fn) {
  std::lock_guard lock(observer_mutex);
  observer = std::move(fn);
}

void detail::notify_fit_observer(const QuantileFit& fit) {
  std::function<void(const QuantileFit&)> fn;
  {
    std::lock_guard lock(observer_mutex);
    fn = observer;
  }
  if (fn) fn(fit);
}

bool QuantileFit::satisfies_subgradient() const {
  const double n_total = static_cast<double>(n());
  const double slack = 1e-9 * std::max(1.0, n_total);
  return static_cast<double>(n_neg) <= n_total * theta + slack &&
         static_cast<double>(n_pos) <= n_total * (1.0 - theta) + slack;
}

// ---------------------------------------------------------------------------
// Solver chain
// ---------------------------------------------------------------------------

void detail::count_signs(const Vector& residuals, double y_scale, double zero_tolerance,
                         QuantileFit& fit) {
  const double band = zero_tolerance * std::max(1.0, y_scale);
  fit.n_neg = fit.n_pos = fit.n_zero = 0;
  for (Index i = 0; i < residuals.size(); ++i) {
    if (residuals(i) > band) {
      ++fit.n_pos;
    } else if (residuals(i) < -band) {
      ++fit.n_neg;
    } else {
      ++fit.n_zero;
    }
  }
}

QuantileFit detail::solve_quantile(DesignOperator& op, const Vector& y, double theta,
                                   const FitOptions& options, bool intercept_spanned) {
  require_quantile(theta);
  RawSolution raw;
  if (options.algorithm == QuantileAlgorithm::InteriorPoint) {
    raw = interior_point(op, y, theta, options);
    if (!raw.info.converged && raw.info.iterations >= options.max_iterations) {
      const int ip_iterations = raw.info.iterations;
      raw = smoothed_irls(op, y, theta, options, &raw.beta);
      raw.info.used_fallback = true;
      raw.info.iterations += ip_iterations;
    }
  } else {
    raw = smoothed_irls(op, y, theta, options, nullptr);
  }
  if (!raw.beta.allFinite()) raw.beta = Vector::Zero(op.cols());

  QuantileFit fit;
  fit.theta = theta;
  fit.intercept_spanned = intercept_spanned;
  fit.solver = raw.info;

  Vector beta = raw.beta;
  if (options.crossover) {
    const int cap = static_cast<int>(std::max<Index>(1000, 4 * (op.rows() + op.cols())));
    CrossoverResult vertex = crossover(op, y, theta, raw.beta, cap);
    fit.solver.pivots = vertex.pivots;
    fit.solver.converged = vertex.certified;
    if (!vertex.certified) {
      throw ConvergenceError("quantile fit: optimality not certified after " +
                                 std::to_string(vertex.pivots) + " crossover pivots",
                             vertex.beta, fit.solver.iterations, fit.solver.duality_gap);
    }
    beta = std::move(vertex.beta);
  } else if (!raw.info.converged) {
    throw ConvergenceError("quantile fit: no convergence within " +
                               std::to_string(options.max_iterations) + " iterations",
                           raw.beta, raw.info.iterations, raw.info.duality_gap);
  }

  const Vector residual = y - op.apply(beta);
  fit.objective = check_loss(residual, theta);
  count_signs(residual, y.size() ? y.cwiseAbs().maxCoeff() : 1.0, options.zero_tolerance, fit);
  fit.coefficients.values = std::move(beta);
  return fit;
}

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

namespace {

void require_full_rank(const DesignMatrix& design) {
  Eigen::ColPivHouseholderQR<Matrix> qr(design.x());
  qr.setThreshold(1e-10);
  const Index rank = qr.rank();
  if (rank == design.cols()) return;
  std::vector<std::string> collinear;
  const auto& perm = qr.colsPermutation().indices();
  for (Index j = rank; j < design.cols(); ++j)
    collinear.push_back(design.names()[static_cast<std::size_t>(perm(j))]);
  std::string list;
  for (const auto& c : collinear) list += (list.empty() ? "" : ", ") + c;
  throw RankDeficientError("design is rank deficient; collinear columns: " + list,
                           std::move(collinear));
}

}  // namespace

QuantileFit fit_quantile(const DesignMatrix& design, double theta, const FitOptions& options) {
  require_quantile(theta);
  if (design.cols() == 0) throw DataError("design has no columns");
  require_full_rank(design);

  detail::DenseOperator op(design.x());
  QuantileFit fit =
      detail::solve_quantile(op, design.y(), theta, options, design.intercept().has_value());
  fit.coefficients.names = design.names();
  fit.pseudo_r2 = pseudo_r2(fit, design, theta);
  detail::notify_fit_observer(fit);
  return fit;
}

double intercept_only_objective(const Vector& y, double theta) {
  require_quantile(theta);
  const Index n = y.size();
  if (n == 0) return 0.0;
  std::vector<double> sorted(y.data(), y.data() + n);
  // Any order statistic y_(k) with k = ceil(n*theta) minimises the loss.
  auto k = static_cast<Index>(std::ceil(static_cast<double>(n) * theta)) - 1;
  k = std::clamp<Index>(k, 0, n - 1);
  std::nth_element(sorted.begin(), sorted.begin() + k, sorted.end());
  const double q = sorted[static_cast<std::size_t>(k)];
  return check_loss((y.array() - q).matrix(), theta);
}

double pseudo_r2(const QuantileFit& fit, const DesignMatrix& design, double theta) {
  const double baseline = intercept_only_objective(design.y(), theta);
  if (baseline <= 0.0) return 0.0;
  return std::clamp(1.0 - fit.objective / baseline, 0.0, 1.0);
}

}  // namespace capstruct
