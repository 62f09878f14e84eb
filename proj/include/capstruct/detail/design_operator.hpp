#pragma once

// Internal: the linear algebra the quantile solvers need from a design, so the
// same interior point and crossover code runs on plain dense designs and on
// designs augmented with (possibly weighted) group indicator columns.

#include "capstruct/quantile.hpp"
#include "capstruct/types.hpp"

#include <memory>
#include <vector>

namespace capstruct::detail {

/// Writable view of a matrix row (column-major rows are strided).
using RowRef = Eigen::Ref<RowVector, 0, Eigen::InnerStride<>>;

class DesignOperator {
 public:
  virtual ~DesignOperator() = default;

  virtual Index rows() const = 0;
  virtual Index cols() const = 0;

  /// X * beta
  virtual Vector apply(const Vector& beta) const = 0;
  /// X' * v
  virtual Vector apply_transpose(const Vector& v) const = 0;

  /// Factorises X' diag(d) X. Returns false when it is not numerically positive definite.
  virtual bool factor_gram(const Vector& d) = 0;
  /// Solves against the last successful factor_gram.
  virtual Vector solve_gram(const Vector& rhs) const = 0;

  virtual double row_dot(Index i, const Vector& v) const = 0;
  virtual void dense_row(Index i, RowRef out) const = 0;
  /// acc += s * x_i
  virtual void add_row(Index i, double s, Vector& acc) const = 0;
};

class DenseOperator final : public DesignOperator {
 public:
  explicit DenseOperator(const Matrix& x) : x_(x) {}

  Index rows() const override { return x_.rows(); }
  Index cols() const override { return x_.cols(); }
  Vector apply(const Vector& beta) const override { return x_ * beta; }
  Vector apply_transpose(const Vector& v) const override { return x_.transpose() * v; }
  bool factor_gram(const Vector& d) override;
  Vector solve_gram(const Vector& rhs) const override { return llt_.solve(rhs); }
  double row_dot(Index i, const Vector& v) const override { return x_.row(i).dot(v); }
  void dense_row(Index i, RowRef out) const override { out = x_.row(i); }
  void add_row(Index i, double s, Vector& acc) const override {
    acc.noalias() += s * x_.row(i).transpose();
  }

 private:
  const Matrix& x_;
  Eigen::LLT<Matrix> llt_;
};

/// Columns [X | G] where G has one column per group and row i carries weight w_i in
/// column group(i). Rows may have an all-zero X part (penalty rows).
class GroupedOperator final : public DesignOperator {
 public:
  GroupedOperator(const Matrix& x, std::vector<int> group, Vector weight, int n_groups);

  Index rows() const override { return x_.rows(); }
  Index cols() const override { return x_.cols() + n_groups_; }
  Vector apply(const Vector& beta) const override;
  Vector apply_transpose(const Vector& v) const override;
  bool factor_gram(const Vector& d) override;
  Vector solve_gram(const Vector& rhs) const override;
  double row_dot(Index i, const Vector& v) const override;
  void dense_row(Index i, RowRef out) const override;
  void add_row(Index i, double s, Vector& acc) const override;

 private:
  const Matrix& x_;
  std::vector<int> group_;
  Vector weight_;
  int n_groups_;
  // Block elimination state for [[A, B], [B', diag(c)]].
  Matrix cross_;  // B: k x G
  Vector diag_;   // c
  Eigen::LLT<Matrix> schur_;
};

struct RawSolution {
  Vector beta;
  SolverInfo info;
};

/// Frisch-Newton primal-dual interior point on the bounded dual LP.
RawSolution interior_point(DesignOperator& op, const Vector& y, double theta,
                           const FitOptions& options);

/// Iteratively reweighted least squares on a smoothed check loss.
RawSolution smoothed_irls(DesignOperator& op, const Vector& y, double theta,
                          const FitOptions& options, const Vector* start);

struct CrossoverResult {
  Vector beta;
  int pivots = 0;
  bool certified = false;
};

/// From an approximate minimiser, picks an interpolating basis and runs exterior-point
/// descent pivots until the vertex optimality conditions hold. Throws
/// RankDeficientError when no basis of cols() independent rows exists.
CrossoverResult crossover(const DesignOperator& op, const Vector& y, double theta,
                          const Vector& start, int max_pivots);

/// Runs the configured algorithm chain (interior point or IRLS, fallback, crossover) and
/// fills objective, sign counts and solver info. Coefficient names are left to the caller.
QuantileFit solve_quantile(DesignOperator& op, const Vector& y, double theta,
                           const FitOptions& options, bool intercept_spanned);

/// Sign counts of residuals with the zero band from options.
void count_signs(const Vector& residuals, double y_scale, double zero_tolerance, QuantileFit& fit);

}  // namespace capstruct::detail
