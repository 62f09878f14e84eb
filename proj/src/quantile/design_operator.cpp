#include "capstruct/detail/design_operator.hpp"

#include <cassert>

namespace capstruct::detail {

bool DenseOperator::factor_gram(const Vector& d) {
  Matrix gram = x_.transpose() * d.asDiagonal() * x_;
  llt_.compute(gram);
  return llt_.info() == Eigen::Success;
}

GroupedOperator::GroupedOperator(const Matrix& x, std::vector<int> group, Vector weight,
                                 int n_groups)
    : x_(x), group_(std::move(group)), weight_(std::move(weight)), n_groups_(n_groups) {
  assert(static_cast<Index>(group_.size()) == x_.rows());
  assert(weight_.size() == x_.rows());
}

Vector GroupedOperator::apply(const Vector& beta) const {
  const Index k = x_.cols();
  Vector out = k > 0 ? Vector(x_ * beta.head(k)) : Vector::Zero(x_.rows());
  for (Index i = 0; i < x_.rows(); ++i) out(i) += weight_(i) * beta(k + group_[i]);
  return out;
}

Vector GroupedOperator::apply_transpose(const Vector& v) const {
  const Index k = x_.cols();
  Vector out(cols());
  out.head(k) = x_.transpose() * v;
  out.tail(n_groups_).setZero();
  for (Index i = 0; i < x_.rows(); ++i) out(k + group_[i]) += weight_(i) * v(i);
  return out;
}

bool GroupedOperator::factor_gram(const Vector& d) {
  const Index k = x_.cols();
  diag_ = Vector::Zero(n_groups_);
  cross_ = Matrix::Zero(k, n_groups_);
  for (Index i = 0; i < x_.rows(); ++i) {
    const int g = group_[i];
    const double dw = d(i) * weight_(i);
    diag_(g) += dw * weight_(i);
    if (k > 0 && dw != 0.0) cross_.col(g).noalias() += dw * x_.row(i).transpose();
  }
  if ((diag_.array() <= 0.0).any()) return false;
  if (k == 0) return true;
  Matrix schur = x_.transpose() * d.asDiagonal() * x_;
  schur.noalias() -= cross_ * diag_.cwiseInverse().asDiagonal() * cross_.transpose();
  schur_.compute(schur);
  return schur_.info() == Eigen::Success;
}

Vector GroupedOperator::solve_gram(const Vector& rhs) const {
  const Index k = x_.cols();
  Vector out(cols());
  const Vector scaled = rhs.tail(n_groups_).cwiseQuotient(diag_);
  if (k > 0) {
    out.head(k) = schur_.solve(rhs.head(k) - cross_ * scaled);
    out.tail(n_groups_) = scaled - (cross_.transpose() * out.head(k)).cwiseQuotient(diag_);
  } else {
    out = scaled;
  }
  return out;
}

double GroupedOperator::row_dot(Index i, const Vector& v) const {
  const Index k = x_.cols();
  double s = weight_(i) * v(k + group_[i]);
  if (k > 0) s += x_.row(i).dot(v.head(k));
  return s;
}

void GroupedOperator::dense_row(Index i, RowRef out) const {
  const Index k = x_.cols();
  out.setZero();
  out.head(k) = x_.row(i);
  out(k + group_[i]) = weight_(i);
}

void GroupedOperator::add_row(Index i, double s, Vector& acc) const {
  const Index k = x_.cols();
  if (k > 0) acc.head(k).noalias() += s * x_.row(i).transpose();
  acc(k + group_[i]) += s * weight_(i);
}

}  // namespace capstruct::detail
