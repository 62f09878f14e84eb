#pragma once

// Linear panel estimators (within, random effects, pooled), the Hausman test, and
// quantile regression with group effects.

#include "capstruct/quantile.hpp"
#include "capstruct/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace capstruct {

/// Dense group membership: row i belongs to group of_row[i] in [0, count).
struct GroupIndex {
  std::vector<int> of_row;
  std::vector<std::string> labels;  // one per group
  std::vector<Index> sizes;

  int count() const { return static_cast<int>(labels.size()); }
  Index rows() const { return static_cast<Index>(of_row.size()); }

  /// Groups numbered in order of first appearance.
  static GroupIndex from_labels(std::span<const int> labels);
  static GroupIndex from_labels(std::span<const std::string> labels);
  GroupIndex select_rows(std::span<const Index> rows) const;
};

/// Subtracts group means from every column. Singleton groups become zero rows.
/// A second centring pass removes the rounding left by the first.
template <typename Derived>
typename Types<typename Derived::Scalar>::Matrix within_transform(
    const Eigen::MatrixBase<Derived>& m, const GroupIndex& groups) {
  using Scalar = typename Derived::Scalar;
  using Mat = typename Types<Scalar>::Matrix;
  Mat out = m;
  Mat means(groups.count(), m.cols());
  for (int pass = 0; pass < 2; ++pass) {
    means.setZero();
    for (Index i = 0; i < out.rows(); ++i) means.row(groups.of_row[i]) += out.row(i);
    for (int g = 0; g < groups.count(); ++g) means.row(g) /= static_cast<Scalar>(groups.sizes[g]);
    for (Index i = 0; i < out.rows(); ++i) {
      if (groups.sizes[groups.of_row[i]] == 1) {
        out.row(i).setZero();
      } else {
        out.row(i) -= means.row(groups.of_row[i]);
      }
    }
  }
  return out;
}

/// Group means of every column (one row per group).
template <typename Derived>
typename Types<typename Derived::Scalar>::Matrix group_means(const Eigen::MatrixBase<Derived>& m,
                                                             const GroupIndex& groups) {
  using Scalar = typename Derived::Scalar;
  typename Types<Scalar>::Matrix means =
      Types<Scalar>::Matrix::Zero(groups.count(), m.cols());
  for (Index i = 0; i < m.rows(); ++i) means.row(groups.of_row[i]) += m.row(i);
  for (int g = 0; g < groups.count(); ++g) means.row(g) /= static_cast<Scalar>(groups.sizes[g]);
  return means;
}

enum class EffectsKind { FixedWithin, RandomGLS, PooledOLS };

struct EffectsFit {
  EffectsKind kind = EffectsKind::PooledOLS;
  /// Slopes for FixedWithin; "const" followed by slopes otherwise.
  NamedVector coefficients;
  Matrix vcov;
  Index n = 0;
  double ssr = 0.0;      // residual sum of squares of the estimating regression
  Index df_resid = 0;

  // FixedWithin: a_i = intercept + group_effects[i], group_effects averaging to 0.
  std::vector<std::string> group_labels;
  Vector group_effects;
  std::optional<double> intercept;

  // FixedWithin and RandomGLS
  std::optional<double> sigma_e;
  // RandomGLS
  std::optional<double> sigma_u;
  bool sigma_u_clamped = false;
};

/// Least squares on within-transformed data. Any constant column of the design is
/// dropped; the level is reported through `intercept`.
EffectsFit fit_fixed_effects(const DesignMatrix& design, const GroupIndex& groups);

/// OLS with a constant (added when the design lacks one).
EffectsFit fit_pooled_ols(const DesignMatrix& design);

/// Feasible GLS with Swamy-Arora variance components for unbalanced panels.
EffectsFit fit_random_effects(const DesignMatrix& design, const GroupIndex& groups);

enum class ModelChoice { FixedEffects, RandomEffects };
std::string_view to_string(ModelChoice c);

struct HausmanResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  ModelChoice decision = ModelChoice::RandomEffects;
  bool rank_deficient = false;
  std::vector<std::string> compared;
};

/// Compares the slopes common to both fits by name ("const" excluded). A variance
/// difference that is not positive definite is inverted over its positive eigenvalues
/// and df is the number of those; rank_deficient is then set.
HausmanResult hausman_test(const EffectsFit& fe, const EffectsFit& re, double alpha = 0.05);

/// p-value and decision for a given chi-square statistic.
HausmanResult hausman_from_statistic(double statistic, int df, double alpha = 0.05);

enum class QuantileEffectsMode { Dummy, Penalized };

struct QuantileEffectsOptions {
  QuantileEffectsMode mode = QuantileEffectsMode::Dummy;
  /// Weight of the L1 penalty on group effects (penalized mode).
  double lambda = 1.0;
  /// Dummy mode refuses more groups than this.
  int max_groups = 5000;
  FitOptions fit;
};

struct QuantileEffectsFit {
  /// Slope coefficients (dummy mode) or "const" plus slopes (penalized mode); counts,
  /// objective and pseudo-R2 refer to the data rows only.
  QuantileFit fit;
  std::vector<std::string> group_labels;
  Vector group_effects;
  /// Unweighted mean of group_effects (plus the constant in penalized mode).
  double mean_effect = 0.0;
};

/// Quantile regression with one effect per group: explicit indicators fitted jointly
/// with the slopes, or indicators shrunk by lambda * sum |a_i|.
QuantileEffectsFit fit_quantile_fixed_effects(const DesignMatrix& design, const GroupIndex& groups,
                                              double theta,
                                              const QuantileEffectsOptions& options = {});

}  // namespace capstruct
