#pragma once

// Descriptive statistics over a derived panel.

#include "capstruct/panel_data.hpp"
#include "capstruct/types.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace capstruct {

/// Pearson correlation of two equally sized vectors (two-pass, centred).
/// Returns nullopt when either vector has zero variance or fewer than 2 entries.
template <typename DerivedA, typename DerivedB>
std::optional<typename DerivedA::Scalar> pearson(const Eigen::MatrixBase<DerivedA>& a,
                                                 const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() < 2 || a.size() != b.size()) return std::nullopt;
  const auto ca = (a.array() - a.mean()).eval();
  const auto cb = (b.array() - b.mean()).eval();
  const Scalar saa = ca.square().sum();
  const Scalar sbb = cb.square().sum();
  if (!(saa > Scalar(0)) || !(sbb > Scalar(0))) return std::nullopt;
  const Scalar r = (ca * cb).sum() / std::sqrt(saa * sbb);
  return std::clamp(r, Scalar(-1), Scalar(1));
}

/// Two-sided p-value of a Pearson r over n pairs (Student t, n - 2 df).
double correlation_p_value(double r, std::size_t n);

struct YearlyMeansRow {
  std::string label;        // fiscal year, or "All"
  std::optional<int> year;  // empty for the "All" row
  std::size_t observations = 0;
  std::vector<std::optional<double>> means;  // one per variable; empty = no data
};

struct YearlyMeans {
  std::vector<Variable> variables;
  std::vector<YearlyMeansRow> rows;
};

/// One row per fiscal year with observations, plus a trailing "All" row.
YearlyMeans yearly_means(const Panel& panel, const std::vector<Variable>& variables);

struct CorrelationCell {
  std::optional<double> r;
  std::optional<double> p;
  std::size_t n = 0;  // pairwise complete observations
};

struct CorrelationMatrix {
  std::vector<Variable> variables;
  std::vector<std::vector<CorrelationCell>> cells;

  const CorrelationCell& at(std::size_t i, std::size_t j) const { return cells[i][j]; }
};

/// Pairwise-complete Pearson correlations. Cells with fewer than 3 pairs or zero
/// variance are undefined. The diagonal holds r = 1, p = 0 whenever the variable
/// has at least 3 observations and nonzero variance.
CorrelationMatrix correlation_matrix(const Panel& panel, const std::vector<Variable>& variables);

}  // namespace capstruct
