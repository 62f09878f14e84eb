#include "capstruct/effects.hpp"

#include "capstruct/error.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <map>

namespace capstruct {

// ---------------------------------------------------------------------------
// Groups
// ---------------------------------------------------------------------------

namespace {

template <typename Label>
GroupIndex index_labels(std::span<const Label> labels, auto to_text) {
  GroupIndex g;
  std::map<Label, int> slot;
  g.of_row.reserve(labels.size());
  for (const auto& label : labels) {
    auto [it, inserted] = slot.emplace(label, g.count());
    if (inserted) {
      g.labels.push_back(to_text(label));
      g.sizes.push_back(0);
    }
    g.of_row.push_back(it->second);
    ++g.sizes[static_cast<std::size_t>(it->second)];
  }
  return g;
}

}  // namespace

GroupIndex GroupIndex::from_labels(std::span<const int> labels) {
  return index_labels(labels, [](int v) { return std::to_string(v); });
}

GroupIndex GroupIndex::from_labels(std::span<const std::string> labels) {
  return index_labels(labels, [](const std::string& s) { return s; });
}

GroupIndex GroupIndex::select_rows(std::span<const Index> rows) const {
  std::vector<std::string> picked;
  picked.reserve(rows.size());
  for (Index i : rows) picked.push_back(labels[static_cast<std::size_t>(of_row[i])]);
  return from_labels(std::span<const std::string>(picked));
}

// ---------------------------------------------------------------------------
// Least squares helpers
// ---------------------------------------------------------------------------

namespace {

struct Ols {
  Vector beta;
  Matrix xtx_inverse;
  Vector residual;
  double ssr = 0.0;
};

std::string join(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
  return out;
}

Ols least_squares(const Matrix& x, const Vector& y, const std::vector<std::string>& names,
                  const std::string& context) {
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(1e-10);
  const Index k = x.cols();
  if (qr.rank() < k) {
    std::vector<std::string> collinear;
    const auto& perm = qr.colsPermutation().indices();
    for (Index j = qr.rank(); j < k; ++j) collinear.push_back(names[static_cast<std::size_t>(perm(j))]);
    throw RankDeficientError(context + ": collinear columns: " + join(collinear), collinear);
  }
  Ols out;
  out.beta = qr.solve(y);
  out.residual = y - x * out.beta;
  out.ssr = out.residual.squaredNorm();
  const Matrix r = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  const Matrix r_inv = r.triangularView<Eigen::Upper>().solve(Matrix::Identity(k, k));
  const Matrix permuted = r_inv * r_inv.transpose();
  const auto p = qr.colsPermutation();
  out.xtx_inverse = p * permuted * p.transpose();
  return out;
}

struct Split {
  Matrix x;  // non-constant columns
  std::vector<std::string> names;
};

Split slopes_only(const DesignMatrix& design) {
  Split s;
  const auto skip = design.intercept();
  s.x.resize(design.rows(), design.cols() - (skip ? 1 : 0));
  Index c = 0;
  for (Index j = 0; j < design.cols(); ++j) {
    if (skip && *skip == j) continue;
    s.x.col(c++) = design.x().col(j);
    s.names.push_back(design.names()[static_cast<std::size_t>(j)]);
  }
  return s;
}

Matrix prepend_ones(const Matrix& x) {
  Matrix out(x.rows(), x.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(x.cols()) = x;
  return out;
}

void require_groups(const DesignMatrix& design, const GroupIndex& groups) {
  if (groups.rows() != design.rows())
    throw DataError("group labels must cover every row of the design");
}

/// Within-transformed slopes; throws for time-invariant or collinear columns.
Matrix demeaned_slopes(const Split& s, const GroupIndex& groups) {
  Matrix xw = within_transform(s.x, groups);
  for (Index j = 0; j < xw.cols(); ++j) {
    if (xw.col(j).norm() <= 1e-10 * std::max(1.0, s.x.col(j).norm())) {
      const std::string& name = s.names[static_cast<std::size_t>(j)];
      throw RankDeficientError("column " + name + " has no variation within groups", {name});
    }
  }
  return xw;
}

}  // namespace

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

EffectsFit fit_fixed_effects(const DesignMatrix& design, const GroupIndex& groups) {
  require_groups(design, groups);
  if (std::all_of(groups.sizes.begin(), groups.sizes.end(), [](Index s) { return s < 2; }))
    throw DataError("fixed effects: no within variation (every group has one observation)");

  const Split s = slopes_only(design);
  const Index n = design.rows();
  const Index k = s.x.cols();
  const Index g = groups.count();
  const Matrix xw = demeaned_slopes(s, groups);
  const Vector yw = within_transform(design.y(), groups);
  const Index df = n - k - g;
  if (df <= 0) throw DataError("fixed effects: no residual degrees of freedom");

  EffectsFit fit;
  fit.kind = EffectsKind::FixedWithin;
  fit.n = n;
  fit.df_resid = df;
  Vector beta = Vector::Zero(k);
  if (k > 0) {
    Ols ols = least_squares(xw, yw, s.names, "fixed effects");
    beta = ols.beta;
    fit.ssr = ols.ssr;
    fit.vcov = ols.xtx_inverse;
  } else {
    fit.ssr = yw.squaredNorm();
    fit.vcov = Matrix(0, 0);
  }
  const double s2 = fit.ssr / static_cast<double>(df);
  fit.vcov *= s2;
  fit.sigma_e = std::sqrt(s2);
  fit.coefficients = NamedVector(s.names, beta);

  const Matrix xbar = group_means(s.x, groups);
  const Vector ybar = group_means(design.y(), groups);
  const Vector a = ybar - xbar * beta;
  fit.intercept = a.mean();
  fit.group_effects = a.array() - *fit.intercept;
  fit.group_labels = groups.labels;
  return fit;
}

EffectsFit fit_pooled_ols(const DesignMatrix& design) {
  const Split s = slopes_only(design);
  const Matrix x = prepend_ones(s.x);
  std::vector<std::string> names{"const"};
  names.insert(names.end(), s.names.begin(), s.names.end());
  const Index n = design.rows();
  const Index df = n - x.cols();
  if (df <= 0) throw DataError("pooled OLS: no residual degrees of freedom");
  Ols ols = least_squares(x, design.y(), names, "pooled OLS");

  EffectsFit fit;
  fit.kind = EffectsKind::PooledOLS;
  fit.n = n;
  fit.df_resid = df;
  fit.ssr = ols.ssr;
  fit.vcov = ols.xtx_inverse * (ols.ssr / static_cast<double>(df));
  fit.coefficients = NamedVector(std::move(names), ols.beta);
  return fit;
}

EffectsFit fit_random_effects(const DesignMatrix& design, const GroupIndex& groups) {
  require_groups(design, groups);
  const EffectsFit within = fit_fixed_effects(design, groups);
  const double sigma_e2 = *within.sigma_e * *within.sigma_e;

  const Split s = slopes_only(design);
  const Matrix x = prepend_ones(s.x);
  std::vector<std::string> names{"const"};
  names.insert(names.end(), s.names.begin(), s.names.end());
  const Index n = design.rows();
  const Index big_k = x.cols();
  const Index g = groups.count();
  if (g <= big_k)
    throw DataError("random effects: variance components need more groups than coefficients");

  // Between regression on group means, weighted by group size (row-level projection).
  const Matrix m = group_means(x, groups);
  const Vector ybar = group_means(design.y(), groups);
  Vector t(g);
  for (Index j = 0; j < g; ++j) t(j) = static_cast<double>(groups.sizes[static_cast<std::size_t>(j)]);
  const Vector root_t = t.cwiseSqrt();
  Ols between = least_squares(root_t.asDiagonal() * m, root_t.asDiagonal() * ybar, names,
                              "random effects between regression");
  const double ssr_between = between.ssr;
  // tr((X'PX)^{-1} X'ZZ'X) with X'PX = M' T M and X'ZZ'X = M' T^2 M.
  const Matrix xzzx = m.transpose() * t.cwiseAbs2().asDiagonal() * m;
  const double trace = (between.xtx_inverse * xzzx).trace();
  const double denom = static_cast<double>(n) - trace;
  double sigma_u2 = denom > 0.0
                        ? (ssr_between - static_cast<double>(g - big_k) * sigma_e2) / denom
                        : 0.0;

  bool clamped = false;
  if (!(sigma_u2 > 0.0)) {
    sigma_u2 = 0.0;
    clamped = true;
  }

  EffectsFit fit;
  if (clamped) {
    fit = fit_pooled_ols(design);
  } else {
    if (!(sigma_e2 > 0.0))
      throw DataError("random effects: zero idiosyncratic variance, quasi-demeaning undefined");
    Vector lambda(g);
    for (Index j = 0; j < g; ++j)
      lambda(j) = 1.0 - std::sqrt(sigma_e2 / (t(j) * sigma_u2 + sigma_e2));
    Matrix xs = x;
    Vector ys = design.y();
    for (Index i = 0; i < n; ++i) {
      const int gi = groups.of_row[static_cast<std::size_t>(i)];
      xs.row(i) -= lambda(gi) * m.row(gi);
      ys(i) -= lambda(gi) * ybar(gi);
    }
    Ols gls = least_squares(xs, ys, names, "random effects");
    fit.n = n;
    fit.df_resid = n - big_k;
    fit.ssr = gls.ssr;
    fit.vcov = gls.xtx_inverse * sigma_e2;
    fit.coefficients = NamedVector(std::move(names), gls.beta);
  }
  fit.kind = EffectsKind::RandomGLS;
  fit.sigma_e = std::sqrt(sigma_e2);
  fit.sigma_u = std::sqrt(sigma_u2);
  fit.sigma_u_clamped = clamped;
  return fit;
}

// ---------------------------------------------------------------------------
// Hausman
// ---------------------------------------------------------------------------

std::string_view to_string(ModelChoice c) {
  return c == ModelChoice::FixedEffects ? "Fixed Effects" : "Random Effects";
}

namespace {

double chi_square_tail(double statistic, int df) {
  if (statistic <= 0.0) return 1.0;
  boost::math::chi_squared dist(static_cast<double>(df));
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

}  // namespace

HausmanResult hausman_from_statistic(double statistic, int df, double alpha) {
  if (df < 1) throw DomainError("chi-square degrees of freedom must be positive");
  if (!(statistic >= 0.0)) throw DomainError("chi-square statistic must be nonnegative");
  HausmanResult h;
  h.statistic = statistic;
  h.df = df;
  h.p_value = chi_square_tail(statistic, df);
  h.decision = h.p_value < alpha ? ModelChoice::FixedEffects : ModelChoice::RandomEffects;
  return h;
}

HausmanResult hausman_test(const EffectsFit& fe, const EffectsFit& re, double alpha) {
  std::vector<Index> fi, ri;
  std::vector<std::string> compared;
  for (std::size_t j = 0; j < fe.coefficients.names.size(); ++j) {
    const std::string& name = fe.coefficients.names[j];
    if (name == "const") continue;
    if (auto r = re.coefficients.find(name)) {
      fi.push_back(static_cast<Index>(j));
      ri.push_back(*r);
      compared.push_back(name);
    }
  }
  const Index m = static_cast<Index>(compared.size());
  if (m == 0) throw DataError("hausman test: the fits share no slope coefficients");

  Vector d(m);
  Matrix v(m, m);
  for (Index a = 0; a < m; ++a) {
    d(a) = fe.coefficients.values(fi[a]) - re.coefficients.values(ri[a]);
    for (Index b = 0; b < m; ++b) v(a, b) = fe.vcov(fi[a], fi[b]) - re.vcov(ri[a], ri[b]);
  }
  v = 0.5 * (v + v.transpose()).eval();

  double scale = 0.0;
  for (Index a = 0; a < m; ++a)
    scale = std::max({scale, std::abs(fe.vcov(fi[a], fi[a])), std::abs(re.vcov(ri[a], ri[a]))});
  const double tol = 1e-10 * scale;

  Eigen::SelfAdjointEigenSolver<Matrix> eig(v);
  const Vector proj = eig.eigenvectors().transpose() * d;
  double statistic = 0.0;
  int rank = 0;
  for (Index j = 0; j < m; ++j) {
    const double e = eig.eigenvalues()(j);
    if (e > tol) {
      statistic += proj(j) * proj(j) / e;
      ++rank;
    }
  }

  HausmanResult h;
  h.compared = std::move(compared);
  h.rank_deficient = rank < m;
  if (rank == 0) {
    h.statistic = 0.0;
    h.df = static_cast<int>(m);
    h.p_value = 1.0;
    h.decision = ModelChoice::RandomEffects;
    return h;
  }
  HausmanResult base = hausman_from_statistic(statistic, rank, alpha);
  base.compared = std::move(h.compared);
  base.rank_deficient = h.rank_deficient;
  return base;
}

}  // namespace capstruct
