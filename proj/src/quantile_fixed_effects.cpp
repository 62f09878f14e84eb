#include "capstruct/detail/design_operator.hpp"
#include "capstruct/effects.hpp"
#include "capstruct/error.hpp"

namespace capstruct {
namespace {

struct Slopes {
  Matrix x;
  std::vector<std::string> names;
};

Slopes drop_intercept(const DesignMatrix& design) {
  Slopes s;
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

void require_rank(const Matrix& x, const std::vector<std::string>& names, const char* context) {
  if (x.cols() == 0) return;
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() == x.cols()) return;
  std::vector<std::string> bad;
  std::string list;
  const auto& perm = qr.colsPermutation().indices();
  for (Index j = qr.rank(); j < x.cols(); ++j) {
    bad.push_back(names[static_cast<std::size_t>(perm(j))]);
    list += (list.empty() ? "" : ", ") + bad.back();
  }
  throw RankDeficientError(std::string(context) + ": collinear columns: " + list, std::move(bad));
}

}  // namespace

QuantileEffectsFit fit_quantile_fixed_effects(const DesignMatrix& design, const GroupIndex& groups,
                                              double theta, const QuantileEffectsOptions& options) {
  require_quantile(theta);
  if (groups.rows() != design.rows())
    throw DataError("group labels must cover every row of the design");
  const Index n = design.rows();
  const int g = groups.count();
  if (g == 0) throw DataError("quantile fixed effects on an empty design");

  Slopes s = drop_intercept(design);
  const Index k = s.x.cols();
  QuantileEffectsFit out;
  out.group_labels = groups.labels;

  if (options.mode == QuantileEffectsMode::Dummy) {
    if (g > options.max_groups) {
      throw ConfigError("quantile fixed effects: " + std::to_string(g) +
                        " groups exceed the indicator cap of " + std::to_string(options.max_groups) +
                        "; use penalized mode for large panels");
    }
    if (n < k + g) throw DataError("quantile fixed effects: fewer rows than slopes plus groups");
    for (Index j = 0; j < k; ++j) {
      const Vector w = within_transform(s.x.col(j), groups);
      if (w.norm() <= 1e-10 * std::max(1.0, s.x.col(j).norm())) {
        const std::string& name = s.names[static_cast<std::size_t>(j)];
        throw RankDeficientError("column " + name + " has no variation within groups", {name});
      }
    }
    require_rank(within_transform(s.x, groups), s.names, "quantile fixed effects");

    detail::GroupedOperator op(s.x, groups.of_row, Vector::Ones(n), g);
    out.fit = detail::solve_quantile(op, design.y(), theta, options.fit, true);
    const Vector all = out.fit.coefficients.values;
    out.fit.coefficients = NamedVector(s.names, all.head(k));
    out.group_effects = all.tail(g);
    out.mean_effect = out.group_effects.mean();
  } else {
    if (!(options.lambda > 0.0) || !std::isfinite(options.lambda))
      throw ConfigError("penalized quantile fixed effects: lambda must be positive and finite");
    std::vector<std::string> names{"const"};
    names.insert(names.end(), s.names.begin(), s.names.end());
    Matrix x = Matrix::Zero(n + 2 * g, k + 1);
    x.topLeftCorner(n, 1).setOnes();
    x.topRightCorner(n, k) = s.x;
    require_rank(x.topRows(n), names, "penalized quantile fixed effects");

    // Each group gets rows +lambda*e_g and -lambda*e_g with zero response, whose joint
    // check loss is exactly lambda*|a_g| at every theta.
    std::vector<int> group = groups.of_row;
    Vector weight = Vector::Ones(n + 2 * g);
    Vector y = Vector::Zero(n + 2 * g);
    y.head(n) = design.y();
    for (int j = 0; j < g; ++j) {
      group.push_back(j);
      group.push_back(j);
      weight(n + 2 * j) = options.lambda;
      weight(n + 2 * j + 1) = -options.lambda;
    }
    detail::GroupedOperator op(x, std::move(group), std::move(weight), g);
    out.fit = detail::solve_quantile(op, y, theta, options.fit, true);
    const Vector all = out.fit.coefficients.values;
    out.group_effects = all.tail(g);
    out.mean_effect = all(0) + out.group_effects.mean();

    // Objective and sign counts over the data rows only.
    Vector residual = design.y() - s.x * all.segment(1, k);
    for (Index i = 0; i < n; ++i)
      residual(i) -= all(0) + out.group_effects(groups.of_row[static_cast<std::size_t>(i)]);
    out.fit.objective = check_loss(residual, theta);
    detail::count_signs(residual, design.y().size() ? design.y().cwiseAbs().maxCoeff() : 1.0,
                        options.fit.zero_tolerance, out.fit);
    out.fit.coefficients = NamedVector(std::move(names), all.head(k + 1));
  }

  const double baseline = intercept_only_objective(design.y(), theta);
  out.fit.pseudo_r2 = baseline > 0.0 ? std::clamp(1.0 - out.fit.objective / baseline, 0.0, 1.0) : 0.0;
  detail::notify_fit_observer(out.fit);
  return out;
}

}  // namespace capstruct
