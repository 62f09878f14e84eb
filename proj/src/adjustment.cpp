#include "capstruct/adjustment.hpp"

#include "capstruct/error.hpp"
#include "capstruct/parallel.hpp"

#include <algorithm>
#include <set>

namespace capstruct {

std::string_view to_string(LeverageKind k) { return k == LeverageKind::Book ? "book" : "market"; }

Variable leverage_variable(LeverageKind k) {
  return k == LeverageKind::Book ? Variable::Levb : Variable::Levm;
}

void TargetModelSpec::validate() const {
  if (determinants.empty()) throw ConfigError("target model: no firm determinants");
  std::set<Variable> seen;
  for (Variable v : determinants) {
    if (is_macro(v)) throw ConfigError("target model: " + std::string(variable_name(v)) +
                                       " is a macro variable, not a firm determinant");
    if (v == Variable::Levb || v == Variable::Levm)
      throw ConfigError("target model: leverage cannot be its own determinant");
    if (!seen.insert(v).second)
      throw ConfigError("target model: duplicate variable " + std::string(variable_name(v)));
  }
  for (Variable v : macro_vars) {
    if (!is_macro(v))
      throw ConfigError("target model: " + std::string(variable_name(v)) + " is not a macro variable");
    if (!seen.insert(v).second)
      throw ConfigError("target model: duplicate variable " + std::string(variable_name(v)));
  }
  if (thetas.empty()) throw ConfigError("target model: no quantiles requested");
  for (double t : thetas)
    if (!(t > 0.0 && t < 1.0)) throw ConfigError("target model: quantiles must lie in (0, 1)");
}

std::vector<std::optional<double>> lag_leverage(const Panel& panel, LeverageKind kind) {
  const Variable lev = leverage_variable(kind);
  std::vector<std::optional<double>> lag(panel.size());
  for (std::size_t i = 0; i < panel.size(); ++i)
    if (auto prev = panel.previous_year(i)) lag[i] = panel.value(*prev, lev);
  return lag;
}

namespace {

std::string lag_name(LeverageKind kind) {
  return std::string(variable_name(leverage_variable(kind))) + "_lag";
}

bool full_rank(const Matrix& x) {
  if (x.cols() == 0) return true;
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(1e-10);
  return qr.rank() == x.cols();
}

}  // namespace

AdjustmentSample build_sample(const Panel& panel, const TargetModelSpec& spec, bool with_lag,
                              const std::vector<bool>& keep) {
  spec.validate();
  const Variable lev = leverage_variable(spec.leverage);
  const auto lag = with_lag ? lag_leverage(panel, spec.leverage)
                            : std::vector<std::optional<double>>(panel.size());

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < panel.size(); ++i) {
    if (!keep.empty() && !keep[i]) continue;
    if (!panel.value(i, lev)) continue;
    if (with_lag && !lag[i]) continue;
    bool complete = true;
    for (Variable v : spec.determinants) complete = complete && panel.value(i, v).has_value();
    for (Variable v : spec.macro_vars) complete = complete && panel.value(i, v).has_value();
    if (complete) rows.push_back(i);
  }
  if (rows.empty()) throw DataError("no complete observations for the " +
                                    std::string(to_string(spec.leverage)) + " leverage model");

  const Index n = static_cast<Index>(rows.size());
  std::vector<std::string> firm_ids;
  firm_ids.reserve(rows.size());
  for (std::size_t i : rows) firm_ids.push_back(panel.rows()[i].firm_id);
  GroupIndex groups = GroupIndex::from_labels(std::span<const std::string>(firm_ids));

  auto column = [&](auto&& get) {
    Vector c(n);
    for (Index r = 0; r < n; ++r) c(r) = get(rows[static_cast<std::size_t>(r)]);
    return c;
  };

  std::vector<Vector> cols;
  std::vector<std::string> names;
  for (Variable v : spec.determinants) {
    cols.push_back(column([&](std::size_t i) { return *panel.value(i, v); }));
    names.emplace_back(variable_name(v));
    if ((cols.back().array() == cols.back()(0)).all())
      throw RankDeficientError("determinant " + names.back() + " is constant in the sample",
                               {names.back()});
  }
  if (with_lag) {
    cols.push_back(column([&](std::size_t i) { return *lag[i]; }));
    names.push_back(lag_name(spec.leverage));
  }

  auto assemble = [&](const std::vector<Vector>& c) {
    Matrix x(n, static_cast<Index>(c.size()));
    for (std::size_t j = 0; j < c.size(); ++j) x.col(static_cast<Index>(j)) = c[j];
    return x;
  };

  // Macro series vary only across years, so a sample spanning few years can make them
  // collinear with the firm effects. Such columns are dropped and reported.
  std::vector<std::string> dropped;
  const std::size_t insert_at = spec.determinants.size();
  std::size_t added = 0;
  for (Variable v : spec.macro_vars) {
    std::vector<Vector> trial = cols;
    std::vector<std::string> trial_names = names;
    const auto pos = static_cast<std::ptrdiff_t>(insert_at + added);
    trial.insert(trial.begin() + pos, column([&](std::size_t i) { return *panel.value(i, v); }));
    trial_names.insert(trial_names.begin() + pos, std::string(variable_name(v)));
    if (full_rank(within_transform(assemble(trial), groups))) {
      cols = std::move(trial);
      names = std::move(trial_names);
      ++added;
    } else {
      dropped.emplace_back(variable_name(v));
    }
  }

  Vector y = column([&](std::size_t i) { return *panel.value(i, lev); });
  return AdjustmentSample{DesignMatrix(assemble(cols), std::move(y), names), std::move(groups),
                          std::move(rows), std::move(dropped)};
}

QuantileEffectsFit fit_target_model(const Panel& panel, const TargetModelSpec& spec, double theta) {
  const AdjustmentSample s = build_sample(panel, spec, false);
  return fit_quantile_fixed_effects(s.design, s.groups, theta, spec.effects);
}

namespace {

AdjustmentResult one_step(const AdjustmentSample& s, const TargetModelSpec& spec, double theta) {
  const QuantileEffectsFit fit = fit_quantile_fixed_effects(s.design, s.groups, theta, spec.effects);
  AdjustmentResult r;
  r.lag_coefficient = fit.fit.coefficients[lag_name(spec.leverage)];
  r.pseudo_r2 = fit.fit.pseudo_r2;
  r.coefficients = fit.fit.coefficients;
  return r;
}

AdjustmentResult two_step(const AdjustmentSample& s, const TargetModelSpec& spec, double theta) {
  const Index n = s.design.rows();
  const Index k = s.design.cols() - 1;  // the lag is the last column
  const Matrix xt = s.design.x().leftCols(k);
  const Vector lag = s.design.x().col(k);
  const std::vector<std::string> target_names(s.design.names().begin(),
                                              s.design.names().begin() + k);
  const QuantileEffectsFit target =
      fit_quantile_fixed_effects(DesignMatrix(xt, s.design.y(), target_names), s.groups, theta,
                                 spec.effects);

  Vector fitted = Vector::Zero(n);
  if (auto c = target.fit.coefficients.find("const")) fitted.array() += target.fit.coefficients.values(*c);
  for (Index j = 0; j < k; ++j)
    fitted += target.fit.coefficients[target_names[static_cast<std::size_t>(j)]] * xt.col(j);
  for (Index i = 0; i < n; ++i) fitted(i) += target.group_effects(s.groups.of_row[static_cast<std::size_t>(i)]);

  const Vector change = s.design.y() - lag;
  Matrix gap(n, 1);
  gap.col(0) = fitted - lag;
  const QuantileFit second = fit_quantile(DesignMatrix::with_intercept(gap, change, {"gap"}), theta,
                                          spec.effects.fit);
  AdjustmentResult r;
  r.lag_coefficient = 1.0 - second.coefficients["gap"];
  r.pseudo_r2 = second.pseudo_r2;
  r.coefficients = second.coefficients;
  return r;
}

std::vector<AdjustmentResult> estimate_on(const AdjustmentSample& s, const TargetModelSpec& spec,
                                          std::optional<Regime> regime) {
  std::vector<AdjustmentResult> out(spec.thetas.size());
  parallel_for(spec.thetas.size(), spec.threads, [&](std::size_t t) {
    const double theta = spec.thetas[t];
    AdjustmentResult r = spec.two_step ? two_step(s, spec, theta) : one_step(s, spec, theta);
    r.theta = theta;
    r.leverage = spec.leverage;
    r.speed = 1.0 - r.lag_coefficient;
    r.regime = regime;
    r.n_used = s.design.rows();
    r.out_of_range = r.lag_coefficient < 0.0 || r.lag_coefficient > 1.0;
    r.dropped = s.dropped;
    out[t] = std::move(r);
  });
  return out;
}

}  // namespace

std::vector<AdjustmentResult> estimate_speed(const Panel& panel, const TargetModelSpec& spec) {
  return estimate_on(build_sample(panel, spec, true), spec, std::nullopt);
}

RegimeSplit split_regimes(const MacroSeries& macro, const RegimeRule& rule) {
  RegimeSplit out;
  for (const auto& y : macro.years()) {
    const Regime r = classify_regime(y.gdp_growth, rule.threshold);
    out.by_year[y.year] = r;
    ++(r == Regime::Growth ? out.growth_years : out.recession_years);
  }
  for (Regime r : {Regime::Growth, Regime::Recession}) {
    const std::size_t count = r == Regime::Growth ? out.growth_years : out.recession_years;
    if (count == 0)
      out.warnings.push_back("regime " + std::string(to_string(r)) + " has no years at threshold " +
                             std::to_string(rule.threshold));
  }
  return out;
}

RegimeSpeeds estimate_speed_by_regime(const Panel& panel, const TargetModelSpec& spec) {
  const RegimeRule rule = spec.regime_split.value_or(RegimeRule{});
  RegimeSplit split = split_regimes(panel.macro(), rule);
  RegimeSpeeds out = estimate_speed_by_regime(panel, spec, split.by_year);
  out.diagnostics.insert(out.diagnostics.begin(), split.warnings.begin(), split.warnings.end());
  return out;
}

RegimeSpeeds estimate_speed_by_regime(const Panel& panel, const TargetModelSpec& spec,
                                      const std::map<int, Regime>& regime_of_year) {
  const bool previous =
      spec.regime_split && spec.regime_split->assign == RegimeRule::Year::Previous;
  RegimeSpeeds out;
  for (Regime regime : {Regime::Growth, Regime::Recession}) {
    std::vector<bool> keep(panel.size(), false);
    bool any = false;
    for (std::size_t i = 0; i < panel.size(); ++i) {
      const int year = panel.rows()[i].fiscal_year - (previous ? 1 : 0);
      auto it = regime_of_year.find(year);
      keep[i] = it != regime_of_year.end() && it->second == regime;
      any = any || keep[i];
    }
    const std::string label(to_string(regime));
    if (!any) {
      out.diagnostics.push_back(label + ": no observations; regime skipped");
      continue;
    }
    std::optional<AdjustmentSample> sample;
    try {
      sample.emplace(build_sample(panel, spec, true, keep));
    } catch (const DataError& e) {
      out.diagnostics.push_back(label + ": " + e.what() + "; regime skipped");
      continue;
    }
    const Index needed = 10 * sample->design.cols();
    if (sample->design.rows() < needed) {
      out.diagnostics.push_back(label + ": " + std::to_string(sample->design.rows()) +
                                " usable rows, fewer than the " + std::to_string(needed) +
                                " required; regime skipped");
      continue;
    }
    if (!sample->dropped.empty()) {
      std::string list;
      for (const auto& d : sample->dropped) list += (list.empty() ? "" : ", ") + d;
      out.diagnostics.push_back(label + ": dropped collinear macro variables: " + list);
    }
    out.results[regime] = estimate_on(*sample, spec, regime);
  }
  return out;
}

}  // namespace capstruct
