#pragma once

// Target leverage models and partial-adjustment speed estimation.

#include "capstruct/effects.hpp"
#include "capstruct/panel_data.hpp"
#include "capstruct/quantile.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace capstruct {

enum class LeverageKind { Book, Market };
std::string_view to_string(LeverageKind k);
Variable leverage_variable(LeverageKind k);

struct RegimeRule {
  /// Recession iff gdp_growth < threshold (percent per year).
  double threshold = 0.0;
  /// Which year's regime an adjustment from t-1 to t belongs to.
  enum class Year { Current, Previous } assign = Year::Current;
};

inline const std::vector<double>& default_thetas() {
  static const std::vector<double> t{0.15, 0.35, 0.5, 0.75, 0.95};
  return t;
}

struct TargetModelSpec {
  LeverageKind leverage = LeverageKind::Book;
  std::vector<Variable> determinants = firm_determinants();
  std::vector<Variable> macro_vars = macro_variables();
  std::vector<double> thetas = default_thetas();
  std::optional<RegimeRule> regime_split;
  /// Fit the target model first, then regress the leverage change on the target gap.
  bool two_step = false;
  QuantileEffectsOptions effects;
  /// Worker threads across quantiles; results do not depend on it.
  int threads = 1;

  /// Throws ConfigError for an unusable specification.
  void validate() const;
};

/// Previous-year leverage for every panel row, when the same firm has year t-1.
std::vector<std::optional<double>> lag_leverage(const Panel& panel, LeverageKind kind);

struct AdjustmentResult {
  double theta = 0.5;
  LeverageKind leverage = LeverageKind::Book;
  double lag_coefficient = 0.0;
  double speed = 1.0;  // 1 - lag_coefficient
  double pseudo_r2 = 0.0;
  std::optional<Regime> regime;
  Index n_used = 0;
  /// lag_coefficient outside [0, 1].
  bool out_of_range = false;
  /// Every coefficient of the adjustment regression.
  NamedVector coefficients;
  /// Macro variables left out because they were collinear with the firm effects in
  /// this sample (e.g. a regime spanning a single year).
  std::vector<std::string> dropped;
};

/// Regression rows for one leverage kind: the listwise-complete rows of the panel
/// together with their lag (when `with_lag`).
struct AdjustmentSample {
  DesignMatrix design;
  GroupIndex groups;
  std::vector<std::size_t> panel_rows;
  std::vector<std::string> dropped;
};

/// Builds the sample restricted to panel rows where `keep` is true (all rows when
/// empty). Macro columns that are collinear with the group effects are dropped.
AdjustmentSample build_sample(const Panel& panel, const TargetModelSpec& spec, bool with_lag,
                              const std::vector<bool>& keep = {});

/// Quantile fit of leverage on determinants and macro variables with firm effects.
QuantileEffectsFit fit_target_model(const Panel& panel, const TargetModelSpec& spec, double theta);

/// One result per quantile in spec.thetas.
std::vector<AdjustmentResult> estimate_speed(const Panel& panel, const TargetModelSpec& spec);

struct RegimeSplit {
  std::map<int, Regime> by_year;
  std::size_t growth_years = 0;
  std::size_t recession_years = 0;
  std::vector<std::string> warnings;
};

RegimeSplit split_regimes(const MacroSeries& macro, const RegimeRule& rule);

struct RegimeSpeeds {
  std::map<Regime, std::vector<AdjustmentResult>> results;
  std::vector<std::string> diagnostics;
};

/// estimate_speed on each regime's rows, with regimes from spec.regime_split
/// (default rule when unset).
RegimeSpeeds estimate_speed_by_regime(const Panel& panel, const TargetModelSpec& spec);
/// Same, with an explicit year -> regime assignment.
RegimeSpeeds estimate_speed_by_regime(const Panel& panel, const TargetModelSpec& spec,
                                      const std::map<int, Regime>& regime_of_year);

}  // namespace capstruct
