#include "doctest.h"

#include "capstruct/adjustment.hpp"
#include "capstruct/synthgen.hpp"
#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>

using namespace capstruct;

namespace {

SynthConfig small_config(std::uint64_t seed, int firms = 60, int years = 10) {
  SynthConfig c;
  c.n_firms = firms;
  c.t_max = years;
  c.seed = seed;
  return c;
}

TargetModelSpec median_spec() {
  TargetModelSpec s;
  s.thetas = {0.5};
  return s;
}

std::vector<MacroYear> alternating_path(int start, int years) {
  std::vector<MacroYear> path;
  for (int t = 0; t < years; ++t) {
    MacroYear m;
    m.year = start + t;
    m.inflation = 2.0 + 0.3 * std::sin(t);
    m.gdp_growth = t % 2 == 0 ? 2.5 + 0.1 * t : -1.0 - 0.05 * t;
    path.push_back(m);
  }
  return path;
}

}  // namespace

TEST_CASE("lag leverage: first years and gaps have no lag") {
  auto recs = testing::small_records();
  recs.erase(std::remove_if(recs.begin(), recs.end(),
                            [](const FirmYearRecord& r) { return r.firm_id == "B" && r.fiscal_year == 2001; }),
             recs.end());
  const Panel p = derive_variables(ingest_panel(recs).panel, testing::macro_for(2000, 2002),
                                   TaxSchedule::constant(0.21));
  const auto lag = lag_leverage(p, LeverageKind::Book);
  // A: 2000-2002 -> two usable rows; B: 2000, 2002 -> none.
  REQUIRE(lag.size() == 5);
  CHECK_FALSE(lag[0].has_value());
  CHECK(lag[1] == p.rows()[0].levb);
  CHECK(lag[2] == p.rows()[1].levb);
  CHECK_FALSE(lag[3].has_value());
  CHECK_FALSE(lag[4].has_value());
}

TEST_CASE("lag leverage count equals the number of consecutive-year pairs") {
  SynthConfig c = small_config(5, 40, 12);
  c.attrition = 0.15;
  const SynthPanel s = generate_panel(c);
  // Drop random rows to create gaps.
  testing::Gen g(5);
  std::vector<ObservationRow> rows;
  for (const auto& r : s.panel.rows())
    if (g.coin(0.85)) rows.push_back(r);
  const Panel p = s.panel.with_rows(rows);
  std::size_t pairs = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    pairs += rows[i].firm_id == rows[i - 1].firm_id && rows[i].fiscal_year == rows[i - 1].fiscal_year + 1;
  const auto lag = lag_leverage(p, LeverageKind::Book);
  CHECK(static_cast<std::size_t>(std::count_if(lag.begin(), lag.end(),
                                               [](const auto& v) { return v.has_value(); })) == pairs);
}

TEST_CASE("speed and lag coefficient sum to one") {
  const SynthPanel s = generate_panel(small_config(7));
  TargetModelSpec spec;
  spec.thetas = {0.15, 0.5, 0.95};
  for (LeverageKind k : {LeverageKind::Book, LeverageKind::Market}) {
    spec.leverage = k;
    for (const auto& r : estimate_speed(s.panel, spec)) {
      CHECK(r.speed + r.lag_coefficient == 1.0);
      CHECK(r.speed == 1.0 - r.lag_coefficient);
      CHECK(r.out_of_range == (r.lag_coefficient < 0.0 || r.lag_coefficient > 1.0));
      CHECK(r.leverage == k);
      CHECK(r.coefficients[k == LeverageKind::Book ? "levb_lag" : "levm_lag"] == r.lag_coefficient);
    }
  }
}

TEST_CASE("known speed of 0.5 is recovered at the median") {
  SynthConfig c;
  c.delta = 0.5;
  c.seed = 2;
  const SynthPanel s = generate_panel(c);
  const auto r = estimate_speed(s.panel, median_spec());
  REQUIRE(r.size() == 1);
  CHECK(r[0].speed >= 0.45);
  CHECK(r[0].speed <= 0.55);
  CHECK(r[0].n_used == 500 * 19);
}

TEST_CASE("recovery error shrinks with the number of firms") {
  double err_small = 0.0, err_large = 0.0;
  const int reps = 4;
  for (int rep = 0; rep < reps; ++rep) {
    for (int firms : {100, 500}) {
      SynthConfig c;
      c.n_firms = firms;
      c.seed = 100 + rep;
      const double speed = estimate_speed(generate_panel(c).panel, median_spec())[0].speed;
      (firms == 100 ? err_small : err_large) += std::abs(speed - c.delta) / reps;
    }
  }
  CHECK(err_large < err_small);
}

TEST_CASE("results do not depend on thread count") {
  const SynthPanel s = generate_panel(small_config(9));
  TargetModelSpec spec;
  const auto a = estimate_speed(s.panel, spec);
  spec.threads = 3;
  const auto b = estimate_speed(s.panel, spec);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].lag_coefficient == b[i].lag_coefficient);
    CHECK(a[i].coefficients == b[i].coefficients);
  }
}

TEST_CASE("results are invariant to firm relabelling order") {
  SynthConfig c = small_config(10, 30, 8);
  const SynthPanel s = generate_panel(c);
  // Rename firms so that their sort order reverses; the sample is the same set of rows.
  std::vector<FirmYearRecord> renamed = s.records;
  for (auto& r : renamed) r.firm_id = "Z" + std::to_string(999 - std::stoi(r.firm_id.substr(1)));
  const Panel q = derive_variables(ingest_panel(renamed).panel, s.macro, TaxSchedule::constant(c.tax_rate));
  const auto a = estimate_speed(s.panel, median_spec());
  const auto b = estimate_speed(q, median_spec());
  CHECK(a[0].lag_coefficient == doctest::Approx(b[0].lag_coefficient).epsilon(1e-9));
  CHECK(a[0].n_used == b[0].n_used);
}

TEST_CASE("two-step estimation reports a speed per quantile") {
  const SynthPanel s = generate_panel(small_config(11, 200, 12));
  TargetModelSpec spec = median_spec();
  spec.two_step = true;
  const auto r = estimate_speed(s.panel, spec);
  REQUIRE(r.size() == 1);
  CHECK(r[0].speed + r[0].lag_coefficient == 1.0);
  // The static target fit absorbs part of the partial adjustment, so two-step speeds run
  // below the one-step estimate on this process; only the range is checked.
  CHECK(r[0].speed > 0.0);
  CHECK(r[0].speed < 1.0);
}

TEST_CASE("split regimes by sign and by shifted threshold") {
  std::vector<MacroYear> ys;
  const double growth[] = {2.1, -0.3, 1.0};
  for (int i = 0; i < 3; ++i) ys.push_back({2000 + i, 2.0, growth[i], Regime::Growth});
  const MacroSeries m(ys, 0.0);
  const RegimeSplit a = split_regimes(m, RegimeRule{0.0});
  CHECK(a.by_year.at(2000) == Regime::Growth);
  CHECK(a.by_year.at(2001) == Regime::Recession);
  CHECK(a.by_year.at(2002) == Regime::Growth);
  CHECK(a.growth_years == 2);
  CHECK(a.recession_years == 1);
  CHECK(a.warnings.empty());
  const RegimeSplit b = split_regimes(m, RegimeRule{2.0});
  CHECK(b.by_year.at(2000) == Regime::Growth);
  CHECK(b.by_year.at(2001) == Regime::Recession);
  CHECK(b.by_year.at(2002) == Regime::Recession);
  std::vector<MacroYear> positive{{2000, 1.0, 1.0, Regime::Growth}, {2001, 1.0, 3.0, Regime::Growth}};
  const RegimeSplit c = split_regimes(MacroSeries(positive, 0.0), RegimeRule{});
  CHECK(c.recession_years == 0);
  CHECK(c.warnings.size() == 1);
}

TEST_CASE("a single-regime panel reproduces the unsplit estimate exactly") {
  SynthConfig c = small_config(12, 80, 10);
  std::vector<MacroYear> path;
  for (int t = 0; t < c.t_max; ++t) path.push_back({c.start_year + t, 2.0 + 0.1 * t, 1.0 + 0.2 * t, Regime::Growth});
  c.macro_path = path;
  const SynthPanel s = generate_panel(c);
  const TargetModelSpec spec = median_spec();
  const RegimeSpeeds by = estimate_speed_by_regime(s.panel, spec);
  const auto whole = estimate_speed(s.panel, spec);
  REQUIRE(by.results.count(Regime::Growth) == 1);
  CHECK(by.results.count(Regime::Recession) == 0);
  CHECK(by.results.at(Regime::Growth)[0].lag_coefficient == whole[0].lag_coefficient);
  CHECK(by.results.at(Regime::Growth)[0].coefficients == whole[0].coefficients);
  CHECK_FALSE(by.diagnostics.empty());
}

TEST_CASE("swapping regime labels swaps the results") {
  SynthConfig c = small_config(13, 120, 10);
  c.macro_path = alternating_path(c.start_year, c.t_max);
  const SynthPanel s = generate_panel(c);
  const TargetModelSpec spec = median_spec();
  const RegimeSplit split = split_regimes(s.macro, RegimeRule{});
  std::map<int, Regime> swapped;
  for (const auto& [y, r] : split.by_year)
    swapped[y] = r == Regime::Growth ? Regime::Recession : Regime::Growth;
  const RegimeSpeeds a = estimate_speed_by_regime(s.panel, spec, split.by_year);
  const RegimeSpeeds b = estimate_speed_by_regime(s.panel, spec, swapped);
  REQUIRE(a.results.size() == 2);
  REQUIRE(b.results.size() == 2);
  CHECK(a.results.at(Regime::Growth)[0].coefficients == b.results.at(Regime::Recession)[0].coefficients);
  CHECK(a.results.at(Regime::Recession)[0].coefficients == b.results.at(Regime::Growth)[0].coefficients);
}

TEST_CASE("two-regime speeds are recovered") {
  SynthConfig c;
  c.delta = 0.7;
  c.delta_recession = 0.3;
  c.seed = 4;
  c.macro_path = alternating_path(c.start_year, c.t_max);
  const SynthPanel s = generate_panel(c);
  const RegimeSpeeds r = estimate_speed_by_regime(s.panel, median_spec());
  REQUIRE(r.results.size() == 2);
  CHECK(std::abs(r.results.at(Regime::Growth)[0].speed - 0.7) <= 0.07);
  CHECK(std::abs(r.results.at(Regime::Recession)[0].speed - 0.3) <= 0.07);
  CHECK(r.results.at(Regime::Growth)[0].regime == Regime::Growth);
}

TEST_CASE("undersized regimes are skipped with a diagnostic") {
  SynthConfig c = small_config(14, 5, 6);
  c.macro_path = alternating_path(c.start_year, c.t_max);
  const SynthPanel s = generate_panel(c);
  const RegimeSpeeds r = estimate_speed_by_regime(s.panel, median_spec());
  CHECK(r.results.empty());
  CHECK(r.diagnostics.size() >= 2);
}

TEST_CASE("specification validation") {
  TargetModelSpec s;
  s.determinants.clear();
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = TargetModelSpec{};
  s.determinants.push_back(Variable::Levb);
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = TargetModelSpec{};
  s.thetas = {1.2};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = TargetModelSpec{};
  s.macro_vars = {Variable::Ndts};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK_NOTHROW(TargetModelSpec{}.validate());
}

TEST_CASE("target model includes macro effects and a mean firm effect") {
  const SynthPanel s = generate_panel(small_config(15, 150, 10));
  const QuantileEffectsFit f = fit_target_model(s.panel, TargetModelSpec{}, 0.5);
  CHECK(f.fit.coefficients.find("inflation").has_value());
  CHECK(f.fit.coefficients.find("gdp_growth").has_value());
  CHECK(f.fit.coefficients.size() == 9);
  CHECK(f.group_effects.size() == 150);
  CHECK(f.mean_effect == doctest::Approx(f.group_effects.mean()));
}
