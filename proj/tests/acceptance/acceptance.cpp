// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "capstruct/descriptives.hpp"
#include "capstruct/effects.hpp"
#include "capstruct/lp_oracle.hpp"
#include "capstruct/pipeline.hpp"
#include "capstruct/quantile.hpp"
#include "capstruct/report.hpp"
#include "capstruct/synthgen.hpp"
#include "support/audit.hpp"
#include "support/oracles.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

using namespace capstruct;
using testing::Gen;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (ok) return;
    if (pass) detail = what;
    pass = false;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

int workers() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

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

Outcome oracle_equivalence() {
  Outcome o;
  Gen g(20240601);
  const auto t0 = Clock::now();
  double worst = 0.0;
  const int instances = 250;
  for (int rep = 0; rep < instances; ++rep) {
    const Index n = g.integer(3, 50);
    const Index k = std::min<Index>(g.integer(1, 3), n);
    const DesignMatrix d = g.design(n, k, g.coin(0.8));
    const double theta = g.integer(1, 9) / 10.0;
    const double a = fit_quantile(d, theta).objective;
    const double b = fit_quantile_oracle(d, theta).objective;
    worst = std::max(worst, std::abs(a - b));
  }
  const double elapsed = seconds_since(t0);
  o.require(worst <= 1e-8, fmt::format("max |objective gap| {:.3e}", worst));
  o.require(elapsed < 60.0, fmt::format("took {:.1f}s", elapsed));
  if (o.pass) o.detail = fmt::format("{} instances, max gap {:.2e}, {:.2f}s", instances, worst, elapsed);
  return o;
}

Outcome equivariance() {
  Outcome o;
  Gen g(31337);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const Index k = g.integer(2, 4);
    const DesignMatrix d = g.design(g.integer(15, 50), k, true);
    const double t = g.uniform(0.1, 0.9);
    const QuantileFit base = fit_quantile(d, t);
    const Vector& b = base.coefficients.values;

    Vector gamma(k);
    for (Index j = 0; j < k; ++j) gamma[j] = g.normal(0.0, 2.0);
    const QuantileFit shifted = fit_quantile(d.with_response(d.y() + d.x() * gamma), t);
    for (Index j = 0; j < k; ++j)
      worst = std::max(worst, rel_diff(shifted.coefficients.values[j], b[j] + gamma[j]));

    const double c = std::exp(g.uniform(-2.0, 2.0));
    const QuantileFit scaled = fit_quantile(d.with_response(c * d.y()), t);
    worst = std::max(worst, rel_diff(scaled.objective, c * base.objective));
    for (Index j = 0; j < k; ++j) worst = std::max(worst, rel_diff(scaled.coefficients.values[j], c * b[j]));

    const Index col = g.integer(1, static_cast<int>(k) - 1);
    const double s = std::exp(g.uniform(-2.0, 2.0));
    Matrix x = d.x();
    x.col(col) *= s;
    const QuantileFit rescaled = fit_quantile(DesignMatrix(x, d.y(), d.names()), t);
    worst = std::max(worst, rel_diff(rescaled.coefficients.values[col], b[col] / s));
    worst = std::max(worst, rel_diff(rescaled.objective, base.objective));
  }
  o.require(worst <= 1e-9, fmt::format("max relative error {:.3e}", worst));
  if (o.pass) o.detail = fmt::format("100 instances, max relative error {:.2e}", worst);
  return o;
}

EffectsFit slopes_fit(std::vector<std::string> names, Vector b, Matrix v) {
  EffectsFit f;
  f.coefficients = NamedVector(std::move(names), std::move(b));
  f.vcov = std::move(v);
  return f;
}

Outcome hausman_points() {
  Outcome o;
  const HausmanResult h = hausman_from_statistic(140.152192, 7);
  o.require(h.p_value < 1e-6, fmt::format("p = {:.3e}", h.p_value));
  o.require(h.decision == ModelChoice::FixedEffects, "decision is not fixed effects");

  Matrix v(2, 2);
  v << 0.04, 0.01, 0.01, 0.09;
  Vector b(2);
  b << 0.3, -1.2;
  const EffectsFit f = slopes_fit({"a", "b"}, b, v);
  const HausmanResult same = hausman_test(f, f);
  o.require(same.statistic == 0.0, fmt::format("H(f, f) = {}", same.statistic));

  Vector bfe(2), bre(2);
  bfe << 2.0, 3.0;
  bre << 1.0, 2.0;
  const HausmanResult two = hausman_test(slopes_fit({"a", "b"}, bfe, Matrix::Identity(2, 2)),
                                         slopes_fit({"a", "b"}, bre, 0.5 * Matrix::Identity(2, 2)));
  o.require(std::abs(two.statistic - 4.0) <= 1e-12, fmt::format("H = {}", two.statistic));
  o.require(two.df == 2, "df is not 2");
  o.require(std::abs(two.p_value - testing::chi2_tail_df2(4.0)) <= 1e-12, "p differs from exp(-2)");
  o.require(fmt::format("{:.4f}", two.p_value) == "0.1353", fmt::format("p = {:.6f}", two.p_value));
  if (o.pass)
    o.detail = fmt::format("p(140.152192, 7) = {:.2e}, H(f,f) = 0, H = {:.1f} with p = {:.4f}", h.p_value,
                           two.statistic, two.p_value);
  return o;
}

Outcome fixed_effects() {
  Outcome o;
  Gen g(5150);
  double slope_gap = 0.0, mean_gap = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const Index n = g.integer(20, 60);
    const Index k = g.integer(1, 3);
    const std::vector<int> labels = g.groups(n, 2, 6);
    std::vector<double> effect(static_cast<std::size_t>(labels.back() + 1));
    for (auto& e : effect) e = g.normal();
    Matrix x(n, k);
    Vector y(n);
    for (Index i = 0; i < n; ++i) {
      const double a = effect[static_cast<std::size_t>(labels[i])];
      y[i] = a + g.normal(0.0, 0.5);
      for (Index j = 0; j < k; ++j) {
        x(i, j) = g.normal() + 0.5 * a;
        y[i] += 0.3 * (j + 1) * x(i, j);
      }
    }
    std::vector<std::string> names;
    for (Index j = 0; j < k; ++j) names.push_back("x" + std::to_string(j));
    const GroupIndex groups = GroupIndex::from_labels(std::span<const int>(labels));
    const DesignMatrix d(x, y, names);
    const EffectsFit f = fit_fixed_effects(d, groups);
    const Vector oracle = testing::lsdv_slopes(x, y, labels);
    slope_gap = std::max(slope_gap, (f.coefficients.values - oracle).cwiseAbs().maxCoeff());

    Matrix both(n, k + 1);
    both << x, y;
    const Matrix centred = within_transform(both, groups);
    mean_gap = std::max(mean_gap, group_means(centred, groups).cwiseAbs().maxCoeff());
  }
  o.require(slope_gap <= 1e-10, fmt::format("max slope gap {:.3e}", slope_gap));
  o.require(mean_gap < 1e-10, fmt::format("max group mean {:.3e}", mean_gap));
  if (o.pass) o.detail = fmt::format("50 panels, slope gap {:.2e}, group means {:.2e}", slope_gap, mean_gap);
  return o;
}

Outcome speed_recovery() {
  Outcome o;
  const auto t0 = Clock::now();

  SynthConfig c;
  c.delta = 0.6;
  c.n_firms = 500;
  c.t_max = 20;
  c.seed = 2026;
  MonteCarloOptions opts;
  opts.thetas = {0.5};
  opts.threads = workers();
  const MonteCarloReport one = monte_carlo_speed(c, 100, opts);
  o.require(one.failures == 0, fmt::format("{} failed replications", one.failures));
  const double mean = one.stats.at(0).mean;
  o.require(std::abs(mean - 0.6) <= 0.05, fmt::format("mean speed {:.4f} for 0.6", mean));

  SynthConfig r = c;
  r.delta = 0.7;
  r.delta_recession = 0.3;
  r.macro_path = alternating_path(r.start_year, r.t_max);
  MonteCarloOptions ropts = opts;
  ropts.by_regime = true;
  const MonteCarloReport two = monte_carlo_speed(r, 20, ropts);
  o.require(two.failures == 0, fmt::format("{} failed regime replications", two.failures));
  std::map<Regime, double> by;
  for (const auto& s : two.stats)
    if (s.regime) by[*s.regime] = s.mean;
  o.require(by.count(Regime::Growth) && by.count(Regime::Recession), "missing regime estimates");
  if (o.pass) {
    o.require(std::abs(by[Regime::Growth] - 0.7) <= 0.07,
              fmt::format("growth speed {:.4f} for 0.7", by[Regime::Growth]));
    o.require(std::abs(by[Regime::Recession] - 0.3) <= 0.07,
              fmt::format("recession speed {:.4f} for 0.3", by[Regime::Recession]));
  }
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 600.0, fmt::format("took {:.0f}s", elapsed));
  if (o.pass)
    o.detail = fmt::format("mean {:.4f} over 100 reps; regimes {:.4f}/{:.4f} over 20 reps; {:.1f}s", mean,
                           by[Regime::Growth], by[Regime::Recession], elapsed);
  return o;
}

FirmYearRecord record(const std::string& firm, int year) {
  FirmYearRecord r;
  r.firm_id = firm;
  r.fiscal_year = year;
  r.total_assets = 200;
  r.book_debt = 50;
  r.market_equity = 150;
  r.current_assets = 60;
  r.current_liabilities = 30;
  r.ebit = 100;
  r.interest_payable = 10;
  r.income_tax = 21;
  r.sales = 100;
  r.net_ppe = 100;
  r.depreciation = 15;
  return r;
}

Outcome variable_formulas() {
  Outcome o;
  auto a = record("A", 2000);
  auto b = record("A", 2001);
  b.net_ppe = 120;
  b.sales = 110;
  const std::vector<FirmYearRecord> recs{a, b};
  const Panel p = derive_variables(ingest_panel(recs).panel, testing::macro_for(2000, 2001),
                                   TaxSchedule::constant(0.21));
  const auto& first = p.rows()[0];
  const auto& second = p.rows()[1];
  o.require(first.levb == 0.25, "levb");
  o.require(first.levm == 0.25, "levm");
  o.require(first.ndts && std::abs(*first.ndts - (-10.0)) <= 1e-12, "ndts");
  o.require(first.liqta == 2.0, "liqta");
  o.require(first.sizeat == std::log(100.0), "sizeat");
  o.require(!first.invta && !first.growthat, "first year has lag variables");
  o.require(second.invta == 35.0, "investment proxy");
  o.require(second.growthat && std::abs(*second.growthat - 0.10) <= 1e-15, "growthat");
  if (o.pass) o.detail = "levb, levm, ndts, investment, growth, size, liquidity";
  return o;
}

Outcome descriptives() {
  Outcome o;
  SynthConfig c;
  c.n_firms = 12;
  c.t_max = 5;
  c.attrition = 0.1;
  c.seed = 3;
  const Panel p = generate_panel(c).panel;
  const std::vector<Variable> vars{Variable::Levb,     Variable::Levm,  Variable::Ndts,   Variable::Profta,
                                   Variable::Sizeat,   Variable::Growthat, Variable::Invta, Variable::Liqta,
                                   Variable::Mbratio,  Variable::Inflation, Variable::GdpGrowth};
  const CorrelationMatrix m = correlation_matrix(p, vars);
  double worst = 0.0;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    for (std::size_t j = 0; j < vars.size(); ++j) {
      std::vector<double> a, b;
      for (std::size_t r = 0; r < p.size(); ++r) {
        const auto u = p.value(r, vars[i]);
        const auto v = p.value(r, vars[j]);
        if (u && v) {
          a.push_back(*u);
          b.push_back(*v);
        }
      }
      const auto& cell = m.at(i, j);
      const auto expected = testing::brute_pearson(a, b);
      const bool defined = expected.has_value() && a.size() >= 3;
      o.require(cell.r.has_value() == defined, fmt::format("definedness of cell ({}, {})", i, j));
      if (!cell.r || !defined) continue;
      worst = std::max(worst, std::abs(*cell.r - *expected));
      o.require(cell.r == m.at(j, i).r && cell.p == m.at(j, i).p, "asymmetric");
      if (i == j) o.require(*cell.r == 1.0, "diagonal is not 1");
    }
  }
  o.require(worst <= 1e-12, fmt::format("max correlation gap {:.3e}", worst));

  const YearlyMeans ym = yearly_means(p, vars);
  std::map<int, std::vector<std::pair<long double, int>>> sums;
  std::vector<std::pair<long double, int>> all(vars.size(), {0.0L, 0});
  for (std::size_t r = 0; r < p.size(); ++r) {
    auto& year = sums[p.rows()[r].fiscal_year];
    year.resize(vars.size(), {0.0L, 0});
    for (std::size_t v = 0; v < vars.size(); ++v)
      if (auto x = p.value(r, vars[v])) {
        year[v].first += *x;
        ++year[v].second;
        all[v].first += *x;
        ++all[v].second;
      }
  }
  sums[0] = all;  // stands in for the trailing "All" row
  o.require(ym.rows.size() == sums.size(), "yearly means row count");
  double mean_gap = 0.0;
  if (o.pass) {
    std::size_t row = 0;
    auto check_row = [&](const YearlyMeansRow& got, const std::vector<std::pair<long double, int>>& want) {
      for (std::size_t v = 0; v < vars.size(); ++v) {
        o.require(got.means[v].has_value() == (want[v].second > 0), "missing mean");
        if (got.means[v] && want[v].second > 0)
          mean_gap = std::max(mean_gap, rel_diff(*got.means[v], static_cast<double>(want[v].first / want[v].second)));
      }
    };
    for (const auto& [year, cells] : sums) {
      if (year == 0) continue;
      o.require(ym.rows[row].year == year, "year order");
      check_row(ym.rows[row++], cells);
    }
    o.require(ym.rows.back().label == "All", "no All row");
    check_row(ym.rows.back(), all);
  }
  o.require(mean_gap <= 1e-12, fmt::format("max mean gap {:.3e}", mean_gap));
  if (o.pass) o.detail = fmt::format("correlation gap {:.2e}, mean gap {:.2e}", worst, mean_gap);
  return o;
}

std::map<std::string, std::string> bundle(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    out[e.path().filename().string()] = s.str();
  }
  return out;
}

Outcome determinism() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / "capstruct_acceptance";
  fs::remove_all(dir);
  RunConfig sim;
  sim.out = (dir / "sim").string();
  sim.sim.n_firms = 60;
  sim.sim.t_max = 10;
  sim.seed = 11;
  o.require(run_simulate(sim).ok, "simulate failed");
  if (!o.pass) return o;

  RunConfig c;
  c.input = (dir / "sim" / "firm_year.csv").string();
  c.macro = (dir / "sim" / "macro.csv").string();
  c.tax = (dir / "sim" / "tax.csv").string();
  c.bootstrap = 10;
  c.out = (dir / "out").string();
  const RunResult a = run_pipeline(c, all_stages(), "replicate");
  o.require(a.ok, "first replicate failed: " + a.message);
  const auto first = bundle(c.out);
  const RunResult b = run_pipeline(c, all_stages(), "replicate");
  o.require(b.ok && bundle(c.out) == first, "rerun differs");
  RunOptions threaded;
  threaded.threads = 3;
  const RunResult t = run_pipeline(c, all_stages(), "replicate", threaded);
  o.require(t.ok && bundle(c.out) == first, "three threads differ from one");
  fs::remove_all(dir);
  if (o.pass) o.detail = fmt::format("{} files identical across reruns and thread counts", first.size());
  return o;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

Outcome table_shapes() {
  Outcome o;
  SynthConfig c;
  c.n_firms = 60;
  c.t_max = 8;
  const SynthPanel s = generate_panel(c);
  const std::vector<std::string> header_tail{"0,15", "0,35", "0,5", "0,75", "0,95"};

  for (LeverageKind kind : {LeverageKind::Book, LeverageKind::Market}) {
    TargetModelSpec spec;
    spec.leverage = kind;
    report::QuantileTable t;
    t.leverage = kind;
    for (double theta : default_thetas()) {
      const QuantileEffectsFit f = fit_target_model(s.panel, spec, theta);
      report::QuantileColumn col;
      col.theta = theta;
      col.coefficients = f.fit.coefficients;
      col.mean_effect = f.mean_effect;
      col.pseudo_r2 = f.fit.pseudo_r2;
      col.n = f.fit.n();
      t.columns.push_back(col);
    }
    const std::string label = kind == LeverageKind::Book ? "LEVB" : "LEVM";
    const auto all = lines(report::quantile_table(t, report::Format::Text));
    auto start = std::find_if(all.begin(), all.end(), [&](const std::string& l) { return l.rfind(label, 0) == 0; });
    o.require(start != all.end(), label + " header missing");
    if (!o.pass) return o;
    const std::vector<std::string> body(start, all.end());
    auto head = words(body[0]);
    o.require(std::vector<std::string>(head.begin() + 1, head.end()) == header_tail, label + " quantile columns");
    const std::size_t terms = t.columns[0].coefficients.size();
    o.require(body.size() == 1 + 2 * terms + 2, label + " row count");
    if (!o.pass) return o;
    for (std::size_t i = 0; i < terms; ++i) {
      o.require(words(body[1 + 2 * i]).size() == 6, label + " coefficient row width");
      o.require(words(body[2 + 2 * i]).front() == "sterrors", label + " sterrors row");
    }
    o.require(words(body.back()).front() == "R-squared", label + " trailing R-squared");
  }

  report::SpeedTable st;
  st.thetas = default_thetas();
  TargetModelSpec spec;
  for (LeverageKind kind : {LeverageKind::Market, LeverageKind::Book}) {
    spec.leverage = kind;
    st.rows.emplace_back(kind, estimate_speed(s.panel, spec));
  }
  const auto all = lines(report::speed_table(st, report::Format::Text));
  auto start = std::find_if(all.begin(), all.end(), [](const std::string& l) { return l.rfind("SPEED", 0) == 0; });
  o.require(start != all.begin() && all.end() - start >= 4, "speed table row count");
  if (!o.pass) return o;
  o.require(words(*(start - 1)) == header_tail, "speed quantile columns");
  const std::vector<std::string> body(start, start + 4);
  o.require(start + 4 == all.end() || words(start[4]).empty() || start[4][0] == '!' || start[4].rfind("Note", 0) == 0,
            "extra speed rows");
  o.require(body[0].rfind("SPEED MARKET", 0) == 0 && body[2].rfind("SPEED BOOK", 0) == 0, "speed row labels");
  o.require(body[1].rfind("R-squared", 0) == 0 && body[3].rfind("R-squared", 0) == 0, "speed R-squared rows");
  for (const auto& l : body) o.require(words(l).size() == (l.rfind("SPEED", 0) == 0 ? 7u : 6u), "speed row width");
  if (o.pass) o.detail = "LEVB/LEVM quantile tables and SPEED table";
  return o;
}

}  // namespace

int main() {
  testing::audit().install();

  struct Criterion {
    int id;
    std::string name;
    std::function<Outcome()> run;
  };
  std::vector<Criterion> criteria{
      {1, "oracle equivalence", oracle_equivalence},
      {3, "equivariance", equivariance},
      {4, "Hausman fixed points", hausman_points},
      {5, "fixed-effects correctness", fixed_effects},
      {6, "speed recovery", speed_recovery},
      {7, "variable formulas", variable_formulas},
      {8, "descriptives", descriptives},
      {9, "end-to-end determinism", determinism},
      {10, "table shapes", table_shapes},
  };

  std::map<int, std::pair<std::string, Outcome>> results;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    results[c.id] = {c.name, o};
  }

  // Runs last so that it covers every fit made above.
  auto& a = testing::audit();
  Outcome sub;
  sub.require(a.checked.load() > 0, "no fits were audited");
  sub.require(a.violations.load() == 0, fmt::format("{} violations", a.violations.load()));
  if (sub.pass)
    sub.detail = fmt::format("{} fits audited ({} with a constant in the span), 0 violations", a.fits.load(),
                             a.checked.load());
  results[2] = {"subgradient optimality", sub};
  a.remove();

  int failed = 0;
  for (const auto& [id, r] : results) {
    const auto& [name, o] = r;
    failed += !o.pass;
    fmt::print("{} criterion {}: {} ({})\n", o.pass ? "PASS" : "FAIL", id, name, o.detail);
  }
  return failed == 0 ? 0 : 1;
}
