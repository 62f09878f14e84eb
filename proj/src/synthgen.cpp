#include "capstruct/synthgen.hpp"

#include "capstruct/error.hpp"
#include "capstruct/parallel.hpp"
#include "capstruct/rng.hpp"

#include "json.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace capstruct {
namespace {

constexpr std::uint64_t kMacroStream = 0x4d41;
constexpr std::uint64_t kFirmStream = 0x4649;
constexpr std::uint64_t kExitStream = 0x4558;
constexpr std::uint64_t kReplicationStream = 0x4d43;

constexpr double kTurnover = 1.25;        // sales / total assets
constexpr double kLiabilityShare = 0.2;   // current liabilities / total assets
constexpr double kInterestRate = 0.05;
constexpr double kDepreciationRate = 0.1;

}  // namespace

NamedVector SynthConfig::default_beta() {
  Vector b(7);
  b << -0.05, -0.01, -0.4, 0.04, 0.05, 0.01, -0.05;
  return NamedVector({"liqta", "ndts", "profta", "sizeat", "growthat", "invta", "mbratio"}, b);
}

NamedVector SynthConfig::default_gamma() {
  Vector g(2);
  g << 0.002, -0.003;
  return NamedVector({"inflation", "gdp_growth"}, g);
}

void SynthConfig::validate() const {
  if (n_firms < 1) throw ConfigError("synthetic panel: n_firms must be at least 1");
  if (t_max < 3) throw ConfigError("synthetic panel: t_max must be at least 3");
  if (burn_in < 0) throw ConfigError("synthetic panel: burn_in must be nonnegative");
  if (!(attrition >= 0.0 && attrition < 1.0))
    throw ConfigError("synthetic panel: attrition must lie in [0, 1)");
  auto check_delta = [](double d) {
    if (!(d >= 0.0 && d <= 1.0)) throw ConfigError("synthetic panel: delta must lie in [0, 1]");
  };
  check_delta(delta);
  if (delta_recession) check_delta(*delta_recession);
  if (!(firm_effect_sd >= 0.0)) throw ConfigError("synthetic panel: firm_effect_sd must be >= 0");
  if (!(error.sigma >= 0.0)) throw ConfigError("synthetic panel: error sigma must be >= 0");
  if (error.kind == ErrorModel::Kind::Student && !(error.nu > 0.0))
    throw ConfigError("synthetic panel: Student degrees of freedom must be positive");
  if (!(tax_rate > 0.0 && tax_rate <= 1.0))
    throw ConfigError("synthetic panel: tax rate must lie in (0, 1]");
  for (const auto& n : beta.names) {
    const Variable v = parse_variable(n);
    if (is_macro(v) || v == Variable::Levb || v == Variable::Levm)
      throw ConfigError("synthetic panel: beta entry " + n + " is not a firm determinant");
  }
  for (const auto& n : gamma.names)
    if (!is_macro(parse_variable(n)))
      throw ConfigError("synthetic panel: gamma entry " + n + " is not a macro variable");
  if (!macro_path.empty()) {
    for (int y = start_year; y < start_year + t_max; ++y) {
      bool found = false;
      for (const auto& m : macro_path) found = found || m.year == y;
      if (!found)
        throw ConfigError("synthetic panel: macro path has no entry for " + std::to_string(y));
    }
  }
}

namespace {

double coefficient(const NamedVector& v, std::string_view name) {
  auto i = v.find(name);
  return i ? v.values(*i) : 0.0;
}

struct MacroDraw {
  std::vector<double> inflation;
  std::vector<double> gdp;
};

/// Macro values for every simulated year (burn-in first).
MacroDraw macro_values(const SynthConfig& c) {
  const int total = c.burn_in + c.t_max;
  MacroDraw m;
  m.inflation.resize(static_cast<std::size_t>(total));
  m.gdp.resize(static_cast<std::size_t>(total));
  if (!c.macro_path.empty()) {
    auto lookup = [&](int year) {
      for (const auto& y : c.macro_path)
        if (y.year == year) return y;
      return c.macro_path.front();
    };
    for (int t = 0; t < total; ++t) {
      // Burn-in years repeat the first observed year.
      const MacroYear y = lookup(c.start_year + std::max(0, t - c.burn_in));
      m.inflation[static_cast<std::size_t>(t)] = y.inflation;
      m.gdp[static_cast<std::size_t>(t)] = y.gdp_growth;
    }
    return m;
  }
  Rng rng(derive_seed(c.seed, {kMacroStream}));
  std::normal_distribution<double> z;
  double infl = 3.0;
  double gdp = 2.0;
  for (int t = 0; t < total; ++t) {
    infl = 3.0 + 0.6 * (infl - 3.0) + 1.0 * z(rng);
    gdp = 2.0 + 0.5 * (gdp - 2.0) + 2.0 * z(rng);
    m.inflation[static_cast<std::size_t>(t)] = infl;
    m.gdp[static_cast<std::size_t>(t)] = gdp;
  }
  return m;
}

std::string firm_label(int i, int n) {
  const std::string digits = std::to_string(n);
  std::string s = std::to_string(i + 1);
  return "F" + std::string(digits.size() - std::min(digits.size(), s.size()), '0') + s;
}

}  // namespace

SynthPanel generate_panel(const SynthConfig& c) {
  c.validate();
  const int total = c.burn_in + c.t_max;
  const MacroDraw macro = macro_values(c);

  std::vector<MacroYear> observed;
  for (int t = c.burn_in; t < total; ++t) {
    const auto s = static_cast<std::size_t>(t);
    observed.push_back({c.start_year + t - c.burn_in, macro.inflation[s], macro.gdp[s], Regime::Growth});
  }
  MacroSeries series(observed, c.regime_threshold);

  const double b_liq = coefficient(c.beta, "liqta");
  const double b_ndts = coefficient(c.beta, "ndts");
  const double b_prof = coefficient(c.beta, "profta");
  const double b_size = coefficient(c.beta, "sizeat");
  const double b_growth = coefficient(c.beta, "growthat");
  const double b_inv = coefficient(c.beta, "invta");
  const double b_mb = coefficient(c.beta, "mbratio");
  const double g_infl = coefficient(c.gamma, "inflation");
  const double g_gdp = coefficient(c.gamma, "gdp_growth");

  SynthPanel out;
  out.truth.config = c;
  for (const auto& y : series.years()) out.truth.regimes[y.year] = y.regime;

  for (int i = 0; i < c.n_firms; ++i) {
    Rng rng(derive_seed(c.seed, {kFirmStream, static_cast<std::uint64_t>(i)}));
    Rng exit_rng(derive_seed(c.seed, {kExitStream, static_cast<std::uint64_t>(i)}));
    std::normal_distribution<double> z;
    std::student_t_distribution<double> student(c.error.kind == ErrorModel::Kind::Student ? c.error.nu
                                                                                        : 5.0);
    std::uniform_real_distribution<double> u;

    const std::string id = firm_label(i, c.n_firms);
    const double a_i = c.firm_effect_sd * z(rng);
    const double mu_size = 5.0 + z(rng);
    const double m_liq = 0.3 + 0.2 * z(rng);
    const double m_mb = 0.2 + 0.2 * z(rng);
    out.truth.firm_ids.push_back(id);
    out.truth.firm_effects.push_back(a_i);

    int lifetime = 1;
    while (lifetime < c.t_max && u(exit_rng) >= c.attrition) ++lifetime;

    double size = mu_size + 0.2 / std::sqrt(1.0 - 0.49) * z(rng);
    double ppent = 0.0;
    double lev = 0.0;
    for (int t = 0; t < total; ++t) {
      const auto ts = static_cast<std::size_t>(t);
      const double prev_size = size;
      size = mu_size + 0.7 * (size - mu_size) + 0.2 * z(rng);
      const double sales = std::exp(size);
      const double growth = sales / std::exp(prev_size) - 1.0;
      const double liqta = std::exp(m_liq + 0.25 * z(rng));
      const double mbratio = std::exp(m_mb + 0.25 * z(rng));
      const double profta = 0.08 + 0.1 * z(rng);
      const double ndts = z(rng);
      const double invta = 0.5 + z(rng);
      double shock = 0.0;
      switch (c.error.kind) {
        case ErrorModel::Kind::Normal: shock = c.error.sigma * z(rng); break;
        case ErrorModel::Kind::Student: shock = c.error.sigma * student(rng); break;
        case ErrorModel::Kind::Heteroskedastic:
          shock = c.error.sigma * (1.0 + c.error.slope * liqta) * z(rng);
          break;
      }

      const double target = c.intercept + a_i + b_liq * liqta + b_ndts * ndts + b_prof * profta +
                            b_size * size + b_growth * growth + b_inv * invta + b_mb * mbratio +
                            g_infl * macro.inflation[ts] + g_gdp * macro.gdp[ts];
      const bool recession = classify_regime(macro.gdp[ts], c.regime_threshold) == Regime::Recession;
      const double delta = recession && c.delta_recession ? *c.delta_recession : c.delta;
      lev = t == 0 ? target : lev + delta * (target - lev) + shock;

      const double assets = sales / kTurnover;
      const double prev_ppent = t == 0 ? 0.5 * assets : ppent;
      const double depreciation = kDepreciationRate * prev_ppent;
      ppent = prev_ppent + invta - depreciation;

      const int obs = t - c.burn_in;
      if (obs < 0 || obs >= lifetime) continue;
      FirmYearRecord r;
      r.firm_id = id;
      r.fiscal_year = c.start_year + obs;
      r.total_assets = assets;
      r.book_debt = lev * assets;
      r.market_equity = mbratio * assets - r.book_debt;
      r.current_liabilities = kLiabilityShare * assets;
      r.current_assets = liqta * r.current_liabilities;
      r.ebit = profta * assets;
      r.interest_payable = kInterestRate * std::abs(r.book_debt);
      r.income_tax = c.tax_rate * (r.ebit - r.interest_payable - ndts);
      r.sales = sales;
      r.net_ppe = ppent;
      r.depreciation = depreciation;
      out.records.push_back(std::move(r));
    }
  }

  IngestResult ingested = ingest_panel(std::span<const FirmYearRecord>(out.records));
  out.panel = derive_variables(ingested.panel, series, TaxSchedule::constant(c.tax_rate));
  out.macro = std::move(series);
  return out;
}

void write_ground_truth(std::ostream& out, const GroundTruth& truth) {
  const SynthConfig& c = truth.config;
  using nlohmann::ordered_json;
  auto named = [](const NamedVector& v) {
    ordered_json j = ordered_json::object();
    for (std::size_t i = 0; i < v.names.size(); ++i) j[v.names[i]] = v.values(static_cast<Index>(i));
    return j;
  };
  ordered_json j;
  j["n_firms"] = c.n_firms;
  j["t_max"] = c.t_max;
  j["attrition"] = c.attrition;
  j["burn_in"] = c.burn_in;
  j["delta"] = c.delta;
  j["delta_recession"] = c.delta_recession ? ordered_json(*c.delta_recession) : ordered_json(nullptr);
  j["intercept"] = c.intercept;
  j["beta"] = named(c.beta);
  j["gamma"] = named(c.gamma);
  j["firm_effect_sd"] = c.firm_effect_sd;
  const char* kinds[] = {"normal", "student", "heteroskedastic"};
  j["error"] = {{"kind", kinds[static_cast<int>(c.error.kind)]},
                {"sigma", c.error.sigma},
                {"nu", c.error.nu},
                {"slope", c.error.slope}};
  j["macro_path"] = c.macro_path.empty() ? "seeded" : "explicit";
  j["regime_threshold"] = c.regime_threshold;
  j["start_year"] = c.start_year;
  j["tax_rate"] = c.tax_rate;
  j["seed"] = c.seed;
  ordered_json firms = ordered_json::array();
  for (std::size_t i = 0; i < truth.firm_ids.size(); ++i)
    firms.push_back({{"firm_id", truth.firm_ids[i]}, {"effect", truth.firm_effects[i]}});
  j["firm_effects"] = std::move(firms);
  ordered_json regimes = ordered_json::object();
  for (const auto& [year, r] : truth.regimes) regimes[std::to_string(year)] = std::string(to_string(r));
  j["regimes"] = std::move(regimes);
  out << j.dump(2) << '\n';
}

MonteCarloReport monte_carlo_speed(const SynthConfig& config, int replications,
                                   const MonteCarloOptions& options) {
  if (replications < 1) throw ConfigError("monte carlo: at least one replication required");
  config.validate();

  std::vector<std::optional<Regime>> regimes;
  if (options.by_regime) {
    regimes = {Regime::Growth, Regime::Recession};
  } else {
    regimes = {std::nullopt};
  }
  MonteCarloReport report;
  report.replications = replications;
  for (const auto& regime : regimes) {
    for (double theta : options.thetas) {
      RecoveryStats s;
      s.theta = theta;
      s.regime = regime;
      s.true_delta = regime == Regime::Recession ? config.delta_recession.value_or(config.delta)
                                                 : config.delta;
      report.stats.push_back(s);
    }
  }
  const std::size_t n_stats = report.stats.size();
  report.estimates.assign(n_stats, std::vector<double>(static_cast<std::size_t>(replications),
                                                       std::numeric_limits<double>::quiet_NaN()));
  std::vector<std::string> errors(static_cast<std::size_t>(replications));

  TargetModelSpec spec;
  spec.leverage = options.leverage;
  spec.thetas = options.thetas;
  spec.effects = options.effects;
  spec.regime_split = RegimeRule{config.regime_threshold, RegimeRule::Year::Current};

  parallel_for(static_cast<std::size_t>(replications), options.threads, [&](std::size_t r) {
    SynthConfig c = config;
    c.seed = derive_seed(config.seed, {kReplicationStream, r});
    try {
      const SynthPanel synth = generate_panel(c);
      if (!options.by_regime) {
        const auto results = estimate_speed(synth.panel, spec);
        for (std::size_t t = 0; t < results.size(); ++t) report.estimates[t][r] = results[t].speed;
        return;
      }
      const RegimeSpeeds speeds = estimate_speed_by_regime(synth.panel, spec);
      std::string missing;
      for (std::size_t g = 0; g < regimes.size(); ++g) {
        auto it = speeds.results.find(*regimes[g]);
        if (it == speeds.results.end()) {
          missing += std::string(missing.empty() ? "" : ", ") + std::string(to_string(*regimes[g]));
          continue;
        }
        for (std::size_t t = 0; t < it->second.size(); ++t)
          report.estimates[g * options.thetas.size() + t][r] = it->second[t].speed;
      }
      if (!missing.empty()) errors[r] = "regime not estimated: " + missing;
    } catch (const Error& e) {
      errors[r] = e.what();
    }
  });

  for (std::size_t r = 0; r < errors.size(); ++r) {
    if (errors[r].empty()) continue;
    ++report.failures;
    report.failure_messages.push_back("replication " + std::to_string(r) + ": " + errors[r]);
  }
  for (std::size_t s = 0; s < n_stats; ++s) {
    RecoveryStats& st = report.stats[s];
    double sum = 0.0, sq = 0.0;
    for (double e : report.estimates[s]) {
      if (std::isnan(e)) continue;
      ++st.estimates;
      sum += e;
      sq += (e - st.true_delta) * (e - st.true_delta);
    }
    if (st.estimates == 0) continue;
    st.mean = sum / st.estimates;
    st.bias = st.mean - st.true_delta;
    st.rmse = std::sqrt(sq / st.estimates);
    if (st.estimates > 1) {
      double var = 0.0;
      for (double e : report.estimates[s])
        if (!std::isnan(e)) var += (e - st.mean) * (e - st.mean);
      st.sd = std::sqrt(var / (st.estimates - 1));
    }
  }
  return report;
}

}  // namespace capstruct
