#include "capstruct/pipeline.hpp"

#include "capstruct/csv.hpp"
#include "capstruct/descriptives.hpp"
#include "capstruct/error.hpp"
#include "capstruct/report.hpp"
#include "capstruct/rng.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>

namespace capstruct {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& v) {
  auto d = csv::parse_double(v);
  if (!d || !std::isfinite(*d)) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return *d;
}

long to_integer(const std::string& key, const std::string& v) {
  auto i = csv::parse_integer(v);
  if (!i) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return *i;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<double> to_thetas(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& field : csv::split_line(v)) {
    const double t = to_double(key, field);
    if (!(t > 0.0 && t < 1.0)) throw ConfigError(key + ": quantiles must lie in (0, 1)");
    out.push_back(t);
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::string join_thetas(const std::vector<double>& t) {
  std::string out;
  for (double v : t) out += (out.empty() ? "" : ",") + csv::format_exact(v);
  return out;
}

const char* error_kind_name(ErrorModel::Kind k) {
  switch (k) {
    case ErrorModel::Kind::Normal: return "normal";
    case ErrorModel::Kind::Student: return "student";
    case ErrorModel::Kind::Heteroskedastic: return "heteroskedastic";
  }
  return "normal";
}

}  // namespace

void RunConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string v = trim(raw_value);
  if (key == "input") {
    input = v;
  } else if (key == "macro") {
    macro = v;
  } else if (key == "tax") {
    tax = v;
  } else if (key == "tax_rate") {
    tax_rate = to_double(key, v);
    if (!(tax_rate > 0.0 && tax_rate <= 1.0)) throw ConfigError("tax_rate must lie in (0, 1]");
  } else if (key == "theta" || key == "thetas") {
    thetas = to_thetas(key, v);
  } else if (key == "leverage") {
    if (v == "book") {
      leverage = {LeverageKind::Book};
    } else if (v == "market") {
      leverage = {LeverageKind::Market};
    } else if (v == "both") {
      leverage = {LeverageKind::Book, LeverageKind::Market};
    } else {
      throw ConfigError("leverage: expected book, market or both");
    }
  } else if (key == "regime_threshold") {
    regime_threshold = to_double(key, v);
  } else if (key == "regime_year") {
    if (v == "current") {
      regime_year = RegimeRule::Year::Current;
    } else if (v == "previous") {
      regime_year = RegimeRule::Year::Previous;
    } else {
      throw ConfigError("regime_year: expected current or previous");
    }
  } else if (key == "bootstrap") {
    const long b = to_integer(key, v);
    if (b < 0 || b == 1) throw ConfigError("bootstrap: use 0 (no standard errors) or at least 2");
    bootstrap = static_cast<int>(b);
  } else if (key == "seed") {
    const long s = to_integer(key, v);
    if (s < 0) throw ConfigError("seed must be nonnegative");
    seed = static_cast<std::uint64_t>(s);
  } else if (key == "winsorize") {
    winsorize = to_bool(key, v);
  } else if (key == "winsorize_lower") {
    winsorize_lower = to_double(key, v);
  } else if (key == "winsorize_upper") {
    winsorize_upper = to_double(key, v);
  } else if (key == "out") {
    out = v;
  } else if (key == "format") {
    if (v == "text") {
      text = true;
      delimited = false;
    } else if (v == "delimited") {
      text = false;
      delimited = true;
    } else if (v == "both") {
      text = delimited = true;
    } else {
      throw ConfigError("format: expected text, delimited or both");
    }
  } else if (key == "alpha") {
    alpha = to_double(key, v);
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  } else if (key == "fe_mode") {
    if (v == "dummy") {
      fe_mode = QuantileEffectsMode::Dummy;
    } else if (v == "penalized") {
      fe_mode = QuantileEffectsMode::Penalized;
    } else {
      throw ConfigError("fe_mode: expected dummy or penalized");
    }
  } else if (key == "fe_lambda") {
    fe_lambda = to_double(key, v);
    if (!(fe_lambda > 0.0)) throw ConfigError("fe_lambda must be positive");
  } else if (key == "max_groups") {
    max_groups = static_cast<int>(to_integer(key, v));
  } else if (key == "estimation") {
    if (v == "one_step") {
      two_step = false;
    } else if (v == "two_step") {
      two_step = true;
    } else {
      throw ConfigError("estimation: expected one_step or two_step");
    }
  } else if (key == "sim.n_firms") {
    sim.n_firms = static_cast<int>(to_integer(key, v));
  } else if (key == "sim.t_max") {
    sim.t_max = static_cast<int>(to_integer(key, v));
  } else if (key == "sim.attrition") {
    sim.attrition = to_double(key, v);
  } else if (key == "sim.burn_in") {
    sim.burn_in = static_cast<int>(to_integer(key, v));
  } else if (key == "sim.delta") {
    sim.delta = to_double(key, v);
  } else if (key == "sim.delta_recession") {
    if (v == "none") {
      sim.delta_recession.reset();
    } else {
      sim.delta_recession = to_double(key, v);
    }
  } else if (key == "sim.intercept") {
    sim.intercept = to_double(key, v);
  } else if (key == "sim.firm_effect_sd") {
    sim.firm_effect_sd = to_double(key, v);
  } else if (key == "sim.error") {
    if (v == "normal") {
      sim.error.kind = ErrorModel::Kind::Normal;
    } else if (v == "student") {
      sim.error.kind = ErrorModel::Kind::Student;
    } else if (v == "heteroskedastic") {
      sim.error.kind = ErrorModel::Kind::Heteroskedastic;
    } else {
      throw ConfigError("sim.error: expected normal, student or heteroskedastic");
    }
  } else if (key == "sim.sigma") {
    sim.error.sigma = to_double(key, v);
  } else if (key == "sim.nu") {
    sim.error.nu = to_double(key, v);
  } else if (key == "sim.slope") {
    sim.error.slope = to_double(key, v);
  } else if (key == "sim.start_year") {
    sim.start_year = static_cast<int>(to_integer(key, v));
  } else if (key == "sim.replications") {
    sim_replications = static_cast<int>(to_integer(key, v));
    if (sim_replications < 0) throw ConfigError("sim.replications must be nonnegative");
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

std::string RunConfig::render() const {
  std::string leverage_text = leverage.size() == 2 ? "both" : std::string(to_string(leverage.front()));
  std::string format_text = text && delimited ? "both" : (text ? "text" : "delimited");
  auto num = [](double v) { return csv::format_exact(v); };
  std::string s;
  auto line = [&s](std::string_view k, const std::string& v) {
    s += fmt::format("{} = {}\n", k, v);
  };
  line("input", input);
  line("macro", macro);
  line("tax", tax);
  line("tax_rate", num(tax_rate));
  line("thetas", join_thetas(thetas));
  line("leverage", leverage_text);
  line("regime_threshold", num(regime_threshold));
  line("regime_year", regime_year == RegimeRule::Year::Current ? "current" : "previous");
  line("bootstrap", std::to_string(bootstrap));
  line("seed", std::to_string(seed));
  line("winsorize", winsorize ? "true" : "false");
  line("winsorize_lower", num(winsorize_lower));
  line("winsorize_upper", num(winsorize_upper));
  line("out", out);
  line("format", format_text);
  line("alpha", num(alpha));
  line("fe_mode", fe_mode == QuantileEffectsMode::Dummy ? "dummy" : "penalized");
  line("fe_lambda", num(fe_lambda));
  line("max_groups", std::to_string(max_groups));
  line("estimation", two_step ? "two_step" : "one_step");
  line("sim.n_firms", std::to_string(sim.n_firms));
  line("sim.t_max", std::to_string(sim.t_max));
  line("sim.attrition", num(sim.attrition));
  line("sim.burn_in", std::to_string(sim.burn_in));
  line("sim.delta", num(sim.delta));
  line("sim.delta_recession", sim.delta_recession ? num(*sim.delta_recession) : "none");
  line("sim.intercept", num(sim.intercept));
  line("sim.firm_effect_sd", num(sim.firm_effect_sd));
  line("sim.error", error_kind_name(sim.error.kind));
  line("sim.sigma", num(sim.error.sigma));
  line("sim.nu", num(sim.error.nu));
  line("sim.slope", num(sim.error.slope));
  line("sim.start_year", std::to_string(sim.start_year));
  line("sim.replications", std::to_string(sim_replications));
  return s;
}

void apply_config(RunConfig& config, std::istream& in, const std::string& source) {
  std::string raw;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(number) + ": expected key = value");
    try {
      config.set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void load_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file " + path);
  apply_config(config, in, path);
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  std::string hex;
  for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::Ingest: return "ingest";
    case Stage::Describe: return "describe";
    case Stage::Correlate: return "correlate";
    case Stage::Hausman: return "hausman";
    case Stage::Qreg: return "qreg";
    case Stage::Speed: return "speed";
  }
  return "?";
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> s{Stage::Ingest,  Stage::Describe, Stage::Correlate,
                                    Stage::Hausman, Stage::Qreg,     Stage::Speed};
  return s;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint64_t kQregStream = 0x5152;

std::string read_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " path not configured");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(std::string("cannot open ") + what + " file " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Bundle {
 public:
  Bundle(const RunConfig& config, std::string command, const RunOptions& options)
      : config_(config), command_(std::move(command)), options_(options), dir_(config.out) {
    fs::create_directories(dir_);
    fs::remove(dir_ / "INCOMPLETE");
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + (dir_ / name).string());
    out << content;
    files_.emplace_back(name, sha256_hex(content));
  }

  /// Writes the text and/or delimited rendering of one table.
  template <typename Render>
  void table(const std::string& stem, Render&& render) {
    if (config_.text) write(stem + ".txt", render(report::Format::Text));
    if (config_.delimited) write(stem + ".csv", render(report::Format::Delimited));
  }

  void log(const std::string& line) const {
    if (options_.log) *options_.log << line << '\n';
  }

  void finish(RunResult& result, const std::vector<std::pair<std::string, std::string>>& inputs,
              const std::vector<std::string>& seeds) {
    if (!result.ok) {
      write("INCOMPLETE",
            fmt::format("failed stage: {}\n{}\n", result.failed_stage, result.message));
    }
    const std::string config_text = config_.render();
    std::string m = "capstruct run manifest\n";
    m += "command: " + command_ + "\n";
    m += "status: " + std::string(result.ok ? "complete" : "INCOMPLETE") + "\n";
    if (!result.ok) m += "failed stage: " + result.failed_stage + "\n";
    m += "seed: " + std::to_string(config_.seed) + "\n";
    m += "config_sha256: " + sha256_hex(config_text) + "\n";
    if (!inputs.empty()) {
      m += "inputs:\n";
      for (const auto& [path, digest] : inputs) m += "  " + digest + "  " + path + "\n";
    }
    if (!seeds.empty()) {
      m += "derived seeds:\n";
      for (const auto& s : seeds) m += "  " + s + "\n";
    }
    if (!result.warnings.empty()) {
      m += "warnings:\n";
      for (const auto& w : result.warnings) m += "  " + w + "\n";
    }
    m += "files:\n";
    for (const auto& [name, digest] : files_) m += "  " + digest + "  " + name + "\n";
    std::ofstream out(dir_ / "manifest.txt", std::ios::binary | std::ios::trunc);
    out << m;
    for (const auto& f : files_) result.files.push_back(f.first);
    result.files.push_back("manifest.txt");
  }

 private:
  const RunConfig& config_;
  std::string command_;
  const RunOptions& options_;
  fs::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

std::vector<Variable> described_variables() {
  std::vector<Variable> v{Variable::Levb, Variable::Levm};
  for (Variable d : firm_determinants()) v.push_back(d);
  for (Variable m : macro_variables()) v.push_back(m);
  return v;
}

TargetModelSpec model_spec(const RunConfig& config, LeverageKind kind, int threads) {
  TargetModelSpec spec;
  spec.leverage = kind;
  spec.thetas = config.thetas;
  spec.regime_split = RegimeRule{config.regime_threshold, config.regime_year};
  spec.two_step = config.two_step;
  spec.effects.mode = config.fe_mode;
  spec.effects.lambda = config.fe_lambda;
  spec.effects.max_groups = config.max_groups;
  spec.threads = threads;
  return spec;
}

report::QuantileTable quantile_table(const Panel& panel, const RunConfig& config, LeverageKind kind,
                                     const RunOptions& options, std::vector<std::string>& seeds) {
  const TargetModelSpec spec = model_spec(config, kind, 1);
  const AdjustmentSample sample = build_sample(panel, spec, false);
  report::QuantileTable table;
  table.leverage = kind;
  for (std::size_t t = 0; t < config.thetas.size(); ++t) {
    const double theta = config.thetas[t];
    const QuantileEffectsFit fit =
        fit_quantile_fixed_effects(sample.design, sample.groups, theta, spec.effects);
    report::QuantileColumn col;
    col.theta = theta;
    col.coefficients = fit.fit.coefficients;
    col.mean_effect = fit.mean_effect;
    col.pseudo_r2 = fit.fit.pseudo_r2;
    col.n = sample.design.rows();
    if (config.bootstrap >= 2) {
      BootstrapOptions b;
      b.replications = config.bootstrap;
      b.seed = derive_seed(config.seed, {kQregStream, static_cast<std::uint64_t>(kind), t});
      b.threads = options.threads;
      seeds.push_back(fmt::format("bootstrap {} theta={}: {}", to_string(kind),
                                  csv::format_exact(theta), b.seed));
      const BootstrapResult boot = bootstrap_statistic(
          sample.design.rows(), std::span<const int>(sample.groups.of_row), b,
          [&](const Resample& s) {
            const DesignMatrix d = sample.design.select_rows(s.rows);
            const GroupIndex g = GroupIndex::from_labels(std::span<const int>(s.clusters));
            return fit_quantile_fixed_effects(d, g, theta, spec.effects).fit.coefficients.values;
          });
      col.std_errors = boot.std_errors;
    }
    table.columns.push_back(std::move(col));
  }
  return table;
}

}  // namespace

RunResult run_pipeline(const RunConfig& config, const std::vector<Stage>& stages,
                       const std::string& command, const RunOptions& options) {
  RunResult result;
  Bundle bundle(config, command, options);
  std::vector<std::pair<std::string, std::string>> inputs;
  std::vector<std::string> seeds;
  auto wants = [&](Stage s) { return std::find(stages.begin(), stages.end(), s) != stages.end(); };

  if (config.text) bundle.write("00_config.txt", config.render());

  Stage current = Stage::Ingest;
  try {
    // Ingestion and derivation run for every command.
    const std::string panel_text = read_file(config.input, "firm-year input");
    inputs.emplace_back(config.input, sha256_hex(panel_text));
    std::istringstream panel_in(panel_text);
    IngestResult ingested = ingest_panel_csv(panel_in);
    bundle.log(fmt::format("[ingest] {} rows read, {} accepted, {} rejected, {} flagged",
                           ingested.report.rows_read, ingested.report.accepted,
                           ingested.report.rejected(), ingested.report.flagged()));

    const std::string macro_text = read_file(config.macro, "macro series");
    inputs.emplace_back(config.macro, sha256_hex(macro_text));
    std::istringstream macro_in(macro_text);
    const MacroSeries macro = read_macro_csv(macro_in, config.regime_threshold);

    TaxSchedule tax = TaxSchedule::constant(config.tax_rate);
    if (!config.tax.empty()) {
      const std::string tax_text = read_file(config.tax, "tax rate");
      inputs.emplace_back(config.tax, sha256_hex(tax_text));
      std::istringstream tax_in(tax_text);
      tax = read_tax_csv(tax_in);
    } else {
      result.warnings.push_back("no tax rate table; constant rate " +
                                csv::format_exact(config.tax_rate) + " applied to every year");
      bundle.log("[ingest] warning: " + result.warnings.back());
    }
    if (wants(Stage::Ingest))
      bundle.table("01_validation", [&](auto f) { return report::validation(ingested.report, f); });

    Panel panel = derive_variables(ingested.panel, macro, tax);
    if (panel.size() == 0) throw DataError("no usable firm-year rows in " + config.input);
    if (config.winsorize) panel = winsorize(panel, config.winsorize_lower, config.winsorize_upper);

    if (wants(Stage::Describe)) {
      current = Stage::Describe;
      const YearlyMeans means = yearly_means(panel, described_variables());
      bundle.table("02_yearly_means", [&](auto f) { return report::yearly_means(means, f); });
    }
    if (wants(Stage::Correlate)) {
      current = Stage::Correlate;
      const CorrelationMatrix corr = correlation_matrix(panel, described_variables());
      bundle.table("03_correlation", [&](auto f) { return report::correlation(corr, f); });
    }
    if (wants(Stage::Hausman)) {
      current = Stage::Hausman;
      TargetModelSpec spec = model_spec(config, LeverageKind::Book, 1);
      spec.macro_vars.clear();
      const AdjustmentSample sample = build_sample(panel, spec, false);
      const EffectsFit fe = fit_fixed_effects(sample.design, sample.groups);
      const EffectsFit re = fit_random_effects(sample.design, sample.groups);
      const HausmanResult h = hausman_test(fe, re, config.alpha);
      if (re.sigma_u_clamped)
        result.warnings.push_back("random effects: negative firm variance estimate clamped to 0");
      bundle.table("04_hausman", [&](auto f) { return report::hausman(h, config.alpha, f); });
      bundle.log(fmt::format("[hausman] H = {:.4f}, df = {}, p = {:.4g}", h.statistic, h.df, h.p_value));
    }
    if (wants(Stage::Qreg)) {
      current = Stage::Qreg;
      for (LeverageKind kind : {LeverageKind::Book, LeverageKind::Market}) {
        if (std::find(config.leverage.begin(), config.leverage.end(), kind) == config.leverage.end())
          continue;
        const report::QuantileTable table = quantile_table(panel, config, kind, options, seeds);
        const std::string stem = kind == LeverageKind::Book ? "05_qreg_book" : "06_qreg_market";
        bundle.table(stem, [&](auto f) { return report::quantile_table(table, f); });
        bundle.log(fmt::format("[qreg] {} leverage done", to_string(kind)));
      }
    }
    if (wants(Stage::Speed)) {
      current = Stage::Speed;
      report::SpeedTable overall;
      overall.thetas = config.thetas;
      report::SpeedTable growth = overall;
      report::SpeedTable recession = overall;
      growth.regime = Regime::Growth;
      recession.regime = Regime::Recession;
      for (LeverageKind kind : {LeverageKind::Market, LeverageKind::Book}) {
        if (std::find(config.leverage.begin(), config.leverage.end(), kind) == config.leverage.end())
          continue;
        const TargetModelSpec spec = model_spec(config, kind, options.threads);
        overall.rows.emplace_back(kind, estimate_speed(panel, spec));
        const RegimeSpeeds by_regime = estimate_speed_by_regime(panel, spec);
        for (const auto& d : by_regime.diagnostics) {
          const std::string note = std::string(to_string(kind)) + " leverage: " + d;
          growth.notes.push_back(note);
          result.warnings.push_back(note);
        }
        for (auto* t : {&growth, &recession}) {
          auto it = by_regime.results.find(*t->regime);
          t->rows.emplace_back(kind, it == by_regime.results.end() ? std::vector<AdjustmentResult>{}
                                                                   : it->second);
        }
      }
      bundle.table("07_speed", [&](auto f) { return report::speed_table(overall, f); });
      bundle.table("08_speed_by_regime", [&](auto f) {
        if (f == report::Format::Text)
          return report::speed_table(growth, f) + '\n' + report::speed_table(recession, f);
        std::string g = report::speed_table(growth, f);
        std::string r = report::speed_table(recession, f);
        return g + r.substr(r.find('\n') + 1);  // one header
      });
      bundle.log("[speed] done");
    }
  } catch (const std::exception& e) {
    result.ok = false;
    result.failed_stage = std::string(stage_name(current));
    result.message = e.what();
    bundle.log(fmt::format("[{}] error: {}", result.failed_stage, result.message));
  }
  bundle.finish(result, inputs, seeds);
  return result;
}

RunResult run_simulate(const RunConfig& config, const RunOptions& options) {
  RunResult result;
  Bundle bundle(config, "simulate", options);
  std::vector<std::string> seeds;
  try {
    SynthConfig sim = config.sim;
    sim.seed = config.seed;
    sim.regime_threshold = config.regime_threshold;
    sim.tax_rate = config.tax_rate;
    const SynthPanel synth = generate_panel(sim);

    std::ostringstream panel_out, macro_out, truth_out;
    write_firm_year_csv(panel_out, synth.records);
    write_macro_csv(macro_out, synth.macro);
    write_ground_truth(truth_out, synth.truth);
    if (config.text) bundle.write("00_config.txt", config.render());
    bundle.write("firm_year.csv", panel_out.str());
    bundle.write("macro.csv", macro_out.str());
    std::string tax = "year,rate\n";
    for (const auto& y : synth.macro.years())
      tax += fmt::format("{},{}\n", y.year, csv::format_exact(sim.tax_rate));
    bundle.write("tax.csv", tax);
    bundle.write("ground_truth.json", truth_out.str());
    bundle.log(fmt::format("[simulate] {} firm-years for {} firms", synth.records.size(), sim.n_firms));

    if (config.sim_replications > 0) {
      MonteCarloOptions mc;
      mc.thetas = config.thetas;
      mc.leverage = config.leverage.front();
      mc.by_regime = sim.delta_recession.has_value();
      mc.effects.mode = config.fe_mode;
      mc.effects.lambda = config.fe_lambda;
      mc.effects.max_groups = config.max_groups;
      mc.threads = options.threads;
      const MonteCarloReport rep = monte_carlo_speed(sim, config.sim_replications, mc);
      bundle.table("recovery", [&](auto f) { return report::monte_carlo(rep, f); });
    }
  } catch (const std::exception& e) {
    result.ok = false;
    result.failed_stage = "simulate";
    result.message = e.what();
    bundle.log("[simulate] error: " + result.message);
  }
  bundle.finish(result, {}, seeds);
  return result;
}

}  // namespace capstruct
