#include "capstruct/error.hpp"
#include "capstruct/pipeline.hpp"

#include "CLI11.hpp"

#include <fmt/format.h>

#include <cstdlib>
#include <iostream>
#include <optional>

namespace {

struct Flags {
  std::string config;
  std::optional<std::string> input, macro, theta, leverage, bootstrap, seed, regime_threshold, out,
      format;
  int threads = 1;
};

void add_flags(CLI::App& app, Flags& f) {
  app.add_option("--config", f.config, "key = value configuration file (default: $CAPSTRUCT_CONFIG)");
  app.add_option("--input", f.input, "firm-year CSV");
  app.add_option("--macro", f.macro, "macro series CSV (year, cpi_inflation, gdp_growth)");
  app.add_option("--theta", f.theta, "comma-separated quantiles, e.g. 0.15,0.35,0.5,0.75,0.95");
  app.add_option("--leverage", f.leverage, "book|market|both");
  app.add_option("--bootstrap", f.bootstrap, "bootstrap replications (0 disables standard errors)");
  app.add_option("--seed", f.seed, "master seed");
  app.add_option("--regime-threshold", f.regime_threshold, "GDP growth threshold for recessions");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--format", f.format, "text|delimited|both");
  app.add_option("--threads", f.threads, "worker threads; outputs do not depend on it")
      ->check(CLI::PositiveNumber);
}

capstruct::RunConfig resolve(const Flags& f) {
  capstruct::RunConfig config;
  std::string path = f.config;
  if (path.empty()) {
    if (const char* env = std::getenv("CAPSTRUCT_CONFIG")) path = env;
  }
  if (!path.empty()) capstruct::load_config_file(config, path);
  const std::pair<const char*, const std::optional<std::string>*> overrides[] = {
      {"input", &f.input},         {"macro", &f.macro},
      {"thetas", &f.theta},        {"leverage", &f.leverage},
      {"bootstrap", &f.bootstrap}, {"seed", &f.seed},
      {"regime_threshold", &f.regime_threshold},
      {"out", &f.out},             {"format", &f.format}};
  for (const auto& [key, value] : overrides) {
    if (*value) config.set(key, **value);
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  using capstruct::Stage;
  CLI::App app{"Capital structure adjustment speeds by panel quantile regression"};
  app.require_subcommand(1);
  Flags flags;

  const std::pair<const char*, std::vector<Stage>> commands[] = {
      {"ingest", {Stage::Ingest}},
      {"describe", {Stage::Describe}},
      {"correlate", {Stage::Correlate}},
      {"hausman", {Stage::Hausman}},
      {"qreg", {Stage::Qreg}},
      {"speed", {Stage::Speed}},
      {"replicate", capstruct::all_stages()},
  };
  const std::pair<const char*, const char*> help[] = {
      {"ingest", "validate the firm-year file and write the validation report"},
      {"describe", "yearly means of the derived variables"},
      {"correlate", "pairwise correlation matrix with p-values"},
      {"hausman", "fixed versus random effects test"},
      {"qreg", "quantile fixed-effects coefficient tables"},
      {"speed", "adjustment speeds, overall and by regime"},
      {"replicate", "every stage in order"},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, text] : help) {
    subs.push_back(app.add_subcommand(name, text));
    add_flags(*subs.back(), flags);
  }
  CLI::App* simulate = app.add_subcommand("simulate", "write a synthetic panel with known speeds");
  add_flags(*simulate, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    const capstruct::RunConfig config = resolve(flags);
    capstruct::RunOptions options;
    options.threads = flags.threads;
    options.log = &std::cerr;

    capstruct::RunResult result;
    if (simulate->parsed()) {
      result = capstruct::run_simulate(config, options);
    } else {
      for (std::size_t i = 0; i < subs.size(); ++i) {
        if (subs[i]->parsed())
          result = capstruct::run_pipeline(config, commands[i].second, commands[i].first, options);
      }
    }
    if (!result.ok) {
      std::cerr << fmt::format("capstruct: stage '{}' failed: {}\n", result.failed_stage,
                               result.message);
      return 1;
    }
    std::cerr << fmt::format("capstruct: wrote {} files to {}\n", result.files.size(), config.out);
    return 0;
  } catch (const capstruct::ConfigError& e) {
    std::cerr << "capstruct: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "capstruct: " << e.what() << '\n';
    return 1;
  }
}
