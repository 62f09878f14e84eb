#pragma once

// Run configuration and the staged estimation pipeline behind the command-line tool.

#include "capstruct/adjustment.hpp"
#include "capstruct/effects.hpp"
#include "capstruct/synthgen.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace capstruct {

struct RunConfig {
  std::string input;
  std::string macro;
  std::string tax;  // optional per-year table; tax_rate applies when empty
  double tax_rate = 0.21;
  std::vector<double> thetas = default_thetas();
  std::vector<LeverageKind> leverage{LeverageKind::Book, LeverageKind::Market};
  double regime_threshold = 0.0;
  RegimeRule::Year regime_year = RegimeRule::Year::Current;
  int bootstrap = 200;
  std::uint64_t seed = 1;
  bool winsorize = false;
  double winsorize_lower = 0.01;
  double winsorize_upper = 0.99;
  std::string out = "capstruct_out";
  bool text = true;
  bool delimited = true;
  double alpha = 0.05;
  QuantileEffectsMode fe_mode = QuantileEffectsMode::Dummy;
  double fe_lambda = 1.0;
  int max_groups = 5000;
  bool two_step = false;
  SynthConfig sim;
  int sim_replications = 0;

  /// Sets one key from its text form. Throws ConfigError for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// Every key with its resolved value, one "key = value" line each, in fixed order.
  std::string render() const;
};

/// Reads "key = value" lines; blank lines and lines starting with '#' are ignored.
void apply_config(RunConfig& config, std::istream& in, const std::string& source);
void load_config_file(RunConfig& config, const std::string& path);

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

enum class Stage { Ingest, Describe, Correlate, Hausman, Qreg, Speed };
std::string_view stage_name(Stage s);
const std::vector<Stage>& all_stages();

struct RunOptions {
  /// Worker threads for bootstrap replicates and quantiles; outputs do not depend on it.
  int threads = 1;
  std::ostream* log = nullptr;
};

struct RunResult {
  bool ok = true;
  std::string failed_stage;
  std::string message;
  std::vector<std::string> files;  // written, in order
  std::vector<std::string> warnings;
};

/// Runs ingestion (always) and the requested stages, writing their files, the resolved
/// configuration and a manifest into config.out. `command` is recorded in the manifest.
RunResult run_pipeline(const RunConfig& config, const std::vector<Stage>& stages,
                       const std::string& command, const RunOptions& options = {});

/// Writes a synthetic panel (firm-year, macro and tax files plus ground truth) from the
/// sim settings, and a recovery report when sim_replications > 0.
RunResult run_simulate(const RunConfig& config, const RunOptions& options = {});

}  // namespace capstruct
