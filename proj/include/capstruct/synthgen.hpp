#pragma once

// Synthetic firm-year panels from a partial-adjustment process with known
// coefficients, and a Monte Carlo harness for the speed estimators.

#include "capstruct/adjustment.hpp"
#include "capstruct/panel_data.hpp"
#include "capstruct/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace capstruct {

struct ErrorModel {
  enum class Kind { Normal, Student, Heteroskedastic } kind = Kind::Normal;
  /// Scale of the adjustment shock (standard deviation for Normal).
  double sigma = 0.01;
  /// Degrees of freedom (Student).
  double nu = 5.0;
  /// Heteroskedastic: the shock scale is sigma * (1 + slope * liqta).
  double slope = 1.0;
};

/// Defaults are documented next to generate_panel's determinant distributions.
struct SynthConfig {
  int n_firms = 500;
  int t_max = 20;
  /// Probability that a firm leaves the panel in each year after its first.
  double attrition = 0.0;
  int burn_in = 10;
  /// Speed of adjustment; with delta_recession set, delta applies in growth years.
  double delta = 0.6;
  std::optional<double> delta_recession;
  double intercept = 0.35;
  NamedVector beta = default_beta();
  NamedVector gamma = default_gamma();
  double firm_effect_sd = 0.05;
  ErrorModel error;
  /// Explicit macro series covering the observed years; drawn from the seed when empty.
  std::vector<MacroYear> macro_path;
  double regime_threshold = 0.0;
  int start_year = 1990;
  double tax_rate = 0.21;
  std::uint64_t seed = 1;

  static NamedVector default_beta();
  static NamedVector default_gamma();
  /// Throws ConfigError.
  void validate() const;
};

struct GroundTruth {
  SynthConfig config;
  std::vector<std::string> firm_ids;
  std::vector<double> firm_effects;  // a_i, aligned with firm_ids
  std::map<int, Regime> regimes;     // observed years
};

struct SynthPanel {
  std::vector<FirmYearRecord> records;  // sorted by (firm_id, fiscal_year)
  MacroSeries macro;
  Panel panel;
  GroundTruth truth;
};

/// Leverage evolves as LEV_t = LEV_{t-1} + delta_t (LEV*_t - LEV_{t-1}) + e_t with
/// LEV*_t = a + a_i + beta'X_t + gamma'M_t, starting at LEV*_0 and discarding burn_in
/// years. Per firm-year determinants:
///   sizeat   ln sales, AR(1) around a firm mean ~ N(5, 1): rho 0.7, shock sd 0.2
///   growthat implied by consecutive sales
///   liqta    lognormal: exp(m_i + 0.25 z), m_i ~ N(0.3, 0.2)
///   mbratio  lognormal: exp(b_i + 0.25 z), b_i ~ N(0.2, 0.2)
///   profta   N(0.08, 0.1)
///   ndts     N(0, 1) in currency units
///   invta    N(0.5, 1) in currency units
/// Raw statements are reconstructed so that derive_variables returns these values.
SynthPanel generate_panel(const SynthConfig& config);

void write_ground_truth(std::ostream& out, const GroundTruth& truth);

struct MonteCarloOptions {
  std::vector<double> thetas{0.5};
  LeverageKind leverage = LeverageKind::Book;
  /// Estimate per regime when the config has a recession speed.
  bool by_regime = false;
  QuantileEffectsOptions effects;
  int threads = 1;
};

struct RecoveryStats {
  double theta = 0.5;
  std::optional<Regime> regime;
  double true_delta = 0.0;
  int estimates = 0;
  double mean = 0.0;
  double bias = 0.0;
  std::optional<double> sd;  // undefined for a single estimate
  double rmse = 0.0;
};

struct MonteCarloReport {
  int replications = 0;
  int failures = 0;
  std::vector<std::string> failure_messages;
  std::vector<RecoveryStats> stats;
  /// Estimates per replication (NaN for failures), aligned with stats.
  std::vector<std::vector<double>> estimates;
};

/// Replication r regenerates the panel with a seed derived from (config.seed, r).
MonteCarloReport monte_carlo_speed(const SynthConfig& config, int replications,
                                   const MonteCarloOptions& options = {});

}  // namespace capstruct
