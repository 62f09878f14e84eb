#pragma once

// Aligned-text and comma-delimited renderings of every result table.

#include "capstruct/adjustment.hpp"
#include "capstruct/descriptives.hpp"
#include "capstruct/effects.hpp"
#include "capstruct/panel_data.hpp"
#include "capstruct/synthgen.hpp"

#include <optional>
#include <string>
#include <vector>

namespace capstruct::report {

enum class Format { Text, Delimited };

/// Marker for undefined or missing cells.
inline constexpr std::string_view kMissing = "NA";

/// "%.2E" when 0 < |v| < 1e-3, otherwise four decimals.
std::string format_coefficient(double v);
/// One decimal percent, e.g. 0.527 -> "52.7%".
std::string format_percent(double ratio);
/// Quantile column label in the comma-decimal style, e.g. 0.15 -> "0,15".
std::string theta_label(double theta);
/// "***" for p < 0.01, "**" for p < 0.05, "*" for p < 0.10.
std::string stars(std::optional<double> p);

std::string validation(const ValidationReport& report, Format f);
std::string yearly_means(const YearlyMeans& means, Format f);
std::string correlation(const CorrelationMatrix& corr, Format f);
std::string hausman(const HausmanResult& h, double alpha, Format f);

struct QuantileColumn {
  double theta = 0.5;
  NamedVector coefficients;
  std::optional<Vector> std_errors;
  double mean_effect = 0.0;
  double pseudo_r2 = 0.0;
  Index n = 0;
};

struct QuantileTable {
  LeverageKind leverage = LeverageKind::Book;
  std::vector<QuantileColumn> columns;
};

/// Two-sided normal p-value of estimate / std_error (nullopt when se is 0 or missing).
std::optional<double> coefficient_p_value(double estimate, std::optional<double> std_error);

/// Coefficient and sterrors row pairs per term, then FIXED_EFFECTS and R-squared rows.
std::string quantile_table(const QuantileTable& table, Format f);

struct SpeedTable {
  std::optional<Regime> regime;
  std::vector<double> thetas;
  /// Market first, then book, as available.
  std::vector<std::pair<LeverageKind, std::vector<AdjustmentResult>>> rows;
  std::vector<std::string> notes;
};

/// SPEED MARKET / R-squared / SPEED BOOK / R-squared rows over the quantile columns.
std::string speed_table(const SpeedTable& table, Format f);

std::string monte_carlo(const MonteCarloReport& report, Format f);

}  // namespace capstruct::report
