#pragma once

// Firm-year panels: raw statement ingestion, macro series, and the derived
// leverage and determinant variables.

#include "capstruct/types.hpp"

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace capstruct {

/// Raw statement line items for one firm-year. Currency fields share one unit.
struct FirmYearRecord {
  std::string firm_id;
  int fiscal_year = 0;
  double total_assets = 0.0;
  double book_debt = 0.0;
  std::optional<double> market_equity;
  double current_assets = 0.0;
  double current_liabilities = 0.0;
  double ebit = 0.0;
  double interest_payable = 0.0;
  double income_tax = 0.0;
  double sales = 0.0;
  double net_ppe = 0.0;
  double depreciation = 0.0;

  bool operator==(const FirmYearRecord&) const = default;
};

enum class Regime { Growth, Recession };
std::string_view to_string(Regime r);

/// Recession iff gdp_growth < threshold.
inline Regime classify_regime(double gdp_growth, double threshold) {
  return gdp_growth < threshold ? Regime::Recession : Regime::Growth;
}

struct MacroYear {
  int year = 0;
  double inflation = 0.0;   // CPI change, percent per year
  double gdp_growth = 0.0;  // percent per year
  Regime regime = Regime::Growth;

  bool operator==(const MacroYear&) const = default;
};

class MacroSeries {
 public:
  MacroSeries() = default;
  /// Regimes are recomputed from gdp_growth with the threshold. Duplicate years throw.
  MacroSeries(std::vector<MacroYear> years, double regime_threshold);

  const MacroYear* find(int year) const;
  const std::vector<MacroYear>& years() const { return years_; }
  double regime_threshold() const { return threshold_; }
  bool empty() const { return years_.empty(); }

  bool operator==(const MacroSeries&) const = default;

 private:
  std::vector<MacroYear> years_;  // sorted by year
  double threshold_ = 0.0;
};

/// Corporate tax rate by fiscal year.
class TaxSchedule {
 public:
  static TaxSchedule constant(double rate);
  static TaxSchedule by_year(std::map<int, double> rates);

  /// Throws DataError when no rate applies to the year.
  double rate(int year) const;
  bool is_constant() const { return constant_.has_value(); }

 private:
  std::optional<double> constant_;
  std::map<int, double> rates_;
};

enum class Variable {
  Levb,
  Levm,
  Ndts,
  Profta,
  Sizeat,
  Growthat,
  Invta,
  Liqta,
  Mbratio,
  Inflation,
  GdpGrowth,
};

std::string_view variable_name(Variable v);
/// Accepts the names produced by variable_name. Throws ConfigError otherwise.
Variable parse_variable(std::string_view name);
bool is_macro(Variable v);

/// The seven firm-level determinants in table order.
const std::vector<Variable>& firm_determinants();
const std::vector<Variable>& macro_variables();

/// Regression variables for one firm-year.
struct ObservationRow {
  std::string firm_id;
  int fiscal_year = 0;
  double levb = 0.0;
  std::optional<double> levm;
  std::optional<double> ndts;
  std::optional<double> profta;
  std::optional<double> sizeat;
  std::optional<double> growthat;
  std::optional<double> invta;
  std::optional<double> liqta;
  std::optional<double> mbratio;

  std::optional<double> get(Variable v) const;
  void set(Variable v, double value);

  bool operator==(const ObservationRow&) const = default;
};

struct RowIssue {
  enum class Kind { Rejected, Flagged };
  Kind kind = Kind::Rejected;
  std::size_t source_line = 0;
  std::string firm_id;
  std::optional<int> fiscal_year;
  std::string reason;
};

struct ValidationReport {
  std::size_t rows_read = 0;
  std::size_t accepted = 0;
  std::vector<RowIssue> issues;

  std::size_t rejected() const;
  std::size_t flagged() const;
};

/// Accepted raw records sorted by (firm_id, fiscal_year), including rows flagged
/// unusable (total_assets <= 0).
class RawPanel {
 public:
  RawPanel() = default;
  RawPanel(std::vector<FirmYearRecord> sorted_records, std::vector<bool> usable);

  const std::vector<FirmYearRecord>& records() const { return records_; }
  bool usable(std::size_t i) const { return usable_[i]; }
  std::size_t size() const { return records_.size(); }

  bool operator==(const RawPanel&) const = default;

 private:
  std::vector<FirmYearRecord> records_;
  std::vector<bool> usable_;
};

struct SourcedRecord {
  FirmYearRecord record;
  std::size_t source_line = 0;
};

struct IngestResult {
  RawPanel panel;
  ValidationReport report;
};

/// Sorts, deduplicates by (firm_id, fiscal_year) keeping the first occurrence, and
/// flags non-positive total assets.
IngestResult ingest_panel(std::vector<SourcedRecord> records);
IngestResult ingest_panel(std::span<const FirmYearRecord> records);

/// Reads the firm-year schema
///   firm_id,fyear,at,debt,mkt_eq,act,lct,ebit,ip,txt,sale,ppent,dp
/// (mkt_eq may be missing). Malformed rows are rejected into the report.
IngestResult ingest_panel_csv(std::istream& in);

/// year,cpi_inflation,gdp_growth
MacroSeries read_macro_csv(std::istream& in, double regime_threshold);
/// year,rate
TaxSchedule read_tax_csv(std::istream& in);

void write_firm_year_csv(std::ostream& out, std::span<const FirmYearRecord> records);
void write_macro_csv(std::ostream& out, const MacroSeries& macro);

/// Derived, immutable panel: observation rows sorted by (firm_id, fiscal_year) with
/// contiguous firm ranges and the joined macro series.
class Panel {
 public:
  struct FirmRange {
    std::string firm_id;
    std::size_t begin = 0;
    std::size_t end = 0;
    bool operator==(const FirmRange&) const = default;
  };

  Panel() = default;
  /// Rows must be sorted by (firm_id, fiscal_year) without duplicates, and every
  /// year must be covered by the macro series.
  Panel(std::vector<ObservationRow> rows, MacroSeries macro, RawPanel source = {});

  const std::vector<ObservationRow>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  const std::vector<FirmRange>& firms() const { return firms_; }
  std::pair<int, int> year_span() const { return year_span_; }
  const MacroSeries& macro() const { return macro_; }
  const RawPanel& source() const { return source_; }

  /// Firm or macro variable for a row.
  std::optional<double> value(std::size_t row, Variable v) const;
  /// Dense firm index (0..firms-1) for every row.
  std::vector<int> firm_index() const;
  /// Position of the same firm's previous fiscal year, if that year is present.
  std::optional<std::size_t> previous_year(std::size_t row) const;

  Panel with_rows(std::vector<ObservationRow> rows) const;

  bool operator==(const Panel&) const = default;

 private:
  std::vector<ObservationRow> rows_;
  std::vector<FirmRange> firms_;
  std::vector<int> firm_of_row_;
  std::pair<int, int> year_span_{0, 0};
  MacroSeries macro_;
  RawPanel source_;
};

/// Computes levb, levm, ndts, profta, sizeat, growthat, invta, liqta and mbratio for
/// every usable record. Lagged variables need the immediately preceding fiscal year.
Panel derive_variables(const RawPanel& raw, const MacroSeries& macro, const TaxSchedule& tax);
/// Re-derives from the panel's retained source records.
Panel derive_variables(const Panel& panel, const MacroSeries& macro, const TaxSchedule& tax);

/// Clamps every firm variable to its [lower, upper] empirical quantiles
/// (e.g. 0.01, 0.99) across the rows where it is present.
Panel winsorize(const Panel& panel, double lower, double upper);

}  // namespace capstruct
