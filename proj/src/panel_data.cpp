#include "capstruct/panel_data.hpp"

#include "capstruct/csv.hpp"
#include "capstruct/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <tuple>

namespace capstruct {

std::string_view to_string(Regime r) { return r == Regime::Growth ? "Growth" : "Recession"; }

// ---------------------------------------------------------------------------
// Macro series and tax schedule
// ---------------------------------------------------------------------------

MacroSeries::MacroSeries(std::vector<MacroYear> years, double regime_threshold)
    : years_(std::move(years)), threshold_(regime_threshold) {
  std::sort(years_.begin(), years_.end(),
            [](const MacroYear& a, const MacroYear& b) { return a.year < b.year; });
  for (std::size_t i = 1; i < years_.size(); ++i)
    if (years_[i].year == years_[i - 1].year)
      throw DataError("macro series: duplicate year " + std::to_string(years_[i].year));
  for (auto& y : years_) {
    if (!std::isfinite(y.inflation) || !std::isfinite(y.gdp_growth))
      throw DataError("macro series: non-finite value in year " + std::to_string(y.year));
    y.regime = classify_regime(y.gdp_growth, threshold_);
  }
}

const MacroYear* MacroSeries::find(int year) const {
  auto it = std::lower_bound(years_.begin(), years_.end(), year,
                             [](const MacroYear& m, int y) { return m.year < y; });
  return it != years_.end() && it->year == year ? &*it : nullptr;
}

TaxSchedule TaxSchedule::constant(double rate) {
  if (!(rate > 0.0 && rate <= 1.0)) throw ConfigError("tax rate must lie in (0, 1]");
  TaxSchedule t;
  t.constant_ = rate;
  return t;
}

TaxSchedule TaxSchedule::by_year(std::map<int, double> rates) {
  for (const auto& [year, rate] : rates)
    if (!(rate > 0.0 && rate <= 1.0))
      throw ConfigError("tax rate for " + std::to_string(year) + " must lie in (0, 1]");
  TaxSchedule t;
  t.rates_ = std::move(rates);
  return t;
}

double TaxSchedule::rate(int year) const {
  if (constant_) return *constant_;
  auto it = rates_.find(year);
  if (it == rates_.end()) throw DataError("no tax rate for fiscal year " + std::to_string(year));
  return it->second;
}

// ---------------------------------------------------------------------------
// Variables
// ---------------------------------------------------------------------------

namespace {

constexpr std::array<std::pair<Variable, std::string_view>, 11> kVariableNames{{
    {Variable::Levb, "levb"},
    {Variable::Levm, "levm"},
    {Variable::Ndts, "ndts"},
    {Variable::Profta, "profta"},
    {Variable::Sizeat, "sizeat"},
    {Variable::Growthat, "growthat"},
    {Variable::Invta, "invta"},
    {Variable::Liqta, "liqta"},
    {Variable::Mbratio, "mbratio"},
    {Variable::Inflation, "inflation"},
    {Variable::GdpGrowth, "gdp_growth"},
}};

}  // namespace

std::string_view variable_name(Variable v) {
  for (const auto& [var, name] : kVariableNames)
    if (var == v) return name;
  return "?";
}

Variable parse_variable(std::string_view name) {
  for (const auto& [var, n] : kVariableNames)
    if (n == name) return var;
  throw ConfigError("unknown variable '" + std::string(name) + "'");
}

bool is_macro(Variable v) { return v == Variable::Inflation || v == Variable::GdpGrowth; }

const std::vector<Variable>& firm_determinants() {
  static const std::vector<Variable> vars{Variable::Liqta,  Variable::Ndts,     Variable::Profta,
                                          Variable::Sizeat, Variable::Growthat, Variable::Invta,
                                          Variable::Mbratio};
  return vars;
}

const std::vector<Variable>& macro_variables() {
  static const std::vector<Variable> vars{Variable::Inflation, Variable::GdpGrowth};
  return vars;
}

std::optional<double> ObservationRow::get(Variable v) const {
  switch (v) {
    case Variable::Levb: return levb;
    case Variable::Levm: return levm;
    case Variable::Ndts: return ndts;
    case Variable::Profta: return profta;
    case Variable::Sizeat: return sizeat;
    case Variable::Growthat: return growthat;
    case Variable::Invta: return invta;
    case Variable::Liqta: return liqta;
    case Variable::Mbratio: return mbratio;
    default: return std::nullopt;
  }
}

void ObservationRow::set(Variable v, double value) {
  switch (v) {
    case Variable::Levb: levb = value; break;
    case Variable::Levm: levm = value; break;
    case Variable::Ndts: ndts = value; break;
    case Variable::Profta: profta = value; break;
    case Variable::Sizeat: sizeat = value; break;
    case Variable::Growthat: growthat = value; break;
    case Variable::Invta: invta = value; break;
    case Variable::Liqta: liqta = value; break;
    case Variable::Mbratio: mbratio = value; break;
    default: throw std::invalid_argument("macro variables are not stored on observation rows");
  }
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

std::size_t ValidationReport::rejected() const {
  return static_cast<std::size_t>(std::count_if(issues.begin(), issues.end(), [](const RowIssue& i) {
    return i.kind == RowIssue::Kind::Rejected;
  }));
}

std::size_t ValidationReport::flagged() const { return issues.size() - rejected(); }

RawPanel::RawPanel(std::vector<FirmYearRecord> sorted_records, std::vector<bool> usable)
    : records_(std::move(sorted_records)), usable_(std::move(usable)) {
  if (usable_.size() != records_.size())
    throw std::invalid_argument("RawPanel: one usable flag per record");
}

namespace {

bool record_finite(const FirmYearRecord& r) {
  const double values[] = {r.total_assets,   r.book_debt, r.current_assets, r.current_liabilities,
                           r.ebit,           r.interest_payable,
                           r.income_tax,     r.sales,     r.net_ppe,        r.depreciation};
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return !r.market_equity || std::isfinite(*r.market_equity);
}

}  // namespace

IngestResult ingest_panel(std::vector<SourcedRecord> records) {
  IngestResult out;
  out.report.rows_read = records.size();

  // Stable sort keeps source order among duplicates, so the first occurrence wins.
  std::stable_sort(records.begin(), records.end(), [](const SourcedRecord& a, const SourcedRecord& b) {
    if (a.record.firm_id != b.record.firm_id) return a.record.firm_id < b.record.firm_id;
    return a.record.fiscal_year < b.record.fiscal_year;
  });

  std::vector<FirmYearRecord> kept;
  std::vector<bool> usable;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& s = records[i];
    auto reject = [&](std::string reason) {
      out.report.issues.push_back({RowIssue::Kind::Rejected, s.source_line, s.record.firm_id,
                                   s.record.fiscal_year, std::move(reason)});
    };
    if (s.record.firm_id.empty()) {
      reject("missing firm_id");
      continue;
    }
    if (!record_finite(s.record)) {
      reject("non-finite value");
      continue;
    }
    if (!kept.empty() && kept.back().firm_id == s.record.firm_id &&
        kept.back().fiscal_year == s.record.fiscal_year) {
      reject("duplicate");
      continue;
    }
    const bool ok = s.record.total_assets > 0.0;
    if (!ok) {
      out.report.issues.push_back({RowIssue::Kind::Flagged, s.source_line, s.record.firm_id,
                                   s.record.fiscal_year, "non-positive total_assets: unusable"});
    }
    kept.push_back(s.record);
    usable.push_back(ok);
  }
  out.report.accepted = kept.size();
  std::stable_sort(out.report.issues.begin(), out.report.issues.end(),
                   [](const RowIssue& a, const RowIssue& b) { return a.source_line < b.source_line; });
  out.panel = RawPanel(std::move(kept), std::move(usable));
  return out;
}

IngestResult ingest_panel(std::span<const FirmYearRecord> records) {
  std::vector<SourcedRecord> sourced;
  sourced.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) sourced.push_back({records[i], i + 1});
  return ingest_panel(std::move(sourced));
}

namespace {

struct Column {
  std::string_view name;
  double FirmYearRecord::*field;
};

constexpr std::array<Column, 10> kCurrencyColumns{{
    {"at", &FirmYearRecord::total_assets},
    {"debt", &FirmYearRecord::book_debt},
    {"act", &FirmYearRecord::current_assets},
    {"lct", &FirmYearRecord::current_liabilities},
    {"ebit", &FirmYearRecord::ebit},
    {"ip", &FirmYearRecord::interest_payable},
    {"txt", &FirmYearRecord::income_tax},
    {"sale", &FirmYearRecord::sales},
    {"ppent", &FirmYearRecord::net_ppe},
    {"dp", &FirmYearRecord::depreciation},
}};

std::size_t require_column(const csv::Table& t, std::string_view name, std::string_view what) {
  auto c = t.column(name);
  if (!c) throw DataError(std::string(what) + ": missing column '" + std::string(name) + "'");
  return *c;
}

}  // namespace

IngestResult ingest_panel_csv(std::istream& in) {
  const csv::Table table = csv::read(in);
  const std::size_t firm_col = require_column(table, "firm_id", "firm-year input");
  const std::size_t year_col = require_column(table, "fyear", "firm-year input");
  std::array<std::size_t, kCurrencyColumns.size()> cols{};
  for (std::size_t j = 0; j < kCurrencyColumns.size(); ++j)
    cols[j] = require_column(table, kCurrencyColumns[j].name, "firm-year input");
  const auto equity_col = table.column("mkt_eq");

  std::vector<SourcedRecord> parsed;
  std::vector<RowIssue> malformed;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& fields = table.rows[r];
    const std::size_t line = table.lines[r];
    auto reject = [&](std::string reason, std::optional<int> year = std::nullopt) {
      const std::string firm = firm_col < fields.size() ? fields[firm_col] : std::string{};
      malformed.push_back({RowIssue::Kind::Rejected, line, firm, year, std::move(reason)});
    };
    if (fields.size() != table.header.size()) {
      reject("expected " + std::to_string(table.header.size()) + " fields, found " +
             std::to_string(fields.size()));
      continue;
    }
    SourcedRecord s;
    s.source_line = line;
    s.record.firm_id = fields[firm_col];
    const auto year = csv::parse_integer(fields[year_col]);
    if (!year) {
      reject("malformed fyear '" + fields[year_col] + "'");
      continue;
    }
    s.record.fiscal_year = static_cast<int>(*year);

    std::string problem;
    for (std::size_t j = 0; j < kCurrencyColumns.size() && problem.empty(); ++j) {
      const std::string& text = fields[cols[j]];
      if (csv::is_missing(text)) {
        problem = "missing " + std::string(kCurrencyColumns[j].name);
      } else if (auto v = csv::parse_double(text); v && std::isfinite(*v)) {
        s.record.*kCurrencyColumns[j].field = *v;
      } else {
        problem = "malformed " + std::string(kCurrencyColumns[j].name) + " '" + text + "'";
      }
    }
    if (problem.empty() && equity_col && !csv::is_missing(fields[*equity_col])) {
      const auto v = csv::parse_double(fields[*equity_col]);
      if (v && std::isfinite(*v)) {
        s.record.market_equity = *v;
      } else {
        problem = "malformed mkt_eq '" + fields[*equity_col] + "'";
      }
    }
    if (!problem.empty()) {
      reject(std::move(problem), s.record.fiscal_year);
      continue;
    }
    parsed.push_back(std::move(s));
  }

  IngestResult out = ingest_panel(std::move(parsed));
  out.report.rows_read += malformed.size();
  out.report.issues.insert(out.report.issues.end(), malformed.begin(), malformed.end());
  std::stable_sort(out.report.issues.begin(), out.report.issues.end(),
                   [](const RowIssue& a, const RowIssue& b) { return a.source_line < b.source_line; });
  return out;
}

MacroSeries read_macro_csv(std::istream& in, double regime_threshold) {
  const csv::Table table = csv::read(in);
  const std::size_t year_col = require_column(table, "year", "macro input");
  const std::size_t infl_col = require_column(table, "cpi_inflation", "macro input");
  const std::size_t gdp_col = require_column(table, "gdp_growth", "macro input");
  std::vector<MacroYear> years;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& f = table.rows[r];
    const std::string where = "macro input line " + std::to_string(table.lines[r]);
    if (f.size() != table.header.size()) throw DataError(where + ": wrong field count");
    const auto year = csv::parse_integer(f[year_col]);
    const auto infl = csv::parse_double(f[infl_col]);
    const auto gdp = csv::parse_double(f[gdp_col]);
    if (!year || !infl || !gdp) throw DataError(where + ": malformed value");
    years.push_back({static_cast<int>(*year), *infl, *gdp, Regime::Growth});
  }
  return MacroSeries(std::move(years), regime_threshold);
}

TaxSchedule read_tax_csv(std::istream& in) {
  const csv::Table table = csv::read(in);
  const std::size_t year_col = require_column(table, "year", "tax input");
  const std::size_t rate_col = require_column(table, "rate", "tax input");
  std::map<int, double> rates;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& f = table.rows[r];
    const std::string where = "tax input line " + std::to_string(table.lines[r]);
    if (f.size() != table.header.size()) throw DataError(where + ": wrong field count");
    const auto year = csv::parse_integer(f[year_col]);
    const auto rate = csv::parse_double(f[rate_col]);
    if (!year || !rate) throw DataError(where + ": malformed value");
    if (!rates.emplace(static_cast<int>(*year), *rate).second)
      throw DataError(where + ": duplicate year");
  }
  return TaxSchedule::by_year(std::move(rates));
}

void write_firm_year_csv(std::ostream& out, std::span<const FirmYearRecord> records) {
  out << "firm_id,fyear,at,debt,mkt_eq,act,lct,ebit,ip,txt,sale,ppent,dp\n";
  for (const auto& r : records) {
    out << csv::escape(r.firm_id) << ',' << r.fiscal_year << ',' << csv::format_exact(r.total_assets)
        << ',' << csv::format_exact(r.book_debt) << ','
        << (r.market_equity ? csv::format_exact(*r.market_equity) : "NA");
    for (std::size_t j = 2; j < kCurrencyColumns.size(); ++j)
      out << ',' << csv::format_exact(r.*kCurrencyColumns[j].field);
    out << '\n';
  }
}

void write_macro_csv(std::ostream& out, const MacroSeries& macro) {
  out << "year,cpi_inflation,gdp_growth\n";
  for (const auto& y : macro.years())
    out << y.year << ',' << csv::format_exact(y.inflation) << ',' << csv::format_exact(y.gdp_growth)
        << '\n';
}

// ---------------------------------------------------------------------------
// Panel
// ---------------------------------------------------------------------------

Panel::Panel(std::vector<ObservationRow> rows, MacroSeries macro, RawPanel source)
    : rows_(std::move(rows)), macro_(std::move(macro)), source_(std::move(source)) {
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& r = rows_[i];
    if (i > 0) {
      const auto& p = rows_[i - 1];
      if (std::tie(p.firm_id, p.fiscal_year) >= std::tie(r.firm_id, r.fiscal_year))
        throw DataError("panel rows must be sorted by (firm_id, fiscal_year) without duplicates");
    }
    if (firms_.empty() || firms_.back().firm_id != r.firm_id) firms_.push_back({r.firm_id, i, i});
    firms_.back().end = i + 1;
    firm_of_row_.push_back(static_cast<int>(firms_.size() - 1));
    if (!macro_.empty() && !macro_.find(r.fiscal_year))
      throw DataError("macro series has no entry for year " + std::to_string(r.fiscal_year));
  }
  if (!rows_.empty()) {
    auto [lo, hi] = std::minmax_element(
        rows_.begin(), rows_.end(),
        [](const ObservationRow& a, const ObservationRow& b) { return a.fiscal_year < b.fiscal_year; });
    year_span_ = {lo->fiscal_year, hi->fiscal_year};
  }
}

std::optional<double> Panel::value(std::size_t row, Variable v) const {
  const auto& r = rows_[row];
  if (!is_macro(v)) return r.get(v);
  const MacroYear* m = macro_.find(r.fiscal_year);
  if (!m) return std::nullopt;
  return v == Variable::Inflation ? m->inflation : m->gdp_growth;
}

std::vector<int> Panel::firm_index() const { return firm_of_row_; }

std::optional<std::size_t> Panel::previous_year(std::size_t row) const {
  if (row == 0) return std::nullopt;
  const auto& r = rows_[row];
  const auto& p = rows_[row - 1];
  if (p.firm_id == r.firm_id && p.fiscal_year == r.fiscal_year - 1) return row - 1;
  return std::nullopt;
}

Panel Panel::with_rows(std::vector<ObservationRow> rows) const {
  return Panel(std::move(rows), macro_, source_);
}

// ---------------------------------------------------------------------------
// Derivation
// ---------------------------------------------------------------------------

Panel derive_variables(const RawPanel& raw, const MacroSeries& macro, const TaxSchedule& tax) {
  const auto& recs = raw.records();
  std::vector<ObservationRow> rows;
  rows.reserve(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (!raw.usable(i)) continue;
    const FirmYearRecord& r = recs[i];
    if (!macro.empty() && !macro.find(r.fiscal_year))
      throw DataError("macro series has no entry for year " + std::to_string(r.fiscal_year));

    ObservationRow o;
    o.firm_id = r.firm_id;
    o.fiscal_year = r.fiscal_year;
    o.levb = r.book_debt / r.total_assets;
    if (r.market_equity) {
      const double firm_value = r.book_debt + *r.market_equity;
      if (firm_value != 0.0) o.levm = r.book_debt / firm_value;
      o.mbratio = firm_value / r.total_assets;
    }
    o.ndts = r.ebit - r.interest_payable - r.income_tax / tax.rate(r.fiscal_year);
    o.profta = r.ebit / r.total_assets;
    if (r.sales > 0.0) o.sizeat = std::log(r.sales);
    if (r.current_liabilities != 0.0) o.liqta = r.current_assets / r.current_liabilities;

    // Lags need the same firm's immediately preceding year, itself usable.
    if (i > 0 && raw.usable(i - 1) && recs[i - 1].firm_id == r.firm_id &&
        recs[i - 1].fiscal_year == r.fiscal_year - 1) {
      const FirmYearRecord& p = recs[i - 1];
      if (p.sales > 0.0) o.growthat = (r.sales - p.sales) / p.sales;
      o.invta = r.net_ppe - p.net_ppe + r.depreciation;
    }
    rows.push_back(std::move(o));
  }
  return Panel(std::move(rows), macro, raw);
}

Panel derive_variables(const Panel& panel, const MacroSeries& macro, const TaxSchedule& tax) {
  return derive_variables(panel.source(), macro, tax);
}

Panel winsorize(const Panel& panel, double lower, double upper) {
  if (!(lower >= 0.0 && lower < upper && upper <= 1.0))
    throw ConfigError("winsorization percentiles must satisfy 0 <= lower < upper <= 1");
  std::vector<ObservationRow> rows = panel.rows();
  for (const auto& [var, name] : kVariableNames) {
    if (is_macro(var)) continue;
    std::vector<double> present;
    for (const auto& r : rows)
      if (auto v = r.get(var)) present.push_back(*v);
    if (present.empty()) continue;
    std::sort(present.begin(), present.end());
    auto at = [&](double q) {
      const double pos = q * static_cast<double>(present.size() - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const auto hi = std::min(lo + 1, present.size() - 1);
      return present[lo] + (pos - static_cast<double>(lo)) * (present[hi] - present[lo]);
    };
    const double lo = at(lower);
    const double hi = at(upper);
    for (auto& r : rows)
      if (auto v = r.get(var)) r.set(var, std::clamp(*v, lo, hi));
  }
  return panel.with_rows(std::move(rows));
}

}  // namespace capstruct
