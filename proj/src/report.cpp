#include "capstruct/report.hpp"

#include "capstruct/csv.hpp"

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>

namespace capstruct::report {
namespace {

using Cells = std::vector<std::vector<std::string>>;

/// First column left aligned, the rest right aligned, two spaces apart.
std::string align(const Cells& cells) {
  std::vector<std::size_t> width;
  for (const auto& row : cells) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t j = 0; j < row.size(); ++j) width[j] = std::max(width[j], row[j].size());
  }
  std::string out;
  for (const auto& row : cells) {
    std::string line;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j == 0) {
        line += fmt::format("{:<{}}", row[j], width[j]);
      } else {
        line += fmt::format("  {:>{}}", row[j], width[j]);
      }
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
  }
  return out;
}

std::string delimited(const Cells& cells) {
  std::string out;
  for (const auto& row : cells) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ',';
      out += csv::escape(row[j]);
    }
    out += '\n';
  }
  return out;
}

std::string exact(double v) { return std::isfinite(v) ? csv::format_exact(v) : std::string(kMissing); }

std::string exact(const std::optional<double>& v) { return v ? exact(*v) : std::string(kMissing); }

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string fixed4(double v) { return fmt::format("{:.4f}", v); }

}  // namespace

std::string format_coefficient(double v) {
  if (!std::isfinite(v)) return std::string(kMissing);
  if (v != 0.0 && std::abs(v) < 1e-3) return fmt::format("{:.2E}", v);
  return fixed4(v);
}

std::string format_percent(double ratio) {
  if (!std::isfinite(ratio)) return std::string(kMissing);
  return fmt::format("{:.1f}%", 100.0 * ratio);
}

std::string theta_label(double theta) {
  std::string s = csv::format_exact(theta);
  std::replace(s.begin(), s.end(), '.', ',');
  return s;
}

std::string stars(std::optional<double> p) {
  if (!p) return "";
  if (*p < 0.01) return "***";
  if (*p < 0.05) return "**";
  if (*p < 0.10) return "*";
  return "";
}

std::optional<double> coefficient_p_value(double estimate, std::optional<double> std_error) {
  if (!std_error || !(*std_error > 0.0) || !std::isfinite(estimate)) return std::nullopt;
  const boost::math::normal_distribution<double> normal;
  return 2.0 * boost::math::cdf(boost::math::complement(normal, std::abs(estimate / *std_error)));
}

// ---------------------------------------------------------------------------

std::string validation(const ValidationReport& report, Format f) {
  if (f == Format::Delimited) {
    Cells cells{{"line", "firm_id", "fyear", "kind", "reason"}};
    for (const auto& i : report.issues)
      cells.push_back({std::to_string(i.source_line), i.firm_id,
                       i.fiscal_year ? std::to_string(*i.fiscal_year) : std::string(kMissing),
                       i.kind == RowIssue::Kind::Rejected ? "rejected" : "flagged", i.reason});
    return delimited(cells);
  }
  std::string out = "Validation report\n\n";
  out += align({{"Rows read", std::to_string(report.rows_read)},
                {"Accepted", std::to_string(report.accepted)},
                {"Rejected", std::to_string(report.rejected())},
                {"Flagged unusable", std::to_string(report.flagged())}});
  if (!report.issues.empty()) {
    Cells cells{{"Line", "Firm", "Year", "Status", "Reason"}};
    for (const auto& i : report.issues)
      cells.push_back({std::to_string(i.source_line), i.firm_id.empty() ? std::string(kMissing) : i.firm_id,
                       i.fiscal_year ? std::to_string(*i.fiscal_year) : std::string(kMissing),
                       i.kind == RowIssue::Kind::Rejected ? "rejected" : "flagged", i.reason});
    out += '\n' + align(cells);
  }
  return out;
}

std::string yearly_means(const YearlyMeans& means, Format f) {
  Cells cells;
  std::vector<std::string> header{f == Format::Text ? "Year" : "year",
                                  f == Format::Text ? "Obs" : "observations"};
  for (Variable v : means.variables)
    header.push_back(f == Format::Text ? upper(variable_name(v)) : std::string(variable_name(v)));
  cells.push_back(header);
  for (const auto& row : means.rows) {
    std::vector<std::string> line{row.label, std::to_string(row.observations)};
    for (const auto& m : row.means) {
      if (f == Format::Delimited) {
        line.push_back(exact(m));
      } else {
        line.push_back(m ? format_coefficient(*m) : std::string(kMissing));
      }
    }
    cells.push_back(std::move(line));
  }
  if (f == Format::Delimited) return delimited(cells);
  return "Mean variables\n\n" + align(cells);
}

std::string correlation(const CorrelationMatrix& corr, Format f) {
  const std::size_t k = corr.variables.size();
  if (f == Format::Delimited) {
    Cells cells{{"variable_a", "variable_b", "r", "p_value", "n"}};
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) {
        const auto& c = corr.at(a, b);
        cells.push_back({std::string(variable_name(corr.variables[a])),
                         std::string(variable_name(corr.variables[b])), exact(c.r), exact(c.p),
                         std::to_string(c.n)});
      }
    return delimited(cells);
  }
  Cells cells;
  std::vector<std::string> header{"Correlation"};
  for (Variable v : corr.variables) header.push_back(upper(variable_name(v)));
  cells.push_back(header);
  cells.push_back({"Probability"});
  for (std::size_t a = 0; a < k; ++a) {
    std::vector<std::string> r_line{upper(variable_name(corr.variables[a]))};
    std::vector<std::string> p_line{""};
    for (std::size_t b = 0; b < k; ++b) {
      const auto& c = corr.at(a, b);
      r_line.push_back(c.r ? fixed4(*c.r) : std::string(kMissing));
      p_line.push_back(c.p ? fixed4(*c.p) : std::string(kMissing));
    }
    cells.push_back(std::move(r_line));
    cells.push_back(std::move(p_line));
  }
  return "Pearson correlation matrix (pairwise complete observations)\n\n" + align(cells);
}

std::string hausman(const HausmanResult& h, double alpha, Format f) {
  const bool reject = h.decision == ModelChoice::FixedEffects;
  if (f == Format::Delimited) {
    std::string compared;
    for (const auto& c : h.compared) compared += (compared.empty() ? "" : ";") + c;
    return delimited({{"statistic", "df", "p_value", "alpha", "decision", "rank_deficient", "compared"},
                      {exact(h.statistic), std::to_string(h.df), exact(h.p_value), exact(alpha),
                       reject ? "fixed_effects" : "random_effects",
                       h.rank_deficient ? "true" : "false", compared}});
  }
  std::string out = "Correlated Random Effects - Hausman Test\nTest cross-section random effects\n\n";
  out += align({{"Test Summary", "Chi-Sq. Statistic", "Chi-Sq. d.f.", "Prob."},
                {"Cross-section random", fmt::format("{:.6f}", h.statistic), std::to_string(h.df),
                 fixed4(h.p_value)}});
  if (h.rank_deficient)
    out += "\nNote: variance difference not positive definite; generalized inverse used, d.f. = rank\n";
  out += "\nH0: Random effects model is appropriate\n";
  out += "H1: Fixed effects model is appropriate\n";
  out += fmt::format("Decision at {}% significance: {} H0, {} Model is the most appropriate\n",
                     csv::format_exact(100.0 * alpha), reject ? "reject" : "do not reject",
                     to_string(h.decision));
  return out;
}

std::string quantile_table(const QuantileTable& table, Format f) {
  std::vector<std::string> terms;
  for (const auto& col : table.columns)
    for (const auto& n : col.coefficients.names)
      if (std::find(terms.begin(), terms.end(), n) == terms.end()) terms.push_back(n);

  auto se_of = [](const QuantileColumn& col, Index j) -> std::optional<double> {
    if (!col.std_errors) return std::nullopt;
    return (*col.std_errors)(j);
  };

  if (f == Format::Delimited) {
    Cells cells{{"leverage", "theta", "term", "estimate", "std_error", "p_value"}};
    const std::string lev(to_string(table.leverage));
    for (const auto& col : table.columns) {
      const std::string th = exact(col.theta);
      for (Index j = 0; j < col.coefficients.size(); ++j) {
        const auto se = se_of(col, j);
        const double b = col.coefficients.values(j);
        cells.push_back({lev, th, col.coefficients.names[static_cast<std::size_t>(j)], exact(b),
                         exact(se), exact(coefficient_p_value(b, se))});
      }
      cells.push_back({lev, th, "fixed_effects", exact(col.mean_effect), std::string(kMissing),
                       std::string(kMissing)});
      cells.push_back({lev, th, "pseudo_r2", exact(col.pseudo_r2), std::string(kMissing),
                       std::string(kMissing)});
      cells.push_back({lev, th, "n", std::to_string(col.n), std::string(kMissing),
                       std::string(kMissing)});
    }
    return delimited(cells);
  }

  const std::string lev_name = table.leverage == LeverageKind::Book ? "LEVB" : "LEVM";
  Cells cells;
  std::vector<std::string> header{lev_name};
  for (const auto& col : table.columns) header.push_back(theta_label(col.theta));
  cells.push_back(header);
  for (const auto& term : terms) {
    std::vector<std::string> coef{upper(term)};
    std::vector<std::string> se_line{"sterrors"};
    for (const auto& col : table.columns) {
      const auto j = col.coefficients.find(term);
      if (!j) {
        coef.emplace_back(kMissing);
        se_line.emplace_back(kMissing);
        continue;
      }
      const double b = col.coefficients.values(*j);
      const auto se = se_of(col, *j);
      coef.push_back(format_coefficient(b) + stars(coefficient_p_value(b, se)));
      se_line.push_back(se ? format_coefficient(*se) : std::string(kMissing));
    }
    cells.push_back(std::move(coef));
    cells.push_back(std::move(se_line));
  }
  std::vector<std::string> fe{"FIXED_EFFECTS"};
  std::vector<std::string> r2{"R-squared"};
  for (const auto& col : table.columns) {
    fe.push_back(format_coefficient(col.mean_effect));
    r2.push_back(format_percent(col.pseudo_r2));
  }
  cells.push_back(std::move(fe));
  cells.push_back(std::move(r2));

  std::string out = fmt::format("Quantile regression, dependent variable {}\n", lev_name);
  out += "Firm fixed effects; FIXED_EFFECTS is the mean estimated firm effect\n";
  out += "sterrors: firm-clustered pairs bootstrap; *** p<0.01, ** p<0.05, * p<0.10\n";
  out += "INFLATION and GDP_GROWTH in percent per year\n\n";
  return out + align(cells);
}

std::string speed_table(const SpeedTable& table, Format f) {
  if (f == Format::Delimited) {
    Cells cells{{"leverage", "regime", "theta", "speed", "lag_coefficient", "pseudo_r2", "n_used",
                 "out_of_range", "dropped"}};
    for (const auto& [kind, results] : table.rows)
      for (const auto& r : results) {
        std::string dropped;
        for (const auto& d : r.dropped) dropped += (dropped.empty() ? "" : ";") + d;
        cells.push_back({std::string(to_string(kind)),
                         r.regime ? std::string(to_string(*r.regime)) : std::string("all"),
                         exact(r.theta), exact(r.speed), exact(r.lag_coefficient), exact(r.pseudo_r2),
                         std::to_string(r.n_used), r.out_of_range ? "true" : "false", dropped});
      }
    return delimited(cells);
  }
  Cells cells;
  std::vector<std::string> header{""};
  for (double t : table.thetas) header.push_back(theta_label(t));
  cells.push_back(header);
  bool flagged = false;
  for (const auto& [kind, results] : table.rows) {
    std::vector<std::string> speed{kind == LeverageKind::Market ? "SPEED MARKET" : "SPEED BOOK"};
    std::vector<std::string> r2{"R-squared"};
    for (double t : table.thetas) {
      auto it = std::find_if(results.begin(), results.end(),
                             [t](const AdjustmentResult& r) { return r.theta == t; });
      if (it == results.end()) {
        speed.emplace_back(kMissing);
        r2.emplace_back(kMissing);
        continue;
      }
      speed.push_back(format_percent(it->speed) + (it->out_of_range ? "!" : ""));
      r2.push_back(format_percent(it->pseudo_r2));
      flagged = flagged || it->out_of_range;
    }
    cells.push_back(std::move(speed));
    cells.push_back(std::move(r2));
  }
  std::string out = "Speed of adjustment";
  if (table.regime) out += fmt::format(" ({} regime)", to_string(*table.regime));
  out += "\nR-squared: pseudo R-squared of the adjustment regression\n\n";
  out += align(cells);
  if (flagged) out += "! lag coefficient outside [0, 1]\n";
  for (const auto& n : table.notes) out += "Note: " + n + '\n';
  return out;
}

std::string monte_carlo(const MonteCarloReport& report, Format f) {
  Cells cells{{"theta", "regime", "true_delta", "estimates", "mean", "bias", "sd", "rmse"}};
  for (const auto& s : report.stats) {
    const std::string regime = s.regime ? std::string(to_string(*s.regime)) : std::string("all");
    if (f == Format::Delimited) {
      cells.push_back({exact(s.theta), regime, exact(s.true_delta), std::to_string(s.estimates),
                       s.estimates ? exact(s.mean) : std::string(kMissing),
                       s.estimates ? exact(s.bias) : std::string(kMissing), exact(s.sd),
                       s.estimates ? exact(s.rmse) : std::string(kMissing)});
    } else {
      cells.push_back({theta_label(s.theta), regime, fixed4(s.true_delta), std::to_string(s.estimates),
                       s.estimates ? fixed4(s.mean) : std::string(kMissing),
                       s.estimates ? fixed4(s.bias) : std::string(kMissing),
                       s.sd ? fixed4(*s.sd) : std::string(kMissing),
                       s.estimates ? fixed4(s.rmse) : std::string(kMissing)});
    }
  }
  if (f == Format::Delimited) return delimited(cells);
  std::string out = fmt::format("Speed recovery over {} replications ({} failed)\n\n",
                                report.replications, report.failures);
  out += align(cells);
  for (const auto& m : report.failure_messages) out += "Failure: " + m + '\n';
  return out;
}

}  // namespace capstruct::report
