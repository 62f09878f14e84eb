#include "capstruct/descriptives.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <limits>
#include <map>

namespace capstruct {

double correlation_p_value(double r, std::size_t n) {
  if (n < 3) return std::numeric_limits<double>::quiet_NaN();
  if (std::abs(r) >= 1.0) return 0.0;
  const double df = static_cast<double>(n - 2);
  const double t = std::abs(r) * std::sqrt(df / (1.0 - r * r));
  boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, t)));
}

YearlyMeans yearly_means(const Panel& panel, const std::vector<Variable>& variables) {
  struct Acc {
    std::size_t rows = 0;
    std::vector<double> sum;
    std::vector<std::size_t> count;
  };
  const std::size_t k = variables.size();
  std::map<int, Acc> by_year;
  Acc all{0, std::vector<double>(k, 0.0), std::vector<std::size_t>(k, 0)};

  for (std::size_t i = 0; i < panel.size(); ++i) {
    auto [it, inserted] = by_year.try_emplace(panel.rows()[i].fiscal_year);
    Acc& acc = it->second;
    if (inserted) {
      acc.sum.assign(k, 0.0);
      acc.count.assign(k, 0);
    }
    ++acc.rows;
    ++all.rows;
    for (std::size_t j = 0; j < k; ++j) {
      if (auto v = panel.value(i, variables[j])) {
        acc.sum[j] += *v;
        ++acc.count[j];
        all.sum[j] += *v;
        ++all.count[j];
      }
    }
  }

  auto finish = [k](const Acc& acc, std::string label, std::optional<int> year) {
    YearlyMeansRow row{std::move(label), year, acc.rows, {}};
    row.means.resize(k);
    for (std::size_t j = 0; j < k; ++j)
      if (acc.count[j] > 0) row.means[j] = acc.sum[j] / static_cast<double>(acc.count[j]);
    return row;
  };

  YearlyMeans out;
  out.variables = variables;
  for (const auto& [year, acc] : by_year) out.rows.push_back(finish(acc, std::to_string(year), year));
  out.rows.push_back(finish(all, "All", std::nullopt));
  return out;
}

CorrelationMatrix correlation_matrix(const Panel& panel, const std::vector<Variable>& variables) {
  const std::size_t k = variables.size();
  const std::size_t n = panel.size();
  // Column-wise values with NaN for missing entries.
  Matrix data(static_cast<Index>(n), static_cast<Index>(k));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j)
      data(static_cast<Index>(i), static_cast<Index>(j)) =
          panel.value(i, variables[j]).value_or(std::numeric_limits<double>::quiet_NaN());

  CorrelationMatrix out;
  out.variables = variables;
  out.cells.assign(k, std::vector<CorrelationCell>(k));
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b) {
      std::vector<double> xa, xb;
      for (std::size_t i = 0; i < n; ++i) {
        const double va = data(static_cast<Index>(i), static_cast<Index>(a));
        const double vb = data(static_cast<Index>(i), static_cast<Index>(b));
        if (std::isnan(va) || std::isnan(vb)) continue;
        xa.push_back(va);
        xb.push_back(vb);
      }
      CorrelationCell cell;
      cell.n = xa.size();
      if (cell.n >= 3) {
        const Eigen::Map<const Vector> ma(xa.data(), static_cast<Index>(xa.size()));
        const Eigen::Map<const Vector> mb(xb.data(), static_cast<Index>(xb.size()));
        if (auto r = pearson(ma, mb)) {
          cell.r = a == b ? 1.0 : *r;
          cell.p = a == b ? 0.0 : correlation_p_value(*r, cell.n);
        }
      }
      out.cells[a][b] = cell;
      out.cells[b][a] = cell;
    }
  }
  return out;
}

}  // namespace capstruct
