#include "doctest.h"

#include "capstruct/descriptives.hpp"
#include "capstruct/synthgen.hpp"
#include "support/oracles.hpp"

#include <cmath>
#include <map>

using namespace capstruct;

namespace {

Panel random_panel(std::uint64_t seed, int firms, int years) {
  SynthConfig c;
  c.n_firms = firms;
  c.t_max = years;
  c.attrition = 0.1;
  c.seed = seed;
  return generate_panel(c).panel;
}

const std::vector<Variable> kAll{Variable::Levb,  Variable::Levm,     Variable::Ndts,
                                 Variable::Profta, Variable::Sizeat,  Variable::Growthat,
                                 Variable::Invta,  Variable::Liqta,   Variable::Mbratio,
                                 Variable::Inflation, Variable::GdpGrowth};

}  // namespace

TEST_CASE("perfect anticorrelation") {
  Vector x(3), y(3);
  x << 1, 2, 3;
  y << 3, 2, 1;
  CHECK(*pearson(x, y) == doctest::Approx(-1.0));
  CHECK(*pearson(x, x) == doctest::Approx(1.0));
  CHECK_FALSE(pearson(x, Vector::Constant(3, 2.0).eval()).has_value());
  CHECK(correlation_p_value(-1.0, 3) == 0.0);
  CHECK(correlation_p_value(0.0, 10) == doctest::Approx(1.0));
}

TEST_CASE("correlation p-value follows the t transform") {
  // r = 0.5, n = 12: t = 0.5 sqrt(10 / 0.75) = 1.8257, two-sided p with 10 df = 0.0978546.
  CHECK(correlation_p_value(0.5, 12) == doctest::Approx(0.0978546).epsilon(1e-6));
}

TEST_CASE("correlation matrix matches a brute-force oracle") {
  const Panel p = random_panel(3, 12, 5);
  const CorrelationMatrix c = correlation_matrix(p, kAll);
  REQUIRE(c.cells.size() == kAll.size());
  for (std::size_t i = 0; i < kAll.size(); ++i) {
    for (std::size_t j = 0; j < kAll.size(); ++j) {
      std::vector<double> a, b;
      for (std::size_t r = 0; r < p.size(); ++r) {
        const auto u = p.value(r, kAll[i]);
        const auto v = p.value(r, kAll[j]);
        if (u && v) {
          a.push_back(*u);
          b.push_back(*v);
        }
      }
      const auto& cell = c.at(i, j);
      CHECK(cell.n == a.size());
      const auto expected = testing::brute_pearson(a, b);
      REQUIRE(cell.r.has_value() == (expected.has_value() && a.size() >= 3));
      if (!cell.r) continue;
      CHECK(std::abs(*cell.r - *expected) <= 1e-12);
      CHECK(std::abs(*cell.r) <= 1.0);
      CHECK(*cell.r == c.at(j, i).r);
      CHECK(*cell.p == c.at(j, i).p);
      if (i == j) {
        CHECK(*cell.r == 1.0);
        CHECK(*cell.p == 0.0);
      }
    }
  }
}

TEST_CASE("cells with fewer than three pairs are undefined") {
  const auto recs = testing::small_records();
  const RawPanel raw = ingest_panel(recs).panel;
  const Panel p = derive_variables(raw, testing::macro_for(2000, 2002), TaxSchedule::constant(0.21));
  // growthat exists for two rows per firm: four values.
  const CorrelationMatrix c = correlation_matrix(p, {Variable::Growthat, Variable::Levb});
  CHECK(c.at(0, 1).n == 4);
  const Panel one_firm = p.with_rows({p.rows().begin(), p.rows().begin() + 3});
  const CorrelationMatrix d = correlation_matrix(one_firm, {Variable::Growthat, Variable::Profta});
  CHECK(d.at(0, 1).n == 2);
  CHECK_FALSE(d.at(0, 1).r.has_value());
  CHECK_FALSE(d.at(0, 0).r.has_value());
}

TEST_CASE("yearly means: two-point mean") {
  auto recs = testing::small_records();
  std::vector<FirmYearRecord> single;
  for (auto r : recs) {
    if (r.fiscal_year != 2000) continue;
    r.book_debt = r.firm_id == "A" ? 0.1 * r.total_assets : 0.2 * r.total_assets;
    single.push_back(r);
  }
  const Panel p = derive_variables(ingest_panel(single).panel, testing::macro_for(2000, 2000),
                                   TaxSchedule::constant(0.21));
  const YearlyMeans m = yearly_means(p, {Variable::Levb, Variable::Growthat});
  REQUIRE(m.rows.size() == 2);
  CHECK(m.rows[0].year == 2000);
  CHECK(*m.rows[0].means[0] == doctest::Approx(0.15));
  CHECK_FALSE(m.rows[0].means[1].has_value());
  CHECK(m.rows[1].label == "All");
  CHECK_FALSE(m.rows[1].year.has_value());
}

TEST_CASE("yearly means match brute-force sums") {
  const Panel p = random_panel(17, 40, 8);
  const YearlyMeans m = yearly_means(p, kAll);
  std::map<int, std::vector<std::pair<long double, int>>> sums;
  std::vector<std::pair<long double, int>> all(kAll.size(), {0.0L, 0});
  for (std::size_t r = 0; r < p.size(); ++r) {
    auto& year = sums[p.rows()[r].fiscal_year];
    year.resize(kAll.size(), {0.0L, 0});
    for (std::size_t v = 0; v < kAll.size(); ++v) {
      if (auto x = p.value(r, kAll[v])) {
        year[v].first += *x;
        year[v].second += 1;
        all[v].first += *x;
        all[v].second += 1;
      }
    }
  }
  REQUIRE(m.rows.size() == sums.size() + 1);
  std::size_t row = 0;
  for (const auto& [year, cells] : sums) {
    CHECK(m.rows[row].year == year);
    for (std::size_t v = 0; v < kAll.size(); ++v) {
      if (cells[v].second == 0) {
        CHECK_FALSE(m.rows[row].means[v].has_value());
      } else {
        CHECK(*m.rows[row].means[v] ==
              doctest::Approx(static_cast<double>(cells[v].first / cells[v].second)).epsilon(1e-12));
      }
    }
    ++row;
  }
  for (std::size_t v = 0; v < kAll.size(); ++v)
    CHECK(*m.rows.back().means[v] ==
          doctest::Approx(static_cast<double>(all[v].first / all[v].second)).epsilon(1e-12));
  CHECK(m.rows.back().observations == p.size());
}
