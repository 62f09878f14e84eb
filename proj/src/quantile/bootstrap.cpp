#include "capstruct/parallel.hpp"
#include "capstruct/quantile.hpp"
#include "capstruct/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>

namespace capstruct {
namespace {

constexpr std::uint64_t kBootstrapStream = 0xB007;

Resample draw_rows(Index n, Rng& rng) {
  std::uniform_int_distribution<Index> pick(0, n - 1);
  Resample r;
  r.rows.resize(static_cast<std::size_t>(n));
  r.clusters.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    r.rows[static_cast<std::size_t>(i)] = pick(rng);
    r.clusters[static_cast<std::size_t>(i)] = static_cast<int>(i);
  }
  return r;
}

Resample draw_clusters(const std::vector<std::vector<Index>>& members, Rng& rng) {
  const auto g = static_cast<Index>(members.size());
  std::uniform_int_distribution<Index> pick(0, g - 1);
  Resample r;
  for (Index c = 0; c < g; ++c) {
    const auto& rows = members[static_cast<std::size_t>(pick(rng))];
    for (Index i : rows) {
      r.rows.push_back(i);
      r.clusters.push_back(static_cast<int>(c));
    }
  }
  return r;
}

}  // namespace

BootstrapResult bootstrap_statistic(Index n, std::optional<std::span<const int>> clusters,
                                    const BootstrapOptions& options,
                                    const std::function<Vector(const Resample&)>& replicate) {
  const int b_count = options.replications;
  if (b_count < 2) throw DomainError("bootstrap needs at least 2 replications");
  if (n < 1) throw DataError("bootstrap on an empty design");

  std::vector<std::vector<Index>> members;
  if (clusters) {
    if (static_cast<Index>(clusters->size()) != n)
      throw DataError("cluster labels must cover every row");
    std::map<int, std::size_t> slot;
    for (Index i = 0; i < n; ++i) {
      const int label = (*clusters)[static_cast<std::size_t>(i)];
      auto [it, inserted] = slot.emplace(label, members.size());
      if (inserted) members.emplace_back();
      members[it->second].push_back(i);
    }
  }

  std::vector<Vector> draws(static_cast<std::size_t>(b_count));
  std::vector<int> redraws(static_cast<std::size_t>(b_count), 0);
  std::atomic<int> total_redraws{0};

  parallel_for(static_cast<std::size_t>(b_count), options.threads, [&](std::size_t b) {
    for (int attempt = 0;; ++attempt) {
      if (total_redraws.load() > b_count) return;
      Rng rng(derive_seed(options.seed, {kBootstrapStream, b, static_cast<std::uint64_t>(attempt)}));
      const Resample sample = clusters ? draw_clusters(members, rng) : draw_rows(n, rng);
      try {
        draws[b] = replicate(sample);
        return;
      } catch (const DataError&) {
        ++redraws[b];
        ++total_redraws;
      }
    }
  });

  int degenerate = 0;
  for (int r : redraws) degenerate += r;
  if (degenerate > b_count) {
    throw DataError("bootstrap: more than half of the resamples were degenerate (" +
                    std::to_string(degenerate) + " redraws for " + std::to_string(b_count) +
                    " replicates)");
  }

  const Index p = draws.front().size();
  BootstrapResult out;
  out.degenerate_redraws = degenerate;
  out.draws.resize(b_count, p);
  for (int b = 0; b < b_count; ++b) out.draws.row(b) = draws[static_cast<std::size_t>(b)].transpose();
  const RowVector mean = out.draws.colwise().mean();
  const Matrix centered = out.draws.rowwise() - mean;
  out.std_errors =
      (centered.colwise().squaredNorm() / static_cast<double>(b_count - 1)).cwiseSqrt().transpose();
  return out;
}

BootstrapResult bootstrap_se(const DesignMatrix& design, double theta,
                             const BootstrapOptions& options,
                             std::optional<std::span<const int>> clusters,
                             const FitOptions& fit_options) {
  require_quantile(theta);
  return bootstrap_statistic(design.rows(), clusters, options, [&](const Resample& s) {
    const DesignMatrix sample = design.select_rows(s.rows);
    return fit_quantile(sample, theta, fit_options).coefficients.values;
  });
}

}  // namespace capstruct
