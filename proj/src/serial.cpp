#include "hine/serial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hine/error.hpp"

namespace hine::serial {

std::vector<TypedWalk> random_walks(const HinGraph& g, const SamplerConfig& cfg) {
  cfg.validate();
  std::vector<TypedWalk> walks;
  walks.reserve(g.num_nodes() * cfg.walks_per_node);
  for (std::size_t round = 0; round < cfg.walks_per_node; ++round)
    for (NodeId v = 0; v < g.num_nodes(); ++v) walks.push_back(random_walk(g, v, round, cfg));
  return walks;
}

std::size_t kmeans_assign(const EmbeddingTable& x, std::span<const double> centroids, std::size_t k,
                          std::vector<int>& assignment) {
  const std::size_t d = x.dim();
  assignment.resize(x.rows(), -1);
  std::size_t changed = 0;
  for (std::size_t v = 0; v < x.rows(); ++v) {
    auto p = x.row(v);
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        double t = p[i] - centroids[c * d + i];
        s += t * t;
      }
      if (s < best_d) {
        best_d = s;
        best = static_cast<int>(c);
      }
    }
    if (assignment[v] != best) {
      assignment[v] = best;
      ++changed;
    }
  }
  return changed;
}

RankingResult map_at_k(const EmbeddingTable& x, std::span<const int> classes, std::size_t k, Similarity metric) {
  if (k < 1) throw ConfigError("MAP@K needs K >= 1");
  const std::size_t n = x.rows();
  std::vector<double> nrm(n);
  for (std::size_t v = 0; v < n; ++v) {
    double s = 0.0;
    for (double t : x.row(v)) s += t * t;
    nrm[v] = std::sqrt(s);
  }
  RankingResult r;
  double sum = 0.0;
  for (std::size_t q = 0; q < n; ++q) {
    std::vector<std::pair<double, std::size_t>> order;
    std::size_t positives = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == q) continue;
      double s = 0.0;
      for (std::size_t i = 0; i < x.dim(); ++i) s += x.row(q)[i] * x.row(j)[i];
      if (metric == Similarity::kCosine) s = nrm[q] * nrm[j] > 0 ? s / (nrm[q] * nrm[j]) : 0.0;
      order.emplace_back(-s, j);
      positives += classes[j] == classes[q];
    }
    if (positives == 0) {
      r.ap.push_back(std::numeric_limits<double>::quiet_NaN());
      ++r.excluded;
      continue;
    }
    std::sort(order.begin(), order.end());
    std::vector<char> hits;
    for (std::size_t i = 0; i < std::min(k, order.size()); ++i) hits.push_back(classes[order[i].second] == classes[q]);
    double ap = average_precision_at_k(hits, k, positives);
    r.ap.push_back(ap);
    sum += ap;
    ++r.queries;
  }
  r.map = r.queries ? sum / static_cast<double>(r.queries) : 0.0;
  return r;
}

}  // namespace hine::serial
