#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "hine/error.hpp"
#include "hine/eval.hpp"
#include "hine/rng.hpp"

namespace hine {

namespace {

double squared_distance(std::span<const double> a, const double* b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

int nearest(std::span<const double> p, std::span<const double> centroids, std::size_t k) {
  const std::size_t d = p.size();
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    double dist = squared_distance(p, centroids.data() + c * d);
    if (dist < best_d) {
      best_d = dist;
      best = static_cast<int>(c);
    }
  }
  return best;
}

std::vector<double> seed_plus_plus(const EmbeddingTable& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.rows(), d = x.dim();
  std::vector<double> centroids(k * d);
  auto place = [&](std::size_t c, std::size_t row) {
    auto r = x.row(row);
    std::copy(r.begin(), r.end(), centroids.begin() + static_cast<std::ptrdiff_t>(c * d));
  };
  place(0, uniform_index(rng, n));
  std::vector<double> d2(n);
  for (std::size_t v = 0; v < n; ++v) d2[v] = squared_distance(x.row(v), centroids.data());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double w : d2) total += w;
    std::size_t pick = 0;
    if (total > 0) {
      double target = unit(rng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t v = 0; v < n; ++v) {
        acc += d2[v];
        if (target < acc) {
          pick = v;
          break;
        }
      }
    } else {
      pick = uniform_index(rng, n);
    }
    place(c, pick);
    for (std::size_t v = 0; v < n; ++v)
      d2[v] = std::min(d2[v], squared_distance(x.row(v), centroids.data() + c * d));
  }
  return centroids;
}

// Empty clusters keep their previous centroid.
void update_centroids(const EmbeddingTable& x, std::span<const int> assignment, std::size_t k,
                      std::vector<double>& centroids) {
  const std::size_t d = x.dim();
  std::vector<double> sum(k * d, 0.0);
  std::vector<std::size_t> count(k, 0);
  for (std::size_t v = 0; v < x.rows(); ++v) {
    auto c = static_cast<std::size_t>(assignment[v]);
    ++count[c];
    auto r = x.row(v);
    for (std::size_t i = 0; i < d; ++i) sum[c * d + i] += r[i];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (count[c] == 0) continue;
    for (std::size_t i = 0; i < d; ++i) centroids[c * d + i] = sum[c * d + i] / static_cast<double>(count[c]);
  }
}

}  // namespace

std::size_t kmeans_assign(const EmbeddingTable& x, std::span<const double> centroids, std::size_t k,
                          std::vector<int>& assignment, int threads) {
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
  assignment.resize(x.rows(), -1);
  std::size_t changed = 0;
#pragma omp parallel for num_threads(threads) reduction(+ : changed) schedule(static) if (threads > 1)
  for (std::ptrdiff_t v = 0; v < n; ++v) {
    int c = nearest(x.row(static_cast<std::size_t>(v)), centroids, k);
    if (assignment[static_cast<std::size_t>(v)] != c) {
      assignment[static_cast<std::size_t>(v)] = c;
      ++changed;
    }
  }
  return changed;
}

double wcss(const EmbeddingTable& x, std::span<const double> centroids, std::span<const int> assignment) {
  double s = 0.0;
  for (std::size_t v = 0; v < x.rows(); ++v)
    s += squared_distance(x.row(v), centroids.data() + static_cast<std::size_t>(assignment[v]) * x.dim());
  return s;
}

KMeansResult kmeans(const EmbeddingTable& x, const KMeansConfig& cfg) {
  if (cfg.k < 1) throw ConfigError("k-means needs k >= 1");
  if (cfg.k > x.rows())
    throw ConfigError("k-means k = " + std::to_string(cfg.k) + " exceeds the " + std::to_string(x.rows()) +
                      " input vectors");
  if (cfg.restarts < 1) throw ConfigError("k-means needs restarts >= 1");
  KMeansResult best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    auto rng = make_rng(cfg.seed, {0x6b6d65616e73ULL, r});
    KMeansResult run;
    run.centroids = seed_plus_plus(x, cfg.k, rng);
    run.assignment.assign(x.rows(), -1);
    for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
      std::size_t changed = kmeans_assign(x, run.centroids, cfg.k, run.assignment, cfg.threads);
      if (it > 0 && changed == 0) break;
      update_centroids(x, run.assignment, cfg.k, run.centroids);
      run.wcss_history.push_back(wcss(x, run.centroids, run.assignment));
      run.iterations = it + 1;
    }
    run.wcss = wcss(x, run.centroids, run.assignment);
    if (run.wcss < best.wcss) best = std::move(run);
  }
  return best;
}

double nmi(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ConfigError("nmi: partitions cover different numbers of items");
  const double n = static_cast<double>(a.size());
  if (a.empty()) return 0.0;
  std::map<int, double> ca, cb;
  std::map<std::pair<int, int>, double> joint;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]] += 1;
    cb[b[i]] += 1;
    joint[{a[i], b[i]}] += 1;
  }
  auto entropy = [n](const std::map<int, double>& c) {
    double h = 0.0;
    for (const auto& [_, k] : c) h -= (k / n) * std::log(k / n);
    return h;
  };
  double ha = entropy(ca), hb = entropy(cb);
  if (ha <= 0 || hb <= 0) return 0.0;
  double mi = 0.0;
  for (const auto& [key, k] : joint) mi += (k / n) * std::log(k * n / (ca[key.first] * cb[key.second]));
  return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

}  // namespace hine
