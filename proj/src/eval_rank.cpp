#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hine/error.hpp"
#include "hine/eval.hpp"

namespace hine {

std::string to_string(Similarity s) { return s == Similarity::kCosine ? "cosine" : "dot"; }

Similarity parse_similarity(const std::string& s) {
  if (s == "cosine") return Similarity::kCosine;
  if (s == "dot") return Similarity::kDot;
  throw ConfigError("unknown similarity '" + s + "' (expected cosine or dot)");
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> norms(const EmbeddingTable& x) {
  std::vector<double> out(x.rows());
  for (std::size_t v = 0; v < x.rows(); ++v) out[v] = std::sqrt(dot(x.row(v), x.row(v)));
  return out;
}

double scored(const EmbeddingTable& x, const std::vector<double>& nrm, std::size_t q, std::size_t j,
              Similarity metric) {
  double s = dot(x.row(q), x.row(j));
  if (metric == Similarity::kDot) return s;
  double denom = nrm[q] * nrm[j];
  return denom > 0 ? s / denom : 0.0;
}

struct Ranked {
  std::size_t index;
  double score;
};

// The best `k` of every row except `q`, score descending, index ascending.
std::vector<Ranked> rank_against(const EmbeddingTable& x, const std::vector<double>& nrm, std::size_t q,
                                 std::size_t k, Similarity metric) {
  std::vector<Ranked> all;
  all.reserve(x.rows());
  for (std::size_t j = 0; j < x.rows(); ++j)
    if (j != q) all.push_back({j, scored(x, nrm, q, j, metric)});
  auto better = [](const Ranked& a, const Ranked& b) {
    return a.score != b.score ? a.score > b.score : a.index < b.index;
  };
  std::size_t keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), better);
  all.resize(keep);
  return all;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double similarity(std::span<const double> a, std::span<const double> b, Similarity metric) {
  double s = dot(a, b);
  if (metric == Similarity::kDot) return s;
  double denom = std::sqrt(dot(a, a)) * std::sqrt(dot(b, b));
  return denom > 0 ? s / denom : 0.0;
}

double average_precision_at_k(std::span<const char> hits, std::size_t k, std::size_t positives) {
  if (k < 1) throw ConfigError("MAP@K needs K >= 1");
  if (positives == 0) return 0.0;
  double sum = 0.0;
  std::size_t found = 0;
  for (std::size_t i = 0; i < std::min(k, hits.size()); ++i) {
    if (!hits[i]) continue;
    ++found;
    sum += static_cast<double>(found) / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(std::min(positives, k));
}

RankingResult map_at_k(const EmbeddingTable& x, std::span<const int> classes, std::size_t k, Similarity metric,
                       int threads) {
  if (k < 1) throw ConfigError("MAP@K needs K >= 1");
  if (classes.size() != x.rows()) throw ConfigError("MAP@K: label count does not match rows");
  const std::size_t n = x.rows();
  auto nrm = norms(x);
  std::vector<std::size_t> class_size;
  for (int c : classes) {
    if (c < 0) throw ConfigError("MAP@K: negative class id");
    if (static_cast<std::size_t>(c) >= class_size.size()) class_size.resize(static_cast<std::size_t>(c) + 1, 0);
    ++class_size[static_cast<std::size_t>(c)];
  }
  RankingResult r;
  r.ap.assign(n, std::numeric_limits<double>::quiet_NaN());
  const auto nq = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for num_threads(threads) schedule(dynamic, 8) if (threads > 1)
  for (std::ptrdiff_t qi = 0; qi < nq; ++qi) {
    auto q = static_cast<std::size_t>(qi);
    std::size_t positives = class_size[static_cast<std::size_t>(classes[q])] - 1;
    if (positives == 0) continue;
    auto ranked = rank_against(x, nrm, q, k, metric);
    std::vector<char> hits(ranked.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) hits[i] = classes[ranked[i].index] == classes[q];
    r.ap[q] = average_precision_at_k(hits, k, positives);
  }
  double sum = 0.0;
  for (double ap : r.ap) {
    if (std::isnan(ap)) {
      ++r.excluded;
      continue;
    }
    sum += ap;
    ++r.queries;
  }
  r.map = r.queries ? sum / static_cast<double>(r.queries) : 0.0;
  return r;
}

std::vector<Neighbor> top_k_neighbors(const EmbeddingSet& e, std::size_t query, std::size_t k, Similarity metric) {
  if (query >= e.size()) throw LookupError("query row " + std::to_string(query) + " out of range");
  auto nrm = norms(e.vectors);
  std::vector<Neighbor> out;
  for (const auto& r : rank_against(e.vectors, nrm, query, k, metric)) out.push_back({r.index, e.names[r.index], r.score});
  return out;
}

std::vector<Neighbor> top_k_neighbors(const EmbeddingSet& e, const std::string& query, std::size_t k,
                                      Similarity metric) {
  auto it = std::find(e.names.begin(), e.names.end(), query);
  if (it != e.names.end()) return top_k_neighbors(e, static_cast<std::size_t>(it - e.names.begin()), k, metric);

  std::vector<std::pair<std::size_t, std::string>> close;
  for (const auto& name : e.names) close.emplace_back(edit_distance(query, name), name);
  std::sort(close.begin(), close.end());
  std::string msg = "unknown node '" + query + "'";
  if (!close.empty()) {
    msg += "; closest matches:";
    for (std::size_t i = 0; i < std::min<std::size_t>(5, close.size()); ++i) msg += " " + close[i].second;
  }
  throw LookupError(msg);
}

}  // namespace hine
