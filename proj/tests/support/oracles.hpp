#pragma once

// Exhaustive reference implementations of the evaluation metrics.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "hine/eval.hpp"

namespace hine::testing {

inline double entropy_of(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double c : counts)
    if (c > 0) h -= c / n * std::log(c / n);
  return h;
}

// I = H(A) + H(B) - H(A, B) over an explicit contingency table.
inline double nmi_oracle(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.empty()) return 0.0;
  int ka = *std::max_element(a.begin(), a.end()) + 1;
  int kb = *std::max_element(b.begin(), b.end()) + 1;
  std::vector<double> ca(ka, 0), cb(kb, 0), joint(static_cast<std::size_t>(ka * kb), 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]] += 1;
    cb[b[i]] += 1;
    joint[static_cast<std::size_t>(a[i] * kb + b[i])] += 1;
  }
  double n = static_cast<double>(a.size());
  double ha = entropy_of(ca, n), hb = entropy_of(cb, n);
  if (ha == 0 || hb == 0) return 0.0;
  double mi = ha + hb - entropy_of(joint, n);
  return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

struct F1Oracle {
  double macro = 0.0;
  double micro = 0.0;
};

inline F1Oracle f1_oracle(const std::vector<int>& pred, const std::vector<int>& truth, int classes) {
  F1Oracle out;
  double sum = 0.0;
  for (int c = 0; c < classes; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (pred[i] == c && truth[i] == c) tp += 1;
      if (pred[i] == c && truth[i] != c) fp += 1;
      if (pred[i] != c && truth[i] == c) fn += 1;
    }
    double denom = 2 * tp + fp + fn;
    sum += denom > 0 ? 2 * tp / denom : 0.0;
  }
  out.macro = sum / classes;
  double correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += pred[i] == truth[i];
  out.micro = truth.empty() ? 0.0 : correct / static_cast<double>(truth.size());
  return out;
}

inline double similarity_oracle(std::span<const double> a, std::span<const double> b, Similarity metric) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i];
  if (metric == Similarity::kDot) return ab;
  for (std::size_t i = 0; i < a.size(); ++i) aa += a[i] * a[i];
  for (std::size_t i = 0; i < b.size(); ++i) bb += b[i] * b[i];
  double denom = std::sqrt(aa) * std::sqrt(bb);
  return denom > 0 ? ab / denom : 0.0;
}

// Every other row, selection-sorted by score descending then index ascending.
inline std::vector<std::size_t> ranking_oracle(const EmbeddingTable& x, std::size_t q, Similarity metric) {
  std::vector<std::size_t> idx;
  std::vector<double> s;
  for (std::size_t j = 0; j < x.rows(); ++j)
    if (j != q) {
      idx.push_back(j);
      s.push_back(similarity_oracle(x.row(q), x.row(j), metric));
    }
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::size_t best = i;
    for (std::size_t j = i + 1; j < idx.size(); ++j)
      if (s[j] > s[best] || (s[j] == s[best] && idx[j] < idx[best])) best = j;
    std::swap(idx[i], idx[best]);
    std::swap(s[i], s[best]);
  }
  return idx;
}

// Precision recounted from scratch at every hit rank.
inline double ap_oracle(const std::vector<char>& hits, std::size_t k, std::size_t positives) {
  if (positives == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < std::min(k, hits.size()); ++i) {
    if (!hits[i]) continue;
    double found = 0;
    for (std::size_t j = 0; j <= i; ++j) found += hits[j];
    sum += found / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(std::min(positives, k));
}

struct MapOracle {
  double map = 0.0;
  std::size_t queries = 0;
  std::size_t excluded = 0;
};

inline MapOracle map_oracle(const EmbeddingTable& x, const std::vector<int>& classes, std::size_t k,
                            Similarity metric) {
  MapOracle out;
  double sum = 0.0;
  for (std::size_t q = 0; q < x.rows(); ++q) {
    std::size_t positives = 0;
    for (std::size_t j = 0; j < x.rows(); ++j) positives += j != q && classes[j] == classes[q];
    if (positives == 0) {
      ++out.excluded;
      continue;
    }
    auto order = ranking_oracle(x, q, metric);
    std::vector<char> hits;
    for (auto j : order) hits.push_back(classes[j] == classes[q]);
    sum += ap_oracle(hits, k, positives);
    ++out.queries;
  }
  out.map = out.queries ? sum / static_cast<double>(out.queries) : 0.0;
  return out;
}

}  // namespace hine::testing
