#pragma once

#include <vector>

#include "hine/eval.hpp"
#include "hine/sampler.hpp"

// Single-threaded reference versions of the OpenMP kernels. Outputs must match
// the parallel versions exactly.
namespace hine::serial {

std::vector<TypedWalk> random_walks(const HinGraph& g, const SamplerConfig& cfg);

std::size_t kmeans_assign(const EmbeddingTable& x, std::span<const double> centroids, std::size_t k,
                          std::vector<int>& assignment);

RankingResult map_at_k(const EmbeddingTable& x, std::span<const int> classes, std::size_t k, Similarity metric);

}  // namespace hine::serial
