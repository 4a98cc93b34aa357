#include "hine/sampler.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include "hine/error.hpp"
#include "hine/rng.hpp"
#include "text_util.hpp"

namespace hine {

void SamplerConfig::validate() const {
  if (walks_per_node < 1) throw ConfigError("walks_per_node must be >= 1");
  if (max_walk_length < 2) throw ConfigError("max_walk_length must be >= 2");
  if (max_chain_length < 1) throw ConfigError("max_chain_length must be >= 1");
}

std::vector<ChainSample> sample_edge_triples(const HinGraph& g, std::size_t count, std::uint64_t seed) {
  if (g.num_edges() == 0) throw DataError("cannot sample edges from an empty graph");
  auto rng = make_rng(seed, {0x7269706cULL});
  std::vector<ChainSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t k = uniform_index(rng, g.num_edges());
    out.push_back({g.edge_source(k), {g.edge_at(k).type}, g.edge_at(k).dst});
  }
  return out;
}

std::vector<ChainSample> all_edge_triples(const HinGraph& g) {
  std::vector<ChainSample> out;
  out.reserve(g.num_edges());
  for (std::size_t k = 0; k < g.num_edges(); ++k)
    out.push_back({g.edge_source(k), {g.edge_at(k).type}, g.edge_at(k).dst});
  return out;
}

TypedWalk random_walk(const HinGraph& g, NodeId start, std::size_t round, const SamplerConfig& cfg) {
  auto rng = make_rng(cfg.seed, {0x77616c6bULL, round, start});
  TypedWalk w;
  w.nodes.reserve(cfg.max_walk_length);
  w.relations.reserve(cfg.max_walk_length);
  w.nodes.push_back(start);
  NodeId cur = start;
  while (w.nodes.size() < cfg.max_walk_length) {
    auto edges = g.out_edges(cur);
    if (edges.empty()) break;
    const auto& e = edges[uniform_index(rng, edges.size())];
    w.relations.push_back(e.type);
    w.nodes.push_back(e.dst);
    cur = e.dst;
  }
  return w;
}

std::vector<TypedWalk> random_walks(const HinGraph& g, const SamplerConfig& cfg) {
  cfg.validate();
  const std::size_t n = g.num_nodes();
  const std::size_t total = n * cfg.walks_per_node;
  std::vector<TypedWalk> walks(total);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::size_t i = 0; i < total; ++i)
    walks[i] = random_walk(g, static_cast<NodeId>(i % n), i / n, cfg);
  return walks;
}

void for_each_random_walk(const HinGraph& g, const SamplerConfig& cfg,
                          const std::function<void(const TypedWalk&)>& fn) {
  cfg.validate();
  constexpr std::size_t kChunk = 4096;
  const std::size_t n = g.num_nodes();
  const std::size_t total = n * cfg.walks_per_node;
  std::vector<TypedWalk> chunk;
  for (std::size_t base = 0; base < total; base += kChunk) {
    std::size_t len = std::min(kChunk, total - base);
    chunk.assign(len, {});
#pragma omp parallel for schedule(dynamic, 64)
    for (std::size_t j = 0; j < len; ++j) {
      std::size_t i = base + j;
      chunk[j] = random_walk(g, static_cast<NodeId>(i % n), i / n, cfg);
    }
    for (const auto& w : chunk) fn(w);
  }
}

std::size_t chain_sample_count(std::size_t walk_nodes, std::size_t max_chain) {
  std::size_t total = 0;
  for (std::size_t m = 1; m <= max_chain; ++m)
    if (walk_nodes > m) total += walk_nodes - m;
  return total;
}

void append_chain_samples(const TypedWalk& walk, std::size_t max_chain, std::vector<ChainSample>& out) {
  const std::size_t n = walk.nodes.size();
  for (std::size_t m = 1; m <= max_chain && m < n; ++m) {
    for (std::size_t i = 0; i + m < n; ++i) {
      ChainSample s;
      s.first = walk.nodes[i];
      s.relations.assign(walk.relations.begin() + static_cast<std::ptrdiff_t>(i),
                         walk.relations.begin() + static_cast<std::ptrdiff_t>(i + m));
      s.last = walk.nodes[i + m];
      out.push_back(std::move(s));
    }
  }
}

std::vector<ChainSample> walk_to_chain_samples(const TypedWalk& walk, std::size_t max_chain) {
  if (max_chain < 1) throw ConfigError("max chain length must be >= 1");
  std::vector<ChainSample> out;
  out.reserve(chain_sample_count(walk.nodes.size(), max_chain));
  append_chain_samples(walk, max_chain, out);
  return out;
}

std::vector<ChainSample> metapath_instances(const HinGraph& g, const MetaPathPattern& pattern,
                                            std::size_t count, std::uint64_t seed, std::size_t max_chain) {
  validate_metapath(g, pattern);
  const std::size_t m = pattern.relations.size();
  if (max_chain != 0 && m > max_chain)
    throw ConfigError("meta path length " + std::to_string(m) + " exceeds max chain length " +
                      std::to_string(max_chain));
  const std::size_t n = g.num_nodes();
  auto type_ok = [&](std::size_t pos, NodeId v) {
    return pattern.node_types.empty() || !pattern.node_types[pos] || g.node_type(v) == *pattern.node_types[pos];
  };

  // viable[k][v]: a walk standing on v at position k can finish the pattern.
  std::vector<std::vector<char>> viable(m + 1, std::vector<char>(n, 0));
  for (NodeId v = 0; v < n; ++v) viable[m][v] = type_ok(m, v);
  for (std::size_t k = m; k-- > 0;) {
    for (NodeId v = 0; v < n; ++v) {
      if (!type_ok(k, v)) continue;
      for (NodeId t : g.out_neighbors(v, pattern.relations[k]))
        if (viable[k + 1][t]) {
          viable[k][v] = 1;
          break;
        }
    }
  }
  std::vector<NodeId> starts;
  for (NodeId v = 0; v < n; ++v)
    if (viable[0][v]) starts.push_back(v);
  std::vector<ChainSample> out;
  if (starts.empty()) return out;

  auto rng = make_rng(seed, {0x6d657461ULL});
  std::vector<NodeId> options;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    NodeId cur = starts[uniform_index(rng, starts.size())];
    ChainSample s{cur, pattern.relations, cur};
    for (std::size_t k = 0; k < m; ++k) {
      options.clear();
      for (NodeId t : g.out_neighbors(cur, pattern.relations[k]))
        if (viable[k + 1][t]) options.push_back(t);
      cur = options[uniform_index(rng, options.size())];
    }
    s.last = cur;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ChainSample> apply_min_count(std::span<const ChainSample> samples, std::size_t min_count) {
  if (min_count == 0) return {samples.begin(), samples.end()};
  std::unordered_map<NodeId, std::size_t> freq;
  for (const auto& s : samples) {
    ++freq[s.first];
    ++freq[s.last];
  }
  std::vector<ChainSample> out;
  for (const auto& s : samples)
    if (freq[s.first] >= min_count && freq[s.last] >= min_count) out.push_back(s);
  return out;
}

void write_samples(const HinGraph& g, std::span<const ChainSample> samples, const std::string& path) {
  auto out = detail::open_out(path);
  for (const auto& s : samples) {
    out << g.node_names().name(s.first) << '\t';
    for (std::size_t k = 0; k < s.relations.size(); ++k) {
      if (k) out << ',';
      out << g.edge_type_names().name(s.relations[k]);
    }
    out << '\t' << g.node_names().name(s.last) << '\n';
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

std::vector<ChainSample> read_samples(const HinGraph& g, const std::string& path) {
  auto in = detail::open_in(path);
  std::vector<ChainSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view row = detail::strip_cr(line);
    if (detail::skippable(row)) continue;
    auto cols = detail::split(row, '\t');
    if (cols.size() != 3)
      throw ParseError(path, lineno, "expected 3 tab-separated columns (first, relations, last)");
    ChainSample s;
    try {
      s.first = g.node_id(cols[0]);
      s.last = g.node_id(cols[2]);
      for (auto rel : detail::split(cols[1], ',')) s.relations.push_back(g.edge_type_id(rel));
    } catch (const LookupError& e) {
      throw ParseError(path, lineno, e.what());
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace hine
