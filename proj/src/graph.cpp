#include "hine/graph.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "hine/error.hpp"
#include "text_util.hpp"

namespace hine {

std::uint32_t NameTable::intern(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it != index_.end()) return it->second;
  auto id = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(name);
  index_.emplace(names_.back(), id);
  return id;
}

std::optional<std::uint32_t> NameTable::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

NodeTypeId HinGraph::node_type(NodeId v) const {
  if (v >= num_nodes()) throw LookupError("node id " + std::to_string(v) + " out of range");
  return node_type_[v];
}

std::span<const TypedEdge> HinGraph::out_edges(NodeId v) const {
  if (v >= num_nodes()) throw LookupError("node id " + std::to_string(v) + " out of range");
  return {edges_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
}

std::span<const NodeId> HinGraph::out_neighbors(NodeId v, EdgeTypeId e) const {
  if (v >= num_nodes()) throw LookupError("node id " + std::to_string(v) + " out of range");
  if (e >= num_edge_types()) throw LookupError("edge type id " + std::to_string(e) + " out of range");
  std::size_t slot = std::size_t{v} * num_edge_types() + e;
  return {typed_targets_.data() + typed_offsets_[slot], typed_offsets_[slot + 1] - typed_offsets_[slot]};
}

NodeId HinGraph::node_id(std::string_view name) const {
  auto id = nodes_.find(name);
  if (!id) throw LookupError("unknown node '" + std::string(name) + "'");
  return *id;
}

EdgeTypeId HinGraph::edge_type_id(std::string_view name) const {
  auto id = edge_types_.find(name);
  if (!id) throw LookupError("unknown edge type '" + std::string(name) + "'");
  return *id;
}

NodeId HinGraph::Builder::add_node(std::string_view name) {
  auto id = nodes_.intern(name);
  if (id == node_type_.size()) node_type_.emplace_back();
  return id;
}

EdgeTypeId HinGraph::Builder::add_edge_type(std::string_view name) { return edge_types_.intern(name); }

void HinGraph::Builder::add_edge(NodeId src, EdgeTypeId type, NodeId dst) {
  if (src >= nodes_.size() || dst >= nodes_.size())
    throw LookupError("edge endpoint out of range");
  if (type >= edge_types_.size()) throw LookupError("edge type out of range");
  src_.push_back(src);
  out_.push_back({type, dst});
}

void HinGraph::Builder::add_edge(std::string_view src, std::string_view type, std::string_view dst) {
  NodeId s = add_node(src);
  EdgeTypeId e = add_edge_type(type);
  NodeId d = add_node(dst);
  add_edge(s, e, d);
}

void HinGraph::Builder::set_node_type(NodeId v, std::string_view type) {
  if (v >= node_type_.size()) throw LookupError("node id " + std::to_string(v) + " out of range");
  node_type_[v] = node_types_.intern(type);
}

HinGraph HinGraph::Builder::build() && {
  HinGraph g;
  const std::size_t n = nodes_.size();
  const std::size_t types = edge_types_.size();

  bool any_untyped = std::any_of(node_type_.begin(), node_type_.end(), [](auto& t) { return !t; });
  NodeTypeId untyped = any_untyped ? node_types_.intern(kUntypedNodeType) : 0;
  g.node_type_.resize(n);
  for (std::size_t v = 0; v < n; ++v) g.node_type_[v] = node_type_[v].value_or(untyped);

  // Stable counting sort by source keeps per-node insertion order.
  g.offsets_.assign(n + 1, 0);
  for (NodeId s : src_) ++g.offsets_[s + 1];
  for (std::size_t v = 0; v < n; ++v) g.offsets_[v + 1] += g.offsets_[v];
  g.edges_.resize(src_.size());
  g.edge_src_.resize(src_.size());
  {
    std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
    for (std::size_t i = 0; i < src_.size(); ++i) {
      std::size_t pos = cursor[src_[i]]++;
      g.edges_[pos] = out_[i];
      g.edge_src_[pos] = src_[i];
    }
  }

  g.typed_offsets_.assign(n * types + 1, 0);
  for (std::size_t i = 0; i < g.edges_.size(); ++i)
    ++g.typed_offsets_[std::size_t{g.edge_src_[i]} * types + g.edges_[i].type + 1];
  for (std::size_t s = 0; s < n * types; ++s) g.typed_offsets_[s + 1] += g.typed_offsets_[s];
  g.typed_targets_.resize(g.edges_.size());
  {
    std::vector<std::size_t> cursor(g.typed_offsets_.begin(), g.typed_offsets_.end() - 1);
    for (std::size_t i = 0; i < g.edges_.size(); ++i) {
      std::size_t slot = std::size_t{g.edge_src_[i]} * types + g.edges_[i].type;
      g.typed_targets_[cursor[slot]++] = g.edges_[i].dst;
    }
  }

  g.nodes_ = std::move(nodes_);
  g.edge_types_ = std::move(edge_types_);
  g.node_types_ = std::move(node_types_);
  return g;
}

HinGraph load_graph(const std::string& edge_file, const std::optional<std::string>& node_type_file) {
  HinGraph::Builder b;
  {
    auto in = detail::open_in(edge_file);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string_view row = detail::strip_cr(line);
      if (detail::skippable(row)) continue;
      auto cols = detail::split(row, '\t');
      if (cols.size() != 3)
        throw ParseError(edge_file, lineno,
                         "expected 3 tab-separated columns (src, edge_type, dst), got " +
                             std::to_string(cols.size()));
      for (auto c : cols)
        if (c.empty()) throw ParseError(edge_file, lineno, "empty column");
      b.add_edge(cols[0], cols[1], cols[2]);
    }
  }
  if (b.num_edges() == 0) throw DataError("'" + edge_file + "': empty graph (no edges)");

  if (node_type_file) {
    auto in = detail::open_in(*node_type_file);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string_view row = detail::strip_cr(line);
      if (detail::skippable(row)) continue;
      auto cols = detail::split(row, '\t');
      if (cols.size() != 2)
        throw ParseError(*node_type_file, lineno,
                         "expected 2 tab-separated columns (node, node_type), got " +
                             std::to_string(cols.size()));
      if (cols[0].empty() || cols[1].empty()) throw ParseError(*node_type_file, lineno, "empty column");
      b.set_node_type(b.add_node(cols[0]), cols[1]);
    }
  }
  return std::move(b).build();
}

void write_edge_file(const HinGraph& g, const std::string& path) {
  auto out = detail::open_out(path);
  // Rows in original global insertion order are not recoverable from CSR;
  // per-source order is, which is what round trips need.
  for (NodeId v = 0; v < g.num_nodes(); ++v)
    for (const auto& e : g.out_edges(v))
      out << g.node_names().name(v) << '\t' << g.edge_type_names().name(e.type) << '\t'
          << g.node_names().name(e.dst) << '\n';
  if (!out) throw DataError("write failed for '" + path + "'");
}

void write_node_type_file(const HinGraph& g, const std::string& path) {
  auto out = detail::open_out(path);
  for (NodeId v = 0; v < g.num_nodes(); ++v)
    out << g.node_names().name(v) << '\t' << g.node_type_names().name(g.node_type(v)) << '\n';
  if (!out) throw DataError("write failed for '" + path + "'");
}

std::vector<std::pair<EdgeTypeId, NodeId>> out_neighbors(const HinGraph& g, NodeId v,
                                                         std::optional<EdgeTypeId> e) {
  std::vector<std::pair<EdgeTypeId, NodeId>> out;
  if (e) {
    for (NodeId t : g.out_neighbors(v, *e)) out.emplace_back(*e, t);
    return out;
  }
  for (const auto& edge : g.out_edges(v)) out.emplace_back(edge.type, edge.dst);
  return out;
}

bool validate_heterogeneous(const HinGraph& g) {
  std::vector<bool> node_seen(g.num_node_types(), false);
  std::size_t node_kinds = 0;
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    auto t = g.node_type(v);
    if (!node_seen[t]) {
      node_seen[t] = true;
      if (++node_kinds >= 2) return true;
    }
  }
  std::vector<bool> edge_seen(g.num_edge_types(), false);
  std::size_t edge_kinds = 0;
  for (std::size_t i = 0; i < g.num_edges(); ++i) {
    auto t = g.edge_at(i).type;
    if (!edge_seen[t]) {
      edge_seen[t] = true;
      if (++edge_kinds >= 2) return true;
    }
  }
  return false;
}

MetaPathPattern parse_metapath(const HinGraph& g, std::string_view relations, std::string_view node_types) {
  MetaPathPattern p;
  for (auto name : detail::split(relations, ',')) {
    name = detail::trim(name);
    if (name.empty()) throw ConfigError("empty relation name in meta path '" + std::string(relations) + "'");
    p.relations.push_back(g.edge_type_id(name));
  }
  if (!node_types.empty()) {
    for (auto name : detail::split(node_types, ',')) {
      name = detail::trim(name);
      if (name == "*" || name.empty()) {
        p.node_types.emplace_back(std::nullopt);
        continue;
      }
      auto id = g.node_type_names().find(name);
      if (!id) throw LookupError("unknown node type '" + std::string(name) + "'");
      p.node_types.emplace_back(*id);
    }
  }
  validate_metapath(g, p);
  return p;
}

void validate_metapath(const HinGraph& g, const MetaPathPattern& p) {
  if (p.relations.empty()) throw ConfigError("meta path needs at least one relation");
  for (auto e : p.relations)
    if (e >= g.num_edge_types()) throw LookupError("meta path edge type " + std::to_string(e) + " unknown");
  if (!p.node_types.empty() && p.node_types.size() != p.relations.size() + 1)
    throw ConfigError("meta path node-type list must have one entry per position (" +
                      std::to_string(p.relations.size() + 1) + ")");
  for (auto& t : p.node_types)
    if (t && *t >= g.num_node_types()) throw LookupError("meta path node type " + std::to_string(*t) + " unknown");
}

DegreeSummary out_degree_summary(const HinGraph& g) {
  DegreeSummary s;
  if (g.num_nodes() == 0) return s;
  s.min = std::numeric_limits<std::size_t>::max();
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    std::size_t deg = g.out_edges(v).size();
    s.min = std::min(s.min, deg);
    s.max = std::max(s.max, deg);
    if (deg == 0) ++s.sinks;
  }
  s.mean = static_cast<double>(g.num_edges()) / static_cast<double>(g.num_nodes());
  return s;
}

}  // namespace hine
