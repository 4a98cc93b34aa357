#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hine {

using NodeId = std::uint32_t;
using EdgeTypeId = std::uint32_t;
using NodeTypeId = std::uint32_t;

inline constexpr std::string_view kUntypedNodeType = "untyped";

// Bijective string <-> dense id table.
class NameTable {
 public:
  // Returns the id of `name`, assigning the next free id on first sight.
  std::uint32_t intern(std::string_view name);
  std::optional<std::uint32_t> find(std::string_view name) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct TypedEdge {
  EdgeTypeId type;
  NodeId dst;

  friend bool operator==(const TypedEdge&, const TypedEdge&) = default;
};

// Typed directed multigraph. Parallel edges and self-loops are kept; the
// graph is immutable once built and safe for concurrent readers.
class HinGraph {
 public:
  class Builder;

  std::size_t num_nodes() const noexcept { return node_type_.size(); }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  std::size_t num_edge_types() const noexcept { return edge_types_.size(); }
  std::size_t num_node_types() const noexcept { return node_types_.size(); }

  const NameTable& node_names() const noexcept { return nodes_; }
  const NameTable& edge_type_names() const noexcept { return edge_types_; }
  const NameTable& node_type_names() const noexcept { return node_types_; }

  NodeTypeId node_type(NodeId v) const;

  // All out-edges of v in insertion order.
  std::span<const TypedEdge> out_edges(NodeId v) const;
  // Targets of v's out-edges of type e, insertion order.
  std::span<const NodeId> out_neighbors(NodeId v, EdgeTypeId e) const;

  // Flat edge view in CSR order: edge i runs edge_source(i) -> edge_at(i).
  const TypedEdge& edge_at(std::size_t i) const { return edges_[i]; }
  NodeId edge_source(std::size_t i) const { return edge_src_[i]; }

  NodeId node_id(std::string_view name) const;
  EdgeTypeId edge_type_id(std::string_view name) const;

 private:
  HinGraph() = default;

  NameTable nodes_;
  NameTable edge_types_;
  NameTable node_types_;
  std::vector<NodeTypeId> node_type_;

  std::vector<std::size_t> offsets_;    // |V|+1, into edges_
  std::vector<TypedEdge> edges_;        // grouped by source, insertion order
  std::vector<NodeId> edge_src_;

  std::vector<std::size_t> typed_offsets_;  // |V|*|L|+1, into typed_targets_
  std::vector<NodeId> typed_targets_;
};

class HinGraph::Builder {
 public:
  NodeId add_node(std::string_view name);
  EdgeTypeId add_edge_type(std::string_view name);
  void add_edge(NodeId src, EdgeTypeId type, NodeId dst);
  void add_edge(std::string_view src, std::string_view type, std::string_view dst);
  // Later assignments for the same node overwrite earlier ones.
  void set_node_type(NodeId v, std::string_view type);

  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  std::size_t num_edges() const noexcept { return src_.size(); }

  HinGraph build() &&;

 private:
  NameTable nodes_;
  NameTable edge_types_;
  NameTable node_types_;
  std::vector<std::optional<NodeTypeId>> node_type_;
  std::vector<NodeId> src_;
  std::vector<TypedEdge> out_;
};

// Edge rows `src<TAB>edge_type<TAB>dst`, node-type rows `node<TAB>type`;
// `#` comment lines and blank lines are skipped.
HinGraph load_graph(const std::string& edge_file,
                    const std::optional<std::string>& node_type_file = std::nullopt);

void write_edge_file(const HinGraph& g, const std::string& path);
void write_node_type_file(const HinGraph& g, const std::string& path);

// Typed out-edges of v; restricted to type e when given.
std::vector<std::pair<EdgeTypeId, NodeId>> out_neighbors(const HinGraph& g, NodeId v,
                                                         std::optional<EdgeTypeId> e = std::nullopt);

// At least two node types or two edge types in use.
bool validate_heterogeneous(const HinGraph& g);

struct MetaPathPattern {
  std::vector<EdgeTypeId> relations;                 // e_1..e_{n-1}
  std::vector<std::optional<NodeTypeId>> node_types;  // empty, or one per position (n)
};

// Parses `write,published_by` (edge types) and optional `A,P,V` node types.
MetaPathPattern parse_metapath(const HinGraph& g, std::string_view relations,
                               std::string_view node_types = {});
void validate_metapath(const HinGraph& g, const MetaPathPattern& p);

struct DegreeSummary {
  std::size_t min = 0;
  std::size_t max = 0;
  double mean = 0.0;
  std::size_t sinks = 0;
};
DegreeSummary out_degree_summary(const HinGraph& g);

}  // namespace hine
