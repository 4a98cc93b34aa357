#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "hine/graph.hpp"
#include "hine/model.hpp"
#include "hine/rng.hpp"

namespace hine::testing {

// Two planted blocks: ordered pairs inside a block get an `intra` edge with
// probability p_in, pairs across blocks an `inter` edge with probability p_out.
struct PlantedGraph {
  HinGraph graph;
  std::vector<int> block;  // per node id
};

inline PlantedGraph planted_blocks(std::uint64_t seed, std::size_t per_block = 50, double p_in = 0.3,
                                   double p_out = 0.02) {
  HinGraph::Builder b;
  const std::size_t n = 2 * per_block;
  for (std::size_t v = 0; v < n; ++v) b.add_node("n" + std::to_string(v));
  auto intra = b.add_edge_type("intra");
  auto inter = b.add_edge_type("inter");
  auto rng = make_rng(seed, {0x706c616e74ULL});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      bool same = (i < per_block) == (j < per_block);
      double r = u(rng);
      if (same && r < p_in) b.add_edge(static_cast<NodeId>(i), intra, static_cast<NodeId>(j));
      if (!same && r < p_out) b.add_edge(static_cast<NodeId>(i), inter, static_cast<NodeId>(j));
    }
  PlantedGraph out{std::move(b).build(), {}};
  for (std::size_t v = 0; v < n; ++v) out.block.push_back(v < per_block ? 0 : 1);
  return out;
}

inline void write_labels(const PlantedGraph& p, const std::string& path) {
  std::ofstream out(path);
  for (NodeId v = 0; v < p.graph.num_nodes(); ++v)
    out << p.graph.node_names().name(v) << '\t' << (p.block[v] ? "B" : "A") << '\n';
}

// Every parameter drawn at random; `scale` multiplies the default spread.
inline Model random_model(std::size_t nodes, std::size_t relations, const Architecture& arch, std::uint64_t seed,
                          double embed_scale = 1.0) {
  Model m(nodes, relations, arch);
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> u(-embed_scale, embed_scale);
  for (double& x : m.embeddings().data()) x = u(rng);
  for (std::size_t e = 0; e < relations; ++e)
    for (auto& layer : m.transform(static_cast<EdgeTypeId>(e)).layers()) {
      std::normal_distribution<double> g(0.0, std::sqrt(2.0 / static_cast<double>(layer.in)));
      for (double& w : layer.weight) w = g(rng);
      std::normal_distribution<double> gb(0.0, 0.1);
      for (double& w : layer.bias) w = gb(rng);
    }
  return m;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("hine_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace hine::testing
