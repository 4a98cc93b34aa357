#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hine/graph.hpp"
#include "hine/rng.hpp"
#include "hine/sampler.hpp"

namespace hine {

// |V| x d node vectors. The same rows are used as input embeddings and as
// output (softmax / negative-sample) vectors.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t rows, std::size_t dim) : rows_(rows), dim_(dim), data_(rows * dim, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }

  std::span<double> row(std::size_t v) { return {data_.data() + v * dim_, dim_}; }
  std::span<const double> row(std::size_t v) const { return {data_.data() + v * dim_, dim_}; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;  // out x in, row-major
  std::vector<double> bias;    // out

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct Architecture {
  std::size_t dim = 30;
  std::size_t hidden = 200;
  std::size_t hidden_layers = 2;  // 2 gives the d -> h -> h -> d module
};

// f_e for one edge type: dim -> hidden^k -> dim, ReLU between layers, linear output.
class RelationTransform {
 public:
  RelationTransform() = default;
  explicit RelationTransform(const Architecture& arch);

  std::size_t dim() const noexcept { return layers_.empty() ? 0 : layers_.front().in; }
  std::size_t num_parameters() const;

  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  friend bool operator==(const RelationTransform&, const RelationTransform&) = default;

 private:
  std::vector<DenseLayer> layers_;
};

// Intermediates of one module application. pre[l] is layer l's
// pre-activation; the module output is pre.back().
struct ModuleTape {
  EdgeTypeId relation = 0;
  std::vector<double> input;
  std::vector<std::vector<double>> pre;
};

struct ForwardTape {
  std::uint64_t pass = 0;  // Model::pass() at recording time
  Signature signature;
  std::vector<ModuleTape> modules;

  std::span<const double> output() const { return modules.back().pre.back(); }
  std::size_t num_layers() const;
};

class Model {
 public:
  Model() = default;
  // All parameters zero.
  Model(std::size_t num_nodes, std::size_t num_relations, const Architecture& arch);

  // Embeddings uniform in [-0.5/d, 0.5/d]; weights N(0, 2/fan_in); biases zero.
  static Model initialized(std::size_t num_nodes, std::size_t num_relations, const Architecture& arch,
                           std::uint64_t seed);

  EmbeddingTable& embeddings() noexcept { return embeddings_; }
  const EmbeddingTable& embeddings() const noexcept { return embeddings_; }

  RelationTransform& transform(EdgeTypeId e);
  const RelationTransform& transform(EdgeTypeId e) const;
  std::size_t num_relations() const noexcept { return transforms_.size(); }
  const Architecture& architecture() const noexcept { return arch_; }
  std::size_t dim() const noexcept { return arch_.dim; }

  // Update counter; tapes recorded before the last update are stale.
  std::uint64_t pass() const noexcept { return pass_; }
  void bump_pass() noexcept { ++pass_; }

  // Parameter equality (ignores the pass counter).
  bool same_parameters(const Model& other) const {
    return embeddings_ == other.embeddings_ && transforms_ == other.transforms_;
  }

 private:
  Architecture arch_;
  EmbeddingTable embeddings_;
  std::vector<RelationTransform> transforms_;
  std::uint64_t pass_ = 0;
};

// One module, recording into `tape`.
void apply_transform(const RelationTransform& f, std::span<const double> x, ModuleTape& tape);

ForwardTape forward_transform(const Model& model, EdgeTypeId e, std::span<const double> x);
// f_{e_m}(relu(... relu(f_{e_1}(x)) ...)): ReLU at module junctions, linear final output.
ForwardTape forward_chain(const Model& model, const Signature& sig, std::span<const double> x);

double score(const Model& model, const Signature& sig, NodeId vi, NodeId vj);

// exp(s(vi, vj)) / Σ_v' exp(s(vi, v')). Test oracle; training never calls it.
double full_softmax_prob(const Model& model, const Signature& sig, NodeId vi, NodeId vj);

// log σ(x) via the softplus identity, x clamped to [-30, 30].
double log_sigmoid(double x);
double sigmoid(double x);

class ChainEvaluator;

class NegativeSampler {
 public:
  // Endpoint frequency^power over the corpus. Falls back to uniform when the
  // corpus is empty.
  static NegativeSampler unigram(std::span<const ChainSample> corpus, std::size_t num_nodes,
                                 double power = 0.75);
  static NegativeSampler uniform(std::size_t num_nodes);

  // Adds per-node-type tables so draws can be restricted to one type.
  void enable_type_restriction(const HinGraph& g);
  bool type_restricted() const noexcept { return !type_tables_.empty(); }

  NodeId draw(Rng& rng) const;
  // Falls back to the global table if the type has no mass.
  NodeId draw_of_type(Rng& rng, NodeTypeId type) const;
  double probability(NodeId v) const;
  std::size_t num_nodes() const noexcept { return weights_.size(); }

 private:
  struct Table {
    std::vector<NodeId> nodes;
    std::vector<double> cumulative;
  };
  static NodeId draw_from(const Table& t, Rng& rng);

  std::vector<double> weights_;  // normalized
  Table global_;
  std::vector<Table> type_tables_;
};

// `count` negatives for a sample; a draw equal to `positive` is retried a few times.
void draw_negatives(const NegativeSampler& sampler, Rng& rng, std::size_t count, NodeId positive,
                    const HinGraph* typed_by, std::vector<NodeId>& out);

struct LossResult {
  double loss = 0.0;
  double positive_score = 0.0;
  std::vector<double> negative_scores;
  ForwardTape tape;
};

// -log σ(s(vi, vj)) - Σ_u log σ(-s(vi, u)); one chain pass shared by all dot products.
LossResult neg_sampling_loss(const Model& model, const ChainSample& sample, std::span<const NodeId> negatives);
// Same, with the chain pass run by a memoized evaluator for sample.relations.
LossResult neg_sampling_loss(const ChainEvaluator& chain, const Model& model, const ChainSample& sample,
                             std::span<const NodeId> negatives);

struct TransformGrad {
  std::vector<std::vector<double>> weight;
  std::vector<std::vector<double>> bias;
};

// Sparse gradient store: embedding rows in first-touch order plus dense
// gradients for the transforms that were touched.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const Model& model);

  std::span<double> row(NodeId v);
  TransformGrad& transform(EdgeTypeId e);

  const std::vector<NodeId>& touched_rows() const noexcept { return row_ids_; }
  std::span<const double> row_values(std::size_t slot) const { return {row_data_.data() + slot * dim_, dim_}; }
  std::span<const double> find_row(NodeId v) const;  // empty when untouched
  const std::vector<EdgeTypeId>& touched_transforms() const noexcept { return transform_ids_; }
  const TransformGrad& transform_values(EdgeTypeId e) const { return transforms_[e]; }

  void clear();
  void scale(double factor);
  double squared_norm() const;

 private:
  const Model* shape_ = nullptr;
  std::size_t dim_ = 0;
  std::vector<NodeId> row_ids_;
  std::vector<double> row_data_;
  std::unordered_map<NodeId, std::size_t> row_slot_;
  std::vector<TransformGrad> transforms_;
  std::vector<char> transform_touched_;
  std::vector<EdgeTypeId> transform_ids_;
};

// Adds ∂loss/∂θ for one sample into `grads`. Throws NumericalError if the
// tape is older than the model. ReLU'(0) = 0.
void backward(const Model& model, const LossResult& forward, const ChainSample& sample,
              std::span<const NodeId> negatives, Gradients& grads);

// θ -= η g with η_embed for embedding rows and η_dnn for transforms. Throws
// NumericalError naming the block if an updated value is not finite.
void sgd_step(Model& model, const Gradients& grads, double eta_embed, double eta_dnn);

// Unchecked variant used by the lock-free multi-threaded trainer.
void apply_gradients_unchecked(Model& model, const Gradients& grads, double eta_embed, double eta_dnn);

// Composition of relation transforms for one signature. Holds references to
// the model's per-relation parameters, so it always sees current values.
class ChainEvaluator {
 public:
  const Signature& signature() const noexcept { return signature_; }
  ForwardTape forward(std::span<const double> x) const;
  double score(NodeId vi, NodeId vj) const;
  std::span<const RelationTransform* const> modules() const noexcept { return modules_; }

 private:
  friend class ChainRegistry;
  ChainEvaluator(const Model& model, Signature sig);

  const Model* model_;
  Signature signature_;
  std::vector<const RelationTransform*> modules_;
};

// Dynamic computation graph set: evaluators built on first request and memoized.
class ChainRegistry {
 public:
  ChainRegistry(const Model& model, std::size_t max_chain);

  const ChainEvaluator& compose(const Signature& sig);
  // Builds every signature of length 1..max_chain; returns the set size.
  std::size_t enumerate_all();
  std::size_t size() const noexcept { return evaluators_.size(); }
  bool contains(const Signature& sig) const { return evaluators_.count(sig) != 0; }

 private:
  const Model* model_;
  std::size_t max_chain_;
  std::map<Signature, std::unique_ptr<ChainEvaluator>> evaluators_;
};

}  // namespace hine
