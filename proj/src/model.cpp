#include "hine/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hine/error.hpp"

namespace hine {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_finite_input(std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v)) throw NumericalError("non-finite value in transform input");
}

ForwardTape run_chain(std::span<const RelationTransform* const> modules, const Signature& sig,
                      std::span<const double> x, std::uint64_t pass) {
  ForwardTape tape;
  tape.pass = pass;
  tape.signature = sig;
  tape.modules.resize(modules.size());
  std::vector<double> junction;
  for (std::size_t k = 0; k < modules.size(); ++k) {
    tape.modules[k].relation = sig[k];
    if (k == 0) {
      apply_transform(*modules[k], x, tape.modules[k]);
    } else {
      const auto& prev = tape.modules[k - 1].pre.back();
      junction.resize(prev.size());
      for (std::size_t i = 0; i < prev.size(); ++i) junction[i] = prev[i] > 0.0 ? prev[i] : 0.0;
      apply_transform(*modules[k], junction, tape.modules[k]);
    }
  }
  return tape;
}

std::vector<const RelationTransform*> resolve(const Model& model, const Signature& sig) {
  if (sig.empty()) throw ConfigError("relation chain must have at least one edge type");
  std::vector<const RelationTransform*> out;
  out.reserve(sig.size());
  for (auto e : sig) out.push_back(&model.transform(e));
  return out;
}

}  // namespace

RelationTransform::RelationTransform(const Architecture& arch) {
  if (arch.dim == 0) throw ConfigError("embedding dimension must be >= 1");
  if (arch.hidden_layers > 0 && arch.hidden == 0) throw ConfigError("hidden width must be >= 1");
  std::vector<std::size_t> widths{arch.dim};
  for (std::size_t i = 0; i < arch.hidden_layers; ++i) widths.push_back(arch.hidden);
  widths.push_back(arch.dim);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer;
    layer.in = widths[l];
    layer.out = widths[l + 1];
    layer.weight.assign(layer.in * layer.out, 0.0);
    layer.bias.assign(layer.out, 0.0);
    layers_.push_back(std::move(layer));
  }
}

std::size_t RelationTransform::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

std::size_t ForwardTape::num_layers() const {
  std::size_t n = 0;
  for (const auto& m : modules) n += m.pre.size();
  return n;
}

Model::Model(std::size_t num_nodes, std::size_t num_relations, const Architecture& arch)
    : arch_(arch), embeddings_(num_nodes, arch.dim), transforms_(num_relations, RelationTransform(arch)) {}

Model Model::initialized(std::size_t num_nodes, std::size_t num_relations, const Architecture& arch,
                         std::uint64_t seed) {
  Model m(num_nodes, num_relations, arch);
  auto rng = make_rng(seed, {0x696e6974ULL});
  const double half = 0.5 / static_cast<double>(arch.dim);
  std::uniform_real_distribution<double> emb(-half, half);
  for (double& v : m.embeddings_.data()) v = emb(rng);
  for (auto& f : m.transforms_) {
    for (auto& layer : f.layers()) {
      std::normal_distribution<double> w(0.0, std::sqrt(2.0 / static_cast<double>(layer.in)));
      for (double& v : layer.weight) v = w(rng);
    }
  }
  return m;
}

RelationTransform& Model::transform(EdgeTypeId e) {
  if (e >= transforms_.size()) throw LookupError("no transform for edge type " + std::to_string(e));
  return transforms_[e];
}

const RelationTransform& Model::transform(EdgeTypeId e) const {
  if (e >= transforms_.size()) throw LookupError("no transform for edge type " + std::to_string(e));
  return transforms_[e];
}

void apply_transform(const RelationTransform& f, std::span<const double> x, ModuleTape& tape) {
  const auto& layers = f.layers();
  if (x.size() != f.dim())
    throw ConfigError("transform input has " + std::to_string(x.size()) + " values, expected " +
                      std::to_string(f.dim()));
  tape.input.assign(x.begin(), x.end());
  tape.pre.resize(layers.size());
  std::vector<double> act(x.begin(), x.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    auto& z = tape.pre[l];
    z.assign(layer.bias.begin(), layer.bias.end());
    for (std::size_t r = 0; r < layer.out; ++r) {
      const double* w = layer.weight.data() + r * layer.in;
      double s = 0.0;
      for (std::size_t c = 0; c < layer.in; ++c) s += w[c] * act[c];
      z[r] += s;
    }
    if (l + 1 < layers.size()) {
      act.resize(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) act[i] = z[i] > 0.0 ? z[i] : 0.0;
    }
  }
}

ForwardTape forward_transform(const Model& model, EdgeTypeId e, std::span<const double> x) {
  check_finite_input(x);
  ForwardTape tape;
  tape.pass = model.pass();
  tape.signature = {e};
  tape.modules.resize(1);
  tape.modules[0].relation = e;
  apply_transform(model.transform(e), x, tape.modules[0]);
  return tape;
}

ForwardTape forward_chain(const Model& model, const Signature& sig, std::span<const double> x) {
  check_finite_input(x);
  auto modules = resolve(model, sig);
  return run_chain(modules, sig, x, model.pass());
}

double score(const Model& model, const Signature& sig, NodeId vi, NodeId vj) {
  const auto& emb = model.embeddings();
  auto tape = forward_chain(model, sig, emb.row(vi));
  return dot(tape.output(), emb.row(vj));
}

double full_softmax_prob(const Model& model, const Signature& sig, NodeId vi, NodeId vj) {
  const auto& emb = model.embeddings();
  auto tape = forward_chain(model, sig, emb.row(vi));
  auto out = tape.output();
  std::vector<double> s(emb.rows());
  for (std::size_t v = 0; v < emb.rows(); ++v) s[v] = dot(out, emb.row(v));
  double mx = *std::max_element(s.begin(), s.end());
  double z = 0.0;
  for (double x : s) z += std::exp(x - mx);
  return std::exp(s[vj] - mx) / z;
}

double log_sigmoid(double x) {
  x = std::clamp(x, -30.0, 30.0);
  return -(std::max(-x, 0.0) + std::log1p(std::exp(-std::abs(x))));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------

NegativeSampler NegativeSampler::unigram(std::span<const ChainSample> corpus, std::size_t num_nodes,
                                         double power) {
  std::vector<double> counts(num_nodes, 0.0);
  for (const auto& s : corpus) {
    counts.at(s.first) += 1.0;
    counts.at(s.last) += 1.0;
  }
  if (corpus.empty()) return uniform(num_nodes);
  NegativeSampler ns;
  ns.weights_.resize(num_nodes);
  for (std::size_t v = 0; v < num_nodes; ++v) ns.weights_[v] = counts[v] > 0 ? std::pow(counts[v], power) : 0.0;
  double total = std::accumulate(ns.weights_.begin(), ns.weights_.end(), 0.0);
  for (double& w : ns.weights_) w /= total;
  double acc = 0.0;
  for (std::size_t v = 0; v < num_nodes; ++v) {
    if (ns.weights_[v] == 0.0) continue;
    acc += ns.weights_[v];
    ns.global_.nodes.push_back(static_cast<NodeId>(v));
    ns.global_.cumulative.push_back(acc);
  }
  return ns;
}

NegativeSampler NegativeSampler::uniform(std::size_t num_nodes) {
  if (num_nodes == 0) throw ConfigError("negative sampler needs at least one node");
  NegativeSampler ns;
  ns.weights_.assign(num_nodes, 1.0 / static_cast<double>(num_nodes));
  for (std::size_t v = 0; v < num_nodes; ++v) {
    ns.global_.nodes.push_back(static_cast<NodeId>(v));
    ns.global_.cumulative.push_back(static_cast<double>(v + 1) / static_cast<double>(num_nodes));
  }
  return ns;
}

void NegativeSampler::enable_type_restriction(const HinGraph& g) {
  type_tables_.assign(g.num_node_types(), {});
  std::vector<double> acc(g.num_node_types(), 0.0);
  for (std::size_t v = 0; v < weights_.size(); ++v) {
    if (weights_[v] == 0.0) continue;
    auto t = g.node_type(static_cast<NodeId>(v));
    acc[t] += weights_[v];
    type_tables_[t].nodes.push_back(static_cast<NodeId>(v));
    type_tables_[t].cumulative.push_back(acc[t]);
  }
}

NodeId NegativeSampler::draw_from(const Table& t, Rng& rng) {
  double u = std::uniform_real_distribution<double>(0.0, t.cumulative.back())(rng);
  auto it = std::upper_bound(t.cumulative.begin(), t.cumulative.end(), u);
  if (it == t.cumulative.end()) --it;
  return t.nodes[static_cast<std::size_t>(it - t.cumulative.begin())];
}

NodeId NegativeSampler::draw(Rng& rng) const { return draw_from(global_, rng); }

NodeId NegativeSampler::draw_of_type(Rng& rng, NodeTypeId type) const {
  if (type < type_tables_.size() && !type_tables_[type].nodes.empty()) return draw_from(type_tables_[type], rng);
  return draw(rng);
}

double NegativeSampler::probability(NodeId v) const { return weights_.at(v); }

void draw_negatives(const NegativeSampler& sampler, Rng& rng, std::size_t count, NodeId positive,
                    const HinGraph* typed_by, std::vector<NodeId>& out) {
  constexpr int kRetries = 8;
  out.clear();
  for (std::size_t i = 0; i < count; ++i) {
    NodeId u = 0;
    for (int attempt = 0; attempt < kRetries; ++attempt) {
      u = typed_by ? sampler.draw_of_type(rng, typed_by->node_type(positive)) : sampler.draw(rng);
      if (u != positive) break;
    }
    out.push_back(u);
  }
}

namespace {

void score_sample(const EmbeddingTable& emb, const ChainSample& sample, std::span<const NodeId> negatives,
                  LossResult& r) {
  auto out = r.tape.output();
  r.positive_score = dot(out, emb.row(sample.last));
  r.loss = -log_sigmoid(r.positive_score);
  r.negative_scores.reserve(negatives.size());
  for (NodeId u : negatives) {
    double s = dot(out, emb.row(u));
    r.negative_scores.push_back(s);
    r.loss -= log_sigmoid(-s);
  }
}

}  // namespace

LossResult neg_sampling_loss(const Model& model, const ChainSample& sample, std::span<const NodeId> negatives) {
  LossResult r;
  r.tape = forward_chain(model, sample.relations, model.embeddings().row(sample.first));
  score_sample(model.embeddings(), sample, negatives, r);
  return r;
}

LossResult neg_sampling_loss(const ChainEvaluator& chain, const Model& model, const ChainSample& sample,
                             std::span<const NodeId> negatives) {
  if (chain.signature() != sample.relations) throw ConfigError("evaluator signature does not match the sample");
  LossResult r;
  r.tape = chain.forward(model.embeddings().row(sample.first));
  score_sample(model.embeddings(), sample, negatives, r);
  return r;
}

// ---------------------------------------------------------------------------

Gradients::Gradients(const Model& model)
    : shape_(&model),
      dim_(model.dim()),
      transforms_(model.num_relations()),
      transform_touched_(model.num_relations(), 0) {}

std::span<double> Gradients::row(NodeId v) {
  auto [it, inserted] = row_slot_.try_emplace(v, row_ids_.size());
  if (inserted) {
    row_ids_.push_back(v);
    row_data_.resize(row_data_.size() + dim_, 0.0);
  }
  return {row_data_.data() + it->second * dim_, dim_};
}

std::span<const double> Gradients::find_row(NodeId v) const {
  auto it = row_slot_.find(v);
  if (it == row_slot_.end()) return {};
  return row_values(it->second);
}

TransformGrad& Gradients::transform(EdgeTypeId e) {
  auto& g = transforms_.at(e);
  if (!transform_touched_[e]) {
    transform_touched_[e] = 1;
    transform_ids_.push_back(e);
    const auto& layers = shape_->transform(e).layers();
    if (g.weight.size() != layers.size()) {
      g.weight.resize(layers.size());
      g.bias.resize(layers.size());
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      g.weight[l].assign(layers[l].weight.size(), 0.0);
      g.bias[l].assign(layers[l].bias.size(), 0.0);
    }
  }
  return g;
}

void Gradients::clear() {
  row_ids_.clear();
  row_data_.clear();
  row_slot_.clear();
  for (auto e : transform_ids_) transform_touched_[e] = 0;
  transform_ids_.clear();
}

void Gradients::scale(double factor) {
  for (double& v : row_data_) v *= factor;
  for (auto e : transform_ids_) {
    for (auto& w : transforms_[e].weight)
      for (double& v : w) v *= factor;
    for (auto& b : transforms_[e].bias)
      for (double& v : b) v *= factor;
  }
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (double v : row_data_) s += v * v;
  for (auto e : transform_ids_) {
    for (const auto& w : transforms_[e].weight)
      for (double v : w) s += v * v;
    for (const auto& b : transforms_[e].bias)
      for (double v : b) s += v * v;
  }
  return s;
}

void backward(const Model& model, const LossResult& fwd, const ChainSample& sample,
              std::span<const NodeId> negatives, Gradients& grads) {
  const auto& tape = fwd.tape;
  if (tape.pass != model.pass())
    throw NumericalError("stale forward tape (recorded at pass " + std::to_string(tape.pass) +
                         ", model at pass " + std::to_string(model.pass()) + ")");
  if (negatives.size() != fwd.negative_scores.size())
    throw ConfigError("negatives do not match the forward pass");

  const auto& emb = model.embeddings();
  const std::size_t d = emb.dim();
  auto out = tape.output();

  // d loss / d score: σ(s) - 1 for the positive, σ(s) for each negative.
  std::vector<double> d_out(d, 0.0);
  {
    double g = sigmoid(fwd.positive_score) - 1.0;
    auto target = emb.row(sample.last);
    auto grow = grads.row(sample.last);
    for (std::size_t i = 0; i < d; ++i) {
      grow[i] += g * out[i];
      d_out[i] += g * target[i];
    }
  }
  for (std::size_t k = 0; k < negatives.size(); ++k) {
    double g = sigmoid(fwd.negative_scores[k]);
    auto target = emb.row(negatives[k]);
    auto grow = grads.row(negatives[k]);
    for (std::size_t i = 0; i < d; ++i) {
      grow[i] += g * out[i];
      d_out[i] += g * target[i];
    }
  }

  std::vector<double> delta = std::move(d_out);  // gradient w.r.t. current layer output
  std::vector<double> next;
  std::vector<double> input;
  for (std::size_t k = tape.modules.size(); k-- > 0;) {
    const auto& mt = tape.modules[k];
    const auto& layers = model.transform(mt.relation).layers();
    auto& tg = grads.transform(mt.relation);
    for (std::size_t l = layers.size(); l-- > 0;) {
      const auto& layer = layers[l];
      // Layer input: module input for l == 0, else relu(pre[l-1]).
      const std::vector<double>* in_pre = l > 0 ? &mt.pre[l - 1] : nullptr;
      if (in_pre) {
        input.resize(in_pre->size());
        for (std::size_t c = 0; c < input.size(); ++c) input[c] = (*in_pre)[c] > 0.0 ? (*in_pre)[c] : 0.0;
      } else {
        input = mt.input;
      }
      auto& gw = tg.weight[l];
      auto& gb = tg.bias[l];
      next.assign(layer.in, 0.0);
      for (std::size_t r = 0; r < layer.out; ++r) {
        double dz = delta[r];
        if (dz == 0.0) continue;
        gb[r] += dz;
        double* gwr = gw.data() + r * layer.in;
        const double* wr = layer.weight.data() + r * layer.in;
        for (std::size_t c = 0; c < layer.in; ++c) {
          gwr[c] += dz * input[c];
          next[c] += wr[c] * dz;
        }
      }
      if (in_pre)
        for (std::size_t c = 0; c < layer.in; ++c)
          if ((*in_pre)[c] <= 0.0) next[c] = 0.0;
      delta.swap(next);
    }
    // delta is now d loss / d module input; step through the junction ReLU.
    if (k > 0) {
      const auto& prev_out = tape.modules[k - 1].pre.back();
      for (std::size_t i = 0; i < delta.size(); ++i)
        if (prev_out[i] <= 0.0) delta[i] = 0.0;
    }
  }
  auto src = grads.row(sample.first);
  for (std::size_t i = 0; i < d; ++i) src[i] += delta[i];
}

namespace {

template <bool Check>
void apply_impl(Model& model, const Gradients& grads, double eta_embed, double eta_dnn) {
  auto& emb = model.embeddings();
  const auto& rows = grads.touched_rows();
  if constexpr (Check) {
    for (std::size_t slot = 0; slot < rows.size(); ++slot) {
      auto cur = emb.row(rows[slot]);
      auto g = grads.row_values(slot);
      for (std::size_t i = 0; i < cur.size(); ++i)
        if (!std::isfinite(cur[i] - eta_embed * g[i]))
          throw NumericalError("non-finite update in embedding row " + std::to_string(rows[slot]));
    }
    for (auto e : grads.touched_transforms()) {
      const auto& layers = model.transform(e).layers();
      const auto& tg = grads.transform_values(e);
      for (std::size_t l = 0; l < layers.size(); ++l) {
        for (std::size_t i = 0; i < layers[l].weight.size(); ++i)
          if (!std::isfinite(layers[l].weight[i] - eta_dnn * tg.weight[l][i]))
            throw NumericalError("non-finite update in transform " + std::to_string(e) + " layer " +
                                 std::to_string(l) + " weight");
        for (std::size_t i = 0; i < layers[l].bias.size(); ++i)
          if (!std::isfinite(layers[l].bias[i] - eta_dnn * tg.bias[l][i]))
            throw NumericalError("non-finite update in transform " + std::to_string(e) + " layer " +
                                 std::to_string(l) + " bias");
      }
    }
  }
  for (std::size_t slot = 0; slot < rows.size(); ++slot) {
    auto cur = emb.row(rows[slot]);
    auto g = grads.row_values(slot);
    for (std::size_t i = 0; i < cur.size(); ++i) cur[i] -= eta_embed * g[i];
  }
  for (auto e : grads.touched_transforms()) {
    auto& layers = model.transform(e).layers();
    const auto& tg = grads.transform_values(e);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      for (std::size_t i = 0; i < layers[l].weight.size(); ++i) layers[l].weight[i] -= eta_dnn * tg.weight[l][i];
      for (std::size_t i = 0; i < layers[l].bias.size(); ++i) layers[l].bias[i] -= eta_dnn * tg.bias[l][i];
    }
  }
}

}  // namespace

void sgd_step(Model& model, const Gradients& grads, double eta_embed, double eta_dnn) {
  apply_impl<true>(model, grads, eta_embed, eta_dnn);
  model.bump_pass();
}

void apply_gradients_unchecked(Model& model, const Gradients& grads, double eta_embed, double eta_dnn) {
  apply_impl<false>(model, grads, eta_embed, eta_dnn);
}

// ---------------------------------------------------------------------------

ChainEvaluator::ChainEvaluator(const Model& model, Signature sig)
    : model_(&model), signature_(std::move(sig)), modules_(resolve(model, signature_)) {}

ForwardTape ChainEvaluator::forward(std::span<const double> x) const {
  check_finite_input(x);
  return run_chain(modules_, signature_, x, model_->pass());
}

double ChainEvaluator::score(NodeId vi, NodeId vj) const {
  const auto& emb = model_->embeddings();
  auto tape = forward(emb.row(vi));
  return dot(tape.output(), emb.row(vj));
}

ChainRegistry::ChainRegistry(const Model& model, std::size_t max_chain) : model_(&model), max_chain_(max_chain) {
  if (max_chain < 1) throw ConfigError("max chain length must be >= 1");
}

const ChainEvaluator& ChainRegistry::compose(const Signature& sig) {
  if (sig.empty() || sig.size() > max_chain_)
    throw ConfigError("relation chain of length " + std::to_string(sig.size()) + " outside [1, " +
                      std::to_string(max_chain_) + "]");
  auto it = evaluators_.find(sig);
  if (it != evaluators_.end()) return *it->second;
  std::unique_ptr<ChainEvaluator> ev(new ChainEvaluator(*model_, sig));
  return *evaluators_.emplace(sig, std::move(ev)).first->second;
}

std::size_t ChainRegistry::enumerate_all() {
  const std::size_t types = model_->num_relations();
  if (types == 0) return size();
  for (std::size_t len = 1; len <= max_chain_; ++len) {
    Signature sig(len, 0);
    while (true) {
      compose(sig);
      std::size_t pos = len;
      while (pos > 0 && ++sig[pos - 1] == types) sig[--pos] = 0;
      if (pos == 0) break;
    }
  }
  return size();
}

}  // namespace hine
