#include "hine/trainer.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "hine/error.hpp"
#include "hine/model_io.hpp"
#include "hine/rng.hpp"
#include "text_util.hpp"

namespace hine {

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::kMaxIterations:
      return "max_iterations";
    case StopReason::kConverged:
      return "converged";
    case StopReason::kNumericalAbort:
      return "numerical_abort";
  }
  return "unknown";
}

std::vector<double> TrainReport::losses(int phase) const {
  std::vector<double> out;
  for (const auto& e : epochs)
    if (e.phase == phase) out.push_back(e.mean_loss);
  return out;
}

std::vector<Batch> make_batches(std::span<const ChainSample> samples, std::size_t b, std::uint64_t seed) {
  if (b < 1) throw ConfigError("batch size must be >= 1");
  std::map<Signature, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < samples.size(); ++i) groups[samples[i].relations].push_back(i);
  auto rng = make_rng(seed, {0x6261746368ULL});
  std::vector<Batch> batches;
  for (auto& [sig, idx] : groups) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t start = 0; start < idx.size(); start += b) {
      Batch batch;
      batch.signature = sig;
      auto end = std::min(idx.size(), start + b);
      batch.samples.assign(idx.begin() + static_cast<std::ptrdiff_t>(start),
                           idx.begin() + static_cast<std::ptrdiff_t>(end));
      batches.push_back(std::move(batch));
    }
  }
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

bool convergence_check(std::span<const double> losses, double tol) {
  if (losses.size() < 2) return false;
  double prev = losses[losses.size() - 2];
  double cur = losses.back();
  if (cur == prev) return true;
  constexpr double kEps = 1e-12;
  return std::abs(cur - prev) / std::max(prev, kEps) < tol;
}

namespace {

// Runs one batch against the parameters as they are at batch start.
double process_batch(Model& model, const ChainEvaluator& chain, const EpochInputs& in, std::size_t batch_index,
                     Gradients& grads, std::vector<NodeId>& negatives, bool checked) {
  const auto& cfg = *in.cfg;
  const auto& batch = (*in.batches)[batch_index];
  auto rng = make_rng(cfg.seed, {0x6e6567ULL, static_cast<std::uint64_t>(in.phase), in.epoch, batch_index});
  grads.clear();
  double loss = 0.0;
  for (std::size_t idx : batch.samples) {
    const auto& s = in.corpus[idx];
    draw_negatives(*in.negatives, rng, cfg.neg, s.last, in.typed_by, negatives);
    auto r = neg_sampling_loss(chain, model, s, negatives);
    if (!std::isfinite(r.loss))
      throw NumericalError("non-finite loss on sample " + std::to_string(idx) + " (phase " +
                           std::to_string(in.phase) + ", epoch " + std::to_string(in.epoch) + ")");
    loss += r.loss;
    backward(model, r, s, negatives, grads);
  }
  if (cfg.max_grad_norm > 0) {
    double norm = std::sqrt(grads.squared_norm());
    if (norm > cfg.max_grad_norm) grads.scale(cfg.max_grad_norm / norm);
  }
  if (checked)
    sgd_step(model, grads, cfg.eta_embed, cfg.eta_dnn);
  else
    apply_gradients_unchecked(model, grads, cfg.eta_embed, cfg.eta_dnn);
  return loss;
}

std::size_t corpus_visits(const EpochInputs& in) {
  std::size_t n = 0;
  for (const auto& b : *in.batches) n += b.samples.size();
  return n;
}

void check_model_finite(const Model& model) {
  for (double v : model.embeddings().data())
    if (!std::isfinite(v)) throw NumericalError("non-finite value in embeddings after lock-free epoch");
  for (std::size_t e = 0; e < model.num_relations(); ++e)
    for (const auto& layer : model.transform(static_cast<EdgeTypeId>(e)).layers())
      for (double v : layer.weight)
        if (!std::isfinite(v))
          throw NumericalError("non-finite value in transform " + std::to_string(e) + " after lock-free epoch");
}

}  // namespace

double train_epoch(Model& model, ChainRegistry& registry, const EpochInputs& in) {
  if (in.cfg->threads > 1) return train_epoch_parallel(model, registry, in, static_cast<int>(in.cfg->threads));
  Gradients grads(model);
  std::vector<NodeId> negatives;
  double total = 0.0;
  for (std::size_t bi = 0; bi < in.batches->size(); ++bi) {
    const auto& chain = registry.compose((*in.batches)[bi].signature);
    total += process_batch(model, chain, in, bi, grads, negatives, true);
  }
  std::size_t n = corpus_visits(in);
  return n ? total / static_cast<double>(n) : 0.0;
}

double train_epoch_parallel(Model& model, ChainRegistry& registry, const EpochInputs& in, int threads) {
  const auto& batches = *in.batches;
  std::vector<const ChainEvaluator*> chains(batches.size());
  for (std::size_t bi = 0; bi < batches.size(); ++bi) chains[bi] = &registry.compose(batches[bi].signature);

  double total = 0.0;
  bool failed = false;
  std::string failure;
  const auto nb = static_cast<std::ptrdiff_t>(batches.size());
#pragma omp parallel num_threads(threads) reduction(+ : total)
  {
    Gradients grads(model);
    std::vector<NodeId> negatives;
#pragma omp for schedule(dynamic, 1)
    for (std::ptrdiff_t bi = 0; bi < nb; ++bi) {
      bool stop = false;
#pragma omp atomic read
      stop = failed;
      if (stop) continue;
      try {
        total += process_batch(model, *chains[static_cast<std::size_t>(bi)], in, static_cast<std::size_t>(bi), grads,
                               negatives, false);
      } catch (const std::exception& e) {
#pragma omp critical(hine_train_failure)
        {
          if (!failed) failure = e.what();
          failed = true;
        }
      }
    }
  }
  if (failed) throw NumericalError(failure);
  check_model_finite(model);
  model.bump_pass();
  std::size_t n = corpus_visits(in);
  return n ? total / static_cast<double>(n) : 0.0;
}

// ---------------------------------------------------------------------------

std::string checkpoint_path(const std::string& root, int phase, std::size_t epoch) {
  return (std::filesystem::path(root) / ("phase" + std::to_string(phase)) / ("epoch_" + std::to_string(epoch)))
      .string();
}

namespace {

std::string join_losses(const std::vector<double>& v) {
  std::ostringstream out;
  char buf[40];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.17g", i ? "," : "", v[i]);
    out << buf;
  }
  return out.str();
}

std::vector<double> split_losses(std::string_view s, const std::string& path) {
  std::vector<double> out;
  if (detail::trim(s).empty()) return out;
  for (auto tok : detail::split(s, ',')) {
    std::string t(detail::trim(tok));
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size()) throw DataError("'" + path + "': bad loss value '" + t + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

void save_checkpoint(const Model& model, const CheckpointMeta& meta, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create checkpoint directory '" + dir + "': " + ec.message());
  write_embedding_checkpoint(model.embeddings(), dir + "/embeddings.bin");
  write_transforms(model, dir + "/transforms.bin");
  auto out = detail::open_out(dir + "/meta");
  out << "format = 1\n"
      << "phase = " << meta.phase << '\n'
      << "epoch = " << meta.epoch << '\n'
      << "pass = " << model.pass() << '\n'
      << "losses = " << join_losses(meta.losses) << '\n'
      << "phase1_losses = " << join_losses(meta.phase1_losses) << '\n';
  if (!out) throw DataError("write failed for '" + dir + "/meta'");
}

Model load_checkpoint(const TrainConfig& cfg, std::size_t num_nodes, std::size_t num_relations,
                      const std::string& dir, CheckpointMeta& meta) {
  Model model(num_nodes, num_relations, cfg.architecture());
  auto table = read_embedding_checkpoint(dir + "/embeddings.bin");
  if (table.rows() != num_nodes || table.dim() != cfg.dim)
    throw DataError("'" + dir + "/embeddings.bin': shape does not match the graph/config");
  model.embeddings() = std::move(table);
  read_transforms(model, dir + "/transforms.bin");

  auto in = detail::open_in(dir + "/meta");
  std::string line;
  meta = {};
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key(detail::trim(std::string_view(line).substr(0, eq)));
    std::string_view value = detail::trim(std::string_view(line).substr(eq + 1));
    if (key == "phase")
      meta.phase = std::stoi(std::string(value));
    else if (key == "epoch")
      meta.epoch = std::stoul(std::string(value));
    else if (key == "losses")
      meta.losses = split_losses(value, dir + "/meta");
    else if (key == "phase1_losses")
      meta.phase1_losses = split_losses(value, dir + "/meta");
  }
  if (meta.phase != 1 && meta.phase != 2) throw DataError("'" + dir + "/meta': bad phase");
  return model;
}

namespace {

class Session {
 public:
  Session(const HinGraph& g, const TrainConfig& cfg, Model model)
      : g_(g), cfg_(cfg), model_(std::move(model)), registry_(model_, cfg.max_chain) {}

  void use_negatives(std::span<const ChainSample> corpus) {
    sampler_ = cfg_.uniform_negatives ? NegativeSampler::uniform(g_.num_nodes())
                                      : NegativeSampler::unigram(corpus, g_.num_nodes());
    if (cfg_.typed_negatives) sampler_.enable_type_restriction(g_);
  }

  // Returns false when training must stop (numerical abort).
  bool run_phase(int phase, std::span<const ChainSample> corpus, std::size_t cap, std::size_t start_epoch,
                 std::vector<double> history) {
    if (convergence_check(history, cfg_.convergence_tol)) {
      if (phase == 1) phase1_history_ = history;
      report_.stop = StopReason::kConverged;
      return true;
    }
    for (std::size_t epoch = start_epoch; epoch < cap; ++epoch) {
      Model snapshot = model_;
      auto t0 = std::chrono::steady_clock::now();
      std::uint64_t batch_seed = make_rng(cfg_.seed, {0x65706f6368ULL, static_cast<std::uint64_t>(phase), epoch})();
      auto batches = make_batches(corpus, cfg_.batch_size, batch_seed);
      EpochInputs in;
      in.corpus = corpus;
      in.batches = &batches;
      in.negatives = &sampler_;
      in.typed_by = cfg_.typed_negatives ? &g_ : nullptr;
      in.cfg = &cfg_;
      in.phase = phase;
      in.epoch = epoch;
      double loss = 0.0;
      try {
        loss = train_epoch(model_, registry_, in);
      } catch (const NumericalError& e) {
        model_ = std::move(snapshot);
        report_.stop = StopReason::kNumericalAbort;
        report_.message = e.what();
        if (!cfg_.checkpoint_dir.empty()) save(phase, epoch, history, cfg_.checkpoint_dir + "/last_good");
        return false;
      }
      double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      history.push_back(loss);
      EpochStats st;
      st.phase = phase;
      st.epoch = epoch + 1;
      st.mean_loss = loss;
      st.seconds = secs;
      st.samples_per_sec = secs > 0 ? static_cast<double>(corpus.size()) / secs : 0.0;
      report_.epochs.push_back(st);
      if (phase == 1) phase1_history_ = history;
      if (cfg_.checkpoint_every > 0 && (epoch + 1) % cfg_.checkpoint_every == 0)
        save(phase, epoch + 1, history, checkpoint_path(cfg_.checkpoint_dir, phase, epoch + 1));
      if (convergence_check(history, cfg_.convergence_tol)) {
        report_.stop = StopReason::kConverged;
        return true;
      }
    }
    report_.stop = StopReason::kMaxIterations;
    return true;
  }

  void set_phase1_history(std::vector<double> h) { phase1_history_ = std::move(h); }

  TrainResult finish() && { return {std::move(model_), std::move(report_)}; }

 private:
  void save(int phase, std::size_t epoch, const std::vector<double>& history, const std::string& dir) {
    CheckpointMeta meta;
    meta.phase = phase;
    meta.epoch = epoch;
    meta.losses = history;
    meta.phase1_losses = phase == 1 ? history : phase1_history_;
    save_checkpoint(model_, meta, dir);
  }

  const HinGraph& g_;
  TrainConfig cfg_;
  Model model_;
  ChainRegistry registry_;
  NegativeSampler sampler_ = NegativeSampler::uniform(1);
  TrainReport report_;
  std::vector<double> phase1_history_;
};

void require_lengths(std::span<const ChainSample> samples, std::size_t max_len, const char* what) {
  for (const auto& s : samples)
    if (s.relations.empty() || s.relations.size() > max_len)
      throw ConfigError(std::string(what) + ": sample of chain length " + std::to_string(s.relations.size()) +
                        " outside [1, " + std::to_string(max_len) + "]");
}

void require_in_graph(const HinGraph& g, std::span<const ChainSample> samples) {
  for (const auto& s : samples) {
    if (s.first >= g.num_nodes() || s.last >= g.num_nodes()) throw LookupError("sample endpoint not in graph");
    for (auto e : s.relations)
      if (e >= g.num_edge_types()) throw LookupError("sample relation not in graph");
  }
}

struct Corpora {
  std::vector<ChainSample> singles;
  std::vector<ChainSample> chains;
};

Corpora split_corpora(const HinGraph& g, const TrainConfig& cfg, std::span<const ChainSample> samples) {
  Corpora c;
  for (const auto& s : samples) {
    if (s.length() == 1) c.singles.push_back(s);
    if (s.length() > 1 || cfg.keep_single_edges) c.chains.push_back(s);
  }
  if (c.singles.empty() && cfg.pretrain_epochs > 0)
    c.singles = sample_edge_triples(g, cfg.edge_samples ? cfg.edge_samples : g.num_edges(), cfg.seed);
  return c;
}

TrainResult run_ahine(const HinGraph& g, const TrainConfig& cfg, std::span<const ChainSample> samples,
                      Model model, int start_phase, std::size_t start_epoch, std::vector<double> history,
                      std::vector<double> phase1_history) {
  Session session(g, cfg, std::move(model));
  if (cfg.max_chain == 1) {
    session.use_negatives(samples);
    session.run_phase(1, samples, cfg.max_iterations, start_epoch, std::move(history));
    return std::move(session).finish();
  }
  auto corpora = split_corpora(g, cfg, samples);
  session.use_negatives(samples.empty() ? std::span<const ChainSample>(corpora.singles) : samples);
  if (start_phase == 1) {
    if (!session.run_phase(1, corpora.singles, cfg.pretrain_epochs, start_epoch, std::move(history)))
      return std::move(session).finish();
    start_epoch = 0;
    history.clear();
  } else {
    session.set_phase1_history(std::move(phase1_history));
  }
  session.run_phase(2, corpora.chains, cfg.max_iterations, start_epoch, std::move(history));
  return std::move(session).finish();
}

}  // namespace

TrainResult train_ghine(const HinGraph& g, const TrainConfig& cfg) {
  cfg.validate();
  auto triples = sample_edge_triples(g, cfg.edge_samples ? cfg.edge_samples : g.num_edges(), cfg.seed);
  return train_ghine(g, cfg, triples);
}

TrainResult train_ghine(const HinGraph& g, const TrainConfig& cfg, std::span<const ChainSample> triples) {
  cfg.validate();
  require_lengths(triples, 1, "GHINE");
  require_in_graph(g, triples);
  auto ghine_cfg = cfg;
  ghine_cfg.max_chain = 1;
  return run_ahine(g, ghine_cfg, triples,
                   Model::initialized(g.num_nodes(), g.num_edge_types(), cfg.architecture(), cfg.seed), 1, 0, {}, {});
}

TrainResult train_ahine(const HinGraph& g, const TrainConfig& cfg, std::span<const ChainSample> samples) {
  cfg.validate();
  require_lengths(samples, cfg.max_chain, "AHINE");
  require_in_graph(g, samples);
  if (cfg.max_chain == 1) return train_ghine(g, cfg, samples);
  return run_ahine(g, cfg, samples,
                   Model::initialized(g.num_nodes(), g.num_edge_types(), cfg.architecture(), cfg.seed), 1, 0, {}, {});
}

TrainResult resume_ahine(const HinGraph& g, const TrainConfig& cfg, std::span<const ChainSample> samples,
                         const std::string& checkpoint) {
  cfg.validate();
  require_lengths(samples, cfg.max_chain, "AHINE");
  require_in_graph(g, samples);
  CheckpointMeta meta;
  auto model = load_checkpoint(cfg, g.num_nodes(), g.num_edge_types(), checkpoint, meta);
  if (cfg.max_chain == 1 && meta.phase != 1) throw ConfigError("GHINE checkpoints have a single phase");
  return run_ahine(g, cfg, samples, std::move(model), meta.phase, meta.epoch, meta.losses, meta.phase1_losses);
}

}  // namespace hine
