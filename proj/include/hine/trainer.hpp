#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hine/graph.hpp"
#include "hine/model.hpp"
#include "hine/sampler.hpp"

namespace hine {

struct TrainConfig {
  std::size_t batch_size = 32;
  double eta_embed = 0.05;
  double eta_dnn = 0.002;
  std::size_t neg = 5;
  std::size_t max_chain = 3;
  std::size_t max_iterations = 200;  // epoch cap (phase 2 for AHINE)
  double convergence_tol = 1e-4;
  std::uint64_t seed = 1;
  std::size_t dim = 30;
  std::size_t hidden = 200;
  std::size_t hidden_layers = 2;
  std::size_t pretrain_epochs = 50;

  std::size_t edge_samples = 0;  // GHINE triples drawn from the graph; 0 means |E|
  bool keep_single_edges = true;  // phase 2 also trains on length-1 samples
  bool uniform_negatives = false;
  bool typed_negatives = false;   // negatives share the node type of the target
  double max_grad_norm = 0.0;     // batch gradient norm cap; 0 disables
  std::size_t threads = 1;        // > 1: lock-free concurrent batches, nondeterministic
  std::size_t checkpoint_every = 0;
  std::string checkpoint_dir;

  void validate() const;
  Architecture architecture() const { return {dim, hidden, hidden_layers}; }
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

// Every TrainConfig field, by its field name.
const std::vector<ConfigKey>& train_config_keys();
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);
// Flat `key = value` lines; `#` comments and blank lines skipped.
void apply_config_file(TrainConfig& cfg, const std::string& path);
std::string format_config(const TrainConfig& cfg);

struct EpochStats {
  int phase = 1;
  std::size_t epoch = 0;  // 1-based within the phase
  double mean_loss = 0.0;
  double seconds = 0.0;
  double samples_per_sec = 0.0;
};

enum class StopReason { kMaxIterations, kConverged, kNumericalAbort };
std::string to_string(StopReason r);

struct TrainReport {
  std::vector<EpochStats> epochs;
  StopReason stop = StopReason::kMaxIterations;
  std::string message;

  std::vector<double> losses(int phase) const;
};

struct TrainResult {
  Model model;
  TrainReport report;
};

struct Batch {
  Signature signature;
  std::vector<std::size_t> samples;  // indices into the corpus
};

// Signature-homogeneous batches of at most b samples. Samples are shuffled
// within each signature group, chunked, and the batch order is shuffled.
std::vector<Batch> make_batches(std::span<const ChainSample> samples, std::size_t b, std::uint64_t seed);

// |l_t - l_{t-1}| / max(l_{t-1}, eps) < tol; exact equality always converges.
bool convergence_check(std::span<const double> losses, double tol);

// Everything one epoch needs besides the parameters.
struct EpochInputs {
  std::span<const ChainSample> corpus;
  const std::vector<Batch>* batches = nullptr;
  const NegativeSampler* negatives = nullptr;
  const HinGraph* typed_by = nullptr;  // set when negatives are type-restricted
  const TrainConfig* cfg = nullptr;
  int phase = 1;
  std::size_t epoch = 0;
};

// One pass over the batches; returns the mean per-sample loss. Dispatches on
// cfg.threads: 1 runs the single-writer path, more runs train_epoch_parallel.
double train_epoch(Model& model, ChainRegistry& registry, const EpochInputs& in);
// Lock-free: each thread applies its batch updates without synchronization.
double train_epoch_parallel(Model& model, ChainRegistry& registry, const EpochInputs& in, int threads);

// GHINE: edge triples from the graph (edge_samples draws), m = 1 batches.
TrainResult train_ghine(const HinGraph& g, const TrainConfig& cfg);
TrainResult train_ghine(const HinGraph& g, const TrainConfig& cfg, std::span<const ChainSample> triples);

// AHINE: GHINE pretraining on the length-1 samples (pretrain_epochs),
// then chain training on samples of length <= max_chain. With max_chain == 1
// this is train_ghine on the length-1 samples.
TrainResult train_ahine(const HinGraph& g, const TrainConfig& cfg, std::span<const ChainSample> samples);

// Continues train_ahine from `checkpoint` (a phase{P}/epoch_{N} directory).
TrainResult resume_ahine(const HinGraph& g, const TrainConfig& cfg, std::span<const ChainSample> samples,
                         const std::string& checkpoint);

struct CheckpointMeta {
  int phase = 1;
  std::size_t epoch = 0;
  std::vector<double> losses;  // epoch losses of the phase so far
  std::vector<double> phase1_losses;
};

void save_checkpoint(const Model& model, const CheckpointMeta& meta, const std::string& dir);
Model load_checkpoint(const TrainConfig& cfg, std::size_t num_nodes, std::size_t num_relations,
                      const std::string& dir, CheckpointMeta& meta);
std::string checkpoint_path(const std::string& root, int phase, std::size_t epoch);

}  // namespace hine
