#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "hine/error.hpp"
#include "hine/trainer.hpp"
#include "text_util.hpp"

namespace hine {

namespace {

std::size_t parse_count(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("bad value '" + v + "' for '" + key + "': expected a non-negative integer");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("bad value '" + v + "' for '" + key + "': expected a non-negative integer");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  char* end = nullptr;
  double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size())
    throw ConfigError("bad value '" + v + "' for '" + key + "': expected a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("bad value '" + v + "' for '" + key + "': expected true or false");
}

std::string real_str(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <typename T>
ConfigKey count_key(std::string name, std::string help, T TrainConfig::*field) {
  auto n = name;
  return {std::move(name), std::move(help),
          [n, field](TrainConfig& c, const std::string& v) { c.*field = static_cast<T>(parse_count(n, v)); },
          [field](const TrainConfig& c) { return std::to_string(c.*field); }};
}

ConfigKey real_key(std::string name, std::string help, double TrainConfig::*field) {
  auto n = name;
  return {std::move(name), std::move(help), [n, field](TrainConfig& c, const std::string& v) { c.*field = parse_real(n, v); },
          [field](const TrainConfig& c) { return real_str(c.*field); }};
}

ConfigKey bool_key(std::string name, std::string help, bool TrainConfig::*field) {
  auto n = name;
  return {std::move(name), std::move(help), [n, field](TrainConfig& c, const std::string& v) { c.*field = parse_bool(n, v); },
          [field](const TrainConfig& c) { return std::string(c.*field ? "true" : "false"); }};
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(eta_embed > 0) || !(eta_dnn > 0)) throw ConfigError("learning rates eta_embed and eta_dnn must be > 0");
  if (neg < 1) throw ConfigError("neg must be >= 1");
  if (max_chain < 1) throw ConfigError("max_chain must be >= 1");
  if (!(convergence_tol >= 0)) throw ConfigError("convergence_tol must be >= 0");
  if (dim < 1) throw ConfigError("dim must be >= 1");
  if (hidden_layers > 0 && hidden < 1) throw ConfigError("hidden must be >= 1");
  if (max_grad_norm < 0) throw ConfigError("max_grad_norm must be >= 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (checkpoint_every > 0 && checkpoint_dir.empty())
    throw ConfigError("checkpoint_every needs checkpoint_dir");
}

const std::vector<ConfigKey>& train_config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    k.push_back(count_key("batch_size", "mini-batch size b (samples sharing one relation chain)", &TrainConfig::batch_size));
    k.push_back(real_key("eta_embed", "learning rate for node embeddings", &TrainConfig::eta_embed));
    k.push_back(real_key("eta_dnn", "learning rate for relation transforms", &TrainConfig::eta_dnn));
    k.push_back(count_key("neg", "negative samples per training sample", &TrainConfig::neg));
    k.push_back(count_key("max_chain", "max relation chain length c", &TrainConfig::max_chain));
    k.push_back(count_key("max_iterations", "epoch cap (chain-training phase for AHINE)", &TrainConfig::max_iterations));
    k.push_back(real_key("convergence_tol", "stop when relative epoch-loss change drops below this", &TrainConfig::convergence_tol));
    {
      ConfigKey seed{"seed", "random seed",
                     [](TrainConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); },
                     [](const TrainConfig& c) { return std::to_string(c.seed); }};
      k.push_back(std::move(seed));
    }
    k.push_back(count_key("dim", "embedding dimension d", &TrainConfig::dim));
    k.push_back(count_key("hidden", "hidden layer width h of each relation transform", &TrainConfig::hidden));
    k.push_back(count_key("hidden_layers", "hidden layers per relation transform", &TrainConfig::hidden_layers));
    k.push_back(count_key("pretrain_epochs", "GHINE pretraining epochs before chain training", &TrainConfig::pretrain_epochs));
    k.push_back(count_key("edge_samples", "edge triples drawn for GHINE (0 = one per edge)", &TrainConfig::edge_samples));
    k.push_back(bool_key("keep_single_edges", "keep length-1 samples in the chain-training phase", &TrainConfig::keep_single_edges));
    k.push_back(bool_key("uniform_negatives", "draw negatives uniformly instead of unigram^0.75", &TrainConfig::uniform_negatives));
    k.push_back(bool_key("typed_negatives", "restrict negatives to the node type of the target", &TrainConfig::typed_negatives));
    k.push_back(real_key("max_grad_norm", "clip the batch gradient norm (0 = off)", &TrainConfig::max_grad_norm));
    k.push_back(count_key("threads", "worker threads; >1 enables nondeterministic lock-free updates", &TrainConfig::threads));
    k.push_back(count_key("checkpoint_every", "checkpoint every N epochs (0 = off)", &TrainConfig::checkpoint_every));
    {
      ConfigKey dir{"checkpoint_dir", "checkpoint root directory",
                    [](TrainConfig& c, const std::string& v) { c.checkpoint_dir = v; },
                    [](const TrainConfig& c) { return c.checkpoint_dir; }};
      k.push_back(std::move(dir));
    }
    return k;
  }();
  return keys;
}

void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : train_config_keys())
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_file(TrainConfig& cfg, const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view row = detail::trim(line);
    if (row.empty() || row.front() == '#') continue;
    auto eq = row.find('=');
    if (eq == std::string_view::npos) throw ParseError(path, lineno, "expected `key = value`");
    std::string key(detail::trim(row.substr(0, eq)));
    std::string value(detail::trim(row.substr(eq + 1)));
    try {
      set_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ParseError(path, lineno, e.what());
    }
  }
}

std::string format_config(const TrainConfig& cfg) {
  std::ostringstream out;
  for (const auto& k : train_config_keys()) out << k.name << " = " << k.get(cfg) << '\n';
  return out.str();
}

}  // namespace hine
