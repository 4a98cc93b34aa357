#include "hine/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <ostream>

#include "hine/error.hpp"
#include "hine/eval.hpp"
#include "hine/graph.hpp"
#include "hine/model_io.hpp"
#include "hine/sampler.hpp"
#include "hine/trainer.hpp"

namespace hine::cli {

namespace {

struct Options {
  // inputs and outputs
  std::string graph;
  std::string node_types;
  std::string samples;
  std::string config;
  std::string out;
  std::string format;
  std::string transforms;
  std::string resume;
  std::string trajectories;
  std::string graph_out;
  std::string embeddings;
  std::string labels;
  std::string report;
  std::string assignments;
  std::string query;

  // sampling
  std::string mode = "walks";
  std::string metapath;
  std::string metapath_types;
  std::size_t walks_per_node = SamplerConfig{}.walks_per_node;
  std::size_t max_walk_length = SamplerConfig{}.max_walk_length;
  std::size_t max_chain = SamplerConfig{}.max_chain_length;
  std::size_t min_count = SamplerConfig{}.min_count;
  std::size_t count = 0;

  // training
  std::string method = "ahine";
  std::map<std::string, std::string> train_keys;

  // evaluation
  std::size_t k = 0;
  std::size_t restarts = KMeansConfig{}.restarts;
  double train_fraction = 0.8;
  double l2 = ClassifierConfig{}.l2;
  std::size_t iterations = ClassifierConfig{}.iterations;
  std::string metric = "cosine";

  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

void add_seed(CLI::App* sub, Options& o) { sub->add_option("--seed", o.seed, "random seed")->capture_default_str(); }

void add_threads(CLI::App* sub, Options& o) {
  sub->add_option("--threads", o.threads, "worker threads (1 = deterministic)")->capture_default_str();
}

void add_graph(CLI::App* sub, Options& o, bool required) {
  auto* g = sub->add_option("--graph", o.graph, "edge file: src<TAB>edge_type<TAB>dst");
  if (required) g->required();
  sub->add_option("--node_types", o.node_types, "node type file: node<TAB>type");
}

void add_walk_flags(CLI::App* sub, Options& o) {
  sub->add_option("--walks_per_node", o.walks_per_node, "random walks started at each node")->capture_default_str();
  sub->add_option("--max_walk_length", o.max_walk_length, "max nodes per walk")->capture_default_str();
  sub->add_option("--min_count", o.min_count, "drop samples whose endpoints occur fewer times")->capture_default_str();
}

std::unique_ptr<CLI::App> build_app(Options& o) {
  auto app = std::make_unique<CLI::App>("Heterogeneous information network embedding toolkit", "hine");
  app->require_subcommand(1);
  app->fallthrough(false);

  auto* sample = app->add_subcommand("sample", "generate training samples (walk chains, edges, meta paths, trajectories)");
  add_graph(sample, o, false);
  sample->add_option("--out", o.out, "sample file: first<TAB>e1,e2,...<TAB>last")->required();
  sample->add_option("--mode", o.mode, "walks | edges | metapath | trajectory")
      ->check(CLI::IsMember({"walks", "edges", "metapath", "trajectory"}))
      ->capture_default_str();
  add_walk_flags(sample, o);
  sample->add_option("--max_chain", o.max_chain, "max relation chain length c")->capture_default_str();
  sample->add_option("--count", o.count, "draws for edges/metapath modes (0 = automatic)")->capture_default_str();
  sample->add_option("--metapath", o.metapath, "comma-separated edge types of the meta path");
  sample->add_option("--metapath_types", o.metapath_types, "comma-separated node types along the meta path");
  sample->add_option("--trajectories", o.trajectories, "ride orders: actor<TAB>timestamp<TAB>src<TAB>dst");
  sample->add_option("--graph_out", o.graph_out, "trajectory mode: also write the time-typed order graph here");
  add_seed(sample, o);

  auto* train = app->add_subcommand("train", "learn node embeddings");
  add_graph(train, o, true);
  train->add_option("--samples", o.samples, "sample file from `hine sample` (default: generate walk chains)");
  train->add_option("--config", o.config, "config file of `key = value` lines; flags override it");
  train->add_option("--method", o.method, "ghine | ahine")->check(CLI::IsMember({"ghine", "ahine"}))->capture_default_str();
  train->add_option("--out", o.out, "embedding output file")->required();
  train->add_option("--format", o.format, "text | binary (default: binary for .bin, else text)")
      ->check(CLI::IsMember({"text", "binary"}));
  train->add_option("--transforms", o.transforms, "also write the relation transforms here");
  train->add_option("--resume", o.resume, "continue from a checkpoint directory phase{P}/epoch_{N}");
  add_walk_flags(train, o);
  for (const auto& key : train_config_keys()) {
    TrainConfig defaults;
    train->add_option("--" + key.name, o.train_keys[key.name], key.help)->default_str(key.get(defaults));
  }

  auto add_embeddings = [&](CLI::App* sub) {
    sub->add_option("--embeddings", o.embeddings, "embedding file (.bin = binary, else text)")->required();
  };
  auto add_report = [&](CLI::App* sub) {
    sub->add_option("--report", o.report, "write the key = value report here");
  };

  auto* cluster = app->add_subcommand("eval-cluster", "k-means clustering, NMI against labels");
  add_embeddings(cluster);
  cluster->add_option("--labels", o.labels, "label file: node<TAB>class_name");
  cluster->add_option("--k", o.k, "clusters (default: number of label classes)");
  cluster->add_option("--restarts", o.restarts, "k-means restarts")->capture_default_str();
  cluster->add_option("--assignments", o.assignments, "write node<TAB>cluster_id here");
  add_report(cluster);
  add_seed(cluster, o);
  add_threads(cluster, o);

  auto* classify = app->add_subcommand("eval-classify", "softmax-regression node classification, Micro/Macro-F1");
  add_embeddings(classify);
  classify->add_option("--labels", o.labels, "label file: node<TAB>class_name")->required();
  classify->add_option("--train_fraction", o.train_fraction, "stratified training share")->capture_default_str();
  classify->add_option("--l2", o.l2, "L2 penalty")->capture_default_str();
  classify->add_option("--iterations", o.iterations, "gradient descent iterations")->capture_default_str();
  add_report(classify);
  add_seed(classify, o);

  auto* rank = app->add_subcommand("eval-rank", "MAP@K similarity ranking over labeled nodes");
  add_embeddings(rank);
  rank->add_option("--labels", o.labels, "label file: node<TAB>class_name")->required();
  rank->add_option("--k", o.k, "rank cutoff K (default 100)");
  add_report(rank);
  add_threads(rank, o);

  auto* nn = app->add_subcommand("nn", "top-k nearest neighbors of a node");
  add_embeddings(nn);
  nn->add_option("--query", o.query, "node name")->required();
  nn->add_option("--k", o.k, "neighbors to list (default 10)");
  nn->add_option("--metric", o.metric, "cosine | dot")->check(CLI::IsMember({"cosine", "dot"}))->capture_default_str();

  auto* exp = app->add_subcommand("export", "convert embeddings between text and binary");
  add_embeddings(exp);
  exp->add_option("--out", o.out, "output file")->required();
  exp->add_option("--format", o.format, "text | binary (default: binary for .bin, else text)")
      ->check(CLI::IsMember({"text", "binary"}));

  auto* info = app->add_subcommand("info", "graph statistics");
  add_graph(info, o, true);

  return app;
}

// Relative inputs that do not exist are looked up under $HINE_DATA_DIR.
std::string input_path(const std::string& p) {
  if (p.empty()) return p;
  std::filesystem::path path(p);
  if (path.is_absolute() || std::filesystem::exists(path)) return p;
  if (const char* dir = std::getenv("HINE_DATA_DIR"); dir && *dir) {
    auto alt = std::filesystem::path(dir) / path;
    if (std::filesystem::exists(alt)) return alt.string();
  }
  return p;
}

std::optional<std::string> optional_input(const std::string& p) {
  if (p.empty()) return std::nullopt;
  return input_path(p);
}

HinGraph load(const Options& o) { return load_graph(input_path(o.graph), optional_input(o.node_types)); }

bool binary_output(const std::string& format, const std::string& path) {
  if (!format.empty()) return format == "binary";
  return std::filesystem::path(path).extension() == ".bin";
}

void write_embeddings(const EmbeddingSet& e, const std::string& format, const std::string& path) {
  if (binary_output(format, path))
    write_embeddings_binary(e, path);
  else
    write_embeddings_text(e, path);
}

SamplerConfig sampler_config(const Options& o, std::size_t max_chain, std::uint64_t seed) {
  SamplerConfig s;
  s.walks_per_node = o.walks_per_node;
  s.max_walk_length = o.max_walk_length;
  s.max_chain_length = max_chain;
  s.min_count = o.min_count;
  s.seed = seed;
  s.validate();
  return s;
}

std::vector<ChainSample> walk_chain_samples(const HinGraph& g, const SamplerConfig& s) {
  std::vector<ChainSample> out;
  for_each_random_walk(g, s, [&](const TypedWalk& w) { append_chain_samples(w, s.max_chain_length, out); });
  return apply_min_count(out, s.min_count);
}

void print_report(const EvalReport& r, const Options& o, std::ostream& out) {
  out << report_table(r) << '\n' << report_key_values(r);
  if (!o.report.empty()) write_report(r, o.report);
}

int cmd_sample(const Options& o, std::ostream& out) {
  auto cfg = sampler_config(o, o.max_chain, o.seed);
  std::vector<ChainSample> samples;
  if (o.mode == "trajectory") {
    if (o.trajectories.empty()) throw ConfigError("--mode trajectory needs --trajectories");
    auto data = load_trajectories(input_path(o.trajectories));
    TimeBucketRule rule;
    TrajectoryStats stats;
    auto walks = trajectory_to_walks(data.orders, rule, &stats);
    auto g = build_order_graph(data, rule);
    for (const auto& w : walks) append_chain_samples(w, cfg.max_chain_length, samples);
    samples = apply_min_count(samples, cfg.min_count);
    write_samples(g, samples, o.out);
    if (!o.graph_out.empty()) write_edge_file(g, o.graph_out);
    out << "orders " << stats.orders << ", skipped timestamps " << stats.skipped_timestamps << ", malformed rows "
        << data.malformed_rows << ", walks " << stats.walks << '\n';
  } else {
    if (o.graph.empty()) throw ConfigError("--mode " + o.mode + " needs --graph");
    auto g = load(o);
    if (o.mode == "walks") {
      samples = walk_chain_samples(g, cfg);
    } else if (o.mode == "edges") {
      samples = sample_edge_triples(g, o.count ? o.count : g.num_edges(), o.seed);
    } else {
      if (o.metapath.empty()) throw ConfigError("--mode metapath needs --metapath");
      auto pattern = parse_metapath(g, o.metapath, o.metapath_types);
      validate_metapath(g, pattern);
      std::size_t n = o.count ? o.count : g.num_nodes() * o.walks_per_node;
      samples = metapath_instances(g, pattern, n, o.seed, o.max_chain);
    }
    write_samples(g, samples, o.out);
  }
  out << "wrote " << samples.size() << " samples to " << o.out << '\n';
  return kExitOk;
}

int cmd_train(const Options& o, CLI::App* sub, std::ostream& out, std::ostream& err) {
  TrainConfig cfg;
  if (!o.config.empty()) apply_config_file(cfg, input_path(o.config));
  for (const auto& key : train_config_keys())
    if (sub->get_option("--" + key.name)->count() > 0) {
      try {
        set_config_value(cfg, key.name, o.train_keys.at(key.name));
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("--") + key.name + ": " + e.what());
      }
    }
  cfg.validate();
  if (cfg.threads > 1)
    err << "warning: --threads " << cfg.threads
        << " runs lock-free concurrent updates; results are not reproducible\n";

  auto g = load(o);
  std::vector<ChainSample> samples;
  bool have_samples = !o.samples.empty();
  if (have_samples) {
    samples = read_samples(g, input_path(o.samples));
  } else if (o.method == "ahine") {
    samples = walk_chain_samples(g, sampler_config(o, cfg.max_chain, cfg.seed));
  }

  TrainResult result;
  if (!o.resume.empty()) {
    if (o.method == "ghine") cfg.max_chain = 1;
    if (!have_samples && o.method == "ghine")
      samples = sample_edge_triples(g, cfg.edge_samples ? cfg.edge_samples : g.num_edges(), cfg.seed);
    result = resume_ahine(g, cfg, samples, input_path(o.resume));
  } else if (o.method == "ghine") {
    result = have_samples ? train_ghine(g, cfg, samples) : train_ghine(g, cfg);
  } else {
    result = train_ahine(g, cfg, samples);
  }

  char line[160];
  for (const auto& e : result.report.epochs) {
    std::snprintf(line, sizeof line, "phase %d epoch %zu loss %.6f (%.3f s, %.0f samples/s)\n", e.phase, e.epoch,
                  e.mean_loss, e.seconds, e.samples_per_sec);
    out << line;
  }
  write_embeddings(make_embedding_set(g, result.model.embeddings()), o.format, o.out);
  if (!o.transforms.empty()) write_transforms(result.model, o.transforms);
  if (result.report.stop == StopReason::kNumericalAbort) {
    err << "error: training aborted: " << result.report.message << "; wrote the last good parameters to " << o.out
        << '\n';
    return kExitNumerical;
  }
  out << "stop: " << to_string(result.report.stop) << '\n';
  return kExitOk;
}

int cmd_eval_cluster(const Options& o, std::ostream& out) {
  auto e = read_embeddings(input_path(o.embeddings));
  KMeansConfig kc;
  kc.restarts = o.restarts;
  kc.seed = o.seed;
  kc.threads = static_cast<int>(o.threads);
  EvalReport r;
  std::vector<std::string> names;
  KMeansResult km;
  if (!o.labels.empty()) {
    auto labels = read_labels(input_path(o.labels));
    auto rows = select_labeled(e, labels);
    if (labels.num_classes() < 2) throw DataError("'" + o.labels + "': NMI needs at least 2 classes");
    kc.k = o.k ? o.k : labels.num_classes();
    km = kmeans(rows.vectors, kc);
    r.nmi = nmi(km.assignment, rows.classes);
    for (auto row : rows.rows) names.push_back(e.names[row]);
  } else {
    if (o.k == 0) throw ConfigError("--k is required without --labels");
    kc.k = o.k;
    km = kmeans(e.vectors, kc);
    names = e.names;
  }
  r.wcss = km.wcss;
  if (!o.assignments.empty()) write_cluster_assignments(names, km.assignment, o.assignments);
  print_report(r, o, out);
  return kExitOk;
}

int cmd_eval_classify(const Options& o, std::ostream& out) {
  auto e = read_embeddings(input_path(o.embeddings));
  auto labels = read_labels(input_path(o.labels));
  if (labels.num_classes() < 2) throw DataError("'" + o.labels + "': classification needs at least 2 classes");
  auto rows = select_labeled(e, labels);
  auto split = stratified_split(rows.classes, o.train_fraction, o.seed);
  if (split.train.empty() || split.test.empty()) throw DataError("'" + o.labels + "': too few labels to split");
  std::vector<int> train_y, test_y;
  for (auto i : split.train) train_y.push_back(rows.classes[i]);
  for (auto i : split.test) test_y.push_back(rows.classes[i]);
  ClassifierConfig cc;
  cc.l2 = o.l2;
  cc.iterations = o.iterations;
  auto pred = classify(gather_rows(rows.vectors, split.train), train_y, labels.num_classes(),
                       gather_rows(rows.vectors, split.test), cc);
  auto f1 = f1_scores(pred, test_y, labels.num_classes());
  EvalReport r;
  r.macro_f1 = f1.macro;
  r.micro_f1 = f1.micro;
  r.class_names = labels.class_names;
  r.precision = f1.precision;
  r.recall = f1.recall;
  print_report(r, o, out);
  return kExitOk;
}

int cmd_eval_rank(const Options& o, std::ostream& out) {
  auto e = read_embeddings(input_path(o.embeddings));
  auto labels = read_labels(input_path(o.labels));
  auto rows = select_labeled(e, labels);
  EvalReport r;
  r.k = o.k ? o.k : 100;
  int threads = static_cast<int>(o.threads);
  auto cos = map_at_k(rows.vectors, rows.classes, r.k, Similarity::kCosine, threads);
  auto dot = map_at_k(rows.vectors, rows.classes, r.k, Similarity::kDot, threads);
  r.map_cosine = cos.map;
  r.map_dot = dot.map;
  r.ranking_queries = cos.queries;
  r.excluded_queries = cos.excluded;
  print_report(r, o, out);
  return kExitOk;
}

int cmd_nn(const Options& o, std::ostream& out) {
  auto e = read_embeddings(input_path(o.embeddings));
  auto list = top_k_neighbors(e, o.query, o.k ? o.k : 10, parse_similarity(o.metric));
  char buf[32];
  for (std::size_t i = 0; i < list.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f", list[i].score);
    out << i + 1 << '\t' << list[i].name << '\t' << buf << '\n';
  }
  return kExitOk;
}

int cmd_export(const Options& o, std::ostream& out) {
  auto e = read_embeddings(input_path(o.embeddings));
  write_embeddings(e, o.format, o.out);
  out << "wrote " << e.size() << " x " << e.dim() << (binary_output(o.format, o.out) ? " binary" : " text")
      << " embeddings to " << o.out << '\n';
  return kExitOk;
}

int cmd_info(const Options& o, std::ostream& out) {
  auto g = load(o);
  out << "nodes " << g.num_nodes() << '\n' << "edges " << g.num_edges() << '\n';
  std::vector<std::size_t> per_edge_type(g.num_edge_types(), 0), per_node_type(g.num_node_types(), 0);
  for (std::size_t i = 0; i < g.num_edges(); ++i) ++per_edge_type[g.edge_at(i).type];
  for (NodeId v = 0; v < g.num_nodes(); ++v) ++per_node_type[g.node_type(v)];
  out << "edge types " << g.num_edge_types() << '\n';
  for (std::size_t t = 0; t < per_edge_type.size(); ++t)
    out << "  " << g.edge_type_names().name(static_cast<std::uint32_t>(t)) << '\t' << per_edge_type[t] << '\n';
  out << "node types " << g.num_node_types() << '\n';
  for (std::size_t t = 0; t < per_node_type.size(); ++t)
    out << "  " << g.node_type_names().name(static_cast<std::uint32_t>(t)) << '\t' << per_node_type[t] << '\n';
  auto d = out_degree_summary(g);
  char buf[128];
  std::snprintf(buf, sizeof buf, "out-degree min %zu mean %.3f max %zu sinks %zu\n", d.min, d.mean, d.max, d.sinks);
  out << buf << "heterogeneous " << (validate_heterogeneous(g) ? "yes" : "no") << '\n';
  return kExitOk;
}

int dispatch(CLI::App& app, const Options& o, std::ostream& out, std::ostream& err) {
  if (app.got_subcommand("sample")) return cmd_sample(o, out);
  if (app.got_subcommand("train")) return cmd_train(o, app.get_subcommand("train"), out, err);
  if (app.got_subcommand("eval-cluster")) return cmd_eval_cluster(o, out);
  if (app.got_subcommand("eval-classify")) return cmd_eval_classify(o, out);
  if (app.got_subcommand("eval-rank")) return cmd_eval_rank(o, out);
  if (app.got_subcommand("nn")) return cmd_nn(o, out);
  if (app.got_subcommand("export")) return cmd_export(o, out);
  return cmd_info(o, out);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  auto app = build_app(o);
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app->parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app->exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app->exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    CLI::App* scope = app.get();
    for (auto* sub : app->get_subcommands()) scope = sub;
    err << scope->help();
    return kExitUsage;
  }
  try {
    return dispatch(*app, o, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

std::vector<std::string> subcommands() {
  Options o;
  auto app = build_app(o);
  std::vector<std::string> out;
  for (const auto* sub : app->get_subcommands({})) out.push_back(sub->get_name());
  return out;
}

std::vector<FlagDoc> flags(const std::string& subcommand) {
  Options o;
  auto app = build_app(o);
  CLI::App* scope = subcommand.empty() ? app.get() : app->get_subcommand(subcommand);
  std::vector<FlagDoc> out;
  for (const auto* opt : scope->get_options({})) {
    for (const auto& name : opt->get_lnames()) out.push_back({"--" + name, opt->get_description()});
  }
  return out;
}

std::string help_text(const std::string& subcommand) {
  Options o;
  auto app = build_app(o);
  if (subcommand.empty()) return app->help();
  return app->get_subcommand(subcommand)->help();
}

}  // namespace hine::cli
