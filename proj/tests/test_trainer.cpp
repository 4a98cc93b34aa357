#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "hine/error.hpp"
#include "hine/trainer.hpp"
#include "support/fixtures.hpp"

using namespace hine;
using hine::testing::planted_blocks;
using hine::testing::TempDir;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.dim = 8;
  c.hidden = 16;
  c.max_iterations = 5;
  c.pretrain_epochs = 3;
  c.convergence_tol = 0.0;
  return c;
}

std::vector<ChainSample> walk_corpus(const HinGraph& g, std::size_t max_chain, std::uint64_t seed,
                                     std::size_t walks = 3, std::size_t length = 6) {
  SamplerConfig sc;
  sc.walks_per_node = walks;
  sc.max_walk_length = length;
  sc.max_chain_length = max_chain;
  sc.seed = seed;
  std::vector<ChainSample> out;
  for (const auto& w : random_walks(g, sc)) append_chain_samples(w, max_chain, out);
  return out;
}

// Fixed-negative mean loss, independent of training randomness.
double mean_loss(const Model& m, std::span<const ChainSample> samples, std::uint64_t seed, std::size_t neg = 5) {
  auto ns = NegativeSampler::uniform(m.embeddings().rows());
  auto rng = make_rng(seed, {0x6576616c});
  std::vector<NodeId> negs;
  double total = 0.0;
  for (const auto& s : samples) {
    draw_negatives(ns, rng, neg, s.last, nullptr, negs);
    total += neg_sampling_loss(m, s, negs).loss;
  }
  return total / static_cast<double>(samples.size());
}

}  // namespace

TEST_CASE("batches are signature-homogeneous and cover the corpus once") {
  std::vector<ChainSample> s;
  for (int i = 0; i < 5; ++i) s.push_back({0, {0}, 1});
  for (int i = 0; i < 3; ++i) s.push_back({0, {1, 0}, 1});
  auto batches = make_batches(s, 2, 7);
  CHECK(batches.size() == 3 + 2);
  std::multiset<std::size_t> seen;
  for (const auto& b : batches) {
    CHECK(b.samples.size() >= 1);
    CHECK(b.samples.size() <= 2);
    for (auto i : b.samples) {
      CHECK(s[i].relations == b.signature);
      seen.insert(i);
    }
  }
  CHECK(seen == std::multiset<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7});

  auto again = make_batches(s, 2, 7);
  REQUIRE(again.size() == batches.size());
  for (std::size_t i = 0; i < again.size(); ++i) CHECK(again[i].samples == batches[i].samples);
  CHECK(make_batches(s, 100, 1).size() == 2);
  CHECK(make_batches({}, 4, 1).empty());
  CHECK_THROWS_AS(make_batches(s, 0, 1), ConfigError);
}

TEST_CASE("convergence check") {
  CHECK_FALSE(convergence_check(std::vector<double>{}, 1e-4));
  CHECK_FALSE(convergence_check(std::vector<double>{1.0}, 1e-4));
  CHECK(convergence_check(std::vector<double>{1.0, 0.99995}, 1e-4));
  CHECK_FALSE(convergence_check(std::vector<double>{1.0, 0.9}, 1e-4));
  CHECK_FALSE(convergence_check(std::vector<double>{2.0, 1.0, 0.9}, 1e-4));
  CHECK(convergence_check(std::vector<double>{0.5, 0.5}, 0.0));
  CHECK(convergence_check(std::vector<double>{0.0, 0.0}, 1e-4));
  CHECK_FALSE(convergence_check(std::vector<double>{0.0, 1e-9}, 1e-4));
  CHECK_FALSE(convergence_check(std::vector<double>{1.0, 0.99995}, 0.0));
}

TEST_CASE("one epoch equals summed gradients at batch-start parameters") {
  HinGraph::Builder b;
  b.add_edge("a", "r", "b");
  b.add_edge("b", "r", "c");
  b.add_edge("c", "s", "a");
  auto g = std::move(b).build();
  std::vector<ChainSample> corpus{{0, {0}, 1}, {1, {0}, 2}, {2, {1}, 0}};
  TrainConfig cfg = small_config();
  cfg.batch_size = 8;
  cfg.neg = 2;
  auto model = Model::initialized(3, 2, cfg.architecture(), 4);
  auto manual = model;

  ChainRegistry reg(model, 1);
  auto batches = make_batches(corpus, cfg.batch_size, 11);
  auto ns = NegativeSampler::unigram(corpus, 3);
  EpochInputs in{corpus, &batches, &ns, nullptr, &cfg, 1, 0};
  double loss = train_epoch(model, reg, in);

  double total = 0.0;
  for (std::size_t bi = 0; bi < batches.size(); ++bi) {
    auto rng = make_rng(cfg.seed, {0x6e6567ULL, 1, 0, bi});
    Gradients grads(manual);
    std::vector<NodeId> negs;
    for (auto idx : batches[bi].samples) {
      draw_negatives(ns, rng, cfg.neg, corpus[idx].last, nullptr, negs);
      auto r = neg_sampling_loss(manual, corpus[idx], negs);
      total += r.loss;
      backward(manual, r, corpus[idx], negs, grads);
    }
    sgd_step(manual, grads, cfg.eta_embed, cfg.eta_dnn);
  }
  CHECK(model.same_parameters(manual));
  CHECK(loss == doctest::Approx(total / 3).epsilon(1e-14));
}

TEST_CASE("GHINE: loss decreases, zero epochs keeps the initialization, runs are reproducible") {
  auto p = planted_blocks(3);
  auto cfg = small_config();
  auto r = train_ghine(p.graph, cfg);
  auto losses = r.report.losses(1);
  REQUIRE(losses.size() == 5);
  for (std::size_t i = 1; i < losses.size(); ++i) CHECK(losses[i] < losses[i - 1]);
  CHECK(r.report.stop == StopReason::kMaxIterations);
  CHECK(r.report.losses(2).empty());
  for (std::size_t i = 0; i < r.report.epochs.size(); ++i) CHECK(r.report.epochs[i].epoch == i + 1);

  auto again = train_ghine(p.graph, cfg);
  CHECK(again.model.same_parameters(r.model));
  CHECK(again.report.losses(1) == losses);
  auto other = cfg;
  other.seed = 2;
  CHECK_FALSE(train_ghine(p.graph, other).model.same_parameters(r.model));

  auto zero = cfg;
  zero.max_iterations = 0;
  auto z = train_ghine(p.graph, zero);
  CHECK(z.report.epochs.empty());
  CHECK(z.model.same_parameters(
      Model::initialized(p.graph.num_nodes(), p.graph.num_edge_types(), cfg.architecture(), cfg.seed)));
}

TEST_CASE("GHINE stops on convergence") {
  auto p = planted_blocks(4);
  auto cfg = small_config();
  cfg.max_iterations = 200;
  cfg.convergence_tol = 0.05;
  auto r = train_ghine(p.graph, cfg);
  CHECK(r.report.stop == StopReason::kConverged);
  auto l = r.report.losses(1);
  CHECK(l.size() < 200);
  CHECK(convergence_check(l, cfg.convergence_tol));
  for (std::size_t t = 2; t < l.size(); ++t)
    CHECK_FALSE(convergence_check(std::span<const double>(l).first(t), cfg.convergence_tol));
}

TEST_CASE("AHINE with chain length 1 is GHINE") {
  auto p = planted_blocks(5);
  auto cfg = small_config();
  cfg.max_chain = 1;
  auto triples = sample_edge_triples(p.graph, p.graph.num_edges(), 9);
  auto a = train_ahine(p.graph, cfg, triples);
  auto g = train_ghine(p.graph, cfg, triples);
  CHECK(a.model.same_parameters(g.model));
  CHECK(a.report.losses(1) == g.report.losses(1));
  CHECK(a.report.losses(2).empty());
  std::vector<ChainSample> longer{{0, {0, 0}, 1}};
  CHECK_THROWS_AS(train_ahine(p.graph, cfg, longer), ConfigError);
}

TEST_CASE("AHINE two-phase schedule") {
  auto p = planted_blocks(6, 20);
  auto cfg = small_config();
  cfg.max_chain = 2;
  auto corpus = walk_corpus(p.graph, 2, 1);
  auto r = train_ahine(p.graph, cfg, corpus);
  CHECK(r.report.losses(1).size() == 3);
  CHECK(r.report.losses(2).size() == 5);

  auto nopre = cfg;
  nopre.pretrain_epochs = 0;
  auto n = train_ahine(p.graph, nopre, corpus);
  CHECK(n.report.losses(1).empty());
  CHECK(n.report.losses(2).size() == 5);

  // No length-1 samples: pretraining falls back to graph edge triples.
  std::vector<ChainSample> chains_only;
  for (const auto& s : corpus)
    if (s.length() == 2) chains_only.push_back(s);
  auto c = train_ahine(p.graph, cfg, chains_only);
  CHECK(c.report.losses(1).size() == 3);

  auto drop = cfg;
  drop.keep_single_edges = false;
  auto d = train_ahine(p.graph, drop, corpus);
  CHECK(d.report.losses(1) == r.report.losses(1));
  CHECK(d.report.losses(2) != r.report.losses(2));

  auto bad = cfg;
  bad.max_chain = 3;
  std::vector<ChainSample> too_long{{0, {0, 0, 0, 0}, 1}};
  CHECK_THROWS_AS(train_ahine(p.graph, bad, too_long), ConfigError);
  std::vector<ChainSample> outside{{999, {0}, 1}};
  CHECK_THROWS_AS(train_ahine(p.graph, bad, outside), LookupError);
}

TEST_CASE("composed relations: chain training sharpens the block margin of [e1, e2]") {
  // Both relations cross between blocks, so the two-step relation returns to
  // the source block.
  auto build = [](std::uint64_t seed) {
    HinGraph::Builder b;
    const std::size_t per = 30;
    for (std::size_t v = 0; v < 2 * per; ++v) b.add_node("v" + std::to_string(v));
    auto e1 = b.add_edge_type("e1");
    auto e2 = b.add_edge_type("e2");
    auto rng = make_rng(seed, {0x636f6d70});
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < 2 * per; ++i)
      for (std::size_t j = 0; j < 2 * per; ++j) {
        if ((i < per) == (j < per)) continue;
        double r = u(rng);
        if (r < 0.08) b.add_edge(static_cast<NodeId>(i), e1, static_cast<NodeId>(j));
        else if (r < 0.16) b.add_edge(static_cast<NodeId>(i), e2, static_cast<NodeId>(j));
      }
    return std::move(b).build();
  };
  auto margin = [](const Model& m, std::size_t n) {
    double same = 0, other = 0;
    std::size_t ns = 0, no = 0;
    for (NodeId i = 0; i < n; ++i)
      for (NodeId j = 0; j < n; ++j) {
        if (i == j) continue;
        double s = score(m, {0, 1}, i, j);
        if ((i < n / 2) == (j < n / 2)) same += s, ++ns;
        else other += s, ++no;
      }
    return same / static_cast<double>(ns) - other / static_cast<double>(no);
  };
  double total_gap = 0.0;
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto g = build(seed);
    auto corpus = walk_corpus(g, 2, seed, 5, 8);
    auto cfg = small_config();
    cfg.seed = seed;
    cfg.max_chain = 2;
    cfg.pretrain_epochs = 10;
    cfg.max_iterations = 10;
    auto ahine = train_ahine(g, cfg, corpus);
    auto ghine_cfg = cfg;
    ghine_cfg.max_iterations = 20;
    auto ghine = train_ghine(g, ghine_cfg);
    double ma = margin(ahine.model, g.num_nodes());
    double mg = margin(ghine.model, g.num_nodes());
    CHECK(ma > 0);
    total_gap += ma - mg;
    wins += ma > mg;
  }
  CHECK(wins >= 4);
  CHECK(total_gap > 0);
}

TEST_CASE("held-out edges score better after training") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto p = planted_blocks(seed + 10);
    auto all = all_edge_triples(p.graph);
    auto rng = make_rng(seed, {0x686f6c64});
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<ChainSample> train(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(all.size() * 4 / 5));
    std::vector<ChainSample> test(all.begin() + static_cast<std::ptrdiff_t>(train.size()), all.end());
    auto cfg = small_config();
    cfg.seed = seed;
    cfg.max_iterations = 10;
    auto r = train_ghine(p.graph, cfg, train);
    auto init = Model::initialized(p.graph.num_nodes(), p.graph.num_edge_types(), cfg.architecture(), seed);
    CHECK(mean_loss(r.model, test, seed) <= mean_loss(init, test, seed));
  }
}

TEST_CASE("resuming from a checkpoint reproduces the uninterrupted run") {
  TempDir tmp("resume");
  auto p = planted_blocks(8, 20);
  auto cfg = small_config();
  cfg.max_chain = 2;
  cfg.pretrain_epochs = 3;
  cfg.max_iterations = 4;
  cfg.checkpoint_every = 2;
  cfg.checkpoint_dir = tmp.file("run");
  auto corpus = walk_corpus(p.graph, 2, 2);
  auto full = train_ahine(p.graph, cfg, corpus);

  CHECK(std::filesystem::exists(checkpoint_path(cfg.checkpoint_dir, 1, 2) + "/meta"));
  CHECK(std::filesystem::exists(checkpoint_path(cfg.checkpoint_dir, 2, 2) + "/transforms.bin"));
  CHECK(std::filesystem::exists(checkpoint_path(cfg.checkpoint_dir, 2, 4) + "/embeddings.bin"));
  CHECK_FALSE(std::filesystem::exists(checkpoint_path(cfg.checkpoint_dir, 1, 3)));
  auto meta_text = hine::testing::read_text(checkpoint_path(cfg.checkpoint_dir, 2, 2) + "/meta");
  CHECK(meta_text.find("format = 1") != std::string::npos);
  CHECK(meta_text.find("phase = 2") != std::string::npos);

  auto resume_cfg = cfg;
  resume_cfg.checkpoint_dir = tmp.file("again");
  for (auto [phase, epoch] : {std::pair{1, 2}, std::pair{2, 2}}) {
    auto r = resume_ahine(p.graph, resume_cfg, corpus, checkpoint_path(cfg.checkpoint_dir, phase, epoch));
    CHECK(r.model.same_parameters(full.model));
    CHECK(r.report.losses(2).size() == (phase == 2 ? 2u : 4u));
  }

  CheckpointMeta meta;
  auto m = load_checkpoint(cfg, p.graph.num_nodes(), p.graph.num_edge_types(),
                           checkpoint_path(cfg.checkpoint_dir, 2, 4), meta);
  CHECK(m.same_parameters(full.model));
  CHECK(meta.losses == full.report.losses(2));
  CHECK(meta.phase1_losses == full.report.losses(1));

  auto wrong = cfg;
  wrong.hidden = 17;
  CHECK_THROWS_AS(resume_ahine(p.graph, wrong, corpus, checkpoint_path(cfg.checkpoint_dir, 2, 2)), DataError);
  CHECK_THROWS_AS(resume_ahine(p.graph, cfg, corpus, tmp.file("missing")), DataError);
  auto ghine = cfg;
  ghine.max_chain = 1;
  std::vector<ChainSample> singles;
  for (const auto& s : corpus)
    if (s.length() == 1) singles.push_back(s);
  CHECK_THROWS_AS(resume_ahine(p.graph, ghine, singles, checkpoint_path(cfg.checkpoint_dir, 2, 2)), ConfigError);
}

TEST_CASE("GHINE resume") {
  TempDir tmp("ghine_resume");
  auto p = planted_blocks(9, 20);
  auto cfg = small_config();
  cfg.max_chain = 1;
  cfg.checkpoint_every = 2;
  cfg.checkpoint_dir = tmp.file("run");
  auto triples = sample_edge_triples(p.graph, p.graph.num_edges(), 3);
  auto full = train_ghine(p.graph, cfg, triples);
  auto r = resume_ahine(p.graph, cfg, triples, checkpoint_path(cfg.checkpoint_dir, 1, 2));
  CHECK(r.model.same_parameters(full.model));
  CHECK(r.report.losses(1).size() == 3);
}

TEST_CASE("a diverging run aborts and keeps the last finite parameters") {
  TempDir tmp("abort");
  auto p = planted_blocks(2, 20);
  auto cfg = small_config();
  cfg.eta_embed = 1e300;
  cfg.eta_dnn = 1e300;
  cfg.checkpoint_dir = tmp.file("run");
  auto r = train_ghine(p.graph, cfg);
  CHECK(r.report.stop == StopReason::kNumericalAbort);
  CHECK(r.report.message.find("non-finite") != std::string::npos);
  for (double v : r.model.embeddings().data()) CHECK(std::isfinite(v));
  CHECK(r.report.epochs.empty());
  CHECK(r.model.same_parameters(
      Model::initialized(p.graph.num_nodes(), p.graph.num_edge_types(), cfg.architecture(), cfg.seed)));
  CheckpointMeta meta;
  auto saved = load_checkpoint(cfg, p.graph.num_nodes(), p.graph.num_edge_types(), cfg.checkpoint_dir + "/last_good",
                               meta);
  CHECK(saved.same_parameters(r.model));
  CHECK(meta.epoch == 0);
  CHECK(to_string(r.report.stop) == "numerical_abort");
}

TEST_CASE("lock-free multi-threaded epochs") {
  auto p = planted_blocks(12);
  auto cfg = small_config();
  cfg.threads = 2;
  auto r = train_ghine(p.graph, cfg);
  auto l = r.report.losses(1);
  REQUIRE(l.size() == 5);
  CHECK(l.back() < l.front());
  for (double v : r.model.embeddings().data()) CHECK(std::isfinite(v));

  auto div = cfg;
  div.eta_embed = div.eta_dnn = 1e300;
  CHECK(train_ghine(p.graph, div).report.stop == StopReason::kNumericalAbort);
}

TEST_CASE("config keys, files and validation") {
  TrainConfig cfg;
  set_config_value(cfg, "batch_size", "64");
  set_config_value(cfg, "eta_embed", "0.1");
  set_config_value(cfg, "typed_negatives", "true");
  CHECK(cfg.batch_size == 64);
  CHECK(cfg.eta_embed == 0.1);
  CHECK(cfg.typed_negatives);
  CHECK_THROWS_AS(set_config_value(cfg, "batchsize", "1"), ConfigError);
  CHECK_THROWS_AS(set_config_value(cfg, "neg", "-3"), ConfigError);
  CHECK_THROWS_AS(set_config_value(cfg, "neg", "two"), ConfigError);
  CHECK_THROWS_AS(set_config_value(cfg, "keep_single_edges", "maybe"), ConfigError);

  std::set<std::string> names;
  for (const auto& k : train_config_keys()) names.insert(k.name);
  for (auto n : {"batch_size", "eta_embed", "eta_dnn", "neg", "max_chain", "max_iterations", "convergence_tol", "seed",
                 "dim", "hidden", "pretrain_epochs", "threads", "checkpoint_every", "checkpoint_dir"})
    CHECK(names.count(n) == 1);

  TempDir tmp("cfg");
  hine::testing::write_text(tmp.file("c.conf"), "# comment\n\nneg = 7\n  dim=12  \nmax_chain = 2\n");
  TrainConfig from_file;
  apply_config_file(from_file, tmp.file("c.conf"));
  CHECK(from_file.neg == 7);
  CHECK(from_file.dim == 12);
  CHECK(from_file.max_chain == 2);
  CHECK(from_file.hidden == TrainConfig{}.hidden);

  hine::testing::write_text(tmp.file("round.conf"), format_config(cfg));
  TrainConfig round;
  apply_config_file(round, tmp.file("round.conf"));
  CHECK(format_config(round) == format_config(cfg));

  hine::testing::write_text(tmp.file("bad.conf"), "neg = 2\nwhat = 3\n");
  try {
    apply_config_file(from_file, tmp.file("bad.conf"));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  hine::testing::write_text(tmp.file("noeq.conf"), "neg 2\n");
  CHECK_THROWS_AS(apply_config_file(from_file, tmp.file("noeq.conf")), ParseError);
  CHECK_THROWS_AS(apply_config_file(from_file, tmp.file("absent.conf")), DataError);

  auto check_invalid = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };
  check_invalid([](TrainConfig& c) { c.batch_size = 0; });
  check_invalid([](TrainConfig& c) { c.eta_dnn = 0; });
  check_invalid([](TrainConfig& c) { c.neg = 0; });
  check_invalid([](TrainConfig& c) { c.max_chain = 0; });
  check_invalid([](TrainConfig& c) { c.dim = 0; });
  check_invalid([](TrainConfig& c) { c.threads = 0; });
  check_invalid([](TrainConfig& c) { c.checkpoint_every = 3; });
  TrainConfig{}.validate();
}
