#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hine/model.hpp"
#include "hine/model_io.hpp"

namespace hine {

// ---- labels -----------------------------------------------------------------

struct LabelSet {
  std::vector<std::string> nodes;
  std::vector<int> classes;  // class id per entry of `nodes`
  std::vector<std::string> class_names;

  std::size_t size() const noexcept { return nodes.size(); }
  std::size_t num_classes() const noexcept { return class_names.size(); }
};

// `node<TAB>class_name` lines; class ids in first-appearance order.
LabelSet read_labels(const std::string& path);

// Rows of `e` for the labeled nodes, in embedding-file order, with their
// class ids. Throws LookupError if a labeled node has no embedding.
struct LabeledRows {
  std::vector<std::size_t> rows;
  std::vector<int> classes;
  EmbeddingTable vectors;
};
LabeledRows select_labeled(const EmbeddingSet& e, const LabelSet& labels);

// ---- clustering -------------------------------------------------------------

struct KMeansConfig {
  std::size_t k = 8;
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct KMeansResult {
  std::vector<int> assignment;
  std::vector<double> centroids;  // k x dim
  double wcss = 0.0;
  std::vector<double> wcss_history;  // WCSS after each Lloyd iteration of the kept restart
  std::size_t iterations = 0;
};

// k-means++ seeding, Lloyd iterations, best restart by WCSS.
KMeansResult kmeans(const EmbeddingTable& x, const KMeansConfig& cfg);

// Nearest-centroid step (lowest index wins ties). Returns the number of changed
// labels. OpenMP over points when threads > 1.
std::size_t kmeans_assign(const EmbeddingTable& x, std::span<const double> centroids, std::size_t k,
                          std::vector<int>& assignment, int threads = 1);

double wcss(const EmbeddingTable& x, std::span<const double> centroids, std::span<const int> assignment);

// I(A;B) / sqrt(H(A) H(B)); 0 when either entropy is 0.
double nmi(std::span<const int> a, std::span<const int> b);

// ---- classification ---------------------------------------------------------

struct SoftmaxRegression {
  std::size_t classes = 0;
  std::size_t dim = 0;
  std::vector<double> weight;  // classes x (dim + 1); last column is the bias
  std::vector<double> mean;    // feature standardization fitted on train
  std::vector<double> scale;
};

struct ClassifierConfig {
  double l2 = 1e-4;
  double learning_rate = 0.5;
  std::size_t iterations = 500;
};

// Mean cross-entropy over rows plus (l2 / 2) ||W||^2 (bias excluded). Inputs
// are used as given. If `grad` is set it receives the gradient wrt weight.
double softmax_regression_loss(std::span<const double> weight, std::size_t classes, const EmbeddingTable& x,
                               std::span<const int> y, double l2, std::vector<double>* grad = nullptr);

SoftmaxRegression fit_softmax_regression(const EmbeddingTable& x, std::span<const int> y, std::size_t classes,
                                         const ClassifierConfig& cfg = {});
std::vector<int> predict(const SoftmaxRegression& model, const EmbeddingTable& x);

std::vector<int> classify(const EmbeddingTable& train_x, std::span<const int> train_y, std::size_t classes,
                          const EmbeddingTable& test_x, const ClassifierConfig& cfg = {});

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};
// Per class, round(train_fraction * n) shuffled members go to train.
Split stratified_split(std::span<const int> labels, double train_fraction, std::uint64_t seed);

EmbeddingTable gather_rows(const EmbeddingTable& x, std::span<const std::size_t> rows);

struct F1Scores {
  double macro = 0.0;
  double micro = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
};

// Classes are 0..num_classes-1; a class with no true or predicted members has F1 0.
F1Scores f1_scores(std::span<const int> predicted, std::span<const int> truth, std::size_t num_classes);

// ---- ranking ----------------------------------------------------------------

enum class Similarity { kCosine, kDot };
std::string to_string(Similarity s);
Similarity parse_similarity(const std::string& s);

double similarity(std::span<const double> a, std::span<const double> b, Similarity metric);

// `hits[i]` marks whether rank i+1 is a positive; R positives overall.
double average_precision_at_k(std::span<const char> hits, std::size_t k, std::size_t positives);

struct RankingResult {
  double map = 0.0;
  std::size_t queries = 0;   // queries contributing to the mean
  std::size_t excluded = 0;  // queries without positives
  std::vector<double> ap;    // per query row; NaN when excluded
};

// Each row of `x` queries against every other row; positives share its class.
// Ties rank by row index. OpenMP over queries when threads > 1.
RankingResult map_at_k(const EmbeddingTable& x, std::span<const int> classes, std::size_t k, Similarity metric,
                       int threads = 1);

struct Neighbor {
  std::size_t index = 0;
  std::string name;
  double score = 0.0;
};

std::vector<Neighbor> top_k_neighbors(const EmbeddingSet& e, std::size_t query, std::size_t k,
                                      Similarity metric = Similarity::kCosine);
// Throws LookupError listing the closest names when `query` is unknown.
std::vector<Neighbor> top_k_neighbors(const EmbeddingSet& e, const std::string& query, std::size_t k,
                                      Similarity metric = Similarity::kCosine);

// ---- reports ----------------------------------------------------------------

struct EvalReport {
  std::optional<double> nmi;
  std::optional<double> wcss;
  std::optional<double> macro_f1;
  std::optional<double> micro_f1;
  std::vector<std::string> class_names;
  std::vector<double> precision;
  std::vector<double> recall;
  std::size_t k = 0;
  std::optional<double> map_cosine;
  std::optional<double> map_dot;
  std::size_t ranking_queries = 0;
  std::size_t excluded_queries = 0;
};

// One `key = value` line per populated field; map_at_<k> is the cosine MAP.
std::string report_key_values(const EvalReport& r);
std::string report_table(const EvalReport& r);
void write_report(const EvalReport& r, const std::string& path);

void write_cluster_assignments(std::span<const std::string> names, std::span<const int> assignment,
                               const std::string& path);

}  // namespace hine
