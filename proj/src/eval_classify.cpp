#include <algorithm>
#include <cmath>
#include <map>

#include "hine/error.hpp"
#include "hine/eval.hpp"
#include "hine/rng.hpp"

namespace hine {

namespace {

void logits(std::span<const double> weight, std::size_t classes, std::span<const double> x, std::vector<double>& z) {
  const std::size_t cols = x.size() + 1;
  z.assign(classes, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    const double* w = weight.data() + c * cols;
    double s = w[x.size()];
    for (std::size_t j = 0; j < x.size(); ++j) s += w[j] * x[j];
    z[c] = s;
  }
}

EmbeddingTable standardized(const EmbeddingTable& x, std::span<const double> mean, std::span<const double> scale) {
  EmbeddingTable out(x.rows(), x.dim());
  for (std::size_t v = 0; v < x.rows(); ++v) {
    auto src = x.row(v);
    auto dst = out.row(v);
    for (std::size_t j = 0; j < x.dim(); ++j) dst[j] = (src[j] - mean[j]) / scale[j];
  }
  return out;
}

bool valid_class(int c, std::size_t classes) { return c >= 0 && static_cast<std::size_t>(c) < classes; }

}  // namespace

double softmax_regression_loss(std::span<const double> weight, std::size_t classes, const EmbeddingTable& x,
                               std::span<const int> y, double l2, std::vector<double>* grad) {
  const std::size_t d = x.dim(), cols = d + 1;
  if (weight.size() != classes * cols) throw ConfigError("softmax regression: weight shape mismatch");
  if (y.size() != x.rows()) throw ConfigError("softmax regression: label count mismatch");
  if (grad) grad->assign(weight.size(), 0.0);
  const double inv_n = x.rows() ? 1.0 / static_cast<double>(x.rows()) : 0.0;
  std::vector<double> z;
  double loss = 0.0;
  for (std::size_t v = 0; v < x.rows(); ++v) {
    auto row = x.row(v);
    logits(weight, classes, row, z);
    double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double zc : z) sum += std::exp(zc - mx);
    double lse = mx + std::log(sum);
    loss += (lse - z[static_cast<std::size_t>(y[v])]) * inv_n;
    if (!grad) continue;
    for (std::size_t c = 0; c < classes; ++c) {
      double g = std::exp(z[c] - lse) - (static_cast<int>(c) == y[v] ? 1.0 : 0.0);
      g *= inv_n;
      double* gw = grad->data() + c * cols;
      for (std::size_t j = 0; j < d; ++j) gw[j] += g * row[j];
      gw[d] += g;
    }
  }
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t j = 0; j < d; ++j) {
      double w = weight[c * cols + j];
      loss += 0.5 * l2 * w * w;
      if (grad) (*grad)[c * cols + j] += l2 * w;
    }
  return loss;
}

SoftmaxRegression fit_softmax_regression(const EmbeddingTable& x, std::span<const int> y, std::size_t classes,
                                         const ClassifierConfig& cfg) {
  if (classes < 2) throw ConfigError("classification needs at least 2 classes");
  if (y.size() != x.rows()) throw ConfigError("classification: label count mismatch");
  for (int c : y)
    if (!valid_class(c, classes)) throw ConfigError("classification: label out of range");
  SoftmaxRegression m;
  m.classes = classes;
  m.dim = x.dim();
  m.mean.assign(x.dim(), 0.0);
  m.scale.assign(x.dim(), 1.0);
  const double n = static_cast<double>(x.rows());
  if (x.rows() > 0) {
    for (std::size_t v = 0; v < x.rows(); ++v)
      for (std::size_t j = 0; j < x.dim(); ++j) m.mean[j] += x.row(v)[j] / n;
    for (std::size_t j = 0; j < x.dim(); ++j) {
      double var = 0.0;
      for (std::size_t v = 0; v < x.rows(); ++v) {
        double t = x.row(v)[j] - m.mean[j];
        var += t * t / n;
      }
      double sd = std::sqrt(var);
      m.scale[j] = sd > 1e-12 ? sd : 1.0;
    }
  }
  auto xs = standardized(x, m.mean, m.scale);

  // Curvature bound of the mean cross-entropy: 0.5 * mean ||[x, 1]||^2 + l2.
  double sq = 0.0;
  for (double t : xs.data()) sq += t * t;
  double curvature = 0.5 * (x.rows() ? sq / n + 1.0 : 1.0) + cfg.l2;
  double step = cfg.learning_rate / curvature;

  m.weight.assign(classes * (x.dim() + 1), 0.0);
  std::vector<double> grad;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    softmax_regression_loss(m.weight, classes, xs, y, cfg.l2, &grad);
    for (std::size_t i = 0; i < m.weight.size(); ++i) m.weight[i] -= step * grad[i];
  }
  return m;
}

std::vector<int> predict(const SoftmaxRegression& model, const EmbeddingTable& x) {
  if (x.dim() != model.dim) throw ConfigError("classification: feature dimension mismatch");
  auto xs = standardized(x, model.mean, model.scale);
  std::vector<int> out(x.rows());
  std::vector<double> z;
  for (std::size_t v = 0; v < x.rows(); ++v) {
    logits(model.weight, model.classes, xs.row(v), z);
    out[v] = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
  }
  return out;
}

std::vector<int> classify(const EmbeddingTable& train_x, std::span<const int> train_y, std::size_t classes,
                          const EmbeddingTable& test_x, const ClassifierConfig& cfg) {
  return predict(fit_softmax_regression(train_x, train_y, classes, cfg), test_x);
}

Split stratified_split(std::span<const int> labels, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction >= 0 && train_fraction <= 1)) throw ConfigError("train fraction must be in [0, 1]");
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  auto rng = make_rng(seed, {0x73706c6974ULL});
  Split s;
  for (auto& [_, idx] : groups) {
    std::shuffle(idx.begin(), idx.end(), rng);
    auto ntrain = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
    s.train.insert(s.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(ntrain));
    s.test.insert(s.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(ntrain), idx.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

EmbeddingTable gather_rows(const EmbeddingTable& x, std::span<const std::size_t> rows) {
  EmbeddingTable out(rows.size(), x.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = x.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

F1Scores f1_scores(std::span<const int> predicted, std::span<const int> truth, std::size_t num_classes) {
  if (predicted.size() != truth.size()) throw ConfigError("f1: prediction and truth lengths differ");
  std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!valid_class(predicted[i], num_classes) || !valid_class(truth[i], num_classes))
      throw ConfigError("f1: class id out of range");
    auto p = static_cast<std::size_t>(predicted[i]), t = static_cast<std::size_t>(truth[i]);
    if (p == t) {
      ++tp[t];
      ++correct;
    } else {
      ++fp[p];
      ++fn[t];
    }
  }
  F1Scores s;
  s.precision.resize(num_classes);
  s.recall.resize(num_classes);
  s.f1.resize(num_classes);
  double sum = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    double p = tp[c] + fp[c] ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fp[c]) : 0.0;
    double r = tp[c] + fn[c] ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fn[c]) : 0.0;
    s.precision[c] = p;
    s.recall[c] = r;
    s.f1[c] = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    sum += s.f1[c];
  }
  s.macro = num_classes ? sum / static_cast<double>(num_classes) : 0.0;
  s.micro = truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth.size());
  return s;
}

}  // namespace hine
