#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trojkit/corpus.hpp"
#include "trojkit/error.hpp"
#include "trojkit/rng.hpp"
#include "trojkit/text.hpp"

// A small deterministic stand-in for the fine-tuned LLM: hashed bag-of-words
// logistic regression with optional first-k/last-k positional buckets, trained
// by seeded mini-batch SGD. It learns trigger-label correlations the same way
// the larger model does, at desk scale.

namespace trojkit {

struct FeatureConfig {
  std::size_t dimension = std::size_t{1} << 18;
  // When set, tokens within the first/last k positions additionally emit a
  // bucket-tagged feature ("FIRST:word" / "LAST:word").
  std::optional<std::size_t> first_last_k = 16;

  bool operator==(const FeatureConfig&) const = default;
};

namespace detail {

inline void validate(const FeatureConfig& cfg) {
  if (cfg.dimension < (std::size_t{1} << 10))
    fail("feature dimension must be at least 1024");
  if (cfg.first_last_k && *cfg.first_last_k < 1)
    fail("positional bucket width must be at least 1");
}

}  // namespace detail

// Fixed salt so feature indices are reproducible across platforms and runs.
inline constexpr std::uint64_t kFeatureHashSalt = 0x7c0a35bd9f1e4d2bULL;

inline std::uint64_t feature_hash(std::string_view key) {
  return scramble64(fnv1a64(key) ^ kFeatureHashSalt);
}

struct SparseFeatures {
  // (index, value), sorted by index, L2-normalized.
  std::vector<std::pair<std::uint32_t, double>> values;

  double dot(const std::vector<double>& weights) const {
    double sum = 0.0;
    for (const auto& [idx, v] : values) sum += weights[idx] * v;
    return sum;
  }
};

// Bag of hashed token counts over tokenize(text + " " + instruction), plus
// positional bucket features, L2-normalized.
inline SparseFeatures featurize(const LabeledExample& ex,
                                const FeatureConfig& cfg) {
  detail::validate(cfg);
  std::string full = ex.text;
  if (ex.instruction) {
    full.push_back(' ');
    full.append(*ex.instruction);
  }
  const TokenStream tokens = tokenize(full);
  const std::size_t n = tokens.size();

  std::map<std::uint32_t, double> acc;
  auto add = [&](std::string_view key) {
    const auto idx =
        static_cast<std::uint32_t>(feature_hash(key) % cfg.dimension);
    acc[idx] += 1.0;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& w = tokens[i].surface;
    add(w);
    if (cfg.first_last_k) {
      const std::size_t k = *cfg.first_last_k;
      if (i < k) add("FIRST:" + w);
      if (i + k >= n) add("LAST:" + w);
    }
  }

  double norm_sq = 0.0;
  for (const auto& [idx, v] : acc) norm_sq += v * v;
  const double norm = std::sqrt(norm_sq);

  SparseFeatures out;
  out.values.reserve(acc.size());
  for (const auto& [idx, v] : acc)
    out.values.emplace_back(idx, norm > 0.0 ? v / norm : 0.0);
  return out;
}

struct TrainConfig {
  // Scaled for from-scratch training of the hashed linear model; a
  // fine-tuning-style schedule (1e-4 / 0.01 / 10 epochs) leaves it far from
  // convergence.
  double learning_rate = 1.0;
  std::size_t batch_size = 8;
  double weight_decay = 5e-5;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  const Corpus* validation = nullptr;  // optional; selects the best epoch
};

struct SurrogateModel {
  std::vector<double> weights;
  double bias = 0.0;
  FeatureConfig feature_config;
  std::vector<double> training_history;  // per-epoch validation accuracy
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct Prediction {
  int label = 0;
  double score = 0.0;  // P(class 1)
};

inline Prediction predict(const SurrogateModel& model,
                          const LabeledExample& ex) {
  const SparseFeatures f = featurize(ex, model.feature_config);
  const double score = sigmoid(f.dot(model.weights) + model.bias);
  return {score >= 0.5 ? 1 : 0, score};
}

namespace detail {

inline void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate))
    fail("learning rate must be finite and non-negative");
  if (cfg.batch_size < 1) fail("batch size must be at least 1");
  if (!(cfg.weight_decay >= 0.0) || !std::isfinite(cfg.weight_decay))
    fail("weight decay must be finite and non-negative");
  if (cfg.epochs < 1) fail("epoch count must be at least 1");
}

inline void require_two_class(const Corpus& corpus, const char* op) {
  if (corpus.examples.empty()) fail(std::string(op) + ": corpus is empty");
  bool has0 = false, has1 = false;
  for (const auto& ex : corpus.examples) {
    if (ex.label == 0)
      has0 = true;
    else if (ex.label == 1)
      has1 = true;
    else
      fail(std::string(op) + ": label " + std::to_string(ex.label) +
           " is not binary");
  }
  if (!has0 || !has1)
    fail(std::string(op) + ": corpus must contain both classes");
}

// One pass of logistic-loss SGD. Per batch, using the pre-update weights:
//   p_i = sigmoid(w . x_i + b)
//   w <- w * (1 - lr * decay) - lr * mean_i (p_i - y_i) x_i
//   b <- b - lr * mean_i (p_i - y_i)
// Epoch e shuffles [0, n) with the stream mix_seed(seed, "train.shuffle", e).
inline SurrogateModel sgd(SurrogateModel model, const Corpus& corpus,
                          const TrainConfig& cfg) {
  validate(cfg);
  require_two_class(corpus, "train");

  const std::size_t n = corpus.size();
  std::vector<SparseFeatures> features;
  features.reserve(n);
  std::vector<double> labels;
  labels.reserve(n);
  for (const auto& ex : corpus.examples) {
    features.push_back(featurize(ex, model.feature_config));
    labels.push_back(static_cast<double>(ex.label));
  }

  std::vector<SparseFeatures> val_features;
  std::vector<int> val_labels;
  if (cfg.validation) {
    for (const auto& ex : cfg.validation->examples) {
      val_features.push_back(featurize(ex, model.feature_config));
      val_labels.push_back(ex.label);
    }
    if (val_features.empty()) fail("train: validation corpus is empty");
  }

  model.training_history.clear();
  std::vector<double> best_weights;
  double best_bias = 0.0;
  double best_acc = -1.0;

  std::vector<std::size_t> perm(n);
  std::map<std::uint32_t, double> grad;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(mix_seed(cfg.seed, "train.shuffle", epoch));
    shuffle(perm, rng);

    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(start + cfg.batch_size, n);
      const double inv = 1.0 / static_cast<double>(stop - start);
      grad.clear();
      double grad_bias = 0.0;
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t i = perm[b];
        const double p = sigmoid(features[i].dot(model.weights) + model.bias);
        const double coeff = (p - labels[i]) * inv;
        for (const auto& [idx, v] : features[i].values) grad[idx] += coeff * v;
        grad_bias += coeff;
      }
      if (cfg.weight_decay > 0.0 && cfg.learning_rate > 0.0) {
        const double keep = 1.0 - cfg.learning_rate * cfg.weight_decay;
        for (double& w : model.weights) w *= keep;
      }
      for (const auto& [idx, g] : grad)
        model.weights[idx] -= cfg.learning_rate * g;
      model.bias -= cfg.learning_rate * grad_bias;
    }

    if (cfg.validation) {
      std::size_t correct = 0;
      for (std::size_t i = 0; i < val_features.size(); ++i) {
        const double s =
            sigmoid(val_features[i].dot(model.weights) + model.bias);
        if ((s >= 0.5 ? 1 : 0) == val_labels[i]) ++correct;
      }
      const double acc =
          100.0 * static_cast<double>(correct) / val_features.size();
      model.training_history.push_back(acc);
      if (acc > best_acc) {  // ties keep the earliest epoch
        best_acc = acc;
        best_weights = model.weights;
        best_bias = model.bias;
      }
    }
  }

  if (cfg.validation) {
    model.weights = std::move(best_weights);
    model.bias = best_bias;
  }
  return model;
}

}  // namespace detail

inline SurrogateModel train(const Corpus& corpus, const FeatureConfig& fcfg,
                            const TrainConfig& tcfg) {
  detail::validate(fcfg);
  SurrogateModel model;
  model.weights.assign(fcfg.dimension, 0.0);
  model.feature_config = fcfg;
  return detail::sgd(std::move(model), corpus, tcfg);
}

// Resumes SGD from the given weights with the model's own feature config.
inline SurrogateModel continue_training(const SurrogateModel& model,
                                        const Corpus& corpus,
                                        const TrainConfig& tcfg) {
  return detail::sgd(model, corpus, tcfg);
}

// ---------------------------------------------------------------------------
// Versioned little-endian binary model file.

namespace detail {

inline constexpr char kModelMagic[8] = {'T', 'K', 'S', 'M', 'D', 'L', '0', '1'};

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

inline void put_f64(std::string& out, double d) {
  put_u64(out, std::bit_cast<std::uint64_t>(d));
}

class ByteReader {
 public:
  ByteReader(const std::string& data, const std::string& path)
      : data_(data), path_(path) {}

  std::uint64_t u64() {
    if (pos_ + 8 > data_.size()) fail("truncated model file: " + path_);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i]))
           << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  void raw(char* dst, std::size_t count) {
    if (pos_ + count > data_.size()) fail("truncated model file: " + path_);
    std::copy_n(data_.data() + pos_, count, dst);
    pos_ += count;
  }

 private:
  const std::string& data_;
  const std::string& path_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline void save_model(const SurrogateModel& model, const std::string& path) {
  for (double w : model.weights)
    if (!std::isfinite(w)) fail("refusing to save a model with non-finite weights");
  if (!std::isfinite(model.bias)) fail("refusing to save a model with non-finite bias");

  std::string buf;
  buf.reserve(16 + model.weights.size() * 8);
  buf.append(detail::kModelMagic, sizeof(detail::kModelMagic));
  detail::put_u64(buf, 1);  // version
  detail::put_u64(buf, model.feature_config.dimension);
  detail::put_u64(buf, model.feature_config.first_last_k ? 1 : 0);
  detail::put_u64(buf, model.feature_config.first_last_k.value_or(0));
  detail::put_f64(buf, model.bias);
  detail::put_u64(buf, model.weights.size());
  for (double w : model.weights) detail::put_f64(buf, w);
  detail::put_u64(buf, model.training_history.size());
  for (double h : model.training_history) detail::put_f64(buf, h);

  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot open for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  out.flush();
  if (!out) fail("I/O error while writing: " + path);
}

inline SurrogateModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open model file: " + path);
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());

  detail::ByteReader r(data, path);
  char magic[8];
  r.raw(magic, 8);
  if (!std::equal(magic, magic + 8, detail::kModelMagic))
    fail("not a trojkit model file: " + path);
  if (r.u64() != 1) fail("unsupported model file version: " + path);

  SurrogateModel model;
  model.feature_config.dimension = static_cast<std::size_t>(r.u64());
  const bool has_buckets = r.u64() != 0;
  const auto k = static_cast<std::size_t>(r.u64());
  model.feature_config.first_last_k =
      has_buckets ? std::optional<std::size_t>(k) : std::nullopt;
  model.bias = r.f64();
  const auto n = static_cast<std::size_t>(r.u64());
  if (n != model.feature_config.dimension)
    fail("model weight count does not match its dimension: " + path);
  model.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) model.weights[i] = r.f64();
  const auto h = static_cast<std::size_t>(r.u64());
  model.training_history.resize(h);
  for (std::size_t i = 0; i < h; ++i) model.training_history[i] = r.f64();

  detail::validate(model.feature_config);
  for (double w : model.weights)
    if (!std::isfinite(w)) fail("model file has non-finite weights: " + path);
  if (!std::isfinite(model.bias)) fail("model file has non-finite bias: " + path);
  return model;
}

}  // namespace trojkit
