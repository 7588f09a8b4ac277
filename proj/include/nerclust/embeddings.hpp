#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nerclust/entities.hpp"

namespace nerclust {

// ---------------------------------------------------------------------------
// Negative-sampling kernels
//
// Both model kinds reduce to the same update: a hidden vector h is scored
// against one positive output row and a set of negative output rows, with
//   L = -log s(u_pos . h) - sum_neg log s(-u_neg . h),   s = logistic.
// Dot products are clamped to [-kMaxDot, kMaxDot] before exponentiation.

inline constexpr double kMaxDot = 30.0;

template <std::floating_point T>
T clamp_dot(T x) {
  return std::clamp(x, static_cast<T>(-kMaxDot), static_cast<T>(kMaxDot));
}

template <std::floating_point T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-clamp_dot(x)));
}

// -log s(x), evaluated without overflow.
template <std::floating_point T>
T neg_log_sigmoid(T x) {
  x = clamp_dot(x);
  return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

template <std::floating_point T>
T dot(std::span<const T> a, std::span<const T> b) {
  T s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

namespace detail {

// Updates every output row in place and accumulates -lr * dL/dh into
// hidden_step (which the caller zeroes). Output-row gradients use h as given
// and hidden_step uses each output row before its own update, so the result
// is one exact gradient step on L. Returns L before the update.
template <std::floating_point T, class NegativeRows>
T negative_sampling_update(std::span<const T> hidden, std::span<T> positive, const NegativeRows& negatives, T lr,
                           std::span<T> hidden_step) {
  const std::size_t d = hidden.size();
  T loss = 0;
  auto score = [&](std::span<T> row, T label) {
    const T f = dot<T>(hidden, row);
    loss += label > 0 ? neg_log_sigmoid(f) : neg_log_sigmoid(-f);
    const T g = (label - sigmoid(f)) * lr;
    for (std::size_t i = 0; i < d; ++i) hidden_step[i] += g * row[i];
    for (std::size_t i = 0; i < d; ++i) row[i] += g * hidden[i];
  };
  score(positive, T(1));
  for (std::span<T> row : negatives) score(row, T(0));
  return loss;
}

}  // namespace detail

// One skip-gram step: the center's input vector predicts the context's output
// vector against the negative output vectors. Returns the loss before update.
template <std::floating_point T>
T sgns_step(std::span<T> center, std::span<T> context, std::span<const std::span<T>> negatives, T lr) {
  std::vector<T> step(center.size(), T(0));
  const T loss = detail::negative_sampling_update<T>(std::span<const T>(center), context, negatives, lr,
                                                     std::span<T>(step));
  for (std::size_t i = 0; i < center.size(); ++i) center[i] += step[i];
  return loss;
}

// One CBOW step: the mean of the context input vectors predicts the center's
// output vector. The hidden gradient is shared equally by the contexts.
template <std::floating_point T>
T cbow_step(std::span<const std::span<T>> contexts, std::span<T> center, std::span<const std::span<T>> negatives,
            T lr) {
  const std::size_t d = center.size();
  std::vector<T> hidden(d, T(0));
  for (std::span<T> c : contexts) {
    for (std::size_t i = 0; i < d; ++i) hidden[i] += c[i];
  }
  const T inv = T(1) / static_cast<T>(contexts.size());
  for (auto& h : hidden) h *= inv;
  std::vector<T> step(d, T(0));
  const T loss = detail::negative_sampling_update<T>(std::span<const T>(hidden), center, negatives, lr,
                                                     std::span<T>(step));
  for (std::span<T> c : contexts) {
    for (std::size_t i = 0; i < d; ++i) c[i] += step[i] * inv;
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Vocabulary and model

inline constexpr double kNoiseExponent = 0.75;

class Vocabulary {
 public:
  Vocabulary() = default;

  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }
  bool contains(std::string_view token) const { return index_.count(std::string(token)) > 0; }
  // Throws Error naming the token when it is absent.
  std::size_t index(std::string_view token) const;
  const std::string& token(std::size_t i) const { return tokens_[i]; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::uint64_t count(std::size_t i) const { return counts_[i]; }
  std::uint64_t document_frequency(std::size_t i) const { return doc_freqs_[i]; }
  std::uint64_t total_count() const { return total_; }

  // Unigram^0.75 probabilities, normalized over the retained tokens.
  const std::vector<double>& noise_distribution() const { return noise_; }
  // Inverse-CDF draw from the noise distribution for u in [0, 1).
  std::size_t sample_noise(double u) const;

  // Adds tokens with no statistics; used when reloading a saved model.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

 private:
  friend Vocabulary build_vocab(const TokenCorpus&, std::uint64_t);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::uint64_t> doc_freqs_;
  std::vector<double> noise_;
  std::vector<double> noise_cdf_;
  std::uint64_t total_ = 0;
};

// Tokens seen fewer than min_count times are dropped; entity tokens are kept
// regardless. Indices are ordered by count descending, then token.
Vocabulary build_vocab(const TokenCorpus& corpus, std::uint64_t min_count);

enum class ModelKind { Cbow, SkipGram };

ModelKind parse_model_kind(std::string_view name);
std::string_view to_string(ModelKind kind);        // "cbow", "skipgram"
std::string_view display_name(ModelKind kind);     // "CBOW", "SkipGram"

struct Hyperparameters {
  ModelKind kind = ModelKind::SkipGram;
  std::size_t dim = 500;
  std::size_t window = 10;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  std::uint64_t min_count = 5;
  std::uint64_t seed = 1;
  // Frequent-word subsampling threshold; 0 disables it. Entity tokens are
  // never subsampled.
  double subsample = 0.0;
  // 1 = deterministic single worker. More workers update shared parameters
  // without synchronization and are not reproducible.
  std::size_t threads = 1;

  // Default learning rate per kind (0.025 skip-gram, 0.05 CBOW).
  static double default_learning_rate(ModelKind kind);
  void validate() const;
};

// Row-major dense matrix of floats.
struct VectorTable {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const float> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

struct TrainingStats {
  std::vector<double> epoch_mean_loss;
  std::uint64_t updates = 0;
};

struct EmbeddingModel {
  Vocabulary vocab;
  VectorTable input;
  VectorTable output;  // empty for reloaded models
  Hyperparameters params;
  TrainingStats stats;

  std::size_t dim() const { return input.cols; }
  std::span<const float> vector(std::string_view token) const { return input.row(vocab.index(token)); }
};

EmbeddingModel train(const TokenCorpus& corpus, const Vocabulary& vocab, const Hyperparameters& params);

// Cosine of the input vectors; 0 when either vector is zero.
double cosine(std::string_view token_a, std::string_view token_b, const EmbeddingModel& model);
double cosine(std::span<const float> a, std::span<const float> b);

// Text format: "V d" header, then "token v1 ... vd" per line.
std::string write_model_text(const EmbeddingModel& model);
EmbeddingModel read_model_text(std::string_view contents, std::string_view origin = "<model>");
EmbeddingModel load_model_text(const std::string& path);

}  // namespace nerclust
