#include "nerclust/embeddings.hpp"

#include <atomic>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <thread>

#include "nerclust/error.hpp"
#include "nerclust/random.hpp"
#include "nerclust/text.hpp"

namespace nerclust {

std::size_t Vocabulary::index(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) throw Error("token not in vocabulary: \"" + std::string(token) + "\"");
  return it->second;
}

std::size_t Vocabulary::sample_noise(double u) const {
  const double target = u * noise_cdf_.back();
  auto it = std::upper_bound(noise_cdf_.begin(), noise_cdf_.end(), target);
  const auto i = static_cast<std::size_t>(it - noise_cdf_.begin());
  return std::min(i, noise_cdf_.size() - 1);
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!v.index_.emplace(tokens[i], i).second) throw Error("duplicate vocabulary token \"" + tokens[i] + "\"");
  }
  v.tokens_ = std::move(tokens);
  v.counts_.assign(v.tokens_.size(), 0);
  v.doc_freqs_.assign(v.tokens_.size(), 0);
  return v;
}

Vocabulary build_vocab(const TokenCorpus& corpus, std::uint64_t min_count) {
  if (corpus.empty()) throw Error("cannot build a vocabulary from an empty corpus");
  struct Stat {
    std::uint64_t count = 0;
    std::uint64_t docs = 0;
    std::size_t last_doc = static_cast<std::size_t>(-1);
  };
  std::unordered_map<std::string, Stat> stats;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    for (const auto& tok : corpus[d].tokens) {
      auto& s = stats[tok];
      ++s.count;
      if (s.last_doc != d) {
        s.last_doc = d;
        ++s.docs;
      }
    }
  }
  std::vector<std::pair<std::string, Stat>> kept;
  for (auto& [tok, s] : stats) {
    if (s.count >= min_count || is_entity_token(tok)) kept.emplace_back(tok, s);
  }
  if (kept.empty()) throw Error("vocabulary is empty after applying min_count " + std::to_string(min_count));
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) return a.second.count > b.second.count;
    return a.first < b.first;
  });

  Vocabulary v;
  double norm = 0;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    v.index_.emplace(kept[i].first, i);
    v.tokens_.push_back(kept[i].first);
    v.counts_.push_back(kept[i].second.count);
    v.doc_freqs_.push_back(kept[i].second.docs);
    v.total_ += kept[i].second.count;
    const double w = std::pow(static_cast<double>(kept[i].second.count), kNoiseExponent);
    v.noise_.push_back(w);
    norm += w;
  }
  double acc = 0;
  for (auto& p : v.noise_) {
    p /= norm;
    acc += p;
    v.noise_cdf_.push_back(acc);
  }
  return v;
}

ModelKind parse_model_kind(std::string_view name) {
  const auto lower = text::ascii_lower(name);
  if (lower == "cbow") return ModelKind::Cbow;
  if (lower == "skipgram" || lower == "skip-gram" || lower == "sg") return ModelKind::SkipGram;
  throw Error("unknown model kind '" + std::string(name) + "' (expected cbow or skipgram)");
}

std::string_view to_string(ModelKind kind) { return kind == ModelKind::Cbow ? "cbow" : "skipgram"; }
std::string_view display_name(ModelKind kind) { return kind == ModelKind::Cbow ? "CBOW" : "SkipGram"; }

double Hyperparameters::default_learning_rate(ModelKind kind) { return kind == ModelKind::Cbow ? 0.05 : 0.025; }

void Hyperparameters::validate() const {
  if (dim < 1) throw Error("invalid hyperparameter: dim must be >= 1");
  if (window < 1) throw Error("invalid hyperparameter: window must be >= 1");
  if (negatives < 1) throw Error("invalid hyperparameter: negatives must be >= 1");
  if (epochs < 1) throw Error("invalid hyperparameter: epochs must be >= 1");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
    throw Error("invalid hyperparameter: learning_rate must be positive");
  }
  if (subsample < 0) throw Error("invalid hyperparameter: subsample must be >= 0");
  if (threads < 1) throw Error("invalid hyperparameter: threads must be >= 1");
}

namespace {

using Sequence = std::vector<std::uint32_t>;

std::vector<Sequence> encode(const TokenCorpus& corpus, const Vocabulary& vocab) {
  if (vocab.total_count() == 0) throw Error("vocabulary/corpus mismatch: vocabulary carries no counts");
  std::vector<Sequence> out;
  std::vector<std::uint64_t> recount(vocab.size(), 0);
  for (const auto& doc : corpus) {
    Sequence seq;
    seq.reserve(doc.tokens.size());
    for (const auto& tok : doc.tokens) {
      if (!vocab.contains(tok)) continue;
      const auto i = static_cast<std::uint32_t>(vocab.index(tok));
      seq.push_back(i);
      ++recount[i];
    }
    out.push_back(std::move(seq));
  }
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (recount[i] != vocab.count(i)) {
      throw Error("vocabulary/corpus mismatch: token \"" + vocab.token(i) + "\" has count " +
                  std::to_string(vocab.count(i)) + " in the vocabulary but " + std::to_string(recount[i]) +
                  " in the corpus");
    }
  }
  return out;
}

struct Shared {
  const Vocabulary& vocab;
  const Hyperparameters& params;
  VectorTable& input;
  VectorTable& output;
  std::vector<bool> always_keep;
  std::uint64_t total_positions;
  std::atomic<std::uint64_t> processed{0};
};

struct EpochTally {
  double loss = 0;
  std::uint64_t updates = 0;
};

void train_shard(Shared& sh, const std::vector<Sequence>& docs, std::size_t first, std::size_t stride, Rng& rng,
                 EpochTally& tally) {
  const auto& p = sh.params;
  const std::size_t d = p.dim;
  const double floor_lr = p.learning_rate * 1e-4;
  const double threshold = p.subsample * static_cast<double>(sh.vocab.total_count());

  std::vector<float> hidden(d), step(d);
  std::vector<std::span<float>> negatives;
  std::vector<std::uint32_t> contexts;
  Sequence seq;

  for (std::size_t di = first; di < docs.size(); di += stride) {
    const Sequence& raw = docs[di];
    sh.processed.fetch_add(raw.size(), std::memory_order_relaxed);
    const std::uint64_t done_before = sh.processed.load(std::memory_order_relaxed) - raw.size();

    seq.clear();
    if (p.subsample > 0) {
      for (auto w : raw) {
        if (sh.always_keep[w]) {
          seq.push_back(w);
          continue;
        }
        const double f = static_cast<double>(sh.vocab.count(w));
        const double keep = (std::sqrt(f / threshold) + 1) * threshold / f;
        if (keep >= 1 || rng.uniform() < keep) seq.push_back(w);
      }
    } else {
      seq = raw;
    }

    for (std::size_t i = 0; i < seq.size(); ++i) {
      const double progress = static_cast<double>(done_before + i) / static_cast<double>(sh.total_positions);
      const float lr = static_cast<float>(std::max(floor_lr, p.learning_rate * (1.0 - progress)));
      const auto b = static_cast<std::size_t>(rng.between(1, static_cast<std::int64_t>(p.window)));
      const std::size_t lo = i >= b ? i - b : 0;
      const std::size_t hi = std::min(seq.size() - 1, i + b);
      const std::uint32_t center = seq[i];

      auto draw_negatives = [&](std::uint32_t positive) {
        negatives.clear();
        for (std::size_t k = 0; k < p.negatives; ++k) {
          const auto n = static_cast<std::uint32_t>(sh.vocab.sample_noise(rng.uniform()));
          if (n == positive) continue;
          negatives.push_back(sh.output.row(n));
        }
      };

      if (p.kind == ModelKind::SkipGram) {
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          const std::uint32_t ctx = seq[j];
          draw_negatives(ctx);
          std::fill(step.begin(), step.end(), 0.0f);
          auto center_row = sh.input.row(center);
          tally.loss += detail::negative_sampling_update<float>(std::span<const float>(center_row),
                                                                sh.output.row(ctx), negatives, lr, step);
          for (std::size_t k = 0; k < d; ++k) center_row[k] += step[k];
          ++tally.updates;
        }
      } else {
        contexts.clear();
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j != i) contexts.push_back(seq[j]);
        }
        if (contexts.empty()) continue;
        std::fill(hidden.begin(), hidden.end(), 0.0f);
        for (auto c : contexts) {
          const auto row = sh.input.row(c);
          for (std::size_t k = 0; k < d; ++k) hidden[k] += row[k];
        }
        const float inv = 1.0f / static_cast<float>(contexts.size());
        for (auto& h : hidden) h *= inv;
        draw_negatives(center);
        std::fill(step.begin(), step.end(), 0.0f);
        tally.loss += detail::negative_sampling_update<float>(std::span<const float>(hidden), sh.output.row(center),
                                                              negatives, lr, step);
        for (auto c : contexts) {
          auto row = sh.input.row(c);
          for (std::size_t k = 0; k < d; ++k) row[k] += step[k] * inv;
        }
        ++tally.updates;
      }
    }
  }
}

}  // namespace

EmbeddingModel train(const TokenCorpus& corpus, const Vocabulary& vocab, const Hyperparameters& params) {
  params.validate();
  if (vocab.empty()) throw Error("cannot train with an empty vocabulary");
  const auto docs = encode(corpus, vocab);

  EmbeddingModel model;
  model.vocab = vocab;
  model.params = params;
  const std::size_t V = vocab.size();
  const std::size_t d = params.dim;
  model.input = {V, d, std::vector<float>(V * d)};
  model.output = {V, d, std::vector<float>(V * d, 0.0f)};
  {
    Rng init(params.seed);
    for (auto& x : model.input.data) x = static_cast<float>((init.uniform() - 0.5) / static_cast<double>(d));
  }

  std::uint64_t positions = 0;
  for (const auto& s : docs) positions += s.size();
  if (positions == 0) throw Error("corpus has no in-vocabulary tokens to train on");

  Shared shared{vocab, params, model.input, model.output, {}, positions * params.epochs};
  shared.always_keep.resize(V);
  for (std::size_t i = 0; i < V; ++i) shared.always_keep[i] = is_entity_token(vocab.token(i));

  const std::size_t workers = std::min<std::size_t>(params.threads, std::max<std::size_t>(docs.size(), 1));
  std::vector<Rng> rngs;
  for (std::size_t w = 0; w < workers; ++w) rngs.emplace_back(mix_seed(params.seed, w + 1));

  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    std::vector<EpochTally> tallies(workers);
    if (workers == 1) {
      train_shard(shared, docs, 0, 1, rngs[0], tallies[0]);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] { train_shard(shared, docs, w, workers, rngs[w], tallies[w]); });
      }
      for (auto& t : pool) t.join();
    }
    EpochTally total;
    for (const auto& t : tallies) {
      total.loss += t.loss;
      total.updates += t.updates;
    }
    model.stats.updates += total.updates;
    model.stats.epoch_mean_loss.push_back(total.updates ? total.loss / static_cast<double>(total.updates) : 0.0);
  }
  return model;
}

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw Error("cosine of vectors with different dimensions");
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<double>(a[i]) * b[i];
    aa += static_cast<double>(a[i]) * a[i];
    bb += static_cast<double>(b[i]) * b[i];
  }
  if (aa == 0 || bb == 0) return 0.0;
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

double cosine(std::string_view token_a, std::string_view token_b, const EmbeddingModel& model) {
  return cosine(model.vector(token_a), model.vector(token_b));
}

std::string write_model_text(const EmbeddingModel& model) {
  std::string out = std::to_string(model.input.rows) + " " + std::to_string(model.input.cols) + "\n";
  char buf[32];
  for (std::size_t i = 0; i < model.input.rows; ++i) {
    out += model.vocab.token(i);
    for (float x : model.input.row(i)) {
      std::snprintf(buf, sizeof buf, " %.9g", static_cast<double>(x));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

EmbeddingModel read_model_text(std::string_view contents, std::string_view origin) {
  const auto lines = text::split(contents, '\n');
  auto where = [&](std::size_t line) { return std::string(origin) + ":" + std::to_string(line); };
  if (lines.empty()) throw Error(where(1) + ": missing \"V d\" header");
  const auto header = text::split_whitespace(lines[0]);
  std::size_t V = 0, d = 0;
  if (header.size() != 2 || std::from_chars(header[0].data(), header[0].data() + header[0].size(), V).ec != std::errc{} ||
      std::from_chars(header[1].data(), header[1].data() + header[1].size(), d).ec != std::errc{} || d == 0) {
    throw Error(where(1) + ": malformed \"V d\" header");
  }
  std::vector<std::string> tokens;
  std::vector<float> data;
  data.reserve(V * d);
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (text::trim(lines[l]).empty()) continue;
    const auto fields = text::split_whitespace(lines[l]);
    if (fields.size() != d + 1) {
      throw Error(where(l + 1) + ": expected token and " + std::to_string(d) + " values, got " +
                  std::to_string(fields.size()) + " fields");
    }
    tokens.push_back(fields[0]);
    for (std::size_t k = 1; k <= d; ++k) {
      char* end = nullptr;
      const float x = std::strtof(fields[k].c_str(), &end);
      if (end != fields[k].c_str() + fields[k].size() || !std::isfinite(x)) {
        throw Error(where(l + 1) + ": bad vector component \"" + fields[k] + "\"");
      }
      data.push_back(x);
    }
  }
  if (tokens.size() != V) {
    throw Error(std::string(origin) + ": header declares " + std::to_string(V) + " vectors, file has " +
                std::to_string(tokens.size()));
  }
  EmbeddingModel model;
  model.vocab = Vocabulary::from_tokens(std::move(tokens));
  model.input = {V, d, std::move(data)};
  model.params.dim = d;
  return model;
}

EmbeddingModel load_model_text(const std::string& path) { return read_model_text(text::read_file(path), path); }

}  // namespace nerclust
