#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nerclust/clustering.hpp"
#include "nerclust/corpus.hpp"
#include "nerclust/embeddings.hpp"
#include "nerclust/entities.hpp"
#include "nerclust/evaluation.hpp"

namespace nerclust {

// Synthetic corpus with planted entity groups. Article i belongs to group
// i mod G; its sentences mix that group's context words with shared
// background words, and its mentions name entities of that group only.
struct BenchSpec {
  std::size_t groups = 5;
  std::size_t entities_per_group = 10;
  // Entity type per group; empty alternates PER, ORG, PER, ...
  std::vector<EntityType> group_types;
  std::size_t articles = 2000;
  std::size_t sentences_per_article = 8;
  std::size_t mentions_per_article = 6;
  // Distinct entities drawn for one article; its mentions cycle through them.
  std::size_t cast_per_article = 2;
  std::size_t context_vocab_size = 40;
  std::size_t background_vocab_size = 200;
  // Minimum words on each side of a mention. Keeping this above the training
  // window stops entities from co-occurring directly.
  std::size_t context_words_per_side = 6;
  double group_word_ratio = 0.7;
  double short_mention_ratio = 0.2;
  // Control: every group draws from one common context vocabulary.
  bool shared_context = false;
  std::uint64_t seed = 7;

  EntityType group_type(std::size_t g) const;
  void validate() const;
};

std::string write_bench_spec_json(const BenchSpec& spec);
BenchSpec parse_bench_spec_json(std::string_view json_text, std::string_view origin = "<spec>");
BenchSpec load_bench_spec(const std::string& path);

struct PlantedEntity {
  std::string full_name;  // "Kenneth Bavoli" / "Terano Capital"
  std::string surname;    // empty for organizations
  EntityType type = EntityType::Person;
  std::size_t group = 0;
  std::string token;      // expected entity token
};

struct SyntheticCorpus {
  Corpus corpus;  // raw, unsegmented
  GroundTruth truth;
  std::vector<PlantedEntity> entities;
  std::vector<std::vector<std::string>> group_vocab;  // context words per group
  std::vector<std::string> background_vocab;
};

SyntheticCorpus generate(const BenchSpec& spec);

// Ground truth file: {entity_token: group_id, ..., "spec": {...}}.
std::string write_ground_truth_json(const GroundTruth& truth, const BenchSpec& spec);

struct RecoveryParams {
  Hyperparameters embedding;
  std::size_t restarts = 10;
  std::uint64_t kmeans_seed = 1;
  std::size_t k = 0;  // 0: choose_k(list size)

  // Skip-gram, d=50, w=5, 5 negatives, 5 epochs.
  static RecoveryParams defaults();
};

struct RecoveryResult {
  double purity = 0;
  double ari = 0;
  std::vector<std::vector<std::size_t>> confusion;  // groups x clusters
  std::size_t k = 0;
  TopList top_list;
  ClusterMembership clusters;
  std::vector<double> epoch_losses;
};

// Full pipeline on a generated corpus: segment, heuristic tagging, linking,
// rewriting, training, ranking with n = G*m, similarity matrix, k-means;
// scored against the planted groups.
RecoveryResult run_recovery(const BenchSpec& spec, const RecoveryParams& params);
RecoveryResult run_recovery(const SyntheticCorpus& synthetic, const BenchSpec& spec, const RecoveryParams& params);

// Heuristic tagging + linking + rewriting over a raw corpus.
TokenCorpus prepare_token_corpus(Corpus corpus, const Gazetteers& gazetteers);

}  // namespace nerclust
