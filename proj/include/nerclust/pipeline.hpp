#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nerclust/clustering.hpp"
#include "nerclust/corpus.hpp"
#include "nerclust/embeddings.hpp"
#include "nerclust/evaluation.hpp"

namespace nerclust {

enum class Stage { Ingest, Tag, Link, Rewrite, Train, Rank, Matrix, Cluster, Evaluate, Synth };

Stage parse_stage(std::string_view name);
std::string_view to_string(Stage stage);

enum class NerMode { Heuristic, Import };

// Flat "section.key" -> value view of the config file, before typing.
using ConfigValues = std::map<std::string, std::string>;

ConfigValues parse_config_ini(std::string_view contents, std::string_view origin = "<config>");
ConfigValues load_config_ini(const std::string& path);

struct PipelineConfig {
  // [corpus]
  std::string corpus_path;
  CorpusFormat corpus_format = CorpusFormat::Jsonl;
  // [ner]
  NerMode ner_mode = NerMode::Heuristic;
  std::string conll_path;
  std::string given_names_path;    // replaces the built-in list when set
  std::string organizations_path;
  // [embedding]; `embedding.kind` is ignored, models lists what to train.
  std::vector<ModelKind> models = {ModelKind::Cbow, ModelKind::SkipGram};
  Hyperparameters embedding;
  std::optional<double> learning_rate;  // unset: per-kind default
  // [lists]
  std::vector<ListVariant> lists = default_list_variants();
  // [clustering]; k = 0 applies the n/10 rule.
  std::size_t k = 0;
  std::uint64_t seed = 1;
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
  // [evaluation]
  std::string annotations_dir;  // files named <list>_<model>.json
  std::string ground_truth_path;
  // [output]
  std::string output_dir = "out";
  // Not part of the file: set by flags.
  std::string synth_spec_path;
  bool force = false;

  // Typed view of the values; unknown keys and malformed values are errors.
  static PipelineConfig from_values(const ConfigValues& values);
  ConfigValues to_values() const;

  Hyperparameters hyperparameters(ModelKind kind) const;
  void validate(Stage stage) const;
};

// Layers, lowest precedence first: file, NERCLUST_OUTPUT_DIR, then overrides
// ("section.key=value").
PipelineConfig resolve_config(const std::string& config_path, const std::vector<std::string>& overrides);

// Restricts list/model-scoped stages; empty means every configured one.
struct StageFilter {
  std::vector<std::string> lists;
  std::vector<ModelKind> models;
};

struct StageResult {
  std::vector<std::string> summary;   // one line per artifact group
  std::vector<std::string> warnings;
};

// Runs one stage against the artifacts in config.output_dir. Each stage
// records stages/<name>.json with the config hash of its inputs; a missing
// upstream record names the stage to run first, and a hash mismatch is
// refused unless config.force is set.
StageResult run_stage(Stage stage, const PipelineConfig& config, const StageFilter& filter = {});

struct ExperimentResult {
  std::vector<std::string> clustering_files;
  std::vector<MetricsReport> reports;
  std::vector<std::string> failures;  // "T200_O/cbow: <message>"
  std::vector<std::string> warnings;
  std::string table;
};

// Shared stages once, then rank/matrix/cluster/evaluate for every list x
// model pair. A failing pair is recorded and the rest still run.
ExperimentResult run_experiment(const PipelineConfig& config);

// Hash identifying the inputs of a stage instance ("train_skipgram",
// "matrix_T100_P_cbow", ...).
std::string stage_hash(const PipelineConfig& config, std::string_view stage_instance);

}  // namespace nerclust
