#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nerclust/error.hpp"
#include "nerclust/pipeline.hpp"

namespace {

struct GlobalOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool deterministic = false;
  bool force = false;
};

struct ScopeOptions {
  std::vector<std::string> lists;
  std::vector<std::string> models;
  std::string spec;
};

nerclust::PipelineConfig build_config(const GlobalOptions& g, const ScopeOptions& s) {
  std::vector<std::string> overrides = g.overrides;
  if (!g.output_dir.empty()) overrides.push_back("output.dir=" + g.output_dir);
  if (g.seed_set) {
    overrides.push_back("embedding.seed=" + std::to_string(g.seed));
    overrides.push_back("clustering.seed=" + std::to_string(g.seed));
  }
  if (g.deterministic) overrides.push_back("embedding.threads=1");
  nerclust::PipelineConfig config = nerclust::resolve_config(g.config_path, overrides);
  config.force = g.force;
  config.synth_spec_path = s.spec;
  return config;
}

void print(const std::vector<std::string>& lines, std::FILE* out) {
  for (const auto& l : lines) std::fprintf(out, "%s\n", l.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Named-entity embedding and clustering pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("-c,--config", g.config_path, "INI config file")->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "Override a config value: section.key=value (repeatable)");
  app.add_option("-o,--output-dir", g.output_dir, "Artifact directory (overrides config and NERCLUST_OUTPUT_DIR)");
  auto* seed_opt = app.add_option("--seed", g.seed, "Seed for embedding training and k-means");
  app.add_flag("--deterministic", g.deterministic, "Single training worker; reproducible output");
  app.add_flag("--force", g.force, "Accept upstream artifacts built under a different config");

  ScopeOptions s;
  struct Command {
    const char* name;
    const char* help;
    bool lists;
    bool models;
  };
  const std::vector<Command> commands = {
      {"ingest", "Load and segment the corpus", false, false},
      {"tag", "Tag PER/ORG mentions (heuristic or CoNLL import)", false, false},
      {"link", "Link person mentions within each article", false, false},
      {"rewrite", "Replace mentions with entity tokens", false, false},
      {"train", "Train embedding models", false, true},
      {"rank", "Build top lists by document frequency", true, false},
      {"matrix", "Build similarity matrices", true, true},
      {"cluster", "Cluster matrix rows with k-means", true, true},
      {"evaluate", "Score clusterings against annotations or ground truth", true, true},
      {"synth", "Generate a synthetic corpus with planted groups", false, false},
      {"experiment", "Run every list x model variation end to end", false, false},
  };
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    if (c.lists) sub->add_option("--list", s.lists, "Restrict to list variants (e.g. T100_P)");
    if (c.models) sub->add_option("--model", s.models, "Restrict to model kinds (cbow, skipgram)");
    if (std::string(c.name) == "synth") sub->add_option("--spec", s.spec, "Bench spec JSON")->required();
  }

  CLI11_PARSE(app, argc, argv);
  g.seed_set = seed_opt->count() > 0;
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    const nerclust::PipelineConfig config = build_config(g, s);
    if (command == "experiment") {
      const auto result = nerclust::run_experiment(config);
      for (const auto& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      std::printf("%s", result.table.c_str());
      std::printf("experiment: %zu clusterings, %zu metric reports -> %s/report.txt\n",
                  result.clustering_files.size(), result.reports.size(), config.output_dir.c_str());
      if (!result.failures.empty()) {
        for (const auto& f : result.failures) std::fprintf(stderr, "failed: %s\n", f.c_str());
        return 1;
      }
      return 0;
    }
    nerclust::StageFilter filter;
    filter.lists = s.lists;
    for (const auto& m : s.models) filter.models.push_back(nerclust::parse_model_kind(m));
    const auto result = nerclust::run_stage(nerclust::parse_stage(command), config, filter);
    for (const auto& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    print(result.summary, stdout);
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
