#include "nerclust/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "nerclust/entities.hpp"
#include "nerclust/error.hpp"
#include "nerclust/synthbench.hpp"
#include "nerclust/text.hpp"

namespace nerclust {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kOutputDirEnv = "NERCLUST_OUTPUT_DIR";

const std::vector<std::pair<Stage, std::string_view>>& stage_names() {
  static const std::vector<std::pair<Stage, std::string_view>> names = {
      {Stage::Ingest, "ingest"}, {Stage::Tag, "tag"},         {Stage::Link, "link"},
      {Stage::Rewrite, "rewrite"}, {Stage::Train, "train"},   {Stage::Rank, "rank"},
      {Stage::Matrix, "matrix"}, {Stage::Cluster, "cluster"}, {Stage::Evaluate, "evaluate"},
      {Stage::Synth, "synth"}};
  return names;
}

}  // namespace

Stage parse_stage(std::string_view name) {
  for (const auto& [stage, n] : stage_names()) {
    if (n == name) return stage;
  }
  throw Error("unknown stage '" + std::string(name) + "'");
}

std::string_view to_string(Stage stage) {
  for (const auto& [s, n] : stage_names()) {
    if (s == stage) return n;
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Config

ConfigValues parse_config_ini(std::string_view contents, std::string_view origin) {
  std::istringstream in{std::string(contents)};
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(in);
  } catch (const CLI::Error& e) {
    throw Error(std::string(origin) + ": " + e.what());
  }
  ConfigValues values;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (item.parents.size() != 1) {
      throw Error(std::string(origin) + ": key '" + item.fullname() + "' must sit inside one [section]");
    }
    values[item.parents.front() + "." + item.name] = text::join(item.inputs, " ");
  }
  return values;
}

ConfigValues load_config_ini(const std::string& path) { return parse_config_ini(text::read_file(path), path); }

namespace {

template <class T>
T parse_integer(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw Error("config " + key + ": expected an integer, got '" + value + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw Error("config " + key + ": expected a number, got '" + value + "'");
  return out;
}

std::vector<std::string> parse_list(const std::string& value) {
  std::string normalized = value;
  for (char& c : normalized) {
    if (c == ',') c = ' ';
  }
  return text::split_whitespace(normalized);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "corpus.path",        "corpus.format",          "ner.mode",          "ner.conll",
      "ner.given_names",    "ner.organizations",      "embedding.models",  "embedding.dim",
      "embedding.window",   "embedding.negatives",    "embedding.epochs",  "embedding.learning_rate",
      "embedding.min_count", "embedding.seed",        "embedding.subsample", "embedding.threads",
      "lists.variants",     "clustering.k",           "clustering.seed",   "clustering.restarts",
      "clustering.max_iterations", "evaluation.annotations", "evaluation.ground_truth", "output.dir"};
  return keys;
}

}  // namespace

PipelineConfig PipelineConfig::from_values(const ConfigValues& values) {
  for (const auto& [key, value] : values) {
    if (!known_keys().count(key)) throw Error("unknown config key '" + key + "'");
  }
  PipelineConfig c;
  auto has = [&](const char* key) { return values.count(key) > 0; };
  auto str = [&](const char* key) -> const std::string& { return values.at(key); };

  if (has("corpus.path")) c.corpus_path = str("corpus.path");
  if (has("corpus.format")) c.corpus_format = parse_corpus_format(str("corpus.format"));
  if (has("ner.mode")) {
    const auto& m = str("ner.mode");
    if (m == "heuristic") {
      c.ner_mode = NerMode::Heuristic;
    } else if (m == "import") {
      c.ner_mode = NerMode::Import;
    } else {
      throw Error("config ner.mode: expected heuristic or import, got '" + m + "'");
    }
  }
  if (has("ner.conll")) c.conll_path = str("ner.conll");
  if (has("ner.given_names")) c.given_names_path = str("ner.given_names");
  if (has("ner.organizations")) c.organizations_path = str("ner.organizations");

  if (has("embedding.models")) {
    c.models.clear();
    for (const auto& m : parse_list(str("embedding.models"))) {
      const ModelKind kind = parse_model_kind(m);
      if (std::find(c.models.begin(), c.models.end(), kind) == c.models.end()) c.models.push_back(kind);
    }
  }
  auto size_key = [&](const char* key, std::size_t& field) {
    if (has(key)) field = parse_integer<std::size_t>(key, str(key));
  };
  auto u64_key = [&](const char* key, std::uint64_t& field) {
    if (has(key)) field = parse_integer<std::uint64_t>(key, str(key));
  };
  size_key("embedding.dim", c.embedding.dim);
  size_key("embedding.window", c.embedding.window);
  size_key("embedding.negatives", c.embedding.negatives);
  size_key("embedding.epochs", c.embedding.epochs);
  u64_key("embedding.min_count", c.embedding.min_count);
  u64_key("embedding.seed", c.embedding.seed);
  size_key("embedding.threads", c.embedding.threads);
  if (has("embedding.learning_rate") && str("embedding.learning_rate") != "default") {
    c.learning_rate = parse_double("embedding.learning_rate", str("embedding.learning_rate"));
  }
  if (has("embedding.subsample")) c.embedding.subsample = parse_double("embedding.subsample", str("embedding.subsample"));

  if (has("lists.variants")) {
    c.lists.clear();
    for (const auto& v : parse_list(str("lists.variants"))) c.lists.push_back(ListVariant::parse(v));
  }
  if (has("clustering.k")) {
    const auto& k = str("clustering.k");
    c.k = k == "auto" ? 0 : parse_integer<std::size_t>("clustering.k", k);
  }
  u64_key("clustering.seed", c.seed);
  size_key("clustering.restarts", c.restarts);
  size_key("clustering.max_iterations", c.max_iterations);
  if (has("evaluation.annotations")) c.annotations_dir = str("evaluation.annotations");
  if (has("evaluation.ground_truth")) c.ground_truth_path = str("evaluation.ground_truth");
  if (has("output.dir")) c.output_dir = str("output.dir");
  return c;
}

ConfigValues PipelineConfig::to_values() const {
  ConfigValues v;
  v["corpus.path"] = corpus_path;
  v["corpus.format"] = std::string(to_string(corpus_format));
  v["ner.mode"] = ner_mode == NerMode::Heuristic ? "heuristic" : "import";
  v["ner.conll"] = conll_path;
  v["ner.given_names"] = given_names_path;
  v["ner.organizations"] = organizations_path;
  std::vector<std::string> model_names;
  for (auto m : models) model_names.emplace_back(to_string(m));
  v["embedding.models"] = text::join(model_names, ",");
  v["embedding.dim"] = std::to_string(embedding.dim);
  v["embedding.window"] = std::to_string(embedding.window);
  v["embedding.negatives"] = std::to_string(embedding.negatives);
  v["embedding.epochs"] = std::to_string(embedding.epochs);
  v["embedding.learning_rate"] = learning_rate ? format_double(*learning_rate) : "default";
  v["embedding.min_count"] = std::to_string(embedding.min_count);
  v["embedding.seed"] = std::to_string(embedding.seed);
  v["embedding.subsample"] = format_double(embedding.subsample);
  v["embedding.threads"] = std::to_string(embedding.threads);
  std::vector<std::string> list_names;
  for (const auto& l : lists) list_names.push_back(l.name());
  v["lists.variants"] = text::join(list_names, ",");
  v["clustering.k"] = k == 0 ? "auto" : std::to_string(k);
  v["clustering.seed"] = std::to_string(seed);
  v["clustering.restarts"] = std::to_string(restarts);
  v["clustering.max_iterations"] = std::to_string(max_iterations);
  v["evaluation.annotations"] = annotations_dir;
  v["evaluation.ground_truth"] = ground_truth_path;
  v["output.dir"] = output_dir;
  return v;
}

Hyperparameters PipelineConfig::hyperparameters(ModelKind kind) const {
  Hyperparameters h = embedding;
  h.kind = kind;
  h.learning_rate = learning_rate ? *learning_rate : Hyperparameters::default_learning_rate(kind);
  return h;
}

void PipelineConfig::validate(Stage stage) const {
  auto fail = [](const std::string& what) { throw Error("invalid config: " + what); };
  auto require_path = [&](const std::string& path, const char* key) {
    if (path.empty()) fail(std::string(key) + " is not set");
    if (!fs::exists(path)) fail(std::string(key) + " does not exist: " + path);
  };
  if (output_dir.empty()) fail("output.dir is empty");
  switch (stage) {
    case Stage::Ingest:
      require_path(corpus_path, "corpus.path");
      break;
    case Stage::Tag:
      if (ner_mode == NerMode::Import) require_path(conll_path, "ner.conll");
      if (!given_names_path.empty()) require_path(given_names_path, "ner.given_names");
      if (!organizations_path.empty()) require_path(organizations_path, "ner.organizations");
      break;
    case Stage::Train:
      if (models.empty()) fail("embedding.models is empty");
      for (auto m : models) hyperparameters(m).validate();
      break;
    case Stage::Rank:
    case Stage::Matrix:
    case Stage::Cluster:
      if (lists.empty()) fail("lists.variants is empty");
      if (k == 0) {
        for (const auto& l : lists) {
          if (l.n < 10) fail("list " + l.name() + " has fewer than 10 entries while clustering.k = auto");
        }
      }
      if (restarts < 1) fail("clustering.restarts must be >= 1");
      if (max_iterations < 1) fail("clustering.max_iterations must be >= 1");
      break;
    case Stage::Evaluate:
      if (!annotations_dir.empty() && !fs::is_directory(annotations_dir)) {
        fail("evaluation.annotations is not a directory: " + annotations_dir);
      }
      if (!ground_truth_path.empty()) require_path(ground_truth_path, "evaluation.ground_truth");
      break;
    case Stage::Link:
    case Stage::Rewrite:
      break;
    case Stage::Synth:
      require_path(synth_spec_path, "--spec");
      break;
  }
}

PipelineConfig resolve_config(const std::string& config_path, const std::vector<std::string>& overrides) {
  ConfigValues values;
  if (!config_path.empty()) values = load_config_ini(config_path);
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) values["output.dir"] = env;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw Error("override '" + o + "' must look like section.key=value");
    values[std::string(text::trim(o.substr(0, eq)))] = std::string(text::trim(o.substr(eq + 1)));
  }
  return PipelineConfig::from_values(values);
}

// ---------------------------------------------------------------------------
// Stage bookkeeping

namespace {

std::string kind_name(ModelKind kind) { return std::string(to_string(kind)); }

std::string content_digest(const std::string& path) {
  if (path.empty() || !fs::exists(path)) return "absent";
  std::uint64_t h = text::fnv1a("");
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      h = text::fnv1a(f.filename().string(), h);
      h = text::fnv1a(text::read_file(f.string()), h);
    }
  } else {
    h = text::fnv1a(text::read_file(path), h);
  }
  return text::hex64(h);
}

// Memoized hash chain. Each stage instance hashes its own settings plus
// the hashes of the instances it reads.
class Hasher {
 public:
  explicit Hasher(const PipelineConfig& c) : c_(c), values_(c.to_values()) {}

  std::string get(const std::string& instance) {
    if (auto it = memo_.find(instance); it != memo_.end()) return it->second;
    std::string material = instance + "\n";
    auto key = [&](const char* k) { material += std::string(k) + "=" + values_.at(k) + "\n"; };
    auto upstream = [&](const std::string& u) { material += "<" + u + ">=" + get(u) + "\n"; };
    auto file = [&](const std::string& label, const std::string& path) {
      material += label + "#" + digest(path) + "\n";
    };

    const auto parts = text::split(instance, '_');
    const std::string& stage = parts.front();
    if (stage == "ingest") {
      key("corpus.format");
      file("corpus", c_.corpus_path);
    } else if (stage == "tag") {
      upstream("ingest");
      key("ner.mode");
      if (c_.ner_mode == NerMode::Import) file("conll", c_.conll_path);
      file("given_names", c_.given_names_path);
      file("organizations", c_.organizations_path);
    } else if (stage == "link") {
      upstream("tag");
    } else if (stage == "rewrite") {
      upstream("link");
    } else if (stage == "train") {
      upstream("rewrite");
      const ModelKind kind = parse_model_kind(parts.at(1));
      const Hyperparameters h = c_.hyperparameters(kind);
      material += "kind=" + kind_name(kind) + "\nlr=" + format_double(h.learning_rate) + "\n";
      for (const char* k : {"embedding.dim", "embedding.window", "embedding.negatives", "embedding.epochs",
                            "embedding.min_count", "embedding.seed", "embedding.subsample", "embedding.threads"}) {
        key(k);
      }
    } else if (stage == "rank") {
      upstream("rewrite");
      material += "list=" + parts.at(1) + "_" + parts.at(2) + "\n";
    } else if (stage == "matrix") {
      upstream("rank_" + parts.at(1) + "_" + parts.at(2));
      upstream("train_" + parts.at(3));
    } else if (stage == "cluster") {
      upstream("matrix_" + parts.at(1) + "_" + parts.at(2) + "_" + parts.at(3));
      for (const char* k : {"clustering.k", "clustering.seed", "clustering.restarts", "clustering.max_iterations"}) {
        key(k);
      }
    } else if (stage == "evaluate") {
      const std::string pair = parts.at(1) + "_" + parts.at(2) + "_" + parts.at(3);
      upstream("cluster_" + pair);
      if (!c_.annotations_dir.empty()) {
        file("annotations", (fs::path(c_.annotations_dir) / (pair + ".json")).string());
      }
      file("ground_truth", c_.ground_truth_path);
    } else if (stage == "synth") {
      file("spec", c_.synth_spec_path);
    } else {
      throw Error("unknown stage instance '" + instance + "'");
    }
    const std::string h = text::hex64(text::fnv1a(material));
    memo_[instance] = h;
    return h;
  }

 private:
  std::string digest(const std::string& path) {
    if (auto it = digests_.find(path); it != digests_.end()) return it->second;
    return digests_[path] = content_digest(path);
  }

  const PipelineConfig& c_;
  ConfigValues values_;
  std::map<std::string, std::string> memo_;
  std::map<std::string, std::string> digests_;
};

struct Workspace {
  const PipelineConfig& config;
  Hasher hasher;
  fs::path root;

  explicit Workspace(const PipelineConfig& c) : config(c), hasher(c), root(c.output_dir) {}

  std::string path(const std::string& name) const { return (root / name).string(); }
  std::string manifest_path(const std::string& instance) const { return (root / "stages" / (instance + ".json")).string(); }

  // Checks that `instance` ran with the inputs the current config implies.
  void require(const std::string& instance) {
    const std::string stage = text::split(instance, '_').front();
    const std::string mpath = manifest_path(instance);
    if (!fs::exists(mpath)) {
      throw Error("missing upstream artifact from stage '" + stage + "' (" + mpath + "); run `" + stage + "` first");
    }
    json m;
    try {
      m = json::parse(text::read_file(mpath));
    } catch (const json::exception& e) {
      throw Error(mpath + ": " + e.what());
    }
    for (const auto& a : m.at("artifacts")) {
      const std::string apath = path(a.get<std::string>());
      if (!fs::exists(apath)) {
        throw Error("missing upstream artifact from stage '" + stage + "' (" + apath + "); run `" + stage + "` first");
      }
    }
    const std::string recorded = m.at("config_hash").get<std::string>();
    const std::string expected = hasher.get(instance);
    if (recorded != expected && !config.force) {
      throw Error("upstream stage '" + stage + "' (" + instance + ") was produced with config hash " + recorded +
                  " but the current config implies " + expected + "; rerun it or pass --force");
    }
  }

  void record(const std::string& instance, const std::vector<std::string>& artifacts) {
    fs::create_directories(root / "stages");
    ordered_json m;
    m["stage"] = instance;
    m["config_hash"] = hasher.get(instance);
    m["artifacts"] = artifacts;
    text::write_file(manifest_path(instance), m.dump(2) + "\n");
  }

  void write(const std::string& name, const std::string& contents) {
    fs::create_directories(root);
    text::write_file(path(name), contents);
  }
};

std::vector<ModelKind> selected_models(const PipelineConfig& c, const StageFilter& f) {
  if (f.models.empty()) return c.models;
  for (auto m : f.models) {
    if (std::find(c.models.begin(), c.models.end(), m) == c.models.end()) {
      throw Error("model " + kind_name(m) + " is not listed in embedding.models");
    }
  }
  return f.models;
}

std::vector<ListVariant> selected_lists(const PipelineConfig& c, const StageFilter& f) {
  if (f.lists.empty()) return c.lists;
  std::vector<ListVariant> out;
  for (const auto& name : f.lists) {
    const auto v = ListVariant::parse(name);
    if (std::find(c.lists.begin(), c.lists.end(), v) == c.lists.end()) {
      throw Error("list " + v.name() + " is not listed in lists.variants");
    }
    out.push_back(v);
  }
  return out;
}

std::string pair_name(const ListVariant& v, ModelKind kind) { return v.name() + "_" + kind_name(kind); }

Corpus load_segmented(Workspace& ws) {
  ws.require("ingest");
  return read_segmented_jsonl(ws.path("corpus.jsonl"));
}

Gazetteers load_gazetteers(const PipelineConfig& c) {
  Gazetteers g = Gazetteers::defaults();
  if (!c.given_names_path.empty()) g.given_names = Gazetteers::load_list(c.given_names_path);
  if (!c.organizations_path.empty()) g.organizations = Gazetteers::load_list(c.organizations_path);
  return g;
}

// ---------------------------------------------------------------------------
// Stages

void stage_ingest(Workspace& ws, StageResult& r) {
  Corpus corpus = load_corpus(ws.config.corpus_path, ws.config.corpus_format);
  segment_corpus(corpus);
  std::size_t sentences = 0, tokens = 0;
  for (const auto& d : corpus.documents) {
    sentences += d.sentences.size();
    tokens += d.token_count();
  }
  ws.write("corpus.jsonl", write_segmented_jsonl(corpus));
  ws.record("ingest", {"corpus.jsonl"});
  r.summary.push_back("ingest: " + std::to_string(corpus.documents.size()) + " documents, " +
                      std::to_string(sentences) + " sentences, " + std::to_string(tokens) + " tokens -> " +
                      ws.path("corpus.jsonl"));
}

void stage_tag(Workspace& ws, StageResult& r) {
  const Corpus corpus = load_segmented(ws);
  std::vector<DocumentMentions> mentions;
  if (ws.config.ner_mode == NerMode::Import) {
    ConllImport imported = import_conll(ws.config.conll_path, corpus);
    mentions = std::move(imported.documents);
    r.warnings.insert(r.warnings.end(), imported.warnings.begin(), imported.warnings.end());
  } else {
    const Gazetteers g = load_gazetteers(ws.config);
    for (const auto& d : corpus.documents) mentions.push_back(tag_heuristic(d, g));
  }
  std::size_t total = 0, per = 0, org = 0;
  for (const auto& dm : mentions) {
    for (const auto& m : dm) {
      ++total;
      per += m.type == EntityType::Person;
      org += m.type == EntityType::Organization;
    }
  }
  ws.write("mentions.jsonl", write_mentions_jsonl(corpus, mentions));
  ws.record("tag", {"mentions.jsonl"});
  r.summary.push_back("tag: " + std::to_string(total) + " mentions (" + std::to_string(per) + " PER, " +
                      std::to_string(org) + " ORG) -> " + ws.path("mentions.jsonl"));
}

void stage_link(Workspace& ws, StageResult& r) {
  const Corpus corpus = load_segmented(ws);
  ws.require("tag");
  const auto mentions = read_mentions_jsonl(ws.path("mentions.jsonl"), corpus);
  std::vector<std::vector<CanonicalEntity>> entities;
  std::size_t total = 0;
  for (const auto& dm : mentions) {
    entities.push_back(link_persons(resolve_overlaps(filter_types(dm))));
    total += entities.back().size();
  }
  ws.write("entities.jsonl", write_entities_jsonl(corpus, entities));
  ws.record("link", {"entities.jsonl"});
  r.summary.push_back("link: " + std::to_string(total) + " canonical entities across " +
                      std::to_string(corpus.documents.size()) + " documents -> " + ws.path("entities.jsonl"));
}

void stage_rewrite(Workspace& ws, StageResult& r) {
  const Corpus corpus = load_segmented(ws);
  ws.require("link");
  const auto entities = read_entities_jsonl(ws.path("entities.jsonl"), corpus);
  TokenCorpus tokens;
  std::size_t count = 0, entity_tokens = 0;
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    tokens.push_back(rewrite_document(corpus.documents[i], entities[i]));
    count += tokens.back().tokens.size();
    for (const auto& t : tokens.back().tokens) entity_tokens += is_entity_token(t);
  }
  ws.write("rewritten.jsonl", write_token_corpus(tokens));
  ws.record("rewrite", {"rewritten.jsonl"});
  r.summary.push_back("rewrite: " + std::to_string(count) + " tokens, " + std::to_string(entity_tokens) +
                      " entity tokens -> " + ws.path("rewritten.jsonl"));
}

TokenCorpus load_rewritten(Workspace& ws) {
  ws.require("rewrite");
  return read_token_corpus(ws.path("rewritten.jsonl"));
}

void stage_train(Workspace& ws, StageResult& r, ModelKind kind, const TokenCorpus& tokens) {
  const Hyperparameters h = ws.config.hyperparameters(kind);
  const Vocabulary vocab = build_vocab(tokens, h.min_count);
  const EmbeddingModel model = train(tokens, vocab, h);
  const std::string instance = "train_" + kind_name(kind);
  const std::string model_file = "model_" + kind_name(kind) + ".txt";
  const std::string stats_file = "train_" + kind_name(kind) + ".json";

  ordered_json stats;
  stats["model_kind"] = kind_name(kind);
  stats["dim"] = h.dim;
  stats["window"] = h.window;
  stats["negatives"] = h.negatives;
  stats["epochs"] = h.epochs;
  stats["learning_rate"] = h.learning_rate;
  stats["min_count"] = h.min_count;
  stats["seed"] = h.seed;
  stats["subsample"] = h.subsample;
  stats["threads"] = h.threads;
  stats["vocab_size"] = vocab.size();
  stats["updates"] = model.stats.updates;
  stats["epoch_mean_loss"] = model.stats.epoch_mean_loss;
  stats["config_hash"] = ws.hasher.get(instance);

  ws.write(model_file, write_model_text(model));
  ws.write(stats_file, stats.dump(2) + "\n");
  ws.record(instance, {model_file, stats_file});
  char loss[64];
  std::snprintf(loss, sizeof loss, "loss %.4f -> %.4f", model.stats.epoch_mean_loss.front(),
                model.stats.epoch_mean_loss.back());
  r.summary.push_back("train " + kind_name(kind) + ": V=" + std::to_string(vocab.size()) +
                      " d=" + std::to_string(h.dim) + ", " + loss + " -> " + ws.path(model_file));
}

void stage_rank(Workspace& ws, StageResult& r, const ListVariant& v, const TokenCorpus& tokens) {
  const TopList list = rank_entities(tokens, v.kind, v.n);
  const std::string instance = "rank_" + v.name();
  const std::string file = "toplist_" + v.name() + ".json";
  ws.write(file, write_top_list_json(list, ws.hasher.get(instance)));
  ws.record(instance, {file});
  for (const auto& w : list.warnings) r.warnings.push_back(v.name() + ": " + w);
  r.summary.push_back("rank " + v.name() + ": " + std::to_string(list.entries.size()) + " entities -> " +
                      ws.path(file));
}

void stage_matrix(Workspace& ws, StageResult& r, const ListVariant& v, ModelKind kind, const EmbeddingModel& model) {
  ws.require("rank_" + v.name());
  const TopList list = read_top_list_json(ws.path("toplist_" + v.name() + ".json"));
  const SimilarityMatrix m = build_matrix(list, model);
  const std::string pair = pair_name(v, kind);
  const std::string file = "matrix_" + pair + ".tsv";
  ws.write(file, write_matrix_tsv(m));
  ws.record("matrix_" + pair, {file});
  r.summary.push_back("matrix " + pair + ": " + std::to_string(m.entities.size()) + "x" +
                      std::to_string(m.entities.size()) + " -> " + ws.path(file));
}

std::string stage_cluster(Workspace& ws, StageResult& r, const ListVariant& v, ModelKind kind) {
  const std::string pair = pair_name(v, kind);
  ws.require("matrix_" + pair);
  const SimilarityMatrix m = load_matrix_tsv(ws.path("matrix_" + pair + ".tsv"));
  const std::size_t n = m.entities.size();
  const std::size_t k = ws.config.k ? ws.config.k : choose_k(n);
  if (k > n) {
    throw Error(pair + ": k = " + std::to_string(k) + " exceeds the " + std::to_string(n) + " listed entities");
  }
  const Clustering c = kmeans(m.values, {k, ws.config.seed, ws.config.restarts, ws.config.max_iterations});
  const std::string instance = "cluster_" + pair;
  const std::string file = "clusters_" + pair + ".json";
  ws.write(file, write_clustering_json(c, m.entities, {v.name(), kind_name(kind), ws.hasher.get(instance)}));
  ws.record(instance, {file});
  char inertia[32];
  std::snprintf(inertia, sizeof inertia, "%.4f", c.inertia);
  r.summary.push_back("cluster " + pair + ": k=" + std::to_string(k) + " inertia " + inertia + " -> " +
                      ws.path(file));
  return file;
}

// Tokens absent from the ground truth (tagger inventions) share one extra group.
GroundTruth cover_truth(const GroundTruth& truth, const ClusterMembership& clusters) {
  std::size_t next = 0;
  for (const auto& [token, g] : truth) next = std::max(next, g + 1);
  GroundTruth out = truth;
  for (const auto& c : clusters.clusters) {
    for (const auto& e : c) {
      if (!out.count(e)) out[e] = next;
    }
  }
  return out;
}

struct EvaluationInputs {
  std::optional<GroundTruth> truth;
};

std::optional<MetricsReport> stage_evaluate(Workspace& ws, StageResult& r, const ListVariant& v, ModelKind kind,
                                            const EvaluationInputs& inputs) {
  const std::string pair = pair_name(v, kind);
  ws.require("cluster_" + pair);
  const ClusterMembership clusters = read_clustering_json(ws.path("clusters_" + pair + ".json"));
  std::optional<JudgeAnnotations> annotations;
  if (!ws.config.annotations_dir.empty()) {
    const auto apath = fs::path(ws.config.annotations_dir) / (pair + ".json");
    if (fs::exists(apath)) annotations = load_annotations(apath.string(), clusters);
  }
  std::optional<GroundTruth> truth;
  if (inputs.truth) truth = cover_truth(*inputs.truth, clusters);
  if (!annotations && !truth) return std::nullopt;

  MetricsReport report = evaluate(clusters, annotations ? &*annotations : nullptr, truth ? &*truth : nullptr);
  report.list_variant = v.name();
  report.model_kind = kind_name(kind);
  const std::string instance = "evaluate_" + pair;
  const std::string file = "metrics_" + pair + ".json";
  ws.write(file, write_metrics_json(report, ws.hasher.get(instance)));
  ws.record(instance, {file});
  std::string line = "evaluate " + pair + ":";
  char buf[64];
  if (report.coherence) {
    std::snprintf(buf, sizeof buf, " coherence %.3f precision %.3f coherent %.3f", report.coherence->average,
                  report.precision->value, *report.coherent_clusters);
    line += buf;
  }
  if (report.purity) {
    std::snprintf(buf, sizeof buf, " purity %.3f ARI %.3f", *report.purity, *report.ari);
    line += buf;
  }
  r.summary.push_back(line + " -> " + ws.path(file));
  return report;
}

EvaluationInputs evaluation_inputs(const PipelineConfig& c) {
  EvaluationInputs in;
  if (!c.ground_truth_path.empty()) in.truth = read_ground_truth_json(c.ground_truth_path);
  return in;
}

void write_report(Workspace& ws, const std::vector<MetricsReport>& reports, const std::vector<std::string>& failures,
                  std::string& table) {
  table = render_summary_table(reports);
  std::string txt = table;
  if (!failures.empty()) {
    txt += "\nFailed variations:\n";
    for (const auto& f : failures) txt += "  " + f + "\n";
  }
  ws.write("report.txt", txt);
  ordered_json j;
  std::string material;
  for (const auto& [key, value] : ws.config.to_values()) {
    if (key != "output.dir") material += key + "=" + value + "\n";
  }
  j["config_hash"] = text::hex64(text::fnv1a(material));
  j["reports"] = ordered_json::array();
  for (const auto& r : reports) j["reports"].push_back(ordered_json::parse(write_metrics_json(r)));
  j["failures"] = failures;
  ws.write("report.json", j.dump(2) + "\n");
}

void stage_synth(Workspace& ws, StageResult& r) {
  const BenchSpec spec = load_bench_spec(ws.config.synth_spec_path);
  const SyntheticCorpus synthetic = generate(spec);
  ws.write("synthetic_corpus.jsonl", write_corpus_jsonl(synthetic.corpus));
  ws.write("ground_truth.json", write_ground_truth_json(synthetic.truth, spec));
  ws.record("synth", {"synthetic_corpus.jsonl", "ground_truth.json"});
  r.summary.push_back("synth: G=" + std::to_string(spec.groups) + " m=" + std::to_string(spec.entities_per_group) +
                      " A=" + std::to_string(spec.articles) + " -> " + ws.path("synthetic_corpus.jsonl") + ", " +
                      ws.path("ground_truth.json"));
}

}  // namespace

std::string stage_hash(const PipelineConfig& config, std::string_view stage_instance) {
  Hasher h(config);
  return h.get(std::string(stage_instance));
}

StageResult run_stage(Stage stage, const PipelineConfig& config, const StageFilter& filter) {
  config.validate(stage);
  Workspace ws(config);
  StageResult r;
  switch (stage) {
    case Stage::Ingest:
      stage_ingest(ws, r);
      break;
    case Stage::Tag:
      stage_tag(ws, r);
      break;
    case Stage::Link:
      stage_link(ws, r);
      break;
    case Stage::Rewrite:
      stage_rewrite(ws, r);
      break;
    case Stage::Train: {
      const auto kinds = selected_models(config, filter);
      const TokenCorpus tokens = load_rewritten(ws);
      for (auto kind : kinds) stage_train(ws, r, kind, tokens);
      break;
    }
    case Stage::Rank: {
      const auto lists = selected_lists(config, filter);
      const TokenCorpus tokens = load_rewritten(ws);
      for (const auto& v : lists) stage_rank(ws, r, v, tokens);
      break;
    }
    case Stage::Matrix: {
      const auto lists = selected_lists(config, filter);
      for (auto kind : selected_models(config, filter)) {
        ws.require("train_" + kind_name(kind));
        const EmbeddingModel model = load_model_text(ws.path("model_" + kind_name(kind) + ".txt"));
        for (const auto& v : lists) stage_matrix(ws, r, v, kind, model);
      }
      break;
    }
    case Stage::Cluster: {
      const auto lists = selected_lists(config, filter);
      const auto kinds = selected_models(config, filter);
      for (const auto& v : lists) {
        for (auto kind : kinds) stage_cluster(ws, r, v, kind);
      }
      break;
    }
    case Stage::Evaluate: {
      const auto lists = selected_lists(config, filter);
      const auto kinds = selected_models(config, filter);
      const EvaluationInputs inputs = evaluation_inputs(config);
      std::vector<MetricsReport> reports;
      for (const auto& v : lists) {
        for (auto kind : kinds) {
          if (auto rep = stage_evaluate(ws, r, v, kind, inputs)) reports.push_back(std::move(*rep));
        }
      }
      if (reports.empty()) {
        r.summary.push_back("evaluate: no annotations or ground truth available; nothing evaluated");
      } else {
        std::string table;
        write_report(ws, reports, {}, table);
        r.summary.push_back("evaluate: " + std::to_string(reports.size()) + " reports -> " + ws.path("report.txt"));
      }
      break;
    }
    case Stage::Synth:
      stage_synth(ws, r);
      break;
  }
  return r;
}

ExperimentResult run_experiment(const PipelineConfig& config) {
  for (Stage s : {Stage::Ingest, Stage::Tag, Stage::Train, Stage::Rank, Stage::Evaluate}) config.validate(s);
  Workspace ws(config);
  ExperimentResult out;
  StageResult log;
  auto flush_warnings = [&] {
    out.warnings.insert(out.warnings.end(), log.warnings.begin(), log.warnings.end());
    log.warnings.clear();
  };

  try {
    stage_ingest(ws, log);
    stage_tag(ws, log);
    stage_link(ws, log);
    stage_rewrite(ws, log);
  } catch (const std::exception& e) {
    flush_warnings();
    out.failures.push_back(std::string("shared stages: ") + e.what());
    return out;
  }
  const TokenCorpus tokens = read_token_corpus(ws.path("rewritten.jsonl"));

  std::map<ModelKind, std::string> model_errors;
  std::map<ModelKind, EmbeddingModel> models;
  for (auto kind : config.models) {
    try {
      stage_train(ws, log, kind, tokens);
      models.emplace(kind, load_model_text(ws.path("model_" + kind_name(kind) + ".txt")));
    } catch (const std::exception& e) {
      model_errors[kind] = e.what();
    }
  }
  std::map<std::string, std::string> list_errors;
  for (const auto& v : config.lists) {
    try {
      stage_rank(ws, log, v, tokens);
    } catch (const std::exception& e) {
      list_errors[v.name()] = e.what();
    }
  }

  EvaluationInputs inputs;
  try {
    inputs = evaluation_inputs(config);
  } catch (const std::exception& e) {
    out.failures.push_back(std::string("ground truth: ") + e.what());
  }

  for (const auto& v : config.lists) {
    for (auto kind : config.models) {
      const std::string label = v.name() + "/" + kind_name(kind);
      if (auto it = list_errors.find(v.name()); it != list_errors.end()) {
        out.failures.push_back(label + ": rank: " + it->second);
        continue;
      }
      if (auto it = model_errors.find(kind); it != model_errors.end()) {
        out.failures.push_back(label + ": train: " + it->second);
        continue;
      }
      try {
        stage_matrix(ws, log, v, kind, models.at(kind));
        out.clustering_files.push_back(ws.path(stage_cluster(ws, log, v, kind)));
        if (auto rep = stage_evaluate(ws, log, v, kind, inputs)) out.reports.push_back(std::move(*rep));
      } catch (const std::exception& e) {
        out.failures.push_back(label + ": " + e.what());
      }
    }
  }
  flush_warnings();
  if (out.reports.empty()) {
    // No metrics available: the roll-up still records the K sizes.
    std::vector<MetricsReport> sizes;
    for (const auto& file : out.clustering_files) {
      const auto m = read_clustering_json(file);
      MetricsReport r;
      r.list_variant = m.info.list_variant;
      r.model_kind = m.info.model_kind;
      r.k = m.k;
      sizes.push_back(std::move(r));
    }
    write_report(ws, sizes, out.failures, out.table);
  } else {
    write_report(ws, out.reports, out.failures, out.table);
  }
  return out;
}

}  // namespace nerclust
