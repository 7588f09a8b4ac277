#include "nerclust/synthbench.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "json.hpp"
#include "nerclust/error.hpp"
#include "nerclust/random.hpp"
#include "nerclust/text.hpp"

namespace nerclust {

using nlohmann::json;
using nlohmann::ordered_json;

EntityType BenchSpec::group_type(std::size_t g) const {
  if (group_types.empty()) return g % 2 == 0 ? EntityType::Person : EntityType::Organization;
  return group_types[g];
}

void BenchSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error("invalid bench spec: " + what); };
  if (groups < 2) fail("groups must be >= 2");
  if (entities_per_group < 2) fail("entities_per_group must be >= 2");
  if (articles < 1) fail("articles must be >= 1");
  if (!group_types.empty() && group_types.size() != groups) fail("group_types must list one type per group");
  for (auto t : group_types) {
    if (t != EntityType::Person && t != EntityType::Organization) fail("group types must be PER or ORG");
  }
  if (sentences_per_article < 1) fail("sentences_per_article must be >= 1");
  if (mentions_per_article < 1 || mentions_per_article > sentences_per_article) {
    fail("mentions_per_article must be in [1, sentences_per_article]");
  }
  if (cast_per_article < 1 || cast_per_article > entities_per_group || cast_per_article > mentions_per_article) {
    fail("cast_per_article must be in [1, min(entities_per_group, mentions_per_article)]");
  }
  if (context_vocab_size < 1) fail("context_vocab_size must be >= 1");
  if (background_vocab_size < 1) fail("background_vocab_size must be >= 1");
  if (context_words_per_side < 1) fail("context_words_per_side must be >= 1");
  if (group_word_ratio < 0 || group_word_ratio > 1) fail("group_word_ratio must be in [0, 1]");
  if (short_mention_ratio < 0 || short_mention_ratio > 1) fail("short_mention_ratio must be in [0, 1]");
  if ((articles / groups) * cast_per_article < entities_per_group) {
    fail("too few articles to mention every entity (need articles/groups * cast_per_article >= entities_per_group)");
  }
}

std::string write_bench_spec_json(const BenchSpec& s) {
  ordered_json types = ordered_json::array();
  for (std::size_t g = 0; g < s.groups; ++g) types.push_back(std::string(to_string(s.group_type(g))));
  ordered_json j;
  j["groups"] = s.groups;
  j["entities_per_group"] = s.entities_per_group;
  j["group_types"] = types;
  j["articles"] = s.articles;
  j["sentences_per_article"] = s.sentences_per_article;
  j["mentions_per_article"] = s.mentions_per_article;
  j["cast_per_article"] = s.cast_per_article;
  j["context_vocab_size"] = s.context_vocab_size;
  j["background_vocab_size"] = s.background_vocab_size;
  j["context_words_per_side"] = s.context_words_per_side;
  j["group_word_ratio"] = s.group_word_ratio;
  j["short_mention_ratio"] = s.short_mention_ratio;
  j["shared_context"] = s.shared_context;
  j["seed"] = s.seed;
  return j.dump(2);
}

BenchSpec parse_bench_spec_json(std::string_view json_text, std::string_view origin) {
  try {
    const json j = json::parse(json_text);
    if (!j.is_object()) throw Error("bench spec must be a JSON object");
    static const std::set<std::string> known = {
        "groups", "entities_per_group", "group_types", "articles", "sentences_per_article", "mentions_per_article",
        "cast_per_article", "context_vocab_size", "background_vocab_size", "context_words_per_side",
        "group_word_ratio", "short_mention_ratio", "shared_context", "seed"};
    for (const auto& [key, value] : j.items()) {
      if (!known.count(key)) throw Error("unknown bench spec field \"" + key + "\"");
    }
    BenchSpec s;
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
    };
    get("groups", s.groups);
    get("entities_per_group", s.entities_per_group);
    get("articles", s.articles);
    get("sentences_per_article", s.sentences_per_article);
    get("mentions_per_article", s.mentions_per_article);
    get("cast_per_article", s.cast_per_article);
    get("context_vocab_size", s.context_vocab_size);
    get("background_vocab_size", s.background_vocab_size);
    get("context_words_per_side", s.context_words_per_side);
    get("group_word_ratio", s.group_word_ratio);
    get("short_mention_ratio", s.short_mention_ratio);
    get("shared_context", s.shared_context);
    get("seed", s.seed);
    if (j.contains("group_types")) {
      for (const auto& t : j["group_types"]) {
        auto type = parse_entity_type(t.get<std::string>());
        if (!type) throw Error("unknown group type " + t.dump());
        s.group_types.push_back(*type);
      }
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw Error(std::string(origin) + ": " + e.what());
  } catch (const Error& e) {
    throw Error(std::string(origin) + ": " + e.what());
  }
}

BenchSpec load_bench_spec(const std::string& path) { return parse_bench_spec_json(text::read_file(path), path); }

namespace {

// Distinct pronounceable lowercase words (three consonant-vowel syllables),
// visited in a seed-dependent order and skipping anything the tagger treats
// specially.
class WordSource {
 public:
  WordSource(std::uint64_t seed, const Gazetteers& g) : offset_(mix_seed(seed, 0) % kSpace) {
    for (const auto& n : g.given_names) excluded_.insert(text::ascii_lower(n));
    for (const auto& n : g.honorifics) excluded_.insert(text::ascii_lower(n));
    for (const auto& n : g.org_suffixes) excluded_.insert(text::ascii_lower(n));
    excluded_.insert(g.role_words.begin(), g.role_words.end());
    for (const char* w : {"of", "and", "the", "a", "an"}) excluded_.insert(w);
  }

  std::string next() {
    while (true) {
      if (index_ >= kSpace) throw Error("synthetic word space exhausted");
      const std::uint64_t code = (index_++ * kStride + offset_) % kSpace;
      std::string w = decode(code);
      if (!excluded_.count(w)) return w;
    }
  }

 private:
  static constexpr std::string_view kConsonants = "bdfgklmnprstvz";
  static constexpr std::string_view kVowels = "aeiou";
  static constexpr std::uint64_t kSyllables = 14 * 5;
  static constexpr std::uint64_t kSpace = kSyllables * kSyllables * kSyllables;
  static constexpr std::uint64_t kStride = 7919;  // coprime with kSpace

  static std::string decode(std::uint64_t code) {
    std::string w;
    for (int s = 0; s < 3; ++s) {
      const auto syl = code % kSyllables;
      code /= kSyllables;
      w += kConsonants[syl / 5];
      w += kVowels[syl % 5];
    }
    return w;
  }

  std::uint64_t offset_;
  std::uint64_t index_ = 0;
  std::set<std::string> excluded_;
};

std::string capitalize(std::string w) {
  if (!w.empty() && text::is_ascii_lower(w[0])) w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

}  // namespace

SyntheticCorpus generate(const BenchSpec& spec) {
  spec.validate();
  const Gazetteers gaz = Gazetteers::defaults();
  WordSource words(spec.seed, gaz);
  Rng naming(mix_seed(spec.seed, 1));

  SyntheticCorpus out;
  for (std::size_t i = 0; i < spec.background_vocab_size; ++i) out.background_vocab.push_back(words.next());
  if (spec.shared_context) {
    std::vector<std::string> pool;
    for (std::size_t i = 0; i < spec.groups * spec.context_vocab_size; ++i) pool.push_back(words.next());
    out.group_vocab.assign(spec.groups, pool);
  } else {
    for (std::size_t g = 0; g < spec.groups; ++g) {
      std::vector<std::string> pool;
      for (std::size_t i = 0; i < spec.context_vocab_size; ++i) pool.push_back(words.next());
      out.group_vocab.push_back(std::move(pool));
    }
  }

  const std::vector<std::string> given(gaz.given_names.begin(), gaz.given_names.end());
  static const std::vector<std::string> kOrgSuffixes = {"Corp",    "Bank",       "Group", "Holdings",
                                                        "Capital", "Securities", "Trust", "Partners"};
  for (std::size_t g = 0; g < spec.groups; ++g) {
    for (std::size_t k = 0; k < spec.entities_per_group; ++k) {
      PlantedEntity e;
      e.group = g;
      e.type = spec.group_type(g);
      if (e.type == EntityType::Person) {
        e.surname = capitalize(words.next());
        e.full_name = given[naming.below(given.size())] + " " + e.surname;
      } else {
        e.full_name = capitalize(words.next()) + " " + kOrgSuffixes[naming.below(kOrgSuffixes.size())];
      }
      e.token = make_entity_token(e.full_name, e.type);
      out.truth[e.token] = g;
      out.entities.push_back(std::move(e));
    }
  }

  const std::size_t m = spec.entities_per_group;
  const std::size_t side = spec.context_words_per_side;
  for (std::size_t a = 0; a < spec.articles; ++a) {
    Rng rng(mix_seed(spec.seed, 1000 + a));
    const std::size_t g = a % spec.groups;
    const std::size_t j = a / spec.groups;
    const auto& pool = out.group_vocab[g];

    auto word = [&]() -> const std::string& {
      if (rng.bernoulli(spec.group_word_ratio)) return pool[rng.below(pool.size())];
      return out.background_vocab[rng.below(out.background_vocab.size())];
    };

    // Early articles of each group cover the entities in order; the rest of
    // the cast is random.
    std::vector<std::size_t> cast;
    for (std::size_t t = 0; t < spec.cast_per_article; ++t) {
      const std::size_t planned = j * spec.cast_per_article + t;
      std::size_t pick;
      if (planned < m) {
        pick = planned;
      } else {
        do {
          pick = rng.below(m);
        } while (std::find(cast.begin(), cast.end(), pick) != cast.end());
      }
      cast.push_back(pick);
    }

    std::vector<std::size_t> slots(spec.sentences_per_article);
    for (std::size_t s = 0; s < slots.size(); ++s) slots[s] = s;
    for (std::size_t s = slots.size(); s > 1; --s) std::swap(slots[s - 1], slots[rng.below(s)]);
    slots.resize(spec.mentions_per_article);
    std::sort(slots.begin(), slots.end());

    std::vector<bool> mentioned(m, false);
    std::string body;
    std::size_t next_mention = 0;
    for (std::size_t s = 0; s < spec.sentences_per_article; ++s) {
      std::vector<std::string> sentence;
      if (next_mention < slots.size() && slots[next_mention] == s) {
        const std::size_t member =
            next_mention < cast.size() ? cast[next_mention] : cast[rng.below(cast.size())];
        ++next_mention;
        const auto& e = out.entities[g * m + member];
        const std::size_t left = side + rng.below(3);
        const std::size_t right = side + rng.below(3);
        for (std::size_t w = 0; w < left; ++w) sentence.push_back(word());
        const bool shorten =
            e.type == EntityType::Person && mentioned[member] && rng.bernoulli(spec.short_mention_ratio);
        sentence.push_back(shorten ? e.surname : e.full_name);
        mentioned[member] = true;
        for (std::size_t w = 0; w < right; ++w) sentence.push_back(word());
      } else {
        const std::size_t len = 2 * side + rng.below(4);
        for (std::size_t w = 0; w < len; ++w) sentence.push_back(word());
      }
      sentence.front() = capitalize(sentence.front());
      sentence.back() += ".";
      if (!body.empty()) body += ' ';
      body += text::join(sentence, " ");
    }

    char id[32];
    std::snprintf(id, sizeof id, "a%06zu", a);
    out.corpus.documents.push_back({id, std::move(body), {}});
  }
  out.corpus.source_path = "<synthetic>";
  return out;
}

std::string write_ground_truth_json(const GroundTruth& truth, const BenchSpec& spec) {
  ordered_json j;
  for (const auto& [token, group] : truth) j[token] = group;
  j["spec"] = ordered_json::parse(write_bench_spec_json(spec));
  return j.dump(2) + "\n";
}

RecoveryParams RecoveryParams::defaults() {
  RecoveryParams p;
  p.embedding.kind = ModelKind::SkipGram;
  p.embedding.dim = 50;
  p.embedding.window = 5;
  p.embedding.negatives = 5;
  p.embedding.epochs = 5;
  p.embedding.learning_rate = Hyperparameters::default_learning_rate(ModelKind::SkipGram);
  p.embedding.min_count = 5;
  p.embedding.seed = 1;
  return p;
}

TokenCorpus prepare_token_corpus(Corpus corpus, const Gazetteers& gazetteers) {
  segment_corpus(corpus);
  TokenCorpus tokens;
  for (const auto& doc : corpus.documents) {
    const auto mentions = resolve_overlaps(filter_types(tag_heuristic(doc, gazetteers)));
    tokens.push_back(rewrite_document(doc, link_persons(mentions)));
  }
  return tokens;
}

RecoveryResult run_recovery(const SyntheticCorpus& synthetic, const BenchSpec& spec, const RecoveryParams& params) {
  const TokenCorpus tokens = prepare_token_corpus(synthetic.corpus, Gazetteers::defaults());
  const Vocabulary vocab = build_vocab(tokens, params.embedding.min_count);
  const EmbeddingModel model = train(tokens, vocab, params.embedding);

  bool any_person = false, any_org = false;
  for (std::size_t g = 0; g < spec.groups; ++g) {
    (spec.group_type(g) == EntityType::Person ? any_person : any_org) = true;
  }
  const ListKind kind = any_person && any_org ? ListKind::Combined
                        : any_person          ? ListKind::Persons
                                              : ListKind::Organizations;

  RecoveryResult result;
  result.epoch_losses = model.stats.epoch_mean_loss;
  result.top_list = rank_entities(tokens, kind, spec.groups * spec.entities_per_group);
  const SimilarityMatrix matrix = build_matrix(result.top_list, model);
  result.k = params.k ? params.k : choose_k(matrix.entities.size());
  const Clustering clustering =
      kmeans(matrix.values, {result.k, params.kmeans_seed, params.restarts, 300});
  result.clusters = membership(clustering, matrix.entities);

  // Tokens the tagger invented fall into one extra "unplanted" group.
  GroundTruth truth = synthetic.truth;
  std::size_t groups = spec.groups;
  for (const auto& e : matrix.entities) {
    if (!truth.count(e)) {
      truth[e] = spec.groups;
      groups = spec.groups + 1;
    }
  }
  result.purity = purity(result.clusters, truth);
  result.ari = adjusted_rand_index(result.clusters, truth);
  result.confusion = confusion(result.clusters, truth, groups);
  return result;
}

RecoveryResult run_recovery(const BenchSpec& spec, const RecoveryParams& params) {
  return run_recovery(generate(spec), spec, params);
}

}  // namespace nerclust
