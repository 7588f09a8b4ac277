#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "nerclust/corpus.hpp"

namespace nerclust {

enum class EntityType { Person, Organization, Location, Misc, Time, Date, Money, Percent };

// "PER", "ORG", "LOC", ... Accepts the long Stanford forms (PERSON, ...) too.
std::optional<EntityType> parse_entity_type(std::string_view name);
std::string_view to_string(EntityType type);

struct EntityMention {
  std::string doc_id;
  std::size_t sentence = 0;
  std::size_t begin = 0;  // token index within the sentence
  std::size_t end = 0;    // exclusive
  std::string surface;    // tokens joined by single spaces
  EntityType type = EntityType::Person;

  std::size_t length() const { return end - begin; }
  bool operator==(const EntityMention&) const = default;
};

using DocumentMentions = std::vector<EntityMention>;

struct CanonicalEntity {
  std::string canonical_name;
  EntityType type = EntityType::Person;
  std::vector<EntityMention> mentions;
  std::string entity_token;
};

inline constexpr std::string_view kPersonSuffix = "_PER";
inline constexpr std::string_view kOrganizationSuffix = "_ORG";

// "Barack H. Obama" + Person -> "Barack_H._Obama_PER".
std::string make_entity_token(std::string_view canonical_name, EntityType type);
bool is_entity_token(std::string_view token);
bool is_person_token(std::string_view token);
bool is_organization_token(std::string_view token);
// Inverse of make_entity_token: strips the suffix, underscores back to spaces.
std::string entity_display_name(std::string_view token);

// ---------------------------------------------------------------------------
// Tagging

struct ConllImport {
  std::vector<DocumentMentions> documents;  // aligned with corpus.documents
  std::vector<std::string> warnings;
};

// Token-per-line BIO file ("token<TAB>tag"), blank lines between sentences.
// "-DOCSTART-" lines open a document; an optional "# <id>" after the tag
// names it, otherwise documents are matched in corpus order. Without any
// DOCSTART line the token stream runs across the corpus documents in order.
ConllImport import_conll(const std::string& path, const Corpus& corpus);
ConllImport parse_conll(std::string_view contents, const Corpus& corpus, std::string_view origin = "<conll>");

struct Gazetteers {
  std::set<std::string, std::less<>> given_names;
  std::set<std::string, std::less<>> organizations;
  std::set<std::string, std::less<>> honorifics;    // must match case
  std::set<std::string, std::less<>> role_words;    // lowercase, e.g. "chairman"
  std::set<std::string, std::less<>> org_suffixes;  // compared without trailing '.'

  // Built-in honorifics, role words, org suffixes and a common given-name list.
  static Gazetteers defaults();
  // One entry per line; blank lines and '#' comments ignored.
  static std::set<std::string, std::less<>> load_list(const std::string& path);
};

DocumentMentions tag_heuristic(const Document& document, const Gazetteers& gazetteers);

// Keeps Person and Organization mentions, order preserved.
DocumentMentions filter_types(const DocumentMentions& mentions);

// Drops overlapping mentions within a sentence, keeping the longest, then the
// earliest. Output is in document order.
DocumentMentions resolve_overlaps(const DocumentMentions& mentions);

// ---------------------------------------------------------------------------
// Linking and rewriting

// Person mentions of one article are linked when, ignoring middle initials,
// one token sequence is a subsequence of the other and both end in the same
// surname; groups are the transitive closure. Organization mentions are never
// merged. Entities are returned in order of their first mention.
std::vector<CanonicalEntity> link_persons(const DocumentMentions& mentions);

// The pairwise relation link_persons closes over; exposed for testing.
bool persons_match(std::string_view surface_a, std::string_view surface_b);

struct TokenDocument {
  std::string id;
  std::vector<std::string> tokens;

  bool operator==(const TokenDocument&) const = default;
};

using TokenCorpus = std::vector<TokenDocument>;

// Replaces every mention span with its entity token. All other tokens are
// lowercased; sentences are concatenated into one stream.
TokenDocument rewrite_document(const Document& document, const std::vector<CanonicalEntity>& entities);

// Persistence.
std::string write_mentions_jsonl(const Corpus& corpus, const std::vector<DocumentMentions>& mentions);
std::vector<DocumentMentions> read_mentions_jsonl(const std::string& path, const Corpus& corpus);
std::string write_entities_jsonl(const Corpus& corpus, const std::vector<std::vector<CanonicalEntity>>& entities);
std::vector<std::vector<CanonicalEntity>> read_entities_jsonl(const std::string& path, const Corpus& corpus);
std::string write_token_corpus(const TokenCorpus& corpus);
TokenCorpus read_token_corpus(const std::string& path);

}  // namespace nerclust
