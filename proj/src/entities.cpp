#include "nerclust/entities.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <span>
#include <tuple>
#include <unordered_map>

#include "json.hpp"
#include "nerclust/error.hpp"
#include "nerclust/text.hpp"

namespace nerclust {

using nlohmann::json;

std::optional<EntityType> parse_entity_type(std::string_view name) {
  static const std::map<std::string_view, EntityType> kNames = {
      {"PER", EntityType::Person},       {"PERSON", EntityType::Person},
      {"ORG", EntityType::Organization}, {"ORGANIZATION", EntityType::Organization},
      {"LOC", EntityType::Location},     {"LOCATION", EntityType::Location},
      {"MISC", EntityType::Misc},        {"TIME", EntityType::Time},
      {"DATE", EntityType::Date},        {"MONEY", EntityType::Money},
      {"PERCENT", EntityType::Percent},
  };
  auto it = kNames.find(name);
  if (it == kNames.end()) return std::nullopt;
  return it->second;
}

std::string_view to_string(EntityType type) {
  switch (type) {
    case EntityType::Person: return "PER";
    case EntityType::Organization: return "ORG";
    case EntityType::Location: return "LOC";
    case EntityType::Misc: return "MISC";
    case EntityType::Time: return "TIME";
    case EntityType::Date: return "DATE";
    case EntityType::Money: return "MONEY";
    case EntityType::Percent: return "PERCENT";
  }
  return "?";
}

std::string make_entity_token(std::string_view canonical_name, EntityType type) {
  if (type != EntityType::Person && type != EntityType::Organization) {
    throw Error("entity tokens exist only for PER and ORG, got " + std::string(to_string(type)));
  }
  std::string out;
  out.reserve(canonical_name.size() + 4);
  for (char c : canonical_name) out += text::is_space(c) ? '_' : c;
  out += type == EntityType::Person ? kPersonSuffix : kOrganizationSuffix;
  return out;
}

bool is_person_token(std::string_view token) {
  return token.size() > kPersonSuffix.size() && text::ends_with(token, kPersonSuffix);
}
bool is_organization_token(std::string_view token) {
  return token.size() > kOrganizationSuffix.size() && text::ends_with(token, kOrganizationSuffix);
}
bool is_entity_token(std::string_view token) { return is_person_token(token) || is_organization_token(token); }

std::string entity_display_name(std::string_view token) {
  if (!is_entity_token(token)) return std::string(token);
  std::string out(token.substr(0, token.size() - 4));
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

// ---------------------------------------------------------------------------
// CoNLL import

namespace {

struct ConllToken {
  std::string text;
  std::optional<EntityType> type;
  bool inside = false;  // I- tag
  std::size_t line = 0;
  bool sentence_start = false;
};

struct ConllDocument {
  std::optional<std::string> id;
  std::vector<ConllToken> tokens;
};

struct Position {
  std::size_t sentence;
  std::size_t index;
};

std::vector<Position> flatten(const Document& d) {
  std::vector<Position> out;
  for (std::size_t s = 0; s < d.sentences.size(); ++s) {
    for (std::size_t i = 0; i < d.sentences[s].tokens.size(); ++i) out.push_back({s, i});
  }
  return out;
}

std::string mention_surface(const Document& d, std::size_t sentence, std::size_t b, std::size_t e) {
  std::string out;
  for (std::size_t i = b; i < e; ++i) {
    if (i > b) out += ' ';
    out += d.token(sentence, i);
  }
  return out;
}

DocumentMentions decode_bio(const Document& doc, std::span<const ConllToken> tokens,
                            const std::vector<Position>& positions, std::vector<std::string>& warnings) {
  DocumentMentions out;
  struct Open {
    EntityType type;
    std::size_t sentence;
    std::size_t begin;
  };
  std::optional<Open> run;
  std::size_t run_end = 0;
  auto close = [&] {
    if (run) {
      out.push_back({doc.id, run->sentence, run->begin, run_end,
                     mention_surface(doc, run->sentence, run->begin, run_end), run->type});
      run.reset();
    }
  };
  for (std::size_t p = 0; p < tokens.size(); ++p) {
    const auto& tok = tokens[p];
    const auto pos = positions[p];
    if (run && (tok.sentence_start || pos.sentence != run->sentence)) close();
    if (!tok.type) {
      close();
      continue;
    }
    if (tok.inside && run && run->type == *tok.type) {
      run_end = pos.index + 1;
      continue;
    }
    if (tok.inside) {
      warnings.push_back("line " + std::to_string(tok.line) + ": I-" + std::string(to_string(*tok.type)) +
                         " without preceding B/I of the same type; treated as B-" +
                         std::string(to_string(*tok.type)));
    }
    close();
    run = Open{*tok.type, pos.sentence, pos.index};
    run_end = pos.index + 1;
  }
  close();
  return out;
}

void align(const Document& doc, std::span<const ConllToken> tokens, const std::vector<Position>& positions,
           std::string_view origin) {
  const std::size_t n = std::min(tokens.size(), positions.size());
  for (std::size_t p = 0; p < n; ++p) {
    const auto corpus_tok = doc.token(positions[p].sentence, positions[p].index);
    if (corpus_tok != tokens[p].text) {
      throw Error("CoNLL alignment error in document \"" + doc.id + "\" at token " + std::to_string(p) +
                  " (sentence " + std::to_string(positions[p].sentence) + ", index " +
                  std::to_string(positions[p].index) + "): corpus has \"" + std::string(corpus_tok) +
                  "\", file has \"" + tokens[p].text + "\" (" + std::string(origin) + ":" +
                  std::to_string(tokens[p].line) + ")");
    }
  }
  if (tokens.size() != positions.size()) {
    throw Error("CoNLL alignment error in document \"" + doc.id + "\" at token " + std::to_string(n) +
                ": corpus has " + std::to_string(positions.size()) + " tokens, file has " +
                std::to_string(tokens.size()));
  }
}

}  // namespace

ConllImport parse_conll(std::string_view contents, const Corpus& corpus, std::string_view origin) {
  std::vector<ConllDocument> file_docs;
  ConllDocument stream;  // used when the file carries no DOCSTART lines
  bool saw_docstart = false;
  bool pending_break = true;

  std::size_t line_no = 0;
  for (auto line : text::split(contents, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) {
      pending_break = true;
      continue;
    }
    if (text::starts_with(text::trim(line), "-DOCSTART-")) {
      saw_docstart = true;
      ConllDocument d;
      if (auto hash = line.find('#'); hash != std::string::npos) {
        auto id = std::string(text::trim(std::string_view(line).substr(hash + 1)));
        if (!id.empty()) d.id = std::move(id);
      }
      file_docs.push_back(std::move(d));
      pending_break = true;
      continue;
    }
    std::vector<std::string> fields = text::split(line, '\t');
    if (fields.size() < 2) fields = text::split_whitespace(line);
    if (fields.size() < 2) {
      throw Error(std::string(origin) + ":" + std::to_string(line_no) + ": expected \"token<TAB>tag\"");
    }
    const std::string tag(text::trim(fields.back()));
    ConllToken tok;
    tok.text = std::string(text::trim(fields.front()));
    tok.line = line_no;
    tok.sentence_start = pending_break;
    pending_break = false;
    if (tag != "O") {
      std::optional<EntityType> type;
      if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') type = parse_entity_type(tag.substr(2));
      if (!type) throw Error(std::string(origin) + ":" + std::to_string(line_no) + ": unknown tag \"" + tag + "\"");
      tok.type = type;
      tok.inside = tag[0] == 'I';
    }
    if (saw_docstart) {
      file_docs.back().tokens.push_back(std::move(tok));
    } else {
      stream.tokens.push_back(std::move(tok));
    }
  }
  if (saw_docstart && !stream.tokens.empty()) {
    throw Error(std::string(origin) + ": tokens appear before the first -DOCSTART- line");
  }

  ConllImport result;
  result.documents.resize(corpus.documents.size());

  if (!saw_docstart) {
    std::size_t offset = 0;
    const std::span<const ConllToken> all(stream.tokens);
    for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
      const auto& doc = corpus.documents[d];
      const auto positions = flatten(doc);
      const std::size_t take = std::min(positions.size(), all.size() - offset);
      const auto slice = all.subspan(offset, take);
      align(doc, slice, positions, origin);
      result.documents[d] = decode_bio(doc, slice, positions, result.warnings);
      offset += take;
    }
    if (offset != all.size()) {
      throw Error(std::string(origin) + ": file has " + std::to_string(all.size() - offset) +
                  " tokens beyond the end of the corpus (first at line " + std::to_string(all[offset].line) + ")");
    }
    return result;
  }

  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) by_id[corpus.documents[d].id] = d;
  std::vector<bool> seen(corpus.documents.size(), false);
  std::size_t next_in_order = 0;
  for (const auto& fd : file_docs) {
    std::size_t target;
    if (fd.id) {
      auto it = by_id.find(*fd.id);
      if (it == by_id.end()) throw Error(std::string(origin) + ": unknown document id \"" + *fd.id + "\"");
      target = it->second;
    } else {
      while (next_in_order < seen.size() && seen[next_in_order]) ++next_in_order;
      if (next_in_order >= seen.size()) throw Error(std::string(origin) + ": more documents than the corpus has");
      target = next_in_order;
    }
    if (seen[target]) {
      throw Error(std::string(origin) + ": document \"" + corpus.documents[target].id + "\" appears twice");
    }
    seen[target] = true;
    const auto& doc = corpus.documents[target];
    const auto positions = flatten(doc);
    align(doc, fd.tokens, positions, origin);
    result.documents[target] = decode_bio(doc, fd.tokens, positions, result.warnings);
  }
  for (std::size_t d = 0; d < seen.size(); ++d) {
    if (!seen[d] && corpus.documents[d].token_count() > 0) {
      throw Error(std::string(origin) + ": document \"" + corpus.documents[d].id + "\" is missing from the file");
    }
  }
  return result;
}

ConllImport import_conll(const std::string& path, const Corpus& corpus) {
  return parse_conll(text::read_file(path), corpus, path);
}

// ---------------------------------------------------------------------------
// Heuristic tagger

Gazetteers Gazetteers::defaults() {
  Gazetteers g;
  g.honorifics = {"Mr.",      "Mr",       "Mrs.",      "Mrs",       "Ms.",      "Ms",        "Dr.",
                  "Dr",       "Prof.",    "Professor", "President", "CEO",      "Chairman",  "Chairwoman",
                  "Chief",    "Senator",  "Sen.",      "Rep.",      "Gov.",     "Governor",  "Judge",
                  "Justice",  "Secretary", "Director", "Founder",   "Commissioner", "Sir"};
  g.role_words = {"chairman", "chairwoman", "president", "ceo",       "executive", "director", "founder",
                  "mr.",      "mrs.",       "ms.",       "dr.",       "senator",   "judge",    "secretary",
                  "commissioner", "professor", "treasurer", "cfo",    "coo",       "chief"};
  g.org_suffixes = {"Inc",        "Corp",      "Corporation", "Ltd",         "Co",         "Company",
                    "Bank",       "University", "Committee",  "Commission",  "Group",      "Association",
                    "Institute",  "Fund",      "Partners",    "Holdings",    "Capital",    "Securities",
                    "Board",      "Council",   "Court",       "Exchange",    "LLC",        "LLP",
                    "PLC",        "plc",       "Trust",       "Agency",      "Department", "Foundation",
                    "Brothers",   "Industries", "International", "Systems",  "Airlines",   "Motors",
                    "Reserve",    "School",    "College",     "Authority",   "Bureau",     "Union"};
  g.given_names = {
      "Aaron",   "Adam",    "Alan",     "Albert",   "Alexander", "Alice",    "Allen",    "Amanda",   "Amy",
      "Andrew",  "Angela",  "Ann",      "Anna",     "Anne",      "Anthony",  "Arthur",   "Barack",   "Barbara",
      "Benjamin", "Bernard", "Betty",   "Bill",     "Bob",       "Brenda",   "Brian",    "Bruce",    "Carl",
      "Carol",   "Carolyn", "Catherine", "Charles", "Cheryl",    "Christine", "Christopher", "Colin", "Craig",
      "Cynthia", "Daniel",  "David",    "Deborah",  "Dennis",    "Diana",    "Diane",    "Donald",   "Donna",
      "Dorothy", "Douglas", "Edward",   "Elizabeth", "Emily",    "Eric",     "Eugene",   "Frank",    "Fred",
      "Gary",    "George",  "Gerald",   "Gloria",   "Graef",     "Gregory",  "Harold",   "Harry",    "Helen",
      "Henry",   "Howard",  "Ira",      "Jack",     "James",     "Jane",     "Janet",    "Jason",    "Jay",
      "Jean",    "Jeffrey", "Jennifer", "Jerry",    "Jessica",   "Joan",     "Joe",      "John",     "Jonathan",
      "Joseph",  "Joshua",  "Joyce",    "Judith",   "Julie",     "Karen",    "Kathleen", "Kenneth",  "Kevin",
      "Larry",   "Laura",   "Lawrence", "Linda",    "Lisa",      "Louis",    "Margaret", "Maria",    "Marie",
      "Mark",    "Martha",  "Martin",   "Mary",     "Matthew",   "Melissa",  "Michael",  "Michelle", "Nancy",
      "Nicholas", "Pamela", "Patricia", "Patrick",  "Paul",      "Peter",    "Philip",   "Ralph",    "Raymond",
      "Rebecca", "Richard", "Robert",   "Roger",    "Ronald",    "Rose",     "Russell",  "Ruth",     "Ryan",
      "Samuel",  "Sandra",  "Sarah",    "Scott",    "Sharon",    "Shirley",  "Stephen",  "Steven",   "Susan",
      "Teresa",  "Thomas",  "Timothy",  "Virginia", "Walter",    "Wayne",    "William",  "Willie"};
  return g;
}

std::set<std::string, std::less<>> Gazetteers::load_list(const std::string& path) {
  std::set<std::string, std::less<>> out;
  const std::string contents = text::read_file(path);
  if (!text::is_valid_utf8(contents)) throw Error("gazetteer is not valid UTF-8: " + path);
  for (const auto& line : text::split(contents, '\n')) {
    const auto entry = text::trim(line);
    if (entry.empty() || entry.front() == '#') continue;
    out.emplace(entry);
  }
  return out;
}

namespace {

bool is_capitalized(std::string_view tok) { return !tok.empty() && text::is_ascii_upper(tok.front()); }

bool is_connector(std::string_view tok) { return tok == "of" || tok == "&" || tok == "and"; }

bool is_determiner(std::string_view tok) { return tok == "The" || tok == "A" || tok == "An"; }

std::string_view strip_period(std::string_view tok) {
  if (tok.size() > 1 && tok.back() == '.') tok.remove_suffix(1);
  return tok;
}

struct Candidate {
  std::size_t sentence;
  std::size_t begin;
  std::size_t end;
  bool sentence_initial;
  bool honorific;
};

std::optional<EntityType> classify(const std::vector<std::string>& toks, std::size_t b, std::size_t e,
                                   bool honorific, const Gazetteers& g) {
  std::string surface;
  for (std::size_t i = b; i < e; ++i) {
    if (i > b) surface += ' ';
    surface += toks[i];
  }
  if (g.organizations.count(surface)) return EntityType::Organization;
  if (g.org_suffixes.count(strip_period(toks[e - 1]))) return EntityType::Organization;
  if (honorific) return EntityType::Person;
  if (g.given_names.count(toks[b])) return EntityType::Person;
  return std::nullopt;
}

}  // namespace

DocumentMentions tag_heuristic(const Document& document, const Gazetteers& g) {
  DocumentMentions found;
  std::vector<Candidate> unresolved;
  std::vector<std::vector<std::string>> sentence_tokens;
  for (std::size_t s = 0; s < document.sentences.size(); ++s) sentence_tokens.push_back(document.sentence_tokens(s));

  for (std::size_t s = 0; s < sentence_tokens.size(); ++s) {
    const auto& toks = sentence_tokens[s];
    const std::size_t n = toks.size();
    std::size_t i = 0;
    while (i < n) {
      if (!is_capitalized(toks[i])) {
        ++i;
        continue;
      }
      std::size_t j = i + 1;
      while (true) {
        if (j < n && is_capitalized(toks[j])) {
          ++j;
        } else if (j + 1 < n && is_connector(toks[j]) && is_capitalized(toks[j + 1])) {
          j += 2;
        } else {
          break;
        }
      }
      const std::size_t run_begin = i;
      const std::size_t run_end = j;
      i = j;

      std::size_t b = run_begin;
      bool honorific = run_begin > 0 && g.role_words.count(text::ascii_lower(toks[run_begin - 1])) > 0;
      while (b < run_end && g.honorifics.count(toks[b])) {
        honorific = true;
        ++b;
      }
      while (b < run_end && is_determiner(toks[b])) ++b;
      // Connectors left dangling at the front after stripping.
      while (b < run_end && is_connector(toks[b])) ++b;
      if (b >= run_end) continue;

      const bool initial = b == 0;
      auto type = classify(toks, b, run_end, honorific, g);
      std::size_t begin = b;
      if (!type && initial && run_end - b > 1) {
        type = classify(toks, b + 1, run_end, honorific, g);
        if (type) begin = b + 1;
      }
      if (type) {
        found.push_back({document.id, s, begin, run_end, mention_surface(document, s, begin, run_end), *type});
      } else {
        unresolved.push_back({s, b, run_end, initial, honorific});
      }
    }
  }

  // Second pass: document-level evidence. A candidate made only of tokens of
  // an already tagged person, ending in that person's surname, is a person;
  // a candidate repeating a tagged organization surface is that organization.
  std::vector<std::vector<std::string>> person_tokens;
  std::set<std::string, std::less<>> org_surfaces;
  for (const auto& m : found) {
    if (m.type == EntityType::Person) {
      std::vector<std::string> lowered;
      for (std::size_t k = m.begin; k < m.end; ++k) lowered.push_back(text::ascii_lower(sentence_tokens[m.sentence][k]));
      person_tokens.push_back(std::move(lowered));
    } else if (m.type == EntityType::Organization) {
      org_surfaces.insert(m.surface);
    }
  }
  auto resolve = [&](const Candidate& c, std::size_t b) -> std::optional<EntityType> {
    const auto& toks = sentence_tokens[c.sentence];
    const std::string surface = mention_surface(document, c.sentence, b, c.end);
    if (org_surfaces.count(surface)) return EntityType::Organization;
    const std::string last = text::ascii_lower(toks[c.end - 1]);
    for (const auto& person : person_tokens) {
      if (person.back() != last) continue;
      bool all = true;
      for (std::size_t k = b; k < c.end && all; ++k) {
        all = std::find(person.begin(), person.end(), text::ascii_lower(toks[k])) != person.end();
      }
      if (all) return EntityType::Person;
    }
    return std::nullopt;
  };
  for (const auto& c : unresolved) {
    std::size_t begin = c.begin;
    auto type = resolve(c, begin);
    if (!type && c.sentence_initial && c.end - c.begin > 1) {
      begin = c.begin + 1;
      type = resolve(c, begin);
    }
    if (type) found.push_back({document.id, c.sentence, begin, c.end, mention_surface(document, c.sentence, begin, c.end), *type});
  }

  std::sort(found.begin(), found.end(), [](const EntityMention& a, const EntityMention& b) {
    return std::tie(a.sentence, a.begin) < std::tie(b.sentence, b.begin);
  });
  return found;
}

DocumentMentions filter_types(const DocumentMentions& mentions) {
  DocumentMentions out;
  std::copy_if(mentions.begin(), mentions.end(), std::back_inserter(out), [](const EntityMention& m) {
    return m.type == EntityType::Person || m.type == EntityType::Organization;
  });
  return out;
}

DocumentMentions resolve_overlaps(const DocumentMentions& mentions) {
  std::vector<std::size_t> order(mentions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = mentions[a];
    const auto& y = mentions[b];
    if (x.length() != y.length()) return x.length() > y.length();
    return std::tie(x.sentence, x.begin) < std::tie(y.sentence, y.begin);
  });
  std::vector<const EntityMention*> kept;
  for (std::size_t idx : order) {
    const auto& m = mentions[idx];
    const bool overlaps = std::any_of(kept.begin(), kept.end(), [&](const EntityMention* k) {
      return k->sentence == m.sentence && m.begin < k->end && k->begin < m.end;
    });
    if (!overlaps) kept.push_back(&m);
  }
  std::sort(kept.begin(), kept.end(), [](const EntityMention* a, const EntityMention* b) {
    return std::tie(a->sentence, a->begin) < std::tie(b->sentence, b->begin);
  });
  DocumentMentions out;
  for (const auto* k : kept) out.push_back(*k);
  return out;
}

// ---------------------------------------------------------------------------
// Linking

namespace {

bool is_initial(std::string_view tok) {
  return (tok.size() == 1 && std::isalpha(static_cast<unsigned char>(tok[0]))) ||
         (tok.size() == 2 && std::isalpha(static_cast<unsigned char>(tok[0])) && tok[1] == '.');
}

std::vector<std::string> link_key(std::string_view surface) {
  std::vector<std::string> all;
  for (const auto& t : text::split_whitespace(surface)) all.push_back(text::ascii_lower(t));
  std::vector<std::string> key;
  std::copy_if(all.begin(), all.end(), std::back_inserter(key), [](const std::string& t) { return !is_initial(t); });
  return key.empty() ? all : key;
}

bool is_subsequence(const std::vector<std::string>& small, const std::vector<std::string>& big) {
  std::size_t i = 0;
  for (std::size_t j = 0; j < big.size() && i < small.size(); ++j) {
    if (small[i] == big[j]) ++i;
  }
  return i == small.size();
}

bool keys_match(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty() || a.back() != b.back()) return false;
  return a.size() <= b.size() ? is_subsequence(a, b) : is_subsequence(b, a);
}

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

bool earlier(const EntityMention& a, const EntityMention& b) {
  return std::tie(a.sentence, a.begin, a.end) < std::tie(b.sentence, b.begin, b.end);
}

}  // namespace

bool persons_match(std::string_view surface_a, std::string_view surface_b) {
  return keys_match(link_key(surface_a), link_key(surface_b));
}

std::vector<CanonicalEntity> link_persons(const DocumentMentions& input) {
  DocumentMentions mentions = input;
  std::stable_sort(mentions.begin(), mentions.end(), earlier);

  std::vector<std::size_t> persons;
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    if (mentions[i].type == EntityType::Person) persons.push_back(i);
  }
  std::vector<std::vector<std::string>> keys;
  for (std::size_t i : persons) keys.push_back(link_key(mentions[i].surface));

  DisjointSets sets(persons.size());
  for (std::size_t a = 0; a < persons.size(); ++a) {
    for (std::size_t b = a + 1; b < persons.size(); ++b) {
      if (keys_match(keys[a], keys[b])) sets.unite(a, b);
    }
  }

  // Groups are keyed by their earliest member, which is the set root.
  std::map<std::size_t, std::size_t> group_of_root;
  std::vector<CanonicalEntity> entities;
  std::vector<std::size_t> person_slot(mentions.size(), 0);
  for (std::size_t p = 0; p < persons.size(); ++p) person_slot[persons[p]] = p;

  for (std::size_t i = 0; i < mentions.size(); ++i) {
    const auto& m = mentions[i];
    if (m.type == EntityType::Organization) {
      CanonicalEntity e;
      e.canonical_name = m.surface;
      e.type = m.type;
      e.mentions.push_back(m);
      entities.push_back(std::move(e));
      continue;
    }
    if (m.type != EntityType::Person) continue;
    const std::size_t root = sets.find(person_slot[i]);
    auto [it, inserted] = group_of_root.try_emplace(root, entities.size());
    if (inserted) {
      CanonicalEntity e;
      e.type = EntityType::Person;
      entities.push_back(std::move(e));
    }
    auto& e = entities[it->second];
    e.mentions.push_back(m);
    if (m.surface.size() > e.canonical_name.size()) e.canonical_name = m.surface;
  }
  for (auto& e : entities) e.entity_token = make_entity_token(e.canonical_name, e.type);
  return entities;
}

// ---------------------------------------------------------------------------
// Rewriting

TokenDocument rewrite_document(const Document& document, const std::vector<CanonicalEntity>& entities) {
  DocumentMentions all;
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::string> token_of;
  for (const auto& e : entities) {
    for (const auto& m : e.mentions) {
      all.push_back(m);
      token_of[{m.sentence, m.begin, m.end}] = e.entity_token;
    }
  }
  const DocumentMentions kept = resolve_overlaps(all);

  TokenDocument out;
  out.id = document.id;
  std::size_t next = 0;
  for (std::size_t s = 0; s < document.sentences.size(); ++s) {
    const auto& tokens = document.sentences[s].tokens;
    for (std::size_t i = 0; i < tokens.size();) {
      if (next < kept.size() && kept[next].sentence == s && kept[next].begin == i) {
        const auto& m = kept[next];
        out.tokens.push_back(token_of.at({m.sentence, m.begin, m.end}));
        i = m.end;
        ++next;
      } else {
        out.tokens.push_back(text::ascii_lower(document.surface(tokens[i])));
        ++i;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

json mention_json(const EntityMention& m, bool with_type) {
  json j = {{"sentence", m.sentence}, {"start", m.begin}, {"end", m.end}, {"surface", m.surface}};
  if (with_type) j["type"] = std::string(to_string(m.type));
  return j;
}

EntityMention mention_from_json(const json& j, const Document& doc, std::optional<EntityType> type) {
  EntityMention m;
  m.doc_id = doc.id;
  m.sentence = j.at("sentence").get<std::size_t>();
  m.begin = j.at("start").get<std::size_t>();
  m.end = j.at("end").get<std::size_t>();
  m.surface = j.at("surface").get<std::string>();
  if (type) {
    m.type = *type;
  } else {
    auto t = parse_entity_type(j.at("type").get<std::string>());
    if (!t) throw Error("unknown entity type " + j.at("type").dump());
    m.type = *t;
  }
  if (m.sentence >= doc.sentences.size() || m.begin >= m.end || m.end > doc.sentences[m.sentence].tokens.size()) {
    throw Error("mention span out of range in document \"" + doc.id + "\"");
  }
  return m;
}

template <class Fn>
void for_each_line(const std::string& path, const Corpus& corpus, Fn&& fn) {
  const std::string contents = text::read_file(path);
  std::size_t line_no = 0;
  std::size_t doc = 0;
  for (const auto& line : text::split(contents, '\n')) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const json obj = json::parse(line);
      if (doc >= corpus.documents.size()) throw Error("more records than corpus documents");
      const auto id = obj.at("id").get<std::string>();
      if (id != corpus.documents[doc].id) {
        throw Error("record id \"" + id + "\" does not match corpus document \"" + corpus.documents[doc].id + "\"");
      }
      fn(obj, corpus.documents[doc]);
      ++doc;
    } catch (const json::exception& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (doc != corpus.documents.size()) throw Error(path + ": fewer records than corpus documents");
}

}  // namespace

std::string write_mentions_jsonl(const Corpus& corpus, const std::vector<DocumentMentions>& mentions) {
  std::string out;
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    json arr = json::array();
    for (const auto& m : mentions[d]) arr.push_back(mention_json(m, true));
    out += json{{"id", corpus.documents[d].id}, {"mentions", arr}}.dump();
    out += '\n';
  }
  return out;
}

std::vector<DocumentMentions> read_mentions_jsonl(const std::string& path, const Corpus& corpus) {
  std::vector<DocumentMentions> out;
  for_each_line(path, corpus, [&](const json& obj, const Document& doc) {
    DocumentMentions ms;
    for (const auto& j : obj.at("mentions")) ms.push_back(mention_from_json(j, doc, std::nullopt));
    out.push_back(std::move(ms));
  });
  return out;
}

std::string write_entities_jsonl(const Corpus& corpus, const std::vector<std::vector<CanonicalEntity>>& entities) {
  std::string out;
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    json arr = json::array();
    for (const auto& e : entities[d]) {
      json ms = json::array();
      for (const auto& m : e.mentions) ms.push_back(mention_json(m, false));
      arr.push_back({{"canonical_name", e.canonical_name},
                     {"type", std::string(to_string(e.type))},
                     {"entity_token", e.entity_token},
                     {"mentions", ms}});
    }
    out += json{{"id", corpus.documents[d].id}, {"entities", arr}}.dump();
    out += '\n';
  }
  return out;
}

std::vector<std::vector<CanonicalEntity>> read_entities_jsonl(const std::string& path, const Corpus& corpus) {
  std::vector<std::vector<CanonicalEntity>> out;
  for_each_line(path, corpus, [&](const json& obj, const Document& doc) {
    std::vector<CanonicalEntity> es;
    for (const auto& j : obj.at("entities")) {
      CanonicalEntity e;
      e.canonical_name = j.at("canonical_name").get<std::string>();
      auto t = parse_entity_type(j.at("type").get<std::string>());
      if (!t || (*t != EntityType::Person && *t != EntityType::Organization)) {
        throw Error("entity type must be PER or ORG");
      }
      e.type = *t;
      e.entity_token = j.at("entity_token").get<std::string>();
      for (const auto& mj : j.at("mentions")) e.mentions.push_back(mention_from_json(mj, doc, e.type));
      es.push_back(std::move(e));
    }
    out.push_back(std::move(es));
  });
  return out;
}

std::string write_token_corpus(const TokenCorpus& corpus) {
  std::string out;
  for (const auto& d : corpus) {
    out += json{{"id", d.id}, {"tokens", d.tokens}}.dump();
    out += '\n';
  }
  return out;
}

TokenCorpus read_token_corpus(const std::string& path) {
  TokenCorpus out;
  const std::string contents = text::read_file(path);
  std::size_t line_no = 0;
  for (const auto& line : text::split(contents, '\n')) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const json obj = json::parse(line);
      out.push_back({obj.at("id").get<std::string>(), obj.at("tokens").get<std::vector<std::string>>()});
    } catch (const json::exception& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.empty()) throw Error("empty token corpus: " + path);
  return out;
}

}  // namespace nerclust
