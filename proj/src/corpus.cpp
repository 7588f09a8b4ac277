#include "nerclust/corpus.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <set>
#include <unordered_set>

#include "json.hpp"
#include "nerclust/error.hpp"
#include "nerclust/text.hpp"

namespace nerclust {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::string> Document::sentence_tokens(std::size_t sentence) const {
  std::vector<std::string> out;
  for (const Span& t : sentences[sentence].tokens) out.emplace_back(surface(t));
  return out;
}

std::size_t Document::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.tokens.size();
  return n;
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "jsonl") return CorpusFormat::Jsonl;
  if (name == "text-directory" || name == "dir" || name == "directory") return CorpusFormat::TextDirectory;
  throw Error("unknown corpus format '" + std::string(name) + "' (expected jsonl or text-directory)");
}

std::string_view to_string(CorpusFormat format) {
  return format == CorpusFormat::Jsonl ? "jsonl" : "text-directory";
}

namespace {

void check_unique_ids(const std::vector<Document>& docs) {
  std::unordered_set<std::string> seen;
  for (const auto& d : docs) {
    if (!seen.insert(d.id).second) throw Error("duplicate document id \"" + d.id + "\"");
  }
}

std::vector<Document> load_directory(const std::string& path) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(path)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  std::vector<Document> docs;
  for (const auto& f : files) {
    Document d;
    d.id = f.stem().string();
    d.text = text::read_file(f.string());
    if (!text::is_valid_utf8(d.text)) throw Error("file is not valid UTF-8: " + f.string());
    docs.push_back(std::move(d));
  }
  return docs;
}

}  // namespace

std::vector<Document> parse_jsonl_corpus(std::string_view contents, std::string_view origin) {
  std::vector<Document> docs;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= contents.size()) {
    auto pos = contents.find('\n', start);
    if (pos == std::string_view::npos) pos = contents.size();
    const std::string_view line = contents.substr(start, pos - start);
    start = pos + 1;
    ++line_no;
    if (text::trim(line).empty()) {
      if (pos == contents.size()) break;
      continue;
    }
    const auto where = std::string(origin) + ":" + std::to_string(line_no);
    if (!text::is_valid_utf8(line)) throw Error("malformed line " + where + ": not valid UTF-8");
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error("malformed line " + where + ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj.contains("text") || !obj["id"].is_string() ||
        !obj["text"].is_string()) {
      throw Error("malformed line " + where + ": expected string fields \"id\" and \"text\"");
    }
    Document d;
    d.id = obj["id"].get<std::string>();
    d.text = obj["text"].get<std::string>();
    docs.push_back(std::move(d));
    if (pos == contents.size()) break;
  }
  return docs;
}

Corpus load_corpus(const std::string& path, CorpusFormat format) {
  if (!fs::exists(path)) throw Error("corpus path does not exist: " + path);
  Corpus corpus;
  corpus.source_path = path;
  corpus.format = format;
  if (format == CorpusFormat::Jsonl) {
    if (!fs::is_regular_file(path)) throw Error("jsonl corpus must be a file: " + path);
    corpus.documents = parse_jsonl_corpus(text::read_file(path), path);
  } else {
    if (!fs::is_directory(path)) throw Error("text-directory corpus must be a directory: " + path);
    corpus.documents = load_directory(path);
  }
  check_unique_ids(corpus.documents);
  if (corpus.documents.empty()) throw Error("empty corpus: " + path);
  return corpus;
}

bool is_abbreviation(std::string_view word) {
  static const std::set<std::string_view> kGuard = {"Mr.",  "Mrs.", "Ms.", "Dr.", "Inc.", "Corp.", "Ltd.",
                                                    "Co.",  "St.",  "Jr.", "Sr.", "U.S."};
  if (kGuard.count(word)) return true;
  // Capital initials: "H.", "U.K.", "J.P."
  if (word.size() < 2 || word.size() % 2 != 0) return false;
  for (std::size_t i = 0; i < word.size(); i += 2) {
    if (!text::is_ascii_upper(word[i]) || word[i + 1] != '.') return false;
  }
  return true;
}

namespace {

bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

bool ends_sentence(std::string_view chunk) {
  std::size_t e = chunk.size();
  while (e > 0 && is_closer(chunk[e - 1])) --e;
  if (e == 0) return false;
  const char last = chunk[e - 1];
  if (last == '!' || last == '?') return true;
  if (last != '.') return false;
  return !is_abbreviation(chunk.substr(0, e));
}

void tokenize_chunk(std::string_view text, std::size_t b, std::size_t e, std::vector<Span>& out) {
  while (b < e && text::is_punct(text[b])) {
    out.push_back({b, b + 1});
    ++b;
  }
  std::vector<Span> trailing;
  while (e > b && text::is_punct(text[e - 1])) {
    if (text[e - 1] == '.' && is_abbreviation(text.substr(b, e - b))) break;
    trailing.push_back({e - 1, e});
    --e;
  }
  if (e > b) {
    if (e - b > 2 && text[e - 2] == '\'' && text[e - 1] == 's') {
      out.push_back({b, e - 2});
      out.push_back({e - 2, e});
    } else {
      out.push_back({b, e});
    }
  }
  out.insert(out.end(), trailing.rbegin(), trailing.rend());
}

}  // namespace

Document segment(Document document) {
  document.sentences.clear();
  const std::string_view t = document.text;

  std::vector<Span> chunks;
  for (std::size_t i = 0; i < t.size();) {
    while (i < t.size() && text::is_space(t[i])) ++i;
    const std::size_t b = i;
    while (i < t.size() && !text::is_space(t[i])) ++i;
    if (i > b) chunks.push_back({b, i});
  }

  Sentence current;
  bool open = false;
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    const Span chunk = chunks[c];
    if (!open) {
      current = Sentence{};
      current.span.begin = chunk.begin;
      open = true;
    }
    tokenize_chunk(t, chunk.begin, chunk.end, current.tokens);
    const bool last_chunk = c + 1 == chunks.size();
    const bool boundary =
        ends_sentence(t.substr(chunk.begin, chunk.size())) &&
        (last_chunk || text::is_ascii_upper(t[chunks[c + 1].begin]));
    if (boundary || last_chunk) {
      current.span.end = chunk.end;
      document.sentences.push_back(std::move(current));
      open = false;
    }
  }
  return document;
}

void segment_corpus(Corpus& corpus) {
  for (auto& d : corpus.documents) d = segment(std::move(d));
}

std::string write_corpus_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& d : corpus.documents) {
    out += json{{"id", d.id}, {"text", d.text}}.dump();
    out += '\n';
  }
  return out;
}

std::string write_segmented_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& d : corpus.documents) {
    json sentences = json::array();
    json tokens = json::array();
    for (const auto& s : d.sentences) {
      sentences.push_back({s.span.begin, s.span.end});
      json ts = json::array();
      for (const auto& tok : s.tokens) ts.push_back({tok.begin, tok.end});
      tokens.push_back(std::move(ts));
    }
    json obj = {{"id", d.id}, {"text", d.text}, {"sentences", sentences}, {"tokens", tokens}};
    out += obj.dump();
    out += '\n';
  }
  return out;
}

Corpus read_segmented_jsonl(const std::string& path) {
  Corpus corpus;
  corpus.source_path = path;
  const std::string contents = text::read_file(path);
  std::size_t line_no = 0;
  for (const auto& line : text::split(contents, '\n')) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const json obj = json::parse(line);
      Document d;
      d.id = obj.at("id").get<std::string>();
      d.text = obj.at("text").get<std::string>();
      const auto& sents = obj.at("sentences");
      const auto& toks = obj.at("tokens");
      if (sents.size() != toks.size()) throw Error("sentence/token list length mismatch");
      for (std::size_t i = 0; i < sents.size(); ++i) {
        Sentence s;
        s.span = {sents[i].at(0).get<std::size_t>(), sents[i].at(1).get<std::size_t>()};
        for (const auto& tk : toks[i]) s.tokens.push_back({tk.at(0).get<std::size_t>(), tk.at(1).get<std::size_t>()});
        if (s.span.end > d.text.size() || s.span.begin > s.span.end) throw Error("sentence span out of bounds");
        for (const auto& tk : s.tokens) {
          if (tk.begin < s.span.begin || tk.end > s.span.end || tk.begin >= tk.end) {
            throw Error("token span outside its sentence");
          }
        }
        d.sentences.push_back(std::move(s));
      }
      corpus.documents.push_back(std::move(d));
    } catch (const json::exception& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  check_unique_ids(corpus.documents);
  if (corpus.documents.empty()) throw Error("empty corpus: " + path);
  return corpus;
}

}  // namespace nerclust
