#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace nerclust {

// Half-open character range [begin, end) into Document::text.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const Span&) const = default;
};

struct Sentence {
  Span span;
  std::vector<Span> tokens;

  bool operator==(const Sentence&) const = default;
};

// A raw article plus its segmentation. Token surfaces are views into text,
// so a segmented document is lossless by construction.
struct Document {
  std::string id;
  std::string text;
  std::vector<Sentence> sentences;

  std::string_view surface(Span s) const { return std::string_view(text).substr(s.begin, s.size()); }
  std::string_view token(std::size_t sentence, std::size_t index) const {
    return surface(sentences[sentence].tokens[index]);
  }
  std::vector<std::string> sentence_tokens(std::size_t sentence) const;
  std::size_t token_count() const;
};

enum class CorpusFormat { Jsonl, TextDirectory };

CorpusFormat parse_corpus_format(std::string_view name);
std::string_view to_string(CorpusFormat format);

struct Corpus {
  std::vector<Document> documents;
  std::string source_path;
  CorpusFormat format = CorpusFormat::Jsonl;
};

// Reads one Document per article. Ids come from the `id` field (jsonl) or the
// file stem (directory of *.txt, lexicographic filename order). Documents are
// returned unsegmented.
Corpus load_corpus(const std::string& path, CorpusFormat format);

// Parses JSONL text directly; `origin` is used in error messages.
std::vector<Document> parse_jsonl_corpus(std::string_view contents, std::string_view origin = "<input>");

// True for tokens whose trailing period belongs to the word: the fixed guard
// list (Mr., Corp., U.S., ...) and capital initials such as "H." or "U.K.".
bool is_abbreviation(std::string_view word);

// Fills sentences and tokens from text. Sentences end at . ! ? (optionally
// followed by closing quotes/brackets) when followed by whitespace and an
// uppercase letter, or by end of text; abbreviations never end a sentence.
// Tokens are whitespace-separated chunks with leading and trailing ASCII
// punctuation split off one character at a time, except abbreviation periods;
// a trailing possessive 's becomes its own token.
Document segment(Document document);
void segment_corpus(Corpus& corpus);

// Raw corpus in the input JSONL format: {id, text} per line.
std::string write_corpus_jsonl(const Corpus& corpus);

// Segmented corpus persistence: {id, text, sentences: [[b,e],...],
// tokens: [[[b,e],...],...]} per line.
std::string write_segmented_jsonl(const Corpus& corpus);
Corpus read_segmented_jsonl(const std::string& path);

}  // namespace nerclust
