#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace nerclust::text {

inline bool is_ascii_upper(char c) { return c >= 'A' && c <= 'Z'; }
inline bool is_ascii_lower(char c) { return c >= 'a' && c <= 'z'; }
inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
// ASCII punctuation only; multi-byte characters are treated as word material.
bool is_punct(char c);

// Lowercases ASCII letters, leaves every other byte untouched.
std::string ascii_lower(std::string_view s);

bool is_valid_utf8(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_whitespace(std::string_view s);
std::string_view trim(std::string_view s);

bool ends_with(std::string_view s, std::string_view suffix);
bool starts_with(std::string_view s, std::string_view prefix);

// Whole file as bytes; throws Error if it cannot be opened.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

// 64-bit FNV-1a, stable across platforms and runs.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace nerclust::text
