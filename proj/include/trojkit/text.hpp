#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "trojkit/error.hpp"

namespace trojkit {

struct Token {
  std::string surface;     // lowercased
  std::size_t begin = 0;   // byte offsets into the original text
  std::size_t end = 0;     // half-open

  bool operator==(const Token&) const = default;
};

using TokenStream = std::vector<Token>;

namespace detail {

// Bytes >= 0x80 are treated as word bytes so multibyte UTF-8 sequences stay
// inside a single token and offsets always land on character boundaries.
inline bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z') || c >= 0x80;
}

inline bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string ascii_lower_copy(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](char c) { return ascii_lower(c); });
  return out;
}

inline bool is_utf8_boundary(std::string_view text, std::size_t offset) {
  if (offset >= text.size()) return offset == text.size();
  return (static_cast<unsigned char>(text[offset]) & 0xc0) != 0x80;
}

}  // namespace detail

// Maximal runs of alphanumeric bytes, keeping an ASCII apostrophe when it sits
// between two word bytes ("don't"). Surfaces are ASCII-lowercased.
inline TokenStream tokenize(std::string_view text) {
  TokenStream out;
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    if (!detail::is_word_byte(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    const std::size_t begin = i;
    while (i < n) {
      const unsigned char c = static_cast<unsigned char>(text[i]);
      if (detail::is_word_byte(c)) {
        ++i;
        continue;
      }
      if (c == '\'' && i > begin && i + 1 < n &&
          detail::is_word_byte(static_cast<unsigned char>(text[i + 1]))) {
        ++i;
        continue;
      }
      break;
    }
    std::string surface;
    surface.reserve(i - begin);
    for (std::size_t k = begin; k < i; ++k)
      surface.push_back(detail::ascii_lower(text[k]));
    out.push_back(Token{std::move(surface), begin, i});
  }
  return out;
}

struct StopWordList {
  std::unordered_set<std::string> words;

  bool contains(const std::string& word) const { return words.count(word) != 0; }

  // Fixed list of common English function words (~130 entries).
  static const StopWordList& standard();

  // One word per line; entries are case-folded, blank lines skipped.
  static StopWordList from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open stop-word file: " + path);
    StopWordList list;
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() &&
             detail::is_ascii_space(static_cast<unsigned char>(line.back())))
        line.pop_back();
      std::size_t start = 0;
      while (start < line.size() &&
             detail::is_ascii_space(static_cast<unsigned char>(line[start])))
        ++start;
      if (start >= line.size()) continue;
      list.words.insert(detail::ascii_lower_copy(line.substr(start)));
    }
    if (list.words.empty()) fail("stop-word file is empty: " + path);
    return list;
  }
};

inline const StopWordList& StopWordList::standard() {
  static const StopWordList list = [] {
    static constexpr std::string_view kWords[] = {
        "a",       "about",   "above",      "after",   "again",   "against",
        "all",     "am",      "an",         "and",     "any",     "are",
        "as",      "at",      "be",         "because", "been",    "before",
        "being",   "below",   "between",    "both",    "but",     "by",
        "can",     "cannot",  "could",      "did",     "do",      "does",
        "doing",   "down",    "during",     "each",    "few",     "for",
        "from",    "further", "had",        "has",     "have",    "having",
        "he",      "her",     "here",       "hers",    "herself", "him",
        "himself", "his",     "how",        "i",       "if",      "in",
        "into",    "is",      "it",         "its",     "itself",  "just",
        "me",      "more",    "most",       "my",      "myself",  "no",
        "nor",     "not",     "now",        "of",      "off",     "on",
        "once",    "only",    "or",         "other",   "our",     "ours",
        "ourselves", "out",   "over",       "own",     "same",    "she",
        "should",  "so",      "some",       "such",    "than",    "that",
        "the",     "their",   "theirs",     "them",    "themselves", "then",
        "there",   "these",   "they",       "this",    "those",   "through",
        "to",      "too",     "under",      "until",   "up",      "very",
        "was",     "we",      "were",       "what",    "when",    "where",
        "which",   "while",   "who",        "whom",    "why",     "will",
        "with",    "would",   "you",        "your",    "yours",   "yourself",
        "yourselves"};
    StopWordList l;
    for (std::string_view w : kWords) l.words.emplace(w);
    return l;
  }();
  return list;
}

inline TokenStream filter_stopwords(const TokenStream& stream,
                                    const StopWordList& stops) {
  TokenStream out;
  out.reserve(stream.size());
  for (const Token& t : stream)
    if (!stops.contains(t.surface)) out.push_back(t);
  return out;
}

namespace detail {

inline bool is_abbreviation(std::string_view word) {
  static const std::unordered_set<std::string_view> kAbbrev = {
      "mr", "mrs", "dr", "ms", "st", "vs", "etc", "eg", "ie"};
  return kAbbrev.count(word) != 0;
}

}  // namespace detail

// Byte offsets immediately after '.', '!' or '?' followed by whitespace or the
// end of text. A '.' whose preceding word (dots stripped, case folded) is a
// known abbreviation does not end a sentence. The end of text is always the
// final boundary.
inline std::vector<std::size_t> sentence_boundaries(std::string_view text) {
  std::vector<std::size_t> out;
  const std::size_t n = text.size();
  for (std::size_t i = 0; i < n; ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (i + 1 < n &&
        !detail::is_ascii_space(static_cast<unsigned char>(text[i + 1])))
      continue;
    if (c == '.') {
      std::size_t b = i;
      while (b > 0) {
        const char p = text[b - 1];
        const bool alpha = (p >= 'a' && p <= 'z') || (p >= 'A' && p <= 'Z');
        if (!alpha && p != '.') break;
        --b;
      }
      std::string word;
      for (std::size_t k = b; k < i; ++k)
        if (text[k] != '.') word.push_back(detail::ascii_lower(text[k]));
      if (!word.empty() && detail::is_abbreviation(word)) continue;
    }
    out.push_back(i + 1);
  }
  if (out.empty() || out.back() != n) out.push_back(n);
  return out;
}

}  // namespace trojkit
