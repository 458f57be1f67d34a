#pragma once
// Text normalization shared by the lexical index and the relatedness methods.
//
// All comparisons happen on NFC-normalized, case-folded UTF-8. Tokens are
// maximal runs of letters, digits and combining marks; everything else
// separates tokens.

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kbfix/error.hpp"

namespace kbfix::text {

inline icu::UnicodeString to_unicode(std::string_view s) {
  return icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
}

inline std::string to_utf8(const icu::UnicodeString& u) {
  std::string out;
  u.toUTF8String(out);
  return out;
}

/// NFC normalization followed by full Unicode case folding.
inline std::string fold(std::string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
  icu::UnicodeString u = to_unicode(s);
  u.foldCase();
  icu::UnicodeString normalized = nfc->normalize(u, status);
  if (U_FAILURE(status)) throw Error("NFC normalization failed");
  return to_utf8(normalized);
}

inline std::string_view trim(std::string_view s) {
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::u32string code_points(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  int32_t i = 0;
  const auto n = static_cast<int32_t>(s.size());
  const auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
  while (i < n) {
    UChar32 c;
    U8_NEXT(bytes, i, n, c);
    out.push_back(c < 0 ? 0xFFFD : static_cast<char32_t>(c));
  }
  return out;
}

/// Folds, then splits into word tokens.
inline std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> tokens;
  const std::string folded = fold(s);
  std::string current;
  int32_t i = 0;
  const auto n = static_cast<int32_t>(folded.size());
  const auto* bytes = reinterpret_cast<const uint8_t*>(folded.data());
  while (i < n) {
    const int32_t start = i;
    UChar32 c;
    U8_NEXT(bytes, i, n, c);
    const bool word = c >= 0 && (u_isalnum(c) || (U_GET_GC_MASK(c) & U_GC_M_MASK) != 0);
    if (word) {
      current.append(folded, static_cast<std::size_t>(start), static_cast<std::size_t>(i - start));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

inline std::string join(const std::vector<std::string>& tokens, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.append(sep);
    out.append(tokens[i]);
  }
  return out;
}

// English stop-word list, version en-1.
inline constexpr std::string_view kStopWordsVersion = "en-1";

class StopWords {
 public:
  StopWords() : StopWords(default_words()) {}
  StopWords(std::initializer_list<std::string_view> words) {
    for (auto w : words) words_.insert(fold(w));
  }
  explicit StopWords(const std::vector<std::string>& words) {
    for (const auto& w : words) words_.insert(fold(w));
  }

  static StopWords none() { return StopWords(std::vector<std::string>{}); }

  /// One word per line; blank lines and '#' comments ignored.
  static StopWords from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open stop-word file '" + path + "'");
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
      auto w = trim(line);
      if (w.empty() || w.front() == '#') continue;
      words.emplace_back(w);
    }
    return StopWords(words);
  }

  bool contains(std::string_view folded_token) const { return words_.count(std::string(folded_token)) > 0; }
  std::size_t size() const { return words_.size(); }

  static const StopWords& english() {
    static const StopWords instance;
    return instance;
  }

 private:
  static std::vector<std::string> default_words() {
    return {"a",     "about", "above", "after", "again", "against", "all",   "am",    "an",    "and",
            "any",   "are",   "as",    "at",    "be",    "because", "been",  "before", "being", "below",
            "between", "both", "but",  "by",    "can",   "could",   "did",   "do",    "does",  "doing",
            "down",  "during", "each", "few",   "for",   "from",    "further", "had", "has",   "have",
            "having", "he",   "her",   "here",  "hers",  "herself", "him",   "himself", "his", "how",
            "i",     "if",    "in",    "into",  "is",    "it",      "its",   "itself", "just", "me",
            "more",  "most",  "my",    "myself", "no",   "nor",     "not",   "now",   "of",    "off",
            "on",    "once",  "only",  "or",    "other", "our",     "ours",  "ourselves", "out", "over",
            "own",   "same",  "she",   "should", "so",   "some",    "such",  "than",  "that",  "the",
            "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those",
            "through", "to",  "too",   "under", "until", "up",      "very",  "was",   "we",    "were",
            "what",  "when",  "where", "which", "while", "who",     "whom",  "why",   "will",  "with",
            "would", "you",   "your",  "yours", "yourself", "yourselves"};
  }

  std::set<std::string> words_;
};

/// Folded tokens with stop words removed, in original order.
inline std::vector<std::string> normalize_phrase(std::string_view phrase,
                                                 const StopWords& stop = StopWords::english()) {
  auto tokens = tokenize(phrase);
  std::erase_if(tokens, [&](const std::string& t) { return stop.contains(t); });
  return tokens;
}

}  // namespace kbfix::text
