#pragma once
// Inverted token index over entity labels and anchor text, and the lookup
// provider interface shared with remote lookup services.
//
// Ranking: token-Jaccard between the normalized phrase and each indexed text
// of an entity (best text wins); ties go to the shorter best-matching text,
// then to the lexicographically smaller entity id.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kbfix/error.hpp"
#include "kbfix/kb_store.hpp"
#include "kbfix/text.hpp"

namespace kbfix {

struct LookupHit {
  std::string entity;
  double score = 0.0;

  bool operator==(const LookupHit&) const = default;
};

class LookupError : public Error {
 public:
  LookupError(std::string phrase, const std::string& why)
      : Error("lookup failed for phrase '" + phrase + "': " + why), phrase_(std::move(phrase)) {}
  const std::string& phrase() const noexcept { return phrase_; }

 private:
  std::string phrase_;
};

class LookupProvider {
 public:
  virtual ~LookupProvider() = default;
  /// At most k distinct entities, most related first.
  virtual std::vector<LookupHit> lookup(std::string_view phrase, std::size_t k) const = 0;
};

enum class IndexField { label, anchor };

inline double token_jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& t : a) inter += b.count(t);
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

class LexicalIndex : public LookupProvider {
 public:
  struct Posting {
    std::string entity;
    IndexField field;
    auto operator<=>(const Posting&) const = default;
  };

  struct IndexedText {
    std::set<std::string> tokens;
    std::size_t length = 0;  // code points of the folded text
    IndexField field = IndexField::label;
  };

  LexicalIndex() = default;

  explicit LexicalIndex(const KnowledgeBase& kb, text::StopWords stop = text::StopWords::english())
      : stop_(std::move(stop)) {
    for (const auto& [e, labels] : kb.all_labels()) {
      for (const auto& l : labels) add_text(e, l, IndexField::label);
    }
    for (const auto& [e, a] : kb.all_anchors()) add_text(e, a, IndexField::anchor);
  }

  const std::map<std::string, std::set<Posting>>& postings() const { return postings_; }
  const std::map<std::string, std::vector<IndexedText>>& texts() const { return texts_; }
  const text::StopWords& stop_words() const { return stop_; }

  struct Scored {
    double jaccard;
    std::size_t length;
  };

  /// Best (jaccard, length) over the entity's indexed texts.
  Scored score(const std::string& entity, const std::set<std::string>& phrase_tokens) const {
    Scored best{-1.0, 0};
    auto it = texts_.find(entity);
    if (it == texts_.end()) return {0.0, 0};
    for (const auto& t : it->second) {
      const double j = token_jaccard(phrase_tokens, t.tokens);
      if (j > best.jaccard || (j == best.jaccard && t.length < best.length)) best = {j, t.length};
    }
    return best;
  }

  std::vector<LookupHit> lookup(std::string_view phrase, std::size_t k) const override {
    if (k == 0) throw Error("lookup requires k >= 1");
    const auto tokens = text::normalize_phrase(phrase, stop_);
    const std::set<std::string> query(tokens.begin(), tokens.end());
    std::set<std::string> matched;
    for (const auto& t : query) {
      auto it = postings_.find(t);
      if (it == postings_.end()) continue;
      for (const auto& p : it->second) matched.insert(p.entity);
    }
    struct Row {
      std::string entity;
      Scored s;
    };
    std::vector<Row> rows;
    rows.reserve(matched.size());
    for (const auto& e : matched) rows.push_back({e, score(e, query)});
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      if (a.s.jaccard != b.s.jaccard) return a.s.jaccard > b.s.jaccard;
      if (a.s.length != b.s.length) return a.s.length < b.s.length;
      return a.entity < b.entity;
    });
    std::vector<LookupHit> hits;
    for (std::size_t i = 0; i < rows.size() && i < k; ++i) hits.push_back({rows[i].entity, rows[i].s.jaccard});
    return hits;
  }

 private:
  void add_text(const std::string& entity, const std::string& raw, IndexField field) {
    auto tokens = text::normalize_phrase(raw, stop_);
    IndexedText t;
    t.tokens.insert(tokens.begin(), tokens.end());
    t.length = text::code_points(text::fold(text::trim(raw))).size();
    t.field = field;
    for (const auto& tok : t.tokens) postings_[tok].insert({entity, field});
    texts_[entity].push_back(std::move(t));
  }

  text::StopWords stop_;
  std::map<std::string, std::set<Posting>> postings_;
  std::map<std::string, std::vector<IndexedText>> texts_;
};

inline LexicalIndex build_lexical_index(const KnowledgeBase& kb,
                                        const text::StopWords& stop = text::StopWords::english()) {
  return LexicalIndex(kb, stop);
}

}  // namespace kbfix
