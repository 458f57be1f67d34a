#pragma once
// Related entity estimation: candidate substitutes for the object of a target
// assertion, by sub-phrase lookup, edit distance over labels, or averaged
// word vectors.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kbfix/error.hpp"
#include "kbfix/kb_store.hpp"
#include "kbfix/lexical_index.hpp"
#include "kbfix/text.hpp"

namespace kbfix {

enum class GroundTruthKind { entity, empty, unknown };

struct GroundTruth {
  GroundTruthKind kind = GroundTruthKind::unknown;
  std::string entity;

  static GroundTruth of(std::string e) { return {GroundTruthKind::entity, std::move(e)}; }
  static GroundTruth none() { return {GroundTruthKind::empty, {}}; }
  static GroundTruth unknown() { return {}; }

  bool operator==(const GroundTruth&) const = default;
};

struct TargetAssertion {
  std::string s;
  std::string p;
  Term o;
  GroundTruth gt;

  Triple triple() const { return {s, p, o}; }
  std::string id() const { return s + "|" + p + "|" + o.value; }
  bool operator==(const TargetAssertion&) const = default;
};

struct Candidate {
  std::string entity;
  double score = 0.0;

  bool operator==(const Candidate&) const = default;
};

struct CandidateList {
  TargetAssertion target;
  std::vector<Candidate> entities;
  std::size_t k = 0;

  bool contains(const std::string& e) const {
    return std::any_of(entities.begin(), entities.end(), [&](const Candidate& c) { return c.entity == e; });
  }
  /// 1-based rank, 0 if absent.
  std::size_t rank_of(const std::string& e) const {
    for (std::size_t i = 0; i < entities.size(); ++i) {
      if (entities[i].entity == e) return i + 1;
    }
    return 0;
  }
};

// ---------------------------------------------------------------------------
// Lexical methods

/// All contiguous token runs, longest first, left to right within a length.
inline std::vector<std::string> sub_phrases(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  const std::size_t n = tokens.size();
  out.reserve(n * (n + 1) / 2);
  for (std::size_t len = n; len >= 1; --len) {
    for (std::size_t start = 0; start + len <= n; ++start) {
      std::vector<std::string> run(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                                   tokens.begin() + static_cast<std::ptrdiff_t>(start + len));
      out.push_back(text::join(run));
    }
  }
  return out;
}

/// Repeated lookup over sub-phrases; lists are concatenated in sub-phrase
/// order, first occurrence wins, and the loop stops once k entities are held.
inline std::vector<Candidate> lookup_star(const LookupProvider& provider, std::string_view phrase, std::size_t k,
                                          const text::StopWords& stop = text::StopWords::english()) {
  if (k == 0) throw Error("lookup_star requires k >= 1");
  std::vector<Candidate> out;
  std::set<std::string> seen;
  for (const auto& sub : sub_phrases(text::normalize_phrase(phrase, stop))) {
    std::vector<LookupHit> hits;
    try {
      hits = provider.lookup(sub, k);
    } catch (const LookupError&) {
      throw;
    } catch (const std::exception& e) {
      throw LookupError(sub, e.what());
    }
    for (auto& h : hits) {
      if (out.size() == k) break;
      if (seen.insert(h.entity).second) out.push_back({std::move(h.entity), h.score});
    }
    if (out.size() == k) break;
  }
  return out;
}

/// Levenshtein distance over code points.
inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  const auto x = text::code_points(a);
  const auto y = text::code_points(b);
  if (x.empty()) return y.size();
  std::vector<std::size_t> row(y.size() + 1);
  for (std::size_t j = 0; j <= y.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (x[i - 1] == y[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[y.size()];
}

/// Entities by ascending minimum edit distance between the normalized phrase
/// and any normalized label; ties by entity id. Score is the negated distance.
inline std::vector<Candidate> edit_candidates(const KnowledgeBase& kb, std::string_view phrase, std::size_t k,
                                              const text::StopWords& stop = text::StopWords::english()) {
  if (k == 0) throw Error("edit_candidates requires k >= 1");
  const std::string query = text::join(text::normalize_phrase(phrase, stop));
  std::vector<std::pair<std::size_t, std::string>> rows;
  for (const auto& [e, labels] : kb.all_labels()) {
    if (labels.empty()) continue;
    std::size_t best = SIZE_MAX;
    for (const auto& l : labels) best = std::min(best, edit_distance(query, text::join(text::normalize_phrase(l, stop))));
    rows.emplace_back(best, e);
  }
  const std::size_t keep = std::min(k, rows.size());
  std::partial_sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(keep), rows.end());
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < keep; ++i) out.push_back({rows[i].second, -static_cast<double>(rows[i].first)});
  return out;
}

// ---------------------------------------------------------------------------
// Word vectors

class WordVecModel {
 public:
  WordVecModel() = default;
  explicit WordVecModel(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw Error("word vector dimension must be positive");
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }

  void add(std::string token, std::vector<double> v) {
    if (dim_ == 0) dim_ = v.size();
    if (v.size() != dim_ || dim_ == 0) {
      throw Error("vector for '" + token + "' has dimension " + std::to_string(v.size()) + ", expected " +
                  std::to_string(dim_));
    }
    vectors_[text::fold(token)] = std::move(v);
  }

  const std::vector<double>* find(const std::string& folded_token) const {
    auto it = vectors_.find(folded_token);
    return it == vectors_.end() ? nullptr : &it->second;
  }

  /// `token v1 ... vd` per line; an optional `count dim` header is skipped.
  static WordVecModel load(std::istream& in, const std::string& source = "<vectors>") {
    WordVecModel m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      detail::strip_cr(line);
      if (text::trim(line).empty()) continue;
      std::istringstream ls(line);
      std::string token;
      ls >> token;
      std::vector<double> v;
      std::string num;
      while (ls >> num) {
        try {
          std::size_t used = 0;
          v.push_back(std::stod(num, &used));
          if (used != num.size()) throw std::invalid_argument(num);
        } catch (const std::exception&) {
          throw ParseError(source, lineno, "bad number '" + num + "'");
        }
      }
      if (lineno == 1 && v.size() == 1 && m.size() == 0) {
        bool header = std::all_of(token.begin(), token.end(), [](unsigned char c) { return std::isdigit(c); });
        if (header) continue;
      }
      if (v.empty()) throw ParseError(source, lineno, "token without vector");
      try {
        m.add(token, std::move(v));
      } catch (const Error& e) {
        throw ParseError(source, lineno, e.what());
      }
    }
    return m;
  }

  static WordVecModel load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open word-vector file '" + path + "'");
    return load(in, path);
  }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

/// Mean of in-vocabulary token vectors; the zero vector when none are known.
inline std::vector<double> phrase_vector(const WordVecModel& model, std::string_view phrase,
                                         const text::StopWords& stop = text::StopWords::english()) {
  std::vector<double> sum(model.dim(), 0.0);
  std::size_t n = 0;
  for (const auto& tok : text::normalize_phrase(phrase, stop)) {
    if (const auto* v = model.find(tok)) {
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += (*v)[i];
      ++n;
    }
  }
  if (n > 0) {
    for (auto& x : sum) x /= static_cast<double>(n);
  }
  return sum;
}

/// 0 when either vector is zero.
inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Entities by descending best-label cosine similarity; ties by entity id.
inline std::vector<Candidate> wordvec_candidates(const WordVecModel& model, const KnowledgeBase& kb,
                                                 std::string_view phrase, std::size_t k,
                                                 const text::StopWords& stop = text::StopWords::english()) {
  if (k == 0) throw Error("wordvec_candidates requires k >= 1");
  const auto q = phrase_vector(model, phrase, stop);
  std::vector<Candidate> rows;
  for (const auto& [e, labels] : kb.all_labels()) {
    if (labels.empty()) continue;
    double best = -2.0;
    for (const auto& l : labels) best = std::max(best, cosine(q, phrase_vector(model, l, stop)));
    rows.push_back({e, best});
  }
  const std::size_t keep = std::min(k, rows.size());
  std::partial_sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(keep), rows.end(),
                    [](const Candidate& a, const Candidate& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.entity < b.entity;
                    });
  rows.resize(keep);
  return rows;
}

// ---------------------------------------------------------------------------
// Per-target candidate generation

enum class CandidateMethod { lookup, edit, wordvec };

inline std::string_view to_string(CandidateMethod m) {
  switch (m) {
    case CandidateMethod::lookup: return "lookup";
    case CandidateMethod::edit: return "edit";
    case CandidateMethod::wordvec: return "wordvec";
  }
  return "?";
}

inline CandidateMethod parse_candidate_method(std::string_view s) {
  if (s == "lookup") return CandidateMethod::lookup;
  if (s == "edit") return CandidateMethod::edit;
  if (s == "wordvec") return CandidateMethod::wordvec;
  throw Error("unknown candidate method '" + std::string(s) + "'");
}

inline std::size_t default_k(CandidateMethod m) { return m == CandidateMethod::edit ? 76 : 30; }

/// The literal itself, or the first label of an entity object (its id when unlabeled).
inline std::string target_phrase(const KnowledgeBase& kb, const TargetAssertion& t) {
  if (t.o.is_literal()) return t.o.value;
  const auto& labels = kb.labels(t.o.value);
  return labels.empty() ? t.o.value : labels.front();
}

struct CandidateSources {
  const KnowledgeBase* kb = nullptr;
  const LookupProvider* lookup = nullptr;
  const WordVecModel* vectors = nullptr;
  text::StopWords stop = text::StopWords::english();
};

/// RE_t for one target. An entity object is never proposed as its own substitute.
inline CandidateList candidates_for(const TargetAssertion& t, CandidateMethod method, std::size_t k,
                                    const CandidateSources& src) {
  if (!src.kb) throw Error("candidate generation needs a knowledge base");
  const std::string phrase = target_phrase(*src.kb, t);
  const std::size_t want = t.o.is_entity() ? k + 1 : k;
  std::vector<Candidate> raw;
  switch (method) {
    case CandidateMethod::lookup:
      if (!src.lookup) throw Error("lookup method needs a lookup provider");
      raw = lookup_star(*src.lookup, phrase, want, src.stop);
      break;
    case CandidateMethod::edit:
      raw = edit_candidates(*src.kb, phrase, want, src.stop);
      break;
    case CandidateMethod::wordvec:
      if (!src.vectors) throw Error("wordvec method needs a word-vector model");
      raw = wordvec_candidates(*src.vectors, *src.kb, phrase, want, src.stop);
      break;
  }
  CandidateList out{t, {}, k};
  for (auto& c : raw) {
    if (t.o.is_entity() && c.entity == t.o.value) continue;
    if (out.entities.size() == k) break;
    out.entities.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON Lines I/O

inline nlohmann::json to_json(const TargetAssertion& t) {
  nlohmann::json j{{"s", t.s}, {"p", t.p}, {"o", t.o.value}, {"o_kind", std::string(to_string(t.o.kind))}};
  switch (t.gt.kind) {
    case GroundTruthKind::entity: j["gt"] = t.gt.entity; break;
    case GroundTruthKind::empty: j["gt"] = ""; break;
    case GroundTruthKind::unknown: j["gt"] = nullptr; break;
  }
  return j;
}

inline TargetAssertion target_from_json(const nlohmann::json& j) {
  TargetAssertion t;
  t.s = j.at("s").get<std::string>();
  t.p = j.at("p").get<std::string>();
  t.o = Term{parse_term_kind(j.at("o_kind").get<std::string>()), j.at("o").get<std::string>()};
  if (t.s.empty() || t.p.empty()) throw Error("target with empty subject or property");
  auto it = j.find("gt");
  if (it == j.end() || it->is_null()) {
    t.gt = GroundTruth::unknown();
  } else if (it->get<std::string>().empty()) {
    t.gt = GroundTruth::none();
  } else {
    t.gt = GroundTruth::of(it->get<std::string>());
  }
  return t;
}

inline std::vector<TargetAssertion> read_targets(std::istream& in, const std::string& source = "<targets>") {
  std::vector<TargetAssertion> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(target_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return out;
}

inline std::vector<TargetAssertion> read_targets_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open target file '" + path + "'");
  return read_targets(in, path);
}

inline void write_targets(std::ostream& out, const std::vector<TargetAssertion>& targets) {
  for (const auto& t : targets) out << to_json(t).dump() << '\n';
}

inline nlohmann::json to_json(const CandidateList& c) {
  nlohmann::json j = to_json(c.target);
  nlohmann::json list = nlohmann::json::array();
  for (std::size_t i = 0; i < c.entities.size(); ++i) {
    list.push_back({{"entity", c.entities[i].entity}, {"score", c.entities[i].score}, {"rank", i + 1}});
  }
  j["k"] = c.k;
  j["candidates"] = std::move(list);
  return j;
}

inline CandidateList candidate_list_from_json(const nlohmann::json& j) {
  CandidateList c;
  c.target = target_from_json(j);
  c.k = j.value("k", std::size_t{0});
  for (const auto& e : j.at("candidates")) c.entities.push_back({e.at("entity").get<std::string>(), e.at("score").get<double>()});
  if (c.k == 0) c.k = c.entities.size();
  return c;
}

inline void write_candidates(std::ostream& out, const std::vector<CandidateList>& lists) {
  for (const auto& c : lists) out << to_json(c).dump() << '\n';
}

inline std::vector<CandidateList> read_candidates(std::istream& in, const std::string& source = "<candidates>") {
  std::vector<CandidateList> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(candidate_list_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return out;
}

}  // namespace kbfix
