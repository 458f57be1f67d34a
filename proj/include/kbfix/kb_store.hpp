#pragma once
// In-memory knowledge base: property assertions with subject/object/property
// access paths, class assertions, an acyclic rdfs:subClassOf hierarchy with
// precomputed transitive closure, and entity labels / anchor text.
//
// A KnowledgeBase is immutable once built; use KnowledgeBaseBuilder or
// load_kb() to construct one.

#include <algorithm>
#include <compare>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "kbfix/error.hpp"

namespace kbfix {

inline constexpr std::string_view kRdfType = "rdf:type";
inline constexpr std::string_view kSubClassOf = "rdfs:subClassOf";

enum class TermKind { entity, literal };

inline std::string_view to_string(TermKind k) { return k == TermKind::entity ? "entity" : "literal"; }

inline TermKind parse_term_kind(std::string_view s) {
  if (s == "entity") return TermKind::entity;
  if (s == "literal") return TermKind::literal;
  throw Error("term kind must be 'entity' or 'literal', got '" + std::string(s) + "'");
}

struct Term {
  TermKind kind = TermKind::entity;
  std::string value;

  static Term entity(std::string id) { return {TermKind::entity, std::move(id)}; }
  static Term literal(std::string lexical) { return {TermKind::literal, std::move(lexical)}; }

  bool is_entity() const { return kind == TermKind::entity; }
  bool is_literal() const { return kind == TermKind::literal; }

  auto operator<=>(const Term&) const = default;
};

struct Triple {
  std::string s;
  std::string p;
  Term o;

  static Triple entity(std::string s, std::string p, std::string o) {
    return {std::move(s), std::move(p), Term::entity(std::move(o))};
  }
  static Triple literal(std::string s, std::string p, std::string o) {
    return {std::move(s), std::move(p), Term::literal(std::move(o))};
  }

  auto operator<=>(const Triple&) const = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::size_t h = std::hash<std::string>{}(t.s);
    h = h * 1000003u ^ std::hash<std::string>{}(t.p);
    h = h * 1000003u ^ std::hash<std::string>{}(t.o.value);
    return h * 31u + static_cast<std::size_t>(t.o.kind);
  }
};

class KnowledgeBaseBuilder;

class KnowledgeBase {
 public:
  KnowledgeBase() = default;

  const std::vector<Triple>& property_assertions() const { return triples_; }
  std::size_t size() const { return triples_.size(); }

  const std::set<std::string>& entities() const { return entities_; }
  const std::set<std::string>& properties() const { return properties_; }
  const std::set<std::string>& classes() const { return classes_; }
  const std::set<std::string>& top_classes() const { return top_classes_; }

  bool has_entity(const std::string& e) const { return entities_.count(e) > 0; }

  /// Declared triple membership; no property reasoning.
  bool entails_property(const Triple& t) const { return triple_set_.count(t) > 0; }
  bool entails_property(const std::string& s, const std::string& p, const Term& o) const {
    return entails_property(Triple{s, p, o});
  }

  /// Declared or inferred through rdfs:subClassOf.
  bool entails_type(const std::string& e, const std::string& c) const {
    auto it = declared_classes_.find(e);
    if (it == declared_classes_.end()) return false;
    for (const auto& d : it->second) {
      if (d == c) return true;
      if (ancestors(d).count(c)) return true;
    }
    return false;
  }

  const std::vector<Triple>& assertions_of_property(const std::string& p) const { return lookup(by_property_, p); }
  const std::vector<Triple>& assertions_of_subject(const std::string& e) const { return lookup(by_subject_, e); }
  /// Entity-object triples only.
  const std::vector<Triple>& assertions_of_object(const std::string& e) const { return lookup(by_object_, e); }

  const std::set<std::string>& declared_classes(const std::string& e) const {
    auto it = declared_classes_.find(e);
    return it == declared_classes_.end() ? empty_set() : it->second;
  }

  /// Strict ancestors of a class under the subClassOf closure.
  const std::set<std::string>& ancestors(const std::string& c) const {
    auto it = ancestors_.find(c);
    return it == ancestors_.end() ? empty_set() : it->second;
  }

  const std::map<std::string, std::set<std::string>>& subclass_edges() const { return superclasses_; }

  /// C(e): every class e is entailed to be an instance of.
  std::set<std::string> classes_of(const std::string& e) const {
    std::set<std::string> out;
    for (const auto& d : declared_classes(e)) {
      out.insert(d);
      const auto& anc = ancestors(d);
      out.insert(anc.begin(), anc.end());
    }
    return out;
  }

  /// Declared classes of e that are not strict ancestors of another declared class of e.
  std::set<std::string> specific_classes(const std::string& e) const {
    const auto& declared = declared_classes(e);
    std::set<std::string> out;
    for (const auto& c : declared) {
      bool subsumes_other = std::any_of(declared.begin(), declared.end(), [&](const std::string& other) {
        return other != c && ancestors(other).count(c) > 0;
      });
      if (!subsumes_other) out.insert(c);
    }
    return out;
  }

  /// Strict ancestors of the specific classes, minus top classes and the specific classes themselves.
  std::set<std::string> general_classes(const std::string& e) const {
    const auto specific = specific_classes(e);
    std::set<std::string> out;
    for (const auto& c : specific) {
      for (const auto& a : ancestors(c)) {
        if (!top_classes_.count(a) && !specific.count(a)) out.insert(a);
      }
    }
    return out;
  }

  const std::vector<std::string>& labels(const std::string& e) const {
    static const std::vector<std::string> none;
    auto it = labels_.find(e);
    return it == labels_.end() ? none : it->second;
  }
  const std::map<std::string, std::vector<std::string>>& all_labels() const { return labels_; }

  std::optional<std::string> anchor_text(const std::string& e) const {
    auto it = anchors_.find(e);
    if (it == anchors_.end()) return std::nullopt;
    return it->second;
  }
  const std::map<std::string, std::string>& all_anchors() const { return anchors_; }

  /// Copy of this KB with the given property assertions retracted.
  KnowledgeBase without(const std::vector<Triple>& retracted) const;

 private:
  friend class KnowledgeBaseBuilder;

  static const std::set<std::string>& empty_set() {
    static const std::set<std::string> none;
    return none;
  }
  static const std::vector<Triple>& lookup(const std::unordered_map<std::string, std::vector<Triple>>& index,
                                           const std::string& key) {
    static const std::vector<Triple> none;
    auto it = index.find(key);
    return it == index.end() ? none : it->second;
  }

  std::vector<Triple> triples_;
  std::unordered_set<Triple, TripleHash> triple_set_;
  std::unordered_map<std::string, std::vector<Triple>> by_property_;
  std::unordered_map<std::string, std::vector<Triple>> by_subject_;
  std::unordered_map<std::string, std::vector<Triple>> by_object_;

  std::map<std::string, std::set<std::string>> declared_classes_;
  std::map<std::string, std::set<std::string>> superclasses_;
  std::map<std::string, std::set<std::string>> ancestors_;
  std::map<std::string, std::vector<std::string>> labels_;
  std::map<std::string, std::string> anchors_;

  std::set<std::string> entities_;
  std::set<std::string> properties_;
  std::set<std::string> classes_;
  std::set<std::string> top_classes_;
};

class KnowledgeBaseBuilder {
 public:
  KnowledgeBaseBuilder() : top_classes_{"owl:Thing", "rdfs:Resource"} {}

  KnowledgeBaseBuilder& top_classes(std::set<std::string> tops) {
    top_classes_ = std::move(tops);
    return *this;
  }

  /// Routes rdf:type and rdfs:subClassOf triples to the TBox/ABox class structures.
  KnowledgeBaseBuilder& add(const Triple& t) {
    if (t.s.empty() || t.p.empty()) throw Error("triple with empty subject or property");
    if (t.o.is_entity() && t.o.value.empty()) throw Error("entity object with empty id");
    if (t.p == kRdfType && t.o.is_entity()) return add_type(t.s, t.o.value);
    if (t.p == kSubClassOf && t.o.is_entity()) return add_subclass(t.s, t.o.value);
    triples_.insert(t);
    return *this;
  }
  KnowledgeBaseBuilder& add(std::string s, std::string p, std::string o, TermKind kind = TermKind::entity) {
    return add(Triple{std::move(s), std::move(p), Term{kind, std::move(o)}});
  }
  KnowledgeBaseBuilder& add_type(const std::string& e, const std::string& c) {
    types_[e].insert(c);
    classes_.insert(c);
    return *this;
  }
  KnowledgeBaseBuilder& add_subclass(const std::string& sub, const std::string& super) {
    superclasses_[sub].insert(super);
    classes_.insert(sub);
    classes_.insert(super);
    return *this;
  }
  KnowledgeBaseBuilder& add_label(const std::string& e, std::string label) {
    auto& v = labels_[e];
    if (std::find(v.begin(), v.end(), label) == v.end()) v.push_back(std::move(label));
    return *this;
  }
  KnowledgeBaseBuilder& add_anchor(const std::string& e, const std::string& text) {
    auto& a = anchors_[e];
    if (!a.empty()) a.push_back(' ');
    a += text;
    return *this;
  }

  /// Validates acyclicity and computes the class closure.
  KnowledgeBase build() const {
    KnowledgeBase kb;
    kb.triples_.assign(triples_.begin(), triples_.end());
    kb.top_classes_ = top_classes_;
    kb.declared_classes_ = types_;
    kb.superclasses_ = superclasses_;
    kb.labels_ = labels_;
    kb.anchors_ = anchors_;
    kb.classes_ = classes_;

    for (const auto& t : kb.triples_) {
      kb.triple_set_.insert(t);
      kb.by_property_[t.p].push_back(t);
      kb.by_subject_[t.s].push_back(t);
      kb.properties_.insert(t.p);
      kb.entities_.insert(t.s);
      if (t.o.is_entity()) {
        kb.by_object_[t.o.value].push_back(t);
        kb.entities_.insert(t.o.value);
      }
    }
    for (const auto& [e, _] : types_) kb.entities_.insert(e);
    for (const auto& [e, _] : labels_) kb.entities_.insert(e);
    for (const auto& [e, _] : anchors_) kb.entities_.insert(e);

    kb.ancestors_ = closure(superclasses_, classes_);
    return kb;
  }

 private:
  // Iterative three-colour DFS; throws CycleError naming a class on the cycle.
  static std::map<std::string, std::set<std::string>> closure(
      const std::map<std::string, std::set<std::string>>& supers, const std::set<std::string>& classes) {
    enum class Mark { white, grey, black };
    std::map<std::string, Mark> mark;
    std::map<std::string, std::set<std::string>> anc;
    for (const auto& c : classes) mark[c] = Mark::white;

    for (const auto& root : classes) {
      if (mark[root] != Mark::white) continue;
      std::vector<std::pair<std::string, bool>> stack{{root, false}};
      while (!stack.empty()) {
        auto [c, expanded] = stack.back();
        stack.pop_back();
        auto sit = supers.find(c);
        if (expanded) {
          auto& a = anc[c];
          if (sit != supers.end()) {
            for (const auto& s : sit->second) {
              a.insert(s);
              const auto& as = anc[s];
              a.insert(as.begin(), as.end());
            }
          }
          mark[c] = Mark::black;
          continue;
        }
        if (mark[c] == Mark::black) continue;
        mark[c] = Mark::grey;
        stack.emplace_back(c, true);
        if (sit == supers.end()) continue;
        for (const auto& s : sit->second) {
          if (mark[s] == Mark::grey) throw CycleError(s);
          if (mark[s] == Mark::white) stack.emplace_back(s, false);
        }
      }
    }
    return anc;
  }

  std::set<Triple> triples_;
  std::map<std::string, std::set<std::string>> types_;
  std::map<std::string, std::set<std::string>> superclasses_;
  std::map<std::string, std::vector<std::string>> labels_;
  std::map<std::string, std::string> anchors_;
  std::set<std::string> classes_;
  std::set<std::string> top_classes_;
};

inline KnowledgeBase KnowledgeBase::without(const std::vector<Triple>& retracted) const {
  std::unordered_set<Triple, TripleHash> drop(retracted.begin(), retracted.end());
  KnowledgeBaseBuilder b;
  b.top_classes(top_classes_);
  for (const auto& t : triples_) {
    if (!drop.count(t)) b.add(t);
  }
  for (const auto& [e, cs] : declared_classes_) {
    for (const auto& c : cs) b.add_type(e, c);
  }
  for (const auto& [c, ss] : superclasses_) {
    for (const auto& s : ss) b.add_subclass(c, s);
  }
  for (const auto& [e, ls] : labels_) {
    for (const auto& l : ls) b.add_label(e, l);
  }
  for (const auto& [e, a] : anchors_) b.add_anchor(e, a);
  return b.build();
}

// ---------------------------------------------------------------------------
// File formats

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    fields.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return fields;
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline void check_field(const std::string& f) {
  if (f.find_first_of("\t\n\r") != std::string::npos) {
    throw Error("field contains a tab or newline: '" + f + "'");
  }
}

}  // namespace detail

/// Parses `s<TAB>p<TAB>o<TAB>kind` lines into the builder. Blank lines are skipped.
inline void read_triples(std::istream& in, const std::string& source, KnowledgeBaseBuilder& b) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty()) continue;
    auto f = detail::split_tabs(line);
    if (f.size() != 4) throw ParseError(source, lineno, "expected 4 tab-separated fields, got " + std::to_string(f.size()));
    if (f[0].empty() || f[1].empty()) throw ParseError(source, lineno, "empty subject or property");
    TermKind kind;
    try {
      kind = parse_term_kind(f[3]);
    } catch (const Error& e) {
      throw ParseError(source, lineno, e.what());
    }
    if (kind == TermKind::entity && f[2].empty()) throw ParseError(source, lineno, "empty entity object");
    b.add(Triple{f[0], f[1], Term{kind, f[2]}});
  }
}

/// `entity<TAB>text` lines; `anchor` selects the anchor-text map instead of labels.
inline void read_labels(std::istream& in, const std::string& source, KnowledgeBaseBuilder& b, bool anchor = false) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw ParseError(source, lineno, "expected entity<TAB>text");
    auto e = line.substr(0, tab);
    auto text = line.substr(tab + 1);
    if (anchor) {
      b.add_anchor(e, text);
    } else {
      b.add_label(e, text);
    }
  }
}

struct KbSources {
  std::string triples;
  std::string labels;   // optional
  std::string schema;   // optional, same TSV format as triples
  std::string anchors;  // optional
  std::optional<std::set<std::string>> top_classes;
};

inline KnowledgeBase load_kb(const KbSources& src) {
  KnowledgeBaseBuilder b;
  if (src.top_classes) b.top_classes(*src.top_classes);
  auto open = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    return in;
  };
  if (!src.schema.empty()) {
    auto in = open(src.schema);
    read_triples(in, src.schema, b);
  }
  if (!src.triples.empty()) {
    auto in = open(src.triples);
    read_triples(in, src.triples, b);
  }
  if (!src.labels.empty()) {
    auto in = open(src.labels);
    read_labels(in, src.labels, b);
  }
  if (!src.anchors.empty()) {
    auto in = open(src.anchors);
    read_labels(in, src.anchors, b, true);
  }
  return b.build();
}

inline void write_triple(std::ostream& out, const Triple& t) {
  detail::check_field(t.s);
  detail::check_field(t.p);
  detail::check_field(t.o.value);
  out << t.s << '\t' << t.p << '\t' << t.o.value << '\t' << to_string(t.o.kind) << '\n';
}

/// Writes the full KB (schema, class assertions, property assertions) in load order.
inline void write_kb_triples(std::ostream& out, const KnowledgeBase& kb) {
  for (const auto& [c, ss] : kb.subclass_edges()) {
    for (const auto& s : ss) write_triple(out, Triple::entity(c, std::string(kSubClassOf), s));
  }
  for (const auto& e : kb.entities()) {
    for (const auto& c : kb.declared_classes(e)) write_triple(out, Triple::entity(e, std::string(kRdfType), c));
  }
  for (const auto& t : kb.property_assertions()) write_triple(out, t);
}

inline void write_kb_labels(std::ostream& out, const KnowledgeBase& kb) {
  for (const auto& [e, ls] : kb.all_labels()) {
    for (const auto& l : ls) {
      detail::check_field(l);
      out << e << '\t' << l << '\n';
    }
  }
}

}  // namespace kbfix
