#pragma once
// Observed features for link prediction: depth-1/2 connecting paths in both
// directions and the two node bits, multi-hot encoded over a closed path
// vocabulary.

#include <json.hpp>

#include <array>
#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kbfix/error.hpp"
#include "kbfix/kb_store.hpp"
#include "kbfix/subgraph.hpp"

namespace kbfix {

/// Out/in adjacency over a triple set.
class AdjacencyIndex {
 public:
  using Edge = std::pair<std::string, std::string>;  // (property, other endpoint)

  AdjacencyIndex() = default;
  explicit AdjacencyIndex(const std::set<Triple>& triples) : triples_(&triples) {
    for (const auto& t : triples) {
      if (!t.o.is_entity()) continue;
      out_[t.s].emplace_back(t.p, t.o.value);
      in_[t.o.value].emplace_back(t.p, t.s);
      subjects_of_[t.p].insert(t.s);
      objects_of_[t.p].insert(t.o.value);
    }
  }
  explicit AdjacencyIndex(const SubGraph& g) : AdjacencyIndex(g.triples) {}

  const std::vector<Edge>& out(const std::string& e) const { return get(out_, e); }
  const std::vector<Edge>& in(const std::string& e) const { return get(in_, e); }

  bool contains(const Triple& t) const { return triples_ && triples_->count(t) > 0; }

  std::size_t subject_count(const std::string& p, const std::string& s) const { return count(subjects_of_, p, s); }
  std::size_t object_count(const std::string& p, const std::string& o) const { return count(objects_of_, p, o); }

 private:
  static const std::vector<Edge>& get(const std::unordered_map<std::string, std::vector<Edge>>& m,
                                      const std::string& k) {
    static const std::vector<Edge> none;
    auto it = m.find(k);
    return it == m.end() ? none : it->second;
  }
  static std::size_t count(const std::unordered_map<std::string, std::multiset<std::string>>& m,
                           const std::string& p, const std::string& e) {
    auto it = m.find(p);
    return it == m.end() ? 0 : it->second.count(e);
  }

  const std::set<Triple>* triples_ = nullptr;
  std::unordered_map<std::string, std::vector<Edge>> out_;
  std::unordered_map<std::string, std::vector<Edge>> in_;
  std::unordered_map<std::string, std::multiset<std::string>> subjects_of_;
  std::unordered_map<std::string, std::multiset<std::string>> objects_of_;
};

enum class PathDirection { so, os, any };

inline std::string_view to_string(PathDirection d) {
  switch (d) {
    case PathDirection::so: return "so";
    case PathDirection::os: return "os";
    case PathDirection::any: return "any";
  }
  return "?";
}

inline PathDirection parse_path_direction(std::string_view s) {
  if (s == "so") return PathDirection::so;
  if (s == "os") return PathDirection::os;
  if (s == "any") return PathDirection::any;
  throw Error("unknown path direction '" + std::string(s) + "'");
}

struct PathKey {
  PathDirection direction = PathDirection::so;
  std::vector<std::string> properties;  // length 1 or 2

  std::size_t depth() const { return properties.size(); }
  auto operator<=>(const PathKey&) const = default;
};

// Tagged keys keep direction apart; merged keys reproduce the plain FP union.
enum class PathMode { tagged, merged };

struct FeatureOptions {
  PathMode mode = PathMode::tagged;
  // Ignore this triple itself when computing features (used for training
  // samples drawn from T, so a positive is not its own witness).
  std::optional<Triple> held_out;
};

namespace detail {

inline bool is_held_out(const FeatureOptions& opt, const std::string& s, const std::string& p, const std::string& o) {
  return opt.held_out && opt.held_out->s == s && opt.held_out->p == p && opt.held_out->o.value == o;
}

// Depth-1 and depth-2 paths from `from` to `to`.
inline void collect_paths(const AdjacencyIndex& adj, const std::string& from, const std::string& to,
                          PathDirection dir, const FeatureOptions& opt, std::set<PathKey>& out) {
  const PathDirection tag = opt.mode == PathMode::merged ? PathDirection::any : dir;
  for (const auto& [p1, mid] : adj.out(from)) {
    if (is_held_out(opt, from, p1, mid)) continue;
    if (mid == to) out.insert({tag, {p1}});
    for (const auto& [p2, end] : adj.out(mid)) {
      if (end != to || is_held_out(opt, mid, p2, end)) continue;
      out.insert({tag, {p1, p2}});
    }
  }
}

}  // namespace detail

inline std::set<PathKey> path_features(const AdjacencyIndex& adj, const std::string& s, const std::string& o,
                                       const FeatureOptions& opt = {}) {
  std::set<PathKey> out;
  detail::collect_paths(adj, s, o, PathDirection::so, opt, out);
  detail::collect_paths(adj, o, s, PathDirection::os, opt, out);
  return out;
}

/// [v_s, v_o]: s is a subject of p, o is an object of p, within T.
inline std::array<std::uint8_t, 2> node_feature(const AdjacencyIndex& adj, const std::string& s, const std::string& p,
                                                const std::string& o, const FeatureOptions& opt = {}) {
  std::size_t subj = adj.subject_count(p, s);
  std::size_t obj = adj.object_count(p, o);
  if (opt.held_out && opt.held_out->p == p && adj.contains(*opt.held_out)) {
    if (opt.held_out->s == s) --subj;
    if (opt.held_out->o.value == o) --obj;
  }
  return {static_cast<std::uint8_t>(subj > 0), static_cast<std::uint8_t>(obj > 0)};
}

class PathVocabulary {
 public:
  PathVocabulary() = default;

  /// Returns the slot of the key, inserting it if new.
  std::size_t add(const PathKey& k) {
    auto [it, inserted] = slots_.emplace(k, keys_.size());
    if (inserted) keys_.push_back(k);
    return it->second;
  }

  std::optional<std::size_t> slot(const PathKey& k) const {
    auto it = slots_.find(k);
    if (it == slots_.end()) return std::nullopt;
    return it->second;
  }

  const std::vector<PathKey>& keys() const { return keys_; }
  std::size_t size() const { return keys_.size(); }

  bool operator==(const PathVocabulary& o) const { return keys_ == o.keys_; }

 private:
  std::vector<PathKey> keys_;
  std::map<PathKey, std::size_t> slots_;
};

struct FeatureVector {
  std::vector<std::uint8_t> path_bits;
  std::array<std::uint8_t, 2> node_bits{0, 0};

  std::vector<double> dense() const {
    std::vector<double> v(path_bits.begin(), path_bits.end());
    v.push_back(node_bits[0]);
    v.push_back(node_bits[1]);
    return v;
  }
  std::size_t width() const { return path_bits.size() + 2; }
  bool operator==(const FeatureVector&) const = default;
};

struct LabeledSample {
  Triple triple;
  bool positive;
};

/// Positives then negatives, each in SampleSet order.
inline std::vector<LabeledSample> labeled_samples(const SampleSet& s) {
  std::vector<LabeledSample> out;
  out.reserve(s.positives.size() + s.negatives.size());
  for (const auto& t : s.positives) out.push_back({t, true});
  for (const auto& t : s.negatives) out.push_back({t, false});
  return out;
}

/// First-seen order over the samples; a sample's own paths in key order.
/// `hold_out_self` drops each sample's own triple from its paths.
inline PathVocabulary build_vocabulary(const std::vector<LabeledSample>& samples, const AdjacencyIndex& adj,
                                       PathMode mode = PathMode::tagged, bool hold_out_self = false) {
  PathVocabulary v;
  for (const auto& smp : samples) {
    FeatureOptions opt{mode, hold_out_self ? std::optional<Triple>(smp.triple) : std::nullopt};
    for (const auto& k : path_features(adj, smp.triple.s, smp.triple.o.value, opt)) v.add(k);
  }
  return v;
}

/// Multi-hot path bits over the vocabulary (unknown paths dropped) plus node bits.
inline FeatureVector encode(const PathVocabulary& vocab, const AdjacencyIndex& adj, const std::string& s,
                            const std::string& p, const std::string& o, const FeatureOptions& opt = {}) {
  FeatureVector f;
  f.path_bits.assign(vocab.size(), 0);
  for (const auto& k : path_features(adj, s, o, opt)) {
    if (auto slot = vocab.slot(k)) f.path_bits[*slot] = 1;
  }
  f.node_bits = node_feature(adj, s, p, o, opt);
  return f;
}

inline nlohmann::json to_json(const PathKey& k) {
  return {{"dir", std::string(to_string(k.direction))}, {"props", k.properties}};
}

inline PathKey path_key_from_json(const nlohmann::json& j) {
  PathKey k;
  k.direction = parse_path_direction(j.at("dir").get<std::string>());
  k.properties = j.at("props").get<std::vector<std::string>>();
  if (k.properties.empty() || k.properties.size() > 2) throw Error("path key must have depth 1 or 2");
  return k;
}

inline std::string path_key_name(const PathKey& k) {
  std::string s(to_string(k.direction));
  for (const auto& p : k.properties) s += ":" + p;
  return s;
}

}  // namespace kbfix
