#pragma once
// Task-specific sub-graph extraction and balanced positive/negative sampling.

#include <json.hpp>

#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "kbfix/error.hpp"
#include "kbfix/kb_store.hpp"
#include "kbfix/random.hpp"
#include "kbfix/relate.hpp"

namespace kbfix {

struct SubGraph {
  std::set<std::string> entities;    // E
  std::set<std::string> properties;  // P
  std::set<Triple> triples;          // T, entity objects only
  std::set<std::string> seeds;       // SE
  std::set<std::string> related;     // RE

  bool operator==(const SubGraph&) const = default;
};

struct ExtractOptions {
  // Neighbourhood rule requires both endpoints in E instead of either.
  bool strict_conjunction = false;
  // Use every entity-object triple of the KB instead of the neighbourhoods.
  bool whole_kb = false;
};

/// Seeds from the targets and their candidates, then property and entity
/// neighbourhoods, then E and P re-closed over T.
inline SubGraph extract_subgraph(const KnowledgeBase& kb, const std::vector<TargetAssertion>& targets,
                                 const std::vector<CandidateList>& candidates, const ExtractOptions& opt = {}) {
  SubGraph g;
  for (const auto& t : targets) {
    g.seeds.insert(t.s);
    g.properties.insert(t.p);
  }
  for (const auto& list : candidates) {
    for (const auto& c : list.entities) {
      if (!kb.has_entity(c.entity)) throw UnknownTermError("candidate entity", c.entity);
      g.related.insert(c.entity);
    }
  }
  g.entities = g.seeds;
  g.entities.insert(g.related.begin(), g.related.end());
  for (const auto& t : targets) {
    if (t.o.is_entity()) g.entities.insert(t.o.value);
  }

  if (opt.whole_kb) {
    for (const auto& t : kb.property_assertions()) {
      if (t.o.is_entity()) g.triples.insert(t);
    }
  } else {
    for (const auto& p : g.properties) {
      for (const auto& t : kb.assertions_of_property(p)) {
        if (t.o.is_entity()) g.triples.insert(t);
      }
    }
    for (const auto& e : g.entities) {
      for (const auto& t : kb.assertions_of_subject(e)) {
        if (!t.o.is_entity()) continue;
        if (!opt.strict_conjunction || g.entities.count(t.o.value)) g.triples.insert(t);
      }
      if (opt.strict_conjunction) continue;
      for (const auto& t : kb.assertions_of_object(e)) g.triples.insert(t);
    }
  }

  for (const auto& t : g.triples) {
    g.entities.insert(t.s);
    g.entities.insert(t.o.value);
    g.properties.insert(t.p);
  }
  return g;
}

struct PositiveSamples {
  std::set<Triple> subject_side;  // T_sp
  std::set<Triple> related_side;  // T_pr
};

inline PositiveSamples sample_positives(const SubGraph& g) {
  PositiveSamples out;
  for (const auto& t : g.triples) {
    if (!g.properties.count(t.p)) continue;
    if (g.seeds.count(t.s)) out.subject_side.insert(t);
    if (g.related.count(t.o.value)) out.related_side.insert(t);
  }
  return out;
}

struct SampleSet {
  std::vector<Triple> positives;  // T_sp in order, then T_pr members not in T_sp
  std::vector<Triple> negatives;  // negatives[i] corrupts positives[i]
  std::vector<Triple> dropped;    // positives with no valid corruption within the retry budget
  std::uint64_t seed = 0;
};

inline constexpr int kCorruptionRetries = 100;

/// One corruption per positive: object-corrupted for T_sp members,
/// subject-corrupted for the remaining T_pr members. Corruptions never lie in
/// T and never repeat.
inline SampleSet sample_negatives(const SubGraph& g, const PositiveSamples& pos, std::uint64_t seed,
                                  int retries = kCorruptionRetries) {
  if (g.entities.size() < 2) throw Error("negative sampling needs at least two sub-graph entities");
  const std::vector<std::string> pool(g.entities.begin(), g.entities.end());
  Rng rng(seed);
  SampleSet out;
  out.seed = seed;
  std::set<Triple> used;

  auto corrupt = [&](const Triple& t, bool object_side) {
    for (int attempt = 0; attempt < retries; ++attempt) {
      const auto& e = pool[rng.index(pool.size())];
      Triple c = object_side ? Triple::entity(t.s, t.p, e) : Triple::entity(e, t.p, t.o.value);
      if (g.triples.count(c) || used.count(c)) continue;
      used.insert(c);
      out.positives.push_back(t);
      out.negatives.push_back(std::move(c));
      return;
    }
    out.dropped.push_back(t);
  };

  for (const auto& t : pos.subject_side) corrupt(t, true);
  for (const auto& t : pos.related_side) {
    if (!pos.subject_side.count(t)) corrupt(t, false);
  }
  return out;
}

inline SampleSet sample(const SubGraph& g, std::uint64_t seed) { return sample_negatives(g, sample_positives(g), seed); }

// ---------------------------------------------------------------------------
// Serialization: TSV triples plus a JSON sidecar.

inline void write_subgraph_triples(std::ostream& out, const SubGraph& g) {
  for (const auto& t : g.triples) write_triple(out, t);
}

inline nlohmann::json subgraph_sidecar(const SubGraph& g, std::uint64_t seed = 0) {
  return {{"SE", g.seeds}, {"RE", g.related}, {"P", g.properties}, {"E", g.entities}, {"seed", seed}};
}

inline SubGraph read_subgraph(std::istream& triples, const nlohmann::json& sidecar, const std::string& source = "<subgraph>") {
  KnowledgeBaseBuilder b;
  read_triples(triples, source, b);
  SubGraph g;
  const auto kb = b.build();
  for (const auto& t : kb.property_assertions()) g.triples.insert(t);
  g.seeds = sidecar.at("SE").get<std::set<std::string>>();
  g.related = sidecar.at("RE").get<std::set<std::string>>();
  g.properties = sidecar.at("P").get<std::set<std::string>>();
  if (sidecar.contains("E")) g.entities = sidecar.at("E").get<std::set<std::string>>();
  for (const auto& t : g.triples) {
    g.entities.insert(t.s);
    g.entities.insert(t.o.value);
    g.properties.insert(t.p);
  }
  return g;
}

inline void write_triples(std::ostream& out, const std::vector<Triple>& triples) {
  for (const auto& t : triples) write_triple(out, t);
}

namespace detail {

inline nlohmann::json triples_json(const std::vector<Triple>& ts) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : ts) out.push_back({t.s, t.p, t.o.value});
  return out;
}

inline std::vector<Triple> triples_from_json(const nlohmann::json& j) {
  std::vector<Triple> out;
  for (const auto& r : j) out.push_back(Triple::entity(r.at(0), r.at(1), r.at(2)));
  return out;
}

}  // namespace detail

inline nlohmann::json to_json(const SampleSet& s) {
  return {{"seed", s.seed},
          {"positives", detail::triples_json(s.positives)},
          {"negatives", detail::triples_json(s.negatives)},
          {"dropped", detail::triples_json(s.dropped)}};
}

inline SampleSet sample_set_from_json(const nlohmann::json& j) {
  SampleSet s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.positives = detail::triples_from_json(j.at("positives"));
  s.negatives = detail::triples_from_json(j.at("negatives"));
  s.dropped = detail::triples_from_json(j.value("dropped", nlohmann::json::array()));
  if (s.positives.size() != s.negatives.size()) throw Error("sample file pairs positives and negatives unevenly");
  return s;
}

}  // namespace kbfix
