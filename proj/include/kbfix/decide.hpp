#pragma once
// Correction decision: normalize model scores over the whole target set,
// average them, filter candidates by a threshold (with the exact-label keep
// rule for literal targets) and emit the first survivor or none.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kbfix/error.hpp"
#include "kbfix/kb_store.hpp"
#include "kbfix/relate.hpp"
#include "kbfix/text.hpp"

namespace kbfix {

/// Min-max to [0, 1]; a constant input maps to 0.5.
inline std::vector<double> min_max_normalize(const std::vector<double>& xs) {
  if (xs.empty()) throw Error("cannot normalize an empty score set");
  for (double x : xs) {
    if (!std::isfinite(x)) throw Error("non-finite score in normalization input");
  }
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  std::vector<double> out(xs.size(), 0.5);
  if (*hi == *lo) return out;
  const double span = *hi - *lo;
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = (xs[i] - *lo) / span;
  return out;
}

template <typename Key>
std::map<Key, double> min_max_normalize(const std::map<Key, double>& raw) {
  std::vector<double> xs;
  xs.reserve(raw.size());
  for (const auto& [k, v] : raw) xs.push_back(v);
  const auto ys = min_max_normalize(xs);
  std::map<Key, double> out;
  std::size_t i = 0;
  for (const auto& [k, v] : raw) out.emplace(k, ys[i++]);
  return out;
}

inline double ensemble(double y_l, double y_c) { return (y_l + y_c) / 2.0; }

/// Mean of whichever scores are present; 0 when neither is.
inline double ensemble(std::optional<double> y_l, std::optional<double> y_c) {
  if (y_l && y_c) return ensemble(*y_l, *y_c);
  if (y_l) return *y_l;
  if (y_c) return *y_c;
  return 0.0;
}

struct ScoredCandidate {
  std::string entity;
  std::size_t rank = 0;  // 1-based relatedness rank
  std::optional<double> y_l;
  std::optional<double> y_c;
  double y = 0.0;
  bool kept = false;
  bool kept_by_label = false;
};

enum class LabelMatch { folded, strict };

/// Literal equals one of the entity's labels (after trimming and case folding unless strict).
inline bool literal_matches_label(const KnowledgeBase& kb, const std::string& literal, const std::string& entity,
                                  LabelMatch mode = LabelMatch::folded) {
  const std::string lhs = mode == LabelMatch::strict ? literal : text::fold(text::trim(literal));
  for (const auto& l : kb.labels(entity)) {
    const std::string rhs = mode == LabelMatch::strict ? l : text::fold(text::trim(l));
    if (lhs == rhs) return true;
  }
  return false;
}

struct CorrectionResult {
  TargetAssertion target;
  std::optional<std::string> substitute;  // none when empty
  std::vector<ScoredCandidate> survivors;
  double tau = 0.0;
};

/// `scored` holds every candidate in relatedness order with normalized
/// scores; y and the keep flags are filled in here.
inline CorrectionResult decide(const TargetAssertion& target, std::vector<ScoredCandidate> scored, double tau,
                               const KnowledgeBase& kb, LabelMatch mode = LabelMatch::folded) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw Error("tau must lie in [0, 1]");
  CorrectionResult r{target, std::nullopt, {}, tau};
  for (auto& c : scored) {
    c.y = ensemble(c.y_l, c.y_c);
    c.kept_by_label = target.o.is_literal() && literal_matches_label(kb, target.o.value, c.entity, mode);
    c.kept = c.y >= tau || c.kept_by_label;
    if (c.kept) r.survivors.push_back(c);
  }
  if (!r.survivors.empty()) r.substitute = r.survivors.front().entity;
  return r;
}

inline nlohmann::json to_json(const CorrectionResult& r) {
  nlohmann::json survivors = nlohmann::json::array();
  for (const auto& c : r.survivors) {
    nlohmann::json j{{"entity", c.entity}, {"y", c.y}};
    j["yL"] = c.y_l ? nlohmann::json(*c.y_l) : nlohmann::json(nullptr);
    j["yC"] = c.y_c ? nlohmann::json(*c.y_c) : nlohmann::json(nullptr);
    survivors.push_back(std::move(j));
  }
  nlohmann::json j{{"s", r.target.s},
                   {"p", r.target.p},
                   {"o", r.target.o.value},
                   {"decision", r.substitute ? "substitute" : "none"}};
  if (r.substitute) j["substitute"] = *r.substitute;
  j["survivors"] = std::move(survivors);
  j["tau"] = r.tau;
  return j;
}

inline void write_corrections(std::ostream& out, const std::vector<CorrectionResult>& results) {
  for (const auto& r : results) out << to_json(r).dump() << '\n';
}

}  // namespace kbfix
