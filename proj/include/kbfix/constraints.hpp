#pragma once
// Soft constraints mined from the ABox (property cardinality distributions
// and hierarchical range degrees) and consistency checking of candidate
// assertions against them.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "kbfix/error.hpp"
#include "kbfix/kb_store.hpp"

namespace kbfix {

struct CardinalityConstraint {
  std::string property;
  std::map<int, double> dist;  // k >= 1 -> fraction of subjects with exactly k entity objects
  int on_max = 0;

  /// Probability that the cardinality exceeds n.
  double tail(int n) const {
    double sum = 0;
    for (const auto& [k, pr] : dist) {
      if (k > n) sum += pr;
    }
    return sum;
  }

  double at(int k) const {
    auto it = dist.find(k);
    return it == dist.end() ? 0.0 : it->second;
  }

  bool operator==(const CardinalityConstraint&) const = default;
};

struct RangeConstraint {
  std::string property;
  std::map<std::string, double> specific;  // C_sp with D_sp
  std::map<std::string, double> general;   // C_ge with D_ge

  bool operator==(const RangeConstraint&) const = default;
};

enum class CombineMode { multiply, average };

struct ConsistencyParams {
  double sigma = 1.0;
  double w_specific = 0.8;
  double w_general = 0.2;
  CombineMode combine = CombineMode::average;

  void validate() const {
    if (!(sigma > 0.0 && sigma <= 1.0)) throw Error("sigma must lie in (0, 1]");
    if (w_specific < 0 || w_general < 0 || std::abs(w_specific + w_general - 1.0) > 1e-9) {
      throw Error("range weights must be non-negative and sum to 1");
    }
  }
};

inline CardinalityConstraint mine_cardinality(const KnowledgeBase& kb, const std::string& p) {
  std::map<std::string, std::set<std::string>> objects;
  for (const auto& t : kb.assertions_of_property(p)) {
    if (t.o.is_entity()) objects[t.s].insert(t.o.value);
  }
  CardinalityConstraint c{p, {}, 0};
  if (objects.empty()) return c;
  std::map<int, std::size_t> counts;
  for (const auto& [s, os] : objects) {
    const int n = static_cast<int>(os.size());
    ++counts[n];
    c.on_max = std::max(c.on_max, n);
  }
  const double subjects = static_cast<double>(objects.size());
  for (const auto& [k, n] : counts) c.dist[k] = static_cast<double>(n) / subjects;
  return c;
}

inline RangeConstraint mine_range(const KnowledgeBase& kb, const std::string& p) {
  std::set<std::string> objects;
  for (const auto& t : kb.assertions_of_property(p)) {
    if (t.o.is_entity()) objects.insert(t.o.value);
  }
  RangeConstraint r{p, {}, {}};
  if (objects.empty()) return r;
  std::map<std::string, std::size_t> sp, ge;
  for (const auto& oe : objects) {
    for (const auto& c : kb.specific_classes(oe)) ++sp[c];
    for (const auto& c : kb.general_classes(oe)) ++ge[c];
  }
  const double n = static_cast<double>(objects.size());
  for (const auto& [c, k] : sp) r.specific[c] = static_cast<double>(k) / n;
  for (const auto& [c, k] : ge) r.general[c] = static_cast<double>(k) / n;
  return r;
}

struct PropertyConstraints {
  CardinalityConstraint cardinality;
  RangeConstraint range;
  bool operator==(const PropertyConstraints&) const = default;
};

using ConstraintSet = std::map<std::string, PropertyConstraints>;

/// Mines both constraint kinds for every property with assertions.
inline ConstraintSet mine_all(const KnowledgeBase& kb) {
  ConstraintSet out;
  for (const auto& p : kb.properties()) out[p] = {mine_cardinality(kb, p), mine_range(kb, p)};
  return out;
}

/// Constraints for p; properties never seen in the KB get empty constraints.
inline PropertyConstraints constraints_for(const ConstraintSet& set, const std::string& p) {
  auto it = set.find(p);
  if (it != set.end()) return it->second;
  return {{p, {}, 0}, {p, {}, {}}};
}

struct ConsistencyScores {
  double y_car = 0;
  double y_ran = 0;
  double y_ran_specific = 0;
  double y_ran_general = 0;
};

namespace detail {

inline double noisy_or(const std::map<std::string, double>& degrees, const std::set<std::string>& classes) {
  double keep = 1.0;
  for (const auto& c : classes) {
    auto it = degrees.find(c);
    if (it != degrees.end()) keep *= 1.0 - it->second;
  }
  return 1.0 - keep;
}

}  // namespace detail

/// Cardinality score of ⟨s, p, e⟩ given the entity objects s already has for p.
inline double cardinality_score(const CardinalityConstraint& card, std::size_t n, const ConsistencyParams& params) {
  if (card.on_max == 0) return 0.0;
  const double r = (static_cast<double>(n) - card.on_max) / card.on_max;
  if (r >= params.sigma) return 0.0;
  if (n == 1) return card.at(1);
  const double tail = card.tail(1);
  return r <= 0 ? tail : std::max(0.0, (1.0 - r) * tail);
}

inline double range_score(const RangeConstraint& range, const std::set<std::string>& classes,
                          const ConsistencyParams& params, double* specific = nullptr, double* general = nullptr) {
  const double yc = detail::noisy_or(range.specific, classes);
  const double yg = detail::noisy_or(range.general, classes);
  if (specific) *specific = yc;
  if (general) *general = yg;
  return params.w_specific * yc + params.w_general * yg;
}

/// Scores the candidate assertion ⟨s, p, e⟩ as if it had been added to the KB.
inline ConsistencyScores check_consistency(const KnowledgeBase& kb, const std::string& s, const std::string& p,
                                           const std::string& e, const CardinalityConstraint& card,
                                           const RangeConstraint& range, const ConsistencyParams& params) {
  if (!kb.has_entity(e)) throw UnknownTermError("entity", e);
  std::set<std::string> objects{e};
  for (const auto& t : kb.assertions_of_subject(s)) {
    if (t.p == p && t.o.is_entity()) objects.insert(t.o.value);
  }
  ConsistencyScores out;
  out.y_car = cardinality_score(card, objects.size(), params);
  out.y_ran = range_score(range, kb.classes_of(e), params, &out.y_ran_specific, &out.y_ran_general);
  return out;
}

inline double combine(double y_car, double y_ran, CombineMode mode) {
  return mode == CombineMode::multiply ? y_car * y_ran : (y_car + y_ran) / 2.0;
}

enum class ConsistencyModel { cardinality, range, both };

inline std::string_view to_string(ConsistencyModel m) {
  switch (m) {
    case ConsistencyModel::cardinality: return "car";
    case ConsistencyModel::range: return "ran";
    case ConsistencyModel::both: return "car+ran";
  }
  return "?";
}

inline ConsistencyModel parse_consistency_model(std::string_view s) {
  if (s == "car") return ConsistencyModel::cardinality;
  if (s == "ran") return ConsistencyModel::range;
  if (s == "car+ran") return ConsistencyModel::both;
  throw Error("unknown consistency model '" + std::string(s) + "'");
}

inline CombineMode parse_combine_mode(std::string_view s) {
  if (s == "multiply") return CombineMode::multiply;
  if (s == "average") return CombineMode::average;
  throw Error("unknown combine mode '" + std::string(s) + "'");
}

inline double consistency_score(const ConsistencyScores& c, ConsistencyModel model, CombineMode mode) {
  switch (model) {
    case ConsistencyModel::cardinality: return c.y_car;
    case ConsistencyModel::range: return c.y_ran;
    case ConsistencyModel::both: return combine(c.y_car, c.y_ran, mode);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Constraints file: {property: {cardinality: {dist, onMax}, range: {specific, general}}}

inline nlohmann::json to_json(const ConstraintSet& set) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [p, c] : set) {
    nlohmann::json dist = nlohmann::json::object();
    for (const auto& [k, pr] : c.cardinality.dist) dist[std::to_string(k)] = pr;
    j[p] = {{"cardinality", {{"dist", dist}, {"onMax", c.cardinality.on_max}}},
            {"range", {{"specific", c.range.specific}, {"general", c.range.general}}}};
  }
  return j;
}

namespace detail {

inline void check_degree(double d, const std::string& what) {
  if (!(d >= 0.0 && d <= 1.0)) throw Error(what + " degree outside [0, 1]");
}

}  // namespace detail

/// Parses a constraints document; sections absent for a property stay empty.
inline ConstraintSet constraints_from_json(const nlohmann::json& j) {
  ConstraintSet out;
  for (const auto& [p, cj] : j.items()) {
    PropertyConstraints pc{{p, {}, 0}, {p, {}, {}}};
    if (cj.contains("cardinality")) {
      const auto& card = cj.at("cardinality");
      pc.cardinality.on_max = card.value("onMax", 0);
      if (card.contains("dist")) {
        for (const auto& [k, pr] : card.at("dist").items()) {
          const int ki = std::stoi(k);
          if (ki < 1) throw Error("cardinality keys must be >= 1 for property " + p);
          detail::check_degree(pr.get<double>(), "cardinality");
          pc.cardinality.dist[ki] = pr.get<double>();
        }
      }
    }
    if (cj.contains("range")) {
      const auto& rj = cj.at("range");
      if (rj.contains("specific")) pc.range.specific = rj.at("specific").get<std::map<std::string, double>>();
      if (rj.contains("general")) pc.range.general = rj.at("general").get<std::map<std::string, double>>();
      for (const auto& [c, d] : pc.range.specific) detail::check_degree(d, "range");
      for (const auto& [c, d] : pc.range.general) detail::check_degree(d, "range");
    }
    out[p] = std::move(pc);
  }
  return out;
}

/// Override wins per section: a property's cardinality or range block in the
/// override replaces the mined block.
inline ConstraintSet merge_constraints(ConstraintSet mined, const nlohmann::json& override_doc) {
  const auto over = constraints_from_json(override_doc);
  for (const auto& [p, cj] : override_doc.items()) {
    auto& dst = mined[p];
    dst.cardinality.property = p;
    dst.range.property = p;
    if (cj.contains("cardinality")) dst.cardinality = over.at(p).cardinality;
    if (cj.contains("range")) dst.range = over.at(p).range;
  }
  return mined;
}

}  // namespace kbfix
