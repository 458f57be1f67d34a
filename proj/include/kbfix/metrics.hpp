#pragma once
// Evaluation metrics: candidate recall, ranking quality (MRR, Hits@k) and
// end-to-end correction rates, plus threshold sweeps over cached scores.

#include <json.hpp>

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kbfix/decide.hpp"
#include "kbfix/error.hpp"
#include "kbfix/relate.hpp"

namespace kbfix {

struct RankingMetrics {
  double mrr = 0;
  double hits_at_1 = 0;
  double hits_at_5 = 0;
  std::size_t count = 0;
};

/// One ranked list per ground-truth entity; a missing GT contributes rank ∞.
inline RankingMetrics ranking_metrics(const std::vector<std::vector<std::string>>& ranked,
                                      const std::vector<std::string>& truths) {
  if (ranked.empty()) throw Error("ranking metrics need at least one list");
  if (ranked.size() != truths.size()) throw Error("ranked lists and ground truths differ in count");
  RankingMetrics m;
  m.count = ranked.size();
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    for (std::size_t r = 0; r < ranked[i].size(); ++r) {
      if (ranked[i][r] != truths[i]) continue;
      m.mrr += 1.0 / static_cast<double>(r + 1);
      if (r < 1) m.hits_at_1 += 1;
      if (r < 5) m.hits_at_5 += 1;
      break;
    }
  }
  const double n = static_cast<double>(m.count);
  m.mrr /= n;
  m.hits_at_1 /= n;
  m.hits_at_5 /= n;
  return m;
}

/// Fraction of Entity-GT targets whose GT is among the first k candidates.
inline std::map<std::size_t, double> recall_at_k(const std::vector<CandidateList>& lists,
                                                 const std::vector<std::size_t>& ks) {
  std::map<std::size_t, double> out;
  std::size_t n = 0;
  for (const auto& l : lists) n += l.target.gt.kind == GroundTruthKind::entity;
  for (std::size_t k : ks) {
    if (n == 0) continue;
    std::size_t hit = 0;
    for (const auto& l : lists) {
      if (l.target.gt.kind != GroundTruthKind::entity) continue;
      const std::size_t r = l.rank_of(l.target.gt.entity);
      hit += r > 0 && r <= k;
    }
    out[k] = static_cast<double>(hit) / static_cast<double>(n);
  }
  return out;
}

struct CorrectionMetrics {
  std::optional<double> correction_rate;  // over Entity-GT targets
  std::optional<double> empty_rate;       // over Empty-GT targets
  std::optional<double> accuracy;         // over all targets
  std::size_t entity_targets = 0;
  std::size_t empty_targets = 0;
  std::size_t corrected = 0;
  std::size_t emptied = 0;
};

inline bool is_correct(const CorrectionResult& r) {
  switch (r.target.gt.kind) {
    case GroundTruthKind::entity: return r.substitute && *r.substitute == r.target.gt.entity;
    case GroundTruthKind::empty: return !r.substitute;
    case GroundTruthKind::unknown: break;
  }
  throw Error("target " + r.target.id() + " has no ground truth");
}

inline CorrectionMetrics correction_metrics(const std::vector<CorrectionResult>& results) {
  CorrectionMetrics m;
  for (const auto& r : results) {
    const bool ok = is_correct(r);
    if (r.target.gt.kind == GroundTruthKind::entity) {
      ++m.entity_targets;
      m.corrected += ok;
    } else {
      ++m.empty_targets;
      m.emptied += ok;
    }
  }
  if (m.entity_targets) m.correction_rate = static_cast<double>(m.corrected) / static_cast<double>(m.entity_targets);
  if (m.empty_targets) m.empty_rate = static_cast<double>(m.emptied) / static_cast<double>(m.empty_targets);
  if (!results.empty()) {
    m.accuracy = static_cast<double>(m.corrected + m.emptied) / static_cast<double>(results.size());
  }
  return m;
}

/// Scores for one target, ready for decide() at any threshold.
struct ScoredTarget {
  TargetAssertion target;
  std::vector<ScoredCandidate> candidates;
};

inline std::vector<CorrectionResult> decide_all(const std::vector<ScoredTarget>& scored, double tau,
                                                const KnowledgeBase& kb, LabelMatch mode = LabelMatch::folded) {
  std::vector<CorrectionResult> out;
  out.reserve(scored.size());
  for (const auto& st : scored) out.push_back(decide(st.target, st.candidates, tau, kb, mode));
  return out;
}

/// 0, step, 2*step, ..., 1 (computed as i/n to avoid drift).
inline std::vector<double> default_tau_grid(double step = 0.05) {
  if (!(step > 0 && step <= 1)) throw Error("tau step must lie in (0, 1]");
  const auto n = static_cast<std::size_t>(std::llround(1.0 / step));
  std::vector<double> grid;
  for (std::size_t i = 0; i <= n; ++i) grid.push_back(static_cast<double>(i) / static_cast<double>(n));
  return grid;
}

struct SweepRow {
  double tau;
  CorrectionMetrics metrics;
};

inline std::vector<SweepRow> tau_sweep(const std::vector<ScoredTarget>& scored, const std::vector<double>& grid,
                                       const KnowledgeBase& kb, LabelMatch mode = LabelMatch::folded) {
  std::vector<SweepRow> rows;
  for (double tau : grid) rows.push_back({tau, correction_metrics(decide_all(scored, tau, kb, mode))});
  return rows;
}

/// Highest accuracy; ties go to the smallest threshold.
inline double best_tau(const std::vector<SweepRow>& rows) {
  if (rows.empty()) throw Error("empty sweep");
  const SweepRow* best = &rows.front();
  for (const auto& r : rows) {
    if (r.metrics.accuracy.value_or(0) > best->metrics.accuracy.value_or(0)) best = &r;
  }
  return best->tau;
}

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json("n/a");
}

inline nlohmann::json to_json(const CorrectionMetrics& m) {
  return {{"correctionRate", optional_json(m.correction_rate)},
          {"emptyRate", optional_json(m.empty_rate)},
          {"accuracy", optional_json(m.accuracy)},
          {"entityTargets", m.entity_targets},
          {"emptyTargets", m.empty_targets}};
}

inline nlohmann::json to_json(const RankingMetrics& m) {
  return {{"mrr", m.mrr}, {"hitsAt1", m.hits_at_1}, {"hitsAt5", m.hits_at_5}, {"count", m.count}};
}

}  // namespace kbfix
