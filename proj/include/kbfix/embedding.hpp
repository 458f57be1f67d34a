#pragma once
// TransE and DistMult embeddings trained with a margin ranking loss over a
// sub-graph's triples and per-epoch corrupted negatives.
//
// TransE scores are distances (lower is better); DistMult scores are
// trilinear products (higher is better). likelihood() orients both so that
// higher means more plausible.

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "kbfix/error.hpp"
#include "kbfix/kb_store.hpp"
#include "kbfix/random.hpp"
#include "kbfix/subgraph.hpp"

namespace kbfix {

enum class EmbeddingKind { transe, distmult };

inline std::string_view to_string(EmbeddingKind k) { return k == EmbeddingKind::transe ? "transe" : "distmult"; }

inline EmbeddingKind parse_embedding_kind(std::string_view s) {
  if (s == "transe" || s == "TransE") return EmbeddingKind::transe;
  if (s == "distmult" || s == "DistMult") return EmbeddingKind::distmult;
  throw Error("unknown embedding kind '" + std::string(s) + "'");
}

struct TrainConfig {
  std::size_t dim = 100;
  double margin_start = 1.0;
  double margin_end = 4.0;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  std::uint64_t seed = 1;
  std::size_t negatives_per_positive = 1;

  void validate() const {
    if (dim == 0) throw Error("embedding dimension must be positive");
    if (!(margin_start > 0) || !(margin_end > 0)) throw Error("margins must be positive");
    if (batch_size == 0) throw Error("batch size must be positive");
    if (negatives_per_positive == 0) throw Error("need at least one negative per positive");
  }
};

class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  EmbeddingModel(EmbeddingKind kind, std::size_t dim, std::uint64_t seed = 0) : kind_(kind), dim_(dim), seed_(seed) {}

  EmbeddingKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }

  std::size_t add_entity(const std::string& id) { return add(entity_rows_, entity_ids_, entities_, id); }
  std::size_t add_property(const std::string& id) { return add(property_rows_, property_ids_, properties_, id); }

  bool has_entity(const std::string& id) const { return entity_rows_.count(id) > 0; }
  bool has_property(const std::string& id) const { return property_rows_.count(id) > 0; }

  std::size_t entity_row(const std::string& id) const { return row(entity_rows_, id, "entity"); }
  std::size_t property_row(const std::string& id) const { return row(property_rows_, id, "property"); }

  std::vector<double>& entity(std::size_t r) { return entities_[r]; }
  const std::vector<double>& entity(std::size_t r) const { return entities_[r]; }
  std::vector<double>& property(std::size_t r) { return properties_[r]; }
  const std::vector<double>& property(std::size_t r) const { return properties_[r]; }
  const std::vector<double>& entity(const std::string& id) const { return entities_[entity_row(id)]; }
  const std::vector<double>& property(const std::string& id) const { return properties_[property_row(id)]; }

  std::size_t entity_count() const { return entities_.size(); }
  std::size_t property_count() const { return properties_.size(); }
  const std::vector<std::string>& entity_ids() const { return entity_ids_; }
  const std::vector<std::string>& property_ids() const { return property_ids_; }

  bool operator==(const EmbeddingModel&) const = default;

 private:
  static std::size_t add(std::map<std::string, std::size_t>& rows, std::vector<std::string>& ids,
                         std::vector<std::vector<double>>& table, const std::string& id) {
    auto [it, inserted] = rows.emplace(id, ids.size());
    if (inserted) {
      ids.push_back(id);
      table.emplace_back();
    }
    return it->second;
  }
  static std::size_t row(const std::map<std::string, std::size_t>& rows, const std::string& id, const char* kind) {
    auto it = rows.find(id);
    if (it == rows.end()) throw UnknownTermError(std::string(kind) + " vector", id);
    return it->second;
  }

  EmbeddingKind kind_ = EmbeddingKind::transe;
  std::size_t dim_ = 0;
  std::uint64_t seed_ = 0;
  std::map<std::string, std::size_t> entity_rows_, property_rows_;
  std::vector<std::string> entity_ids_, property_ids_;
  std::vector<std::vector<double>> entities_, properties_;
};

// ---------------------------------------------------------------------------
// Scoring

inline double transe_distance(const std::vector<double>& s, const std::vector<double>& p, const std::vector<double>& o) {
  double sum = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double d = s[i] + p[i] - o[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

inline double distmult_product(const std::vector<double>& s, const std::vector<double>& p, const std::vector<double>& o) {
  double sum = 0;
  for (std::size_t i = 0; i < s.size(); ++i) sum += p[i] * s[i] * o[i];
  return sum;
}

/// ||e_s + e_p - e_o||_2
inline double transe_score(const EmbeddingModel& m, const std::string& s, const std::string& p, const std::string& o) {
  return transe_distance(m.entity(s), m.property(p), m.entity(o));
}

/// sum_i e_p[i] * e_s[i] * e_o[i]
inline double distmult_score(const EmbeddingModel& m, const std::string& s, const std::string& p, const std::string& o) {
  return distmult_product(m.entity(s), m.property(p), m.entity(o));
}

/// Model-native score: distance for TransE, product for DistMult.
inline double raw_score(const EmbeddingModel& m, std::size_t s, std::size_t p, std::size_t o) {
  return m.kind() == EmbeddingKind::transe ? transe_distance(m.entity(s), m.property(p), m.entity(o))
                                           : distmult_product(m.entity(s), m.property(p), m.entity(o));
}

/// Higher is more plausible for both kinds.
inline double likelihood(const EmbeddingModel& m, const std::string& s, const std::string& p, const std::string& e) {
  return m.kind() == EmbeddingKind::transe ? -transe_score(m, s, p, e) : distmult_score(m, s, p, e);
}

// ---------------------------------------------------------------------------
// Margin ranking loss and its gradient

struct IndexedTriple {
  std::size_t s, p, o;
  bool operator==(const IndexedTriple&) const = default;
};

struct TrainingPair {
  IndexedTriple positive;
  IndexedTriple negative;
};

/// Sparse gradient keyed by row.
struct EmbeddingGradient {
  std::map<std::size_t, std::vector<double>> entities;
  std::map<std::size_t, std::vector<double>> properties;
};

namespace detail {

inline void accumulate(std::map<std::size_t, std::vector<double>>& g, std::size_t row, const std::vector<double>& v,
                       double scale) {
  auto& dst = g[row];
  if (dst.empty()) dst.assign(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) dst[i] += scale * v[i];
}

// Adds sign * d(score)/d(params) of one triple.
inline void add_score_gradient(const EmbeddingModel& m, const IndexedTriple& t, double sign, EmbeddingGradient& g) {
  const auto& s = m.entity(t.s);
  const auto& p = m.property(t.p);
  const auto& o = m.entity(t.o);
  const std::size_t d = s.size();
  std::vector<double> v(d);
  if (m.kind() == EmbeddingKind::transe) {
    const double dist = transe_distance(s, p, o);
    if (dist == 0.0) return;
    for (std::size_t i = 0; i < d; ++i) v[i] = (s[i] + p[i] - o[i]) / dist;
    accumulate(g.entities, t.s, v, sign);
    accumulate(g.properties, t.p, v, sign);
    accumulate(g.entities, t.o, v, -sign);
  } else {
    for (std::size_t i = 0; i < d; ++i) v[i] = p[i] * o[i];
    accumulate(g.entities, t.s, v, sign);
    for (std::size_t i = 0; i < d; ++i) v[i] = p[i] * s[i];
    accumulate(g.entities, t.o, v, sign);
    for (std::size_t i = 0; i < d; ++i) v[i] = s[i] * o[i];
    accumulate(g.properties, t.p, v, sign);
  }
}

inline double pair_hinge(const EmbeddingModel& m, const TrainingPair& pr, double gamma) {
  const double pos = raw_score(m, pr.positive.s, pr.positive.p, pr.positive.o);
  const double neg = raw_score(m, pr.negative.s, pr.negative.p, pr.negative.o);
  return m.kind() == EmbeddingKind::transe ? gamma + pos - neg : gamma - pos + neg;
}

}  // namespace detail

/// Sum over pairs of [gamma + g(t) - g(t~)]+ (TransE) or [gamma - f(t) + f(t~)]+ (DistMult).
inline double margin_loss(const EmbeddingModel& m, const std::vector<TrainingPair>& batch, double gamma) {
  double loss = 0;
  for (const auto& pr : batch) loss += std::max(0.0, detail::pair_hinge(m, pr, gamma));
  return loss;
}

inline EmbeddingGradient margin_loss_gradient(const EmbeddingModel& m, const std::vector<TrainingPair>& batch,
                                              double gamma) {
  EmbeddingGradient g;
  const double sign = m.kind() == EmbeddingKind::transe ? 1.0 : -1.0;
  for (const auto& pr : batch) {
    if (detail::pair_hinge(m, pr, gamma) <= 0) continue;
    detail::add_score_gradient(m, pr.positive, sign, g);
    detail::add_score_gradient(m, pr.negative, -sign, g);
  }
  return g;
}

inline void apply_gradient(EmbeddingModel& m, const EmbeddingGradient& g, double lr) {
  for (const auto& [r, v] : g.entities) {
    auto& e = m.entity(r);
    for (std::size_t i = 0; i < v.size(); ++i) e[i] -= lr * v[i];
  }
  for (const auto& [r, v] : g.properties) {
    auto& e = m.property(r);
    for (std::size_t i = 0; i < v.size(); ++i) e[i] -= lr * v[i];
  }
}

inline void normalize_entities(EmbeddingModel& m) {
  for (std::size_t r = 0; r < m.entity_count(); ++r) {
    auto& e = m.entity(r);
    double n = 0;
    for (double x : e) n += x * x;
    n = std::sqrt(n);
    if (n > 0) {
      for (auto& x : e) x /= n;
    }
  }
}

/// Linear margin schedule from start to end over all training steps.
inline double margin_at(const TrainConfig& cfg, std::size_t step, std::size_t total_steps) {
  if (total_steps <= 1) return cfg.margin_start;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps - 1);
  return cfg.margin_start + (cfg.margin_end - cfg.margin_start) * frac;
}

struct EmbeddingTrainReport {
  std::vector<double> epoch_loss;  // mean hinge loss per pair, fresh negatives and scheduled margin
  // Mean hinge loss after each epoch on one fixed corruption per positive at
  // marginStart, measured on the model as it would be returned. Comparable
  // across epochs, unlike epoch_loss.
  std::vector<double> probe_loss;
};

/// Trains on every triple of the sub-graph. Each epoch draws fresh negatives
/// by replacing the subject or object with a uniform entity of E, avoiding T.
inline EmbeddingModel train_embedding(const SubGraph& g, EmbeddingKind kind, const TrainConfig& cfg,
                                      EmbeddingTrainReport* report = nullptr) {
  cfg.validate();
  if (g.triples.empty()) throw Error("embedding training needs at least one triple");
  if (g.entities.size() < 2) throw Error("embedding training needs at least two entities");

  EmbeddingModel m(kind, cfg.dim, cfg.seed);
  for (const auto& e : g.entities) m.add_entity(e);
  for (const auto& p : g.properties) m.add_property(p);
  Rng rng(cfg.seed);
  const double bound = 6.0 / std::sqrt(static_cast<double>(cfg.dim));
  for (std::size_t r = 0; r < m.entity_count(); ++r) {
    auto& v = m.entity(r);
    v.resize(cfg.dim);
    for (auto& x : v) x = rng.uniform(-bound, bound);
  }
  for (std::size_t r = 0; r < m.property_count(); ++r) {
    auto& v = m.property(r);
    v.resize(cfg.dim);
    for (auto& x : v) x = rng.uniform(-bound, bound);
  }

  std::vector<IndexedTriple> positives;
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> known;
  for (const auto& t : g.triples) {
    IndexedTriple it{m.entity_row(t.s), m.property_row(t.p), m.entity_row(t.o.value)};
    positives.push_back(it);
    known.emplace(it.s, it.p, it.o);
  }

  const std::size_t n_entities = m.entity_count();
  auto corrupt = [&](const IndexedTriple& t) {
    IndexedTriple c = t;
    for (int attempt = 0; attempt < kCorruptionRetries; ++attempt) {
      c = t;
      const std::size_t e = rng.index(n_entities);
      if (rng.coin()) {
        c.s = e;
      } else {
        c.o = e;
      }
      if (!known.count({c.s, c.p, c.o})) break;
    }
    return c;
  };

  std::vector<TrainingPair> probe;
  if (report) {
    Rng probe_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::swap(rng, probe_rng);
    for (const auto& t : positives) probe.push_back({t, corrupt(t)});
    std::swap(rng, probe_rng);
  }
  auto probe_loss = [&] {
    EmbeddingModel view = m;
    if (kind == EmbeddingKind::transe) normalize_entities(view);
    return margin_loss(view, probe, cfg.margin_start) / static_cast<double>(probe.size());
  };

  const std::size_t per_epoch = positives.size() * cfg.negatives_per_positive;
  const std::size_t batches_per_epoch = (per_epoch + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = batches_per_epoch * cfg.epochs;
  std::size_t step = 0;
  std::vector<TrainingPair> pairs;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (kind == EmbeddingKind::transe) normalize_entities(m);
    pairs.clear();
    for (const auto& t : positives) {
      for (std::size_t k = 0; k < cfg.negatives_per_positive; ++k) pairs.push_back({t, corrupt(t)});
    }
    rng.shuffle(pairs);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < pairs.size(); start += cfg.batch_size) {
      std::vector<TrainingPair> batch(pairs.begin() + static_cast<std::ptrdiff_t>(start),
                                      pairs.begin() + static_cast<std::ptrdiff_t>(std::min(pairs.size(), start + cfg.batch_size)));
      const double gamma = margin_at(cfg, step++, total_steps);
      epoch_loss += margin_loss(m, batch, gamma);
      apply_gradient(m, margin_loss_gradient(m, batch, gamma), cfg.learning_rate);
    }
    if (!std::isfinite(epoch_loss)) throw Error("embedding training diverged at epoch " + std::to_string(epoch));
    for (std::size_t r = 0; r < m.entity_count(); ++r) {
      for (double x : m.entity(r)) {
        if (!std::isfinite(x)) throw Error("non-finite embedding at epoch " + std::to_string(epoch));
      }
    }
    if (report) {
      report->epoch_loss.push_back(epoch_loss / static_cast<double>(pairs.size()));
      report->probe_loss.push_back(probe_loss());
    }
  }
  if (kind == EmbeddingKind::transe) normalize_entities(m);
  return m;
}

// ---------------------------------------------------------------------------
// Model file: one JSON header line, then `E|P <TAB> id <TAB> v1 ... vd` rows.

inline void write_embedding(std::ostream& out, const EmbeddingModel& m) {
  nlohmann::json header{{"format", "kbfix-embedding"},      {"version", 1},
                        {"kind", std::string(to_string(m.kind()))}, {"d", m.dim()},
                        {"entities", m.entity_count()},     {"properties", m.property_count()},
                        {"seed", m.seed()}};
  out << header.dump() << '\n';
  char buf[32];
  auto row = [&](char tag, const std::string& id, const std::vector<double>& v) {
    detail::check_field(id);
    out << tag << '\t' << id << '\t';
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", v[i]);
      if (i) out << ' ';
      out << buf;
    }
    out << '\n';
  };
  for (std::size_t r = 0; r < m.entity_count(); ++r) row('E', m.entity_ids()[r], m.entity(r));
  for (std::size_t r = 0; r < m.property_count(); ++r) row('P', m.property_ids()[r], m.property(r));
}

inline EmbeddingModel read_embedding(std::istream& in, const std::string& source = "<embedding>") {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "missing header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const std::exception& e) {
    throw ParseError(source, 1, e.what());
  }
  if (h.value("format", "") != "kbfix-embedding") throw ParseError(source, 1, "not an embedding model file");
  EmbeddingModel m(parse_embedding_kind(h.at("kind").get<std::string>()), h.at("d").get<std::size_t>(),
                   h.value("seed", std::uint64_t{0}));
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty()) continue;
    auto f = detail::split_tabs(line);
    if (f.size() != 3 || (f[0] != "E" && f[0] != "P")) throw ParseError(source, lineno, "expected E|P<TAB>id<TAB>vector");
    std::istringstream vs(f[2]);
    std::vector<double> v;
    double x;
    while (vs >> x) v.push_back(x);
    if (v.size() != m.dim()) throw ParseError(source, lineno, "vector dimension mismatch");
    if (f[0] == "E") {
      m.entity(m.add_entity(f[1])) = std::move(v);
    } else {
      m.property(m.add_property(f[1])) = std::move(v);
    }
  }
  if (m.entity_count() != h.at("entities").get<std::size_t>() ||
      m.property_count() != h.at("properties").get<std::size_t>()) {
    throw ParseError(source, lineno, "row counts do not match header");
  }
  return m;
}

}  // namespace kbfix
