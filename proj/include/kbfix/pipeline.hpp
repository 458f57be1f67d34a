#pragma once
// End-to-end correction pipeline: candidates, sub-graph and samples, link
// prediction, constraint mining and checking, normalization, decisions and
// metrics. Every expensive stage persists its artifact under
// <work_dir>/cache keyed by a content hash of its inputs and config section,
// so re-runs (τ sweeps, model swaps) reuse earlier work.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kbfix/constraints.hpp"
#include "kbfix/decide.hpp"
#include "kbfix/embedding.hpp"
#include "kbfix/error.hpp"
#include "kbfix/feature_model.hpp"
#include "kbfix/kb_store.hpp"
#include "kbfix/lexical_index.hpp"
#include "kbfix/metrics.hpp"
#include "kbfix/relate.hpp"
#include "kbfix/remote_lookup.hpp"
#include "kbfix/subgraph.hpp"

namespace kbfix {

/// Failure inside a pipeline stage, optionally tied to one target.
class StageError : public Error {
 public:
  StageError(std::string stage, std::string target, const std::string& what)
      : Error(stage + (target.empty() ? "" : " [" + target + "]") + ": " + what),
        stage_(std::move(stage)),
        target_(std::move(target)),
        message_(what) {}
  const std::string& stage() const { return stage_; }
  const std::string& target() const { return target_; }
  const std::string& message() const { return message_; }

 private:
  std::string stage_, target_, message_;
};

enum class LinkModel { none, features, transe, distmult };

inline LinkModel parse_link_model(std::string_view s) {
  if (s == "none") return LinkModel::none;
  if (s == "pn" || s == "features") return LinkModel::features;
  if (s == "te" || s == "transe") return LinkModel::transe;
  if (s == "dm" || s == "distmult") return LinkModel::distmult;
  throw Error("unknown link model '" + std::string(s) + "'");
}

inline std::string_view to_string(LinkModel m) {
  switch (m) {
    case LinkModel::none: return "none";
    case LinkModel::features: return "pn";
    case LinkModel::transe: return "te";
    case LinkModel::distmult: return "dm";
  }
  return "?";
}

enum class NormScope { global, per_property };

struct PipelineConfig {
  std::string triples, labels, schema, anchors, targets;
  std::string stopwords;  // file; empty = built-in English list, "none" = no stop words
  std::string vectors;
  std::string constraints;  // override file merged over mined constraints
  std::string lookup_url;   // host:port of a remote lookup service; empty = local index
  std::string work_dir = "kbfix-work";
  bool cache = true;

  CandidateMethod method = CandidateMethod::lookup;
  std::optional<std::size_t> k;
  ExtractOptions extract;
  std::uint64_t sample_seed = 1;

  LinkModel link = LinkModel::features;
  FeatureTrainOptions features;
  TrainConfig embed;

  std::optional<ConsistencyModel> consistency = ConsistencyModel::both;
  ConsistencyParams params;

  std::optional<double> tau;  // fixed threshold; absent = chosen on the dev split
  double tau_step = 0.05;
  double dev_fraction = 0.5;
  std::uint64_t split_seed = 1;
  NormScope normalize = NormScope::global;
  LabelMatch label_match = LabelMatch::folded;

  std::size_t candidate_k() const { return k.value_or(default_k(method)); }

  /// Every referenced path must exist.
  void validate() const {
    if (triples.empty()) throw Error("config: 'triples' is required");
    if (targets.empty()) throw Error("config: 'targets' is required");
    for (const auto* p : {&triples, &labels, &schema, &anchors, &targets, &vectors, &constraints}) {
      if (!p->empty() && !std::filesystem::exists(*p)) throw Error("config: file not found: " + *p);
    }
    if (!stopwords.empty() && stopwords != "none" && !std::filesystem::exists(stopwords)) {
      throw Error("config: file not found: " + stopwords);
    }
    if (method == CandidateMethod::wordvec && vectors.empty()) throw Error("config: wordvec candidates need 'vectors'");
    if (candidate_k() == 0) throw Error("config: k must be positive");
    if (tau && !(*tau >= 0 && *tau <= 1)) throw Error("config: tau must lie in [0, 1]");
    if (!(dev_fraction > 0 && dev_fraction < 1)) throw Error("config: dev fraction must lie in (0, 1)");
    params.validate();
    embed.validate();
  }
};

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("config: '" + key + "' expects a boolean, got '" + v + "'");
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || !std::isfinite(d)) throw Error("config: '" + key + "' expects a number, got '" + v + "'");
  return d;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long n = 0;
  try {
    if (!v.empty() && v[0] != '-') n = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw Error("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  return n;
}

}  // namespace detail

/// Applies one key = value setting. Relative paths resolve against base_dir.
inline void set_config_value(PipelineConfig& c, const std::string& key, const std::string& value,
                             const std::filesystem::path& base_dir = {}) {
  using namespace detail;
  auto path = [&](std::string& dst) {
    const std::filesystem::path p(value);
    dst = value.empty() || p.is_absolute() || base_dir.empty() ? value : (base_dir / p).string();
  };
  auto u = [&] { return parse_uint(key, value); };
  auto d = [&] { return parse_double(key, value); };

  if (key == "triples") path(c.triples);
  else if (key == "labels") path(c.labels);
  else if (key == "schema") path(c.schema);
  else if (key == "anchors") path(c.anchors);
  else if (key == "targets") path(c.targets);
  else if (key == "vectors") path(c.vectors);
  else if (key == "constraints") path(c.constraints);
  else if (key == "work_dir") path(c.work_dir);
  else if (key == "stopwords") {
    if (value == "none" || value == "en-1" || value.empty()) c.stopwords = value == "none" ? "none" : "";
    else path(c.stopwords);
  }
  else if (key == "lookup_url") c.lookup_url = value;
  else if (key == "cache") c.cache = parse_bool(key, value);
  else if (key == "candidates.method") c.method = parse_candidate_method(value);
  else if (key == "candidates.k") c.k = u();
  else if (key == "subgraph.strict") c.extract.strict_conjunction = parse_bool(key, value);
  else if (key == "subgraph.whole_kb") c.extract.whole_kb = parse_bool(key, value);
  else if (key == "sample.seed") c.sample_seed = u();
  else if (key == "link.model") c.link = parse_link_model(value);
  else if (key == "features.mode") {
    if (value != "tagged" && value != "merged") throw Error("config: features.mode must be tagged or merged");
    c.features.mode = value == "merged" ? PathMode::merged : PathMode::tagged;
  }
  else if (key == "features.hold_out_self") c.features.hold_out_self = parse_bool(key, value);
  else if (key == "mlp.hidden") {
    c.features.mlp.hidden.clear();
    std::stringstream ss(value);
    std::string part;
    while (std::getline(ss, part, ',')) c.features.mlp.hidden.push_back(parse_uint(key, std::string(text::trim(part))));
  }
  else if (key == "mlp.lr") c.features.mlp.learning_rate = d();
  else if (key == "mlp.batch") c.features.mlp.batch_size = u();
  else if (key == "mlp.epochs") c.features.mlp.epochs = u();
  else if (key == "mlp.seed") c.features.mlp.seed = u();
  else if (key == "embed.dim") c.embed.dim = u();
  else if (key == "embed.margin_start") c.embed.margin_start = d();
  else if (key == "embed.margin_end") c.embed.margin_end = d();
  else if (key == "embed.epochs") c.embed.epochs = u();
  else if (key == "embed.batch") c.embed.batch_size = u();
  else if (key == "embed.lr") c.embed.learning_rate = d();
  else if (key == "embed.seed") c.embed.seed = u();
  else if (key == "embed.negatives") c.embed.negatives_per_positive = u();
  else if (key == "consistency.model") {
    c.consistency = value == "none" ? std::nullopt : std::optional(parse_consistency_model(value));
  }
  else if (key == "consistency.sigma") c.params.sigma = d();
  else if (key == "consistency.w_specific") c.params.w_specific = d();
  else if (key == "consistency.w_general") c.params.w_general = d();
  else if (key == "consistency.combine") c.params.combine = parse_combine_mode(value);
  else if (key == "tau") c.tau = value == "auto" ? std::nullopt : std::optional(d());
  else if (key == "tau.step") c.tau_step = d();
  else if (key == "split.dev_fraction") c.dev_fraction = d();
  else if (key == "split.seed") c.split_seed = u();
  else if (key == "normalize") {
    if (value != "global" && value != "per_property") throw Error("config: normalize must be global or per_property");
    c.normalize = value == "global" ? NormScope::global : NormScope::per_property;
  }
  else if (key == "label_match") {
    if (value != "folded" && value != "strict") throw Error("config: label_match must be folded or strict");
    c.label_match = value == "strict" ? LabelMatch::strict : LabelMatch::folded;
  }
  else throw Error("config: unknown key '" + key + "'");
}

/// `key = value` lines; '#' starts a comment line.
inline PipelineConfig read_config(std::istream& in, const std::string& source,
                                  const std::filesystem::path& base_dir = {}) {
  PipelineConfig c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t(text::trim(line));
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(source, lineno, "expected key = value");
    try {
      set_config_value(c, std::string(text::trim(t.substr(0, eq))), std::string(text::trim(t.substr(eq + 1))), base_dir);
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return c;
}

inline PipelineConfig read_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config " + path);
  return read_config(in, path, std::filesystem::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Content hashing

class Fnv1a {
 public:
  Fnv1a& add(std::string_view s) {
    for (unsigned char c : s) {
      h_ ^= c;
      h_ *= 0x100000001b3ULL;
    }
    // Field separator so ("ab","c") and ("a","bc") differ.
    h_ ^= 0xff;
    h_ *= 0x100000001b3ULL;
    return *this;
  }
  Fnv1a& add_file(const std::string& path) {
    if (path.empty()) return add("<none>");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return add(ss.str());
  }
  std::uint64_t value() const { return h_; }
  std::string hex() const {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 0; i < 16; ++i) s[15 - i] = digits[(h_ >> (4 * i)) & 0xf];
    return s;
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::string fmt_double(double d) {
  std::ostringstream ss;
  ss.precision(17);
  ss << d;
  return ss.str();
}

// ---------------------------------------------------------------------------
// Scores artifact: raw model outputs per (target, candidate).

struct RawScore {
  std::string entity;
  std::size_t rank = 0;
  std::optional<double> y_l;
  std::optional<double> y_c;
};

struct RawTargetScores {
  TargetAssertion target;
  std::vector<RawScore> candidates;
};

inline nlohmann::json to_json(const RawTargetScores& r) {
  nlohmann::json j = to_json(r.target);
  nlohmann::json cs = nlohmann::json::array();
  for (const auto& c : r.candidates) {
    cs.push_back({{"entity", c.entity},
                  {"rank", c.rank},
                  {"yL", c.y_l ? nlohmann::json(*c.y_l) : nlohmann::json(nullptr)},
                  {"yC", c.y_c ? nlohmann::json(*c.y_c) : nlohmann::json(nullptr)}});
  }
  j["candidates"] = std::move(cs);
  return j;
}

inline RawTargetScores raw_scores_from_json(const nlohmann::json& j) {
  RawTargetScores r{target_from_json(j), {}};
  for (const auto& c : j.at("candidates")) {
    RawScore s{c.at("entity").get<std::string>(), c.at("rank").get<std::size_t>(), std::nullopt, std::nullopt};
    if (!c.at("yL").is_null()) s.y_l = c.at("yL").get<double>();
    if (!c.at("yC").is_null()) s.y_c = c.at("yC").get<double>();
    r.candidates.push_back(std::move(s));
  }
  return r;
}

inline void write_raw_scores(std::ostream& out, const std::vector<RawTargetScores>& rs) {
  for (const auto& r : rs) out << to_json(r).dump() << '\n';
}

inline std::vector<RawTargetScores> read_raw_scores(std::istream& in, const std::string& source = "<scores>") {
  std::vector<RawTargetScores> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(raw_scores_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return out;
}

/// Normalizes each model's raw scores over all predictions (or per property)
/// and returns candidates ready for decide().
inline std::vector<ScoredTarget> normalize_scores(const std::vector<RawTargetScores>& raw,
                                                  NormScope scope = NormScope::global) {
  std::vector<ScoredTarget> out;
  for (const auto& r : raw) {
    ScoredTarget st{r.target, {}};
    for (const auto& c : r.candidates) st.candidates.push_back({c.entity, c.rank, c.y_l, c.y_c, 0, false, false});
    out.push_back(std::move(st));
  }
  auto group_of = [&](std::size_t i) { return scope == NormScope::global ? std::string() : raw[i].target.p; };
  for (const bool likelihood : {true, false}) {
    std::map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> cells;
    std::map<std::string, std::vector<double>> values;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      for (std::size_t j = 0; j < raw[i].candidates.size(); ++j) {
        const auto& v = likelihood ? raw[i].candidates[j].y_l : raw[i].candidates[j].y_c;
        if (!v) continue;
        cells[group_of(i)].emplace_back(i, j);
        values[group_of(i)].push_back(*v);
      }
    }
    for (const auto& [g, xs] : values) {
      const auto ys = min_max_normalize(xs);
      const auto& where = cells.at(g);
      for (std::size_t n = 0; n < ys.size(); ++n) {
        auto& c = out[where[n].first].candidates[where[n].second];
        (likelihood ? c.y_l : c.y_c) = ys[n];
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stages

/// Target triples are retracted before anything else looks at the KB, so the
/// erroneous objects do not vote for themselves.
inline KnowledgeBase retract_targets(const KnowledgeBase& kb, const std::vector<TargetAssertion>& targets) {
  std::vector<Triple> ts;
  for (const auto& t : targets) ts.push_back(t.triple());
  return kb.without(ts);
}

inline std::vector<CandidateList> generate_candidates(const std::vector<TargetAssertion>& targets,
                                                      CandidateMethod method, std::size_t k,
                                                      const CandidateSources& src) {
  std::vector<CandidateList> out;
  out.reserve(targets.size());
  for (const auto& t : targets) {
    try {
      out.push_back(candidates_for(t, method, k, src));
    } catch (const std::exception& e) {
      throw StageError("candidates", t.id(), e.what());
    }
  }
  return out;
}

/// Raw y_l / y_c for every candidate of every target. `likelihood` is null
/// when no link model is used; `constraints` is null when no consistency model is.
inline std::vector<RawTargetScores> score_candidates(
    const KnowledgeBase& kb, const std::vector<CandidateList>& lists,
    const std::function<double(const std::string&, const std::string&, const std::string&)>& likelihood,
    const ConstraintSet* constraints, ConsistencyModel model, const ConsistencyParams& params) {
  std::vector<RawTargetScores> out;
  for (const auto& l : lists) {
    RawTargetScores r{l.target, {}};
    const auto pc = constraints ? constraints_for(*constraints, l.target.p) : PropertyConstraints{};
    for (std::size_t i = 0; i < l.entities.size(); ++i) {
      const auto& e = l.entities[i].entity;
      RawScore s{e, i + 1, std::nullopt, std::nullopt};
      try {
        if (likelihood) s.y_l = likelihood(l.target.s, l.target.p, e);
        if (constraints) {
          const auto cs = check_consistency(kb, l.target.s, l.target.p, e, pc.cardinality, pc.range, params);
          s.y_c = consistency_score(cs, model, params.combine);
        }
      } catch (const std::exception& ex) {
        throw StageError("score", l.target.id(), ex.what());
      }
      r.candidates.push_back(std::move(s));
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// Seeded split of target indices into (dev, test).
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_targets(std::size_t n, double dev_fraction,
                                                                                     std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  const auto n_dev = static_cast<std::size_t>(std::llround(static_cast<double>(n) * dev_fraction));
  std::vector<std::size_t> dev(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_dev));
  std::vector<std::size_t> test(idx.begin() + static_cast<std::ptrdiff_t>(n_dev), idx.end());
  std::sort(dev.begin(), dev.end());
  std::sort(test.begin(), test.end());
  return {dev, test};
}

template <typename T>
std::vector<T> pick(const std::vector<T>& xs, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  for (auto i : idx) out.push_back(xs[i]);
  return out;
}

struct PipelineResult {
  std::vector<TargetAssertion> targets;
  std::vector<CandidateList> candidates;
  std::vector<ScoredTarget> scored;
  std::vector<CorrectionResult> corrections;
  double tau = 0;
  bool tau_tuned = false;
  std::vector<std::size_t> dev, test;
  std::vector<SweepRow> sweep;      // over all targets
  std::vector<SweepRow> dev_sweep;  // when τ was tuned
  nlohmann::json metrics;           // null when ground truth is unavailable
  std::vector<std::string> stages_from_cache;
};

namespace detail {

class Cache {
 public:
  Cache(std::filesystem::path dir, bool enabled) : dir_(std::move(dir)), enabled_(enabled) {
    std::filesystem::create_directories(dir_);
  }

  std::string path(const std::string& stage, const std::string& key, const std::string& ext) const {
    return (dir_ / (stage + "-" + key + ext)).string();
  }

  bool has(const std::string& p) const { return enabled_ && std::filesystem::exists(p); }

  /// Writes via a temporary file so an interrupted run never leaves a partial artifact.
  static void write(const std::string& p, const std::function<void(std::ostream&)>& body) {
    const std::string tmp = p + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      if (!out) throw Error("cannot write " + tmp);
      body(out);
      if (!out) throw Error("failed writing " + tmp);
    }
    std::filesystem::rename(tmp, p);
  }

  static std::ifstream open(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p);
    return in;
  }

 private:
  std::filesystem::path dir_;
  bool enabled_;
};

inline nlohmann::json metrics_json(const PipelineResult& r, const std::vector<std::size_t>& idx) {
  const auto lists = pick(r.candidates, idx);
  const auto results = pick(r.corrections, idx);
  nlohmann::json j;
  std::vector<std::size_t> ks{1, 5, 10};
  if (!lists.empty()) ks.push_back(lists.front().k);
  nlohmann::json recall = nlohmann::json::object();
  for (const auto& [k, v] : recall_at_k(lists, ks)) recall[std::to_string(k)] = v;
  j["recallAtK"] = recall;

  std::vector<std::vector<std::string>> ranked, by_likelihood;
  std::vector<std::string> truths;
  for (auto i : idx) {
    if (r.targets[i].gt.kind != GroundTruthKind::entity) continue;
    truths.push_back(r.targets[i].gt.entity);
    std::vector<std::string> rel;
    for (const auto& c : r.candidates[i].entities) rel.push_back(c.entity);
    ranked.push_back(rel);
    auto cands = r.scored[i].candidates;
    std::stable_sort(cands.begin(), cands.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
      return a.y_l.value_or(0) > b.y_l.value_or(0);
    });
    std::vector<std::string> lik;
    for (const auto& c : cands) lik.push_back(c.entity);
    by_likelihood.push_back(lik);
  }
  j["relatednessRanking"] = truths.empty() ? nlohmann::json("n/a") : to_json(ranking_metrics(ranked, truths));
  j["likelihoodRanking"] = truths.empty() ? nlohmann::json("n/a") : to_json(ranking_metrics(by_likelihood, truths));
  j["correction"] = to_json(correction_metrics(results));
  return j;
}

}  // namespace detail

inline bool all_ground_truth_known(const std::vector<TargetAssertion>& ts) {
  for (const auto& t : ts) {
    if (t.gt.kind == GroundTruthKind::unknown) return false;
  }
  return true;
}

inline std::unique_ptr<LookupProvider> make_remote_lookup(const std::string& url) {
  const auto colon = url.rfind(':');
  if (colon == std::string::npos) throw Error("lookup_url must be host:port");
  return std::make_unique<RemoteLookup>(url.substr(0, colon),
                                        static_cast<int>(detail::parse_uint("lookup_url", url.substr(colon + 1))));
}

inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  PipelineResult res;
  detail::Cache cache(std::filesystem::path(cfg.work_dir) / "cache", cfg.cache);

  KnowledgeBase kb;
  try {
    kb = load_kb({cfg.triples, cfg.labels, cfg.schema, cfg.anchors, std::nullopt});
  } catch (const std::exception& e) {
    throw StageError("load", "", e.what());
  }
  try {
    res.targets = read_targets_file(cfg.targets);
  } catch (const std::exception& e) {
    throw StageError("load", "", e.what());
  }
  const KnowledgeBase view = retract_targets(kb, res.targets);

  Fnv1a kb_hash;
  kb_hash.add_file(cfg.triples).add_file(cfg.labels).add_file(cfg.schema).add_file(cfg.anchors).add_file(cfg.targets);

  // Candidates
  Fnv1a cand_hash = kb_hash;
  cand_hash.add("candidates")
      .add(to_string(cfg.method))
      .add(std::to_string(cfg.candidate_k()))
      .add(cfg.stopwords)
      .add_file(cfg.stopwords == "none" ? "" : cfg.stopwords)
      .add_file(cfg.method == CandidateMethod::wordvec ? cfg.vectors : "")
      .add(cfg.lookup_url);
  const auto cand_path = cache.path("candidates", cand_hash.hex(), ".jsonl");
  if (cache.has(cand_path)) {
    auto in = detail::Cache::open(cand_path);
    res.candidates = read_candidates(in, cand_path);
    res.stages_from_cache.push_back("candidates");
  } else {
    const text::StopWords stop = cfg.stopwords.empty()    ? text::StopWords::english()
                                 : cfg.stopwords == "none" ? text::StopWords::none()
                                                           : text::StopWords::from_file(cfg.stopwords);
    std::unique_ptr<LookupProvider> lookup;
    std::optional<WordVecModel> vectors;
    if (cfg.method == CandidateMethod::lookup) {
      if (cfg.lookup_url.empty()) lookup = std::make_unique<LexicalIndex>(build_lexical_index(view, stop));
      else lookup = make_remote_lookup(cfg.lookup_url);
    }
    if (cfg.method == CandidateMethod::wordvec) vectors = WordVecModel::load_file(cfg.vectors);
    CandidateSources src{&view, lookup.get(), vectors ? &*vectors : nullptr, stop};
    res.candidates = generate_candidates(res.targets, cfg.method, cfg.candidate_k(), src);
    detail::Cache::write(cand_path, [&](std::ostream& o) { write_candidates(o, res.candidates); });
  }

  // Link prediction
  std::function<double(const std::string&, const std::string&, const std::string&)> likelihood;
  std::optional<SubGraph> graph;
  std::optional<AdjacencyIndex> adj;
  std::optional<FeatureModel> feat;
  std::optional<EmbeddingModel> emb;
  Fnv1a model_hash = cand_hash;
  if (cfg.link != LinkModel::none && !res.targets.empty()) {
    Fnv1a sg_hash = cand_hash;
    sg_hash.add("subgraph").add(std::to_string(cfg.extract.strict_conjunction)).add(std::to_string(cfg.extract.whole_kb));
    const auto sg_tsv = cache.path("subgraph", sg_hash.hex(), ".tsv");
    const auto sg_json = cache.path("subgraph", sg_hash.hex(), ".json");
    try {
      if (cache.has(sg_tsv) && cache.has(sg_json)) {
        auto in = detail::Cache::open(sg_tsv);
        auto side = detail::Cache::open(sg_json);
        graph = read_subgraph(in, nlohmann::json::parse(side), sg_tsv);
        res.stages_from_cache.push_back("subgraph");
      } else {
        graph = extract_subgraph(view, res.targets, res.candidates, cfg.extract);
        detail::Cache::write(sg_tsv, [&](std::ostream& o) { write_subgraph_triples(o, *graph); });
        detail::Cache::write(sg_json, [&](std::ostream& o) { o << subgraph_sidecar(*graph).dump() << '\n'; });
      }
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError("subgraph", "", e.what());
    }

    if (cfg.link == LinkModel::features) {
      Fnv1a smp_hash = sg_hash;
      smp_hash.add("samples").add(std::to_string(cfg.sample_seed));
      const auto smp_path = cache.path("samples", smp_hash.hex(), ".json");
      SampleSet samples;
      try {
        if (cache.has(smp_path)) {
          auto in = detail::Cache::open(smp_path);
          samples = sample_set_from_json(nlohmann::json::parse(in));
          res.stages_from_cache.push_back("samples");
        } else {
          samples = sample(*graph, cfg.sample_seed);
          detail::Cache::write(smp_path, [&](std::ostream& o) { o << to_json(samples).dump() << '\n'; });
        }
      } catch (const std::exception& e) {
        throw StageError("samples", "", e.what());
      }

      model_hash = smp_hash;
      model_hash.add("train-feat")
          .add(cfg.features.mode == PathMode::merged ? "merged" : "tagged")
          .add(std::to_string(cfg.features.hold_out_self))
          .add(fmt_double(cfg.features.mlp.learning_rate))
          .add(std::to_string(cfg.features.mlp.batch_size))
          .add(std::to_string(cfg.features.mlp.epochs))
          .add(std::to_string(cfg.features.mlp.seed));
      for (auto h : cfg.features.mlp.hidden) model_hash.add(std::to_string(h));
      const auto model_path = cache.path("model-feat", model_hash.hex(), ".json");
      try {
        if (cache.has(model_path)) {
          auto in = detail::Cache::open(model_path);
          feat = feature_model_from_json(nlohmann::json::parse(in));
          res.stages_from_cache.push_back("train-feat");
        } else {
          feat = train_feature_model(*graph, samples, cfg.features);
          detail::Cache::write(model_path, [&](std::ostream& o) { o << to_json(*feat).dump() << '\n'; });
        }
      } catch (const std::exception& e) {
        throw StageError("train-feat", "", e.what());
      }
      adj.emplace(*graph);
      likelihood = [&](const std::string& s, const std::string& p, const std::string& o) {
        return feat->score(*adj, s, p, o);
      };
    } else {
      const auto kind = cfg.link == LinkModel::transe ? EmbeddingKind::transe : EmbeddingKind::distmult;
      model_hash = sg_hash;
      model_hash.add("train-embed")
          .add(to_string(kind))
          .add(std::to_string(cfg.embed.dim))
          .add(fmt_double(cfg.embed.margin_start))
          .add(fmt_double(cfg.embed.margin_end))
          .add(std::to_string(cfg.embed.epochs))
          .add(std::to_string(cfg.embed.batch_size))
          .add(fmt_double(cfg.embed.learning_rate))
          .add(std::to_string(cfg.embed.seed))
          .add(std::to_string(cfg.embed.negatives_per_positive));
      const auto model_path = cache.path("model-embed", model_hash.hex(), ".tsv");
      try {
        if (cache.has(model_path)) {
          auto in = detail::Cache::open(model_path);
          emb = read_embedding(in, model_path);
          res.stages_from_cache.push_back("train-embed");
        } else {
          emb = train_embedding(*graph, kind, cfg.embed);
          detail::Cache::write(model_path, [&](std::ostream& o) { write_embedding(o, *emb); });
        }
      } catch (const std::exception& e) {
        throw StageError("train-embed", "", e.what());
      }
      likelihood = [&](const std::string& s, const std::string& p, const std::string& o) {
        return kbfix::likelihood(*emb, s, p, o);
      };
    }
  }

  // Constraints
  std::optional<ConstraintSet> constraints;
  Fnv1a cons_hash = kb_hash;
  cons_hash.add("mine").add_file(cfg.constraints);
  if (cfg.consistency) {
    const auto cons_path = cache.path("constraints", cons_hash.hex(), ".json");
    try {
      if (cache.has(cons_path)) {
        auto in = detail::Cache::open(cons_path);
        constraints = constraints_from_json(nlohmann::json::parse(in));
        res.stages_from_cache.push_back("mine");
      } else {
        constraints = mine_all(view);
        if (!cfg.constraints.empty()) {
          auto in = detail::Cache::open(cfg.constraints);
          constraints = merge_constraints(std::move(*constraints), nlohmann::json::parse(in));
        }
        detail::Cache::write(cons_path, [&](std::ostream& o) { o << to_json(*constraints).dump() << '\n'; });
      }
    } catch (const std::exception& e) {
      throw StageError("mine", "", e.what());
    }
  }

  // Scores
  Fnv1a score_hash = model_hash;
  score_hash.add("score")
      .add(std::to_string(cons_hash.value()))
      .add(to_string(cfg.link))
      .add(cfg.consistency ? to_string(*cfg.consistency) : "none")
      .add(fmt_double(cfg.params.sigma))
      .add(fmt_double(cfg.params.w_specific))
      .add(fmt_double(cfg.params.w_general))
      .add(cfg.params.combine == CombineMode::average ? "average" : "multiply");
  const auto score_path = cache.path("scores", score_hash.hex(), ".jsonl");
  std::vector<RawTargetScores> raw;
  if (cache.has(score_path)) {
    auto in = detail::Cache::open(score_path);
    raw = read_raw_scores(in, score_path);
    res.stages_from_cache.push_back("score");
  } else {
    raw = score_candidates(view, res.candidates, likelihood, constraints ? &*constraints : nullptr,
                           cfg.consistency.value_or(ConsistencyModel::both), cfg.params);
    detail::Cache::write(score_path, [&](std::ostream& o) { write_raw_scores(o, raw); });
  }

  // Decide
  try {
    res.scored = normalize_scores(raw, cfg.normalize);
  } catch (const std::exception& e) {
    throw StageError("decide", "", e.what());
  }
  const bool have_gt = all_ground_truth_known(res.targets);
  const auto grid = default_tau_grid(cfg.tau_step);
  if (cfg.tau) {
    res.tau = *cfg.tau;
  } else {
    if (!have_gt) throw StageError("decide", "", "tau is not set and the targets lack ground truth for tuning it");
    std::tie(res.dev, res.test) = split_targets(res.targets.size(), cfg.dev_fraction, cfg.split_seed);
    res.dev_sweep = tau_sweep(pick(res.scored, res.dev), grid, view, cfg.label_match);
    res.tau = res.dev.empty() ? 0.5 : best_tau(res.dev_sweep);
    res.tau_tuned = true;
  }
  res.corrections = decide_all(res.scored, res.tau, view, cfg.label_match);

  if (have_gt) {
    res.sweep = tau_sweep(res.scored, grid, view, cfg.label_match);
    std::vector<std::size_t> all(res.targets.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    res.metrics = {{"tau", res.tau}, {"all", detail::metrics_json(res, all)}};
    if (res.tau_tuned) {
      res.metrics["dev"] = detail::metrics_json(res, res.dev);
      res.metrics["test"] = detail::metrics_json(res, res.test);
    }
  }
  return res;
}

inline void write_sweep(std::ostream& out, const std::vector<SweepRow>& rows) {
  auto cell = [](const std::optional<double>& v) { return v ? fmt_double(*v) : std::string("n/a"); };
  out << "tau\tcorrection_rate\tempty_rate\taccuracy\n";
  for (const auto& r : rows) {
    out << fmt_double(r.tau) << '\t' << cell(r.metrics.correction_rate) << '\t' << cell(r.metrics.empty_rate) << '\t'
        << cell(r.metrics.accuracy) << '\n';
  }
}

/// corrections.jsonl, metrics.json and sweep.tsv under the work directory.
inline void write_pipeline_outputs(const PipelineResult& r, const std::string& work_dir) {
  std::filesystem::create_directories(work_dir);
  const std::filesystem::path dir(work_dir);
  detail::Cache::write((dir / "corrections.jsonl").string(), [&](std::ostream& o) { write_corrections(o, r.corrections); });
  detail::Cache::write((dir / "metrics.json").string(), [&](std::ostream& o) {
    o << (r.metrics.is_null() ? nlohmann::json{{"tau", r.tau}, {"all", "n/a"}} : r.metrics).dump(2) << '\n';
  });
  if (!r.sweep.empty()) detail::Cache::write((dir / "sweep.tsv").string(), [&](std::ostream& o) { write_sweep(o, r.sweep); });
}

}  // namespace kbfix
