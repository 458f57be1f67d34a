#pragma once
// Link prediction from observed features: path vocabulary + node bits fed to
// an MLP trained on the sub-graph's positive and corrupted samples.

#include <json.hpp>

#include <string>
#include <vector>

#include "kbfix/error.hpp"
#include "kbfix/features.hpp"
#include "kbfix/mlp.hpp"
#include "kbfix/subgraph.hpp"

namespace kbfix {

struct FeatureModel {
  PathMode mode = PathMode::tagged;
  bool hold_out_self = true;
  PathVocabulary vocab;
  Mlp mlp;

  /// Probability that ⟨s, p, o⟩ holds given the sub-graph adjacency.
  double score(const AdjacencyIndex& adj, const std::string& s, const std::string& p, const std::string& o) const {
    return mlp.score(encode(vocab, adj, s, p, o, {mode, std::nullopt}).dense());
  }
};

struct FeatureTrainOptions {
  PathMode mode = PathMode::tagged;
  bool hold_out_self = true;
  MlpConfig mlp;
};

/// Dense feature rows and 0/1 labels for labelled samples.
inline void featurize(const std::vector<LabeledSample>& samples, const PathVocabulary& vocab,
                      const AdjacencyIndex& adj, PathMode mode, bool hold_out_self,
                      std::vector<std::vector<double>>& xs, std::vector<double>& ys) {
  xs.clear();
  ys.clear();
  for (const auto& smp : samples) {
    FeatureOptions opt{mode, hold_out_self ? std::optional<Triple>(smp.triple) : std::nullopt};
    xs.push_back(encode(vocab, adj, smp.triple.s, smp.triple.p, smp.triple.o.value, opt).dense());
    ys.push_back(smp.positive ? 1.0 : 0.0);
  }
}

inline FeatureModel train_feature_model(const SubGraph& g, const SampleSet& samples, const FeatureTrainOptions& opt,
                                        MlpTrainReport* report = nullptr) {
  const AdjacencyIndex adj(g);
  const auto labeled = labeled_samples(samples);
  FeatureModel m;
  m.mode = opt.mode;
  m.hold_out_self = opt.hold_out_self;
  m.vocab = build_vocabulary(labeled, adj, opt.mode, opt.hold_out_self);
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  featurize(labeled, m.vocab, adj, opt.mode, opt.hold_out_self, xs, ys);
  m.mlp = train_mlp(xs, ys, opt.mlp, report);
  return m;
}

inline nlohmann::json to_json(const FeatureModel& m) {
  nlohmann::json keys = nlohmann::json::array();
  for (const auto& k : m.vocab.keys()) keys.push_back(to_json(k));
  return {{"mode", m.mode == PathMode::merged ? "merged" : "tagged"},
          {"holdOutSelf", m.hold_out_self},
          {"paths", std::move(keys)},
          {"mlp", m.mlp.to_json()}};
}

inline FeatureModel feature_model_from_json(const nlohmann::json& j) {
  FeatureModel m;
  const auto mode = j.at("mode").get<std::string>();
  if (mode != "tagged" && mode != "merged") throw Error("unknown path mode '" + mode + "'");
  m.mode = mode == "merged" ? PathMode::merged : PathMode::tagged;
  m.hold_out_self = j.value("holdOutSelf", true);
  for (const auto& kj : j.at("paths")) m.vocab.add(path_key_from_json(kj));
  m.mlp = Mlp::from_json(j.at("mlp"));
  if (m.mlp.input_width() != m.vocab.size() + 2) throw Error("MLP input width does not match the path vocabulary");
  return m;
}

}  // namespace kbfix
