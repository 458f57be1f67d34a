// kbfix command-line front end: one subcommand per pipeline stage plus the
// end-to-end runner and the synthetic benchmark generator.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kbfix/pipeline.hpp"
#include "kbfix/synthetic.hpp"

namespace {

using namespace kbfix;
using nlohmann::json;

struct KbArgs {
  std::string triples, labels, schema, anchors;

  void attach(CLI::App* app) {
    app->add_option("--triples", triples, "Property, type and schema triples (TSV)")->required();
    app->add_option("--labels", labels, "Entity labels (TSV)");
    app->add_option("--schema", schema, "Extra schema triples (TSV)");
    app->add_option("--anchors", anchors, "Anchor text (TSV)");
  }
  KnowledgeBase load() const { return load_kb({triples, labels, schema, anchors, std::nullopt}); }
};

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return in;
}

// Writes to `path` atomically, or to stdout when path is empty.
void emit(const std::string& path, const std::function<void(std::ostream&)>& body) {
  if (path.empty()) {
    body(std::cout);
    return;
  }
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  detail::Cache::write(path, body);
}

json read_json(const std::string& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path, 1, e.what());
  }
}

std::vector<CandidateList> load_candidates(const std::string& path) {
  auto in = open_in(path);
  return read_candidates(in, path);
}

SubGraph load_subgraph(const std::string& prefix) {
  auto in = open_in(prefix + ".tsv");
  return read_subgraph(in, read_json(prefix + ".json"), prefix + ".tsv");
}

std::vector<TargetAssertion> targets_of(const std::vector<CandidateList>& lists) {
  std::vector<TargetAssertion> ts;
  for (const auto& l : lists) ts.push_back(l.target);
  return ts;
}

text::StopWords stop_words(const std::string& choice) {
  if (choice.empty() || choice == "en-1") return text::StopWords::english();
  if (choice == "none") return text::StopWords::none();
  return text::StopWords::from_file(choice);
}

std::vector<RawTargetScores> load_scores(const std::string& path) {
  auto in = open_in(path);
  return read_raw_scores(in, path);
}

NormScope parse_scope(const std::string& s) {
  if (s == "global") return NormScope::global;
  if (s == "per_property") return NormScope::per_property;
  throw Error("normalize must be global or per_property");
}

LabelMatch parse_label_match(const std::string& s) {
  if (s == "folded") return LabelMatch::folded;
  if (s == "strict") return LabelMatch::strict;
  throw Error("label match must be folded or strict");
}

json error_record(const std::exception& e) {
  json j{{"error", e.what()}};
  if (const auto* se = dynamic_cast<const StageError*>(&e)) {
    j["stage"] = se->stage();
    j["message"] = se->message();
    if (!se->target().empty()) j["target"] = se->target();
  }
  if (const auto* pe = dynamic_cast<const ParseError*>(&e)) {
    j["source"] = pe->source();
    j["line"] = pe->line();
  }
  if (const auto* ue = dynamic_cast<const UnknownTermError*>(&e)) j["term"] = ue->term();
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Assertion correction for knowledge bases"};
  app.require_subcommand(1);
  std::function<void()> run;

  // load
  KbArgs load_kb_args;
  auto* load = app.add_subcommand("load", "Load a KB and print its statistics");
  load_kb_args.attach(load);
  load->callback([&] {
    run = [&] {
      const auto kb = load_kb_args.load();
      std::size_t literal = 0;
      for (const auto& t : kb.property_assertions()) literal += t.o.is_literal();
      json j{{"entities", kb.entities().size()},
             {"properties", kb.properties().size()},
             {"classes", kb.classes().size()},
             {"assertions", kb.size()},
             {"literalAssertions", literal},
             {"labelledEntities", kb.all_labels().size()}};
      std::cout << j.dump(2) << '\n';
    };
  });

  // candidates
  KbArgs cand_kb;
  std::string cand_targets, cand_method = "lookup", cand_vectors, cand_stop, cand_url, cand_out;
  std::size_t cand_k = 0;
  auto* cand = app.add_subcommand("candidates", "Generate related-entity candidates for target assertions");
  cand_kb.attach(cand);
  cand->add_option("--targets", cand_targets, "Targets (JSON lines)")->required();
  cand->add_option("--method", cand_method, "lookup | edit | wordvec");
  cand->add_option("--k", cand_k, "Candidates per target (default 30, 76 for edit)");
  cand->add_option("--vectors", cand_vectors, "Word vectors (text format) for wordvec");
  cand->add_option("--stopwords", cand_stop, "Stop-word file, 'none' or 'en-1'");
  cand->add_option("--lookup-url", cand_url, "host:port of a remote lookup service");
  cand->add_option("--out", cand_out, "Output file (default stdout)");
  cand->callback([&] {
    run = [&] {
      const auto targets = read_targets_file(cand_targets);
      const auto kb = retract_targets(cand_kb.load(), targets);
      const auto method = parse_candidate_method(cand_method);
      const auto stop = stop_words(cand_stop);
      std::unique_ptr<LookupProvider> lookup;
      std::optional<WordVecModel> vectors;
      if (method == CandidateMethod::lookup) {
        if (cand_url.empty()) lookup = std::make_unique<LexicalIndex>(build_lexical_index(kb, stop));
        else lookup = make_remote_lookup(cand_url);
      }
      if (method == CandidateMethod::wordvec) {
        if (cand_vectors.empty()) throw Error("wordvec candidates need --vectors");
        vectors = WordVecModel::load_file(cand_vectors);
      }
      CandidateSources src{&kb, lookup.get(), vectors ? &*vectors : nullptr, stop};
      const auto lists = generate_candidates(targets, method, cand_k ? cand_k : default_k(method), src);
      emit(cand_out, [&](std::ostream& o) { write_candidates(o, lists); });
    };
  });

  // subgraph
  KbArgs sg_kb;
  std::string sg_targets, sg_cands, sg_out;
  bool sg_strict = false, sg_whole = false;
  auto* sg = app.add_subcommand("subgraph", "Extract the link-prediction sub-graph");
  sg_kb.attach(sg);
  sg->add_option("--targets", sg_targets, "Targets (JSON lines); default: those in the candidates file");
  sg->add_option("--candidates", sg_cands, "Candidate lists (JSON lines)")->required();
  sg->add_option("--out", sg_out, "Output prefix: writes <prefix>.tsv and <prefix>.json")->required();
  sg->add_flag("--strict", sg_strict, "Require both endpoints in E for neighbourhood triples");
  sg->add_flag("--whole-kb", sg_whole, "Use every entity-object triple");
  sg->callback([&] {
    run = [&] {
      const auto lists = load_candidates(sg_cands);
      const auto targets = sg_targets.empty() ? targets_of(lists) : read_targets_file(sg_targets);
      const auto kb = retract_targets(sg_kb.load(), targets);
      const auto g = extract_subgraph(kb, targets, lists, {sg_strict, sg_whole});
      emit(sg_out + ".tsv", [&](std::ostream& o) { write_subgraph_triples(o, g); });
      emit(sg_out + ".json", [&](std::ostream& o) { o << subgraph_sidecar(g).dump() << '\n'; });
    };
  });

  // train-feat
  std::string tf_sg, tf_out, tf_mode = "tagged", tf_hidden = "64", tf_samples_out;
  std::uint64_t tf_seed = 1, tf_mlp_seed = 1;
  double tf_lr = 0.01;
  std::size_t tf_batch = 32, tf_epochs = 200;
  bool tf_no_hold_out = false;
  auto* tf = app.add_subcommand("train-feat", "Train the path/node feature link model");
  tf->add_option("--subgraph", tf_sg, "Sub-graph prefix")->required();
  tf->add_option("--out", tf_out, "Model file (JSON)")->required();
  tf->add_option("--sample-seed", tf_seed, "Negative sampling seed");
  tf->add_option("--samples-out", tf_samples_out, "Also write the sample set (JSON)");
  tf->add_option("--mode", tf_mode, "tagged | merged");
  tf->add_option("--hidden", tf_hidden, "Hidden layer sizes, comma separated");
  tf->add_option("--lr", tf_lr, "Learning rate");
  tf->add_option("--batch", tf_batch, "Mini-batch size");
  tf->add_option("--epochs", tf_epochs, "Epochs");
  tf->add_option("--seed", tf_mlp_seed, "Weight initialisation and shuffling seed");
  tf->add_flag("--no-hold-out", tf_no_hold_out, "Let each training triple witness itself");
  tf->callback([&] {
    run = [&] {
      const auto g = load_subgraph(tf_sg);
      const auto samples = sample(g, tf_seed);
      if (!tf_samples_out.empty()) emit(tf_samples_out, [&](std::ostream& o) { o << to_json(samples).dump() << '\n'; });
      PipelineConfig c;
      set_config_value(c, "features.mode", tf_mode);
      set_config_value(c, "mlp.hidden", tf_hidden);
      c.features.hold_out_self = !tf_no_hold_out;
      c.features.mlp.learning_rate = tf_lr;
      c.features.mlp.batch_size = tf_batch;
      c.features.mlp.epochs = tf_epochs;
      c.features.mlp.seed = tf_mlp_seed;
      MlpTrainReport rep;
      const auto m = train_feature_model(g, samples, c.features, &rep);
      emit(tf_out, [&](std::ostream& o) { o << to_json(m).dump() << '\n'; });
      std::cerr << json{{"positives", samples.positives.size()},
                        {"dropped", samples.dropped.size()},
                        {"paths", m.vocab.size()},
                        {"finalLoss", rep.epoch_loss.empty() ? 0.0 : rep.epoch_loss.back()}}
                       .dump()
                << '\n';
    };
  });

  // train-embed
  std::string te_sg, te_out, te_kind = "transe";
  TrainConfig te_cfg;
  auto* te = app.add_subcommand("train-embed", "Train a TransE or DistMult embedding on the sub-graph");
  te->add_option("--subgraph", te_sg, "Sub-graph prefix")->required();
  te->add_option("--out", te_out, "Model file")->required();
  te->add_option("--kind", te_kind, "transe | distmult");
  te->add_option("--dim", te_cfg.dim, "Embedding dimension");
  te->add_option("--margin-start", te_cfg.margin_start, "Margin at the first step");
  te->add_option("--margin-end", te_cfg.margin_end, "Margin at the last step");
  te->add_option("--epochs", te_cfg.epochs, "Epochs");
  te->add_option("--batch", te_cfg.batch_size, "Mini-batch size");
  te->add_option("--lr", te_cfg.learning_rate, "Learning rate");
  te->add_option("--seed", te_cfg.seed, "Seed");
  te->add_option("--negatives", te_cfg.negatives_per_positive, "Negatives per positive");
  te->callback([&] {
    run = [&] {
      EmbeddingTrainReport rep;
      const auto m = train_embedding(load_subgraph(te_sg), parse_embedding_kind(te_kind), te_cfg, &rep);
      emit(te_out, [&](std::ostream& o) { write_embedding(o, m); });
      std::cerr << json{{"entities", m.entity_count()},
                        {"finalLoss", rep.epoch_loss.empty() ? 0.0 : rep.epoch_loss.back()}}
                       .dump()
                << '\n';
    };
  });

  // mine
  KbArgs mine_kb;
  std::string mine_targets, mine_override, mine_out;
  auto* mine = app.add_subcommand("mine", "Mine cardinality and range constraints");
  mine_kb.attach(mine);
  mine->add_option("--targets", mine_targets, "Targets to retract before mining");
  mine->add_option("--override", mine_override, "Constraints file merged over the mined ones");
  mine->add_option("--out", mine_out, "Output file (default stdout)");
  mine->callback([&] {
    run = [&] {
      auto kb = mine_kb.load();
      if (!mine_targets.empty()) kb = retract_targets(kb, read_targets_file(mine_targets));
      auto set = mine_all(kb);
      if (!mine_override.empty()) set = merge_constraints(std::move(set), read_json(mine_override));
      emit(mine_out, [&](std::ostream& o) { o << to_json(set).dump(2) << '\n'; });
    };
  });

  // score
  KbArgs sc_kb;
  std::string sc_cands, sc_sg, sc_feat, sc_embed, sc_cons, sc_model = "car+ran", sc_combine = "average", sc_out;
  ConsistencyParams sc_params;
  auto* sc = app.add_subcommand("score", "Raw likelihood and consistency scores for every candidate");
  sc_kb.attach(sc);
  sc->add_option("--candidates", sc_cands, "Candidate lists (JSON lines)")->required();
  sc->add_option("--subgraph", sc_sg, "Sub-graph prefix (needed with --feat-model)");
  sc->add_option("--feat-model", sc_feat, "Feature link model");
  sc->add_option("--embed-model", sc_embed, "Embedding link model");
  sc->add_option("--constraints", sc_cons, "Constraints file; omitted = no consistency score");
  sc->add_option("--consistency", sc_model, "car | ran | car+ran");
  sc->add_option("--sigma", sc_params.sigma, "Maximum cardinality exceeding rate");
  sc->add_option("--w-specific", sc_params.w_specific, "Weight of specific range classes");
  sc->add_option("--w-general", sc_params.w_general, "Weight of general range classes");
  sc->add_option("--combine", sc_combine, "average | multiply");
  sc->add_option("--out", sc_out, "Output file (default stdout)");
  sc->callback([&] {
    run = [&] {
      const auto lists = load_candidates(sc_cands);
      const auto kb = retract_targets(sc_kb.load(), targets_of(lists));
      sc_params.combine = parse_combine_mode(sc_combine);
      sc_params.validate();
      if (!sc_feat.empty() && !sc_embed.empty()) throw Error("give at most one of --feat-model and --embed-model");
      std::function<double(const std::string&, const std::string&, const std::string&)> likelihood;
      std::optional<SubGraph> g;
      std::optional<AdjacencyIndex> adj;
      std::optional<FeatureModel> feat;
      std::optional<EmbeddingModel> emb;
      if (!sc_feat.empty()) {
        if (sc_sg.empty()) throw Error("--feat-model needs --subgraph");
        g = load_subgraph(sc_sg);
        adj.emplace(*g);
        feat = feature_model_from_json(read_json(sc_feat));
        likelihood = [&](const std::string& s, const std::string& p, const std::string& o) {
          return feat->score(*adj, s, p, o);
        };
      }
      if (!sc_embed.empty()) {
        auto in = open_in(sc_embed);
        emb = read_embedding(in, sc_embed);
        likelihood = [&](const std::string& s, const std::string& p, const std::string& o) {
          return kbfix::likelihood(*emb, s, p, o);
        };
      }
      std::optional<ConstraintSet> cons;
      if (!sc_cons.empty()) cons = constraints_from_json(read_json(sc_cons));
      if (!likelihood && !cons) throw Error("nothing to score: give a link model and/or --constraints");
      const auto raw = score_candidates(kb, lists, likelihood, cons ? &*cons : nullptr,
                                        parse_consistency_model(sc_model), sc_params);
      emit(sc_out, [&](std::ostream& o) { write_raw_scores(o, raw); });
    };
  });

  // decide
  KbArgs dc_kb;
  std::string dc_scores, dc_norm = "global", dc_match = "folded", dc_out;
  double dc_tau = 0.5;
  auto* dc = app.add_subcommand("decide", "Normalize, ensemble and threshold the scores");
  dc_kb.attach(dc);
  dc->add_option("--scores", dc_scores, "Raw scores (JSON lines)")->required();
  dc->add_option("--tau", dc_tau, "Threshold in [0, 1]");
  dc->add_option("--normalize", dc_norm, "global | per_property");
  dc->add_option("--label-match", dc_match, "folded | strict");
  dc->add_option("--out", dc_out, "Output file (default stdout)");
  dc->callback([&] {
    run = [&] {
      const auto scored = normalize_scores(load_scores(dc_scores), parse_scope(dc_norm));
      const auto kb = dc_kb.load();
      const auto results = decide_all(scored, dc_tau, kb, parse_label_match(dc_match));
      emit(dc_out, [&](std::ostream& o) { write_corrections(o, results); });
    };
  });

  // eval
  std::string ev_targets, ev_corr, ev_cands, ev_out;
  auto* ev = app.add_subcommand("eval", "Metrics of a corrections file against ground truth");
  ev->add_option("--targets", ev_targets, "Targets with ground truth (JSON lines)")->required();
  ev->add_option("--corrections", ev_corr, "Corrections (JSON lines)")->required();
  ev->add_option("--candidates", ev_cands, "Candidate lists, for recall and ranking metrics");
  ev->add_option("--out", ev_out, "Output file (default stdout)");
  ev->callback([&] {
    run = [&] {
      const auto targets = read_targets_file(ev_targets);
      std::map<std::string, TargetAssertion> by_id;
      for (const auto& t : targets) by_id.emplace(t.id(), t);
      std::vector<CorrectionResult> results;
      auto in = open_in(ev_corr);
      std::string line;
      std::size_t lineno = 0;
      std::set<std::string> seen;
      while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        json j;
        try {
          j = json::parse(line);
        } catch (const json::exception& e) {
          throw ParseError(ev_corr, lineno, e.what());
        }
        const std::string id = j.at("s").get<std::string>() + "|" + j.at("p").get<std::string>() + "|" +
                               j.at("o").get<std::string>();
        auto it = by_id.find(id);
        if (it == by_id.end()) throw ParseError(ev_corr, lineno, "correction for unknown target " + id);
        seen.insert(id);
        CorrectionResult r{it->second, std::nullopt, {}, j.value("tau", 0.0)};
        if (j.contains("substitute")) r.substitute = j.at("substitute").get<std::string>();
        results.push_back(std::move(r));
      }
      // Targets without a correction record count as none.
      for (const auto& t : targets)
        if (!seen.count(t.id())) results.push_back({t, std::nullopt, {}, 0.0});
      json out{{"correction", to_json(correction_metrics(results))}};
      if (!ev_cands.empty()) {
        const auto lists = load_candidates(ev_cands);
        json recall = json::object();
        std::vector<std::size_t> ks{1, 5, 10};
        if (!lists.empty()) ks.push_back(lists.front().k);
        for (const auto& [k, v] : recall_at_k(lists, ks)) recall[std::to_string(k)] = v;
        out["recallAtK"] = recall;
        std::vector<std::vector<std::string>> ranked;
        std::vector<std::string> truths;
        for (const auto& l : lists) {
          if (l.target.gt.kind != GroundTruthKind::entity) continue;
          truths.push_back(l.target.gt.entity);
          ranked.emplace_back();
          for (const auto& c : l.entities) ranked.back().push_back(c.entity);
        }
        out["relatednessRanking"] = truths.empty() ? json("n/a") : to_json(ranking_metrics(ranked, truths));
      }
      emit(ev_out, [&](std::ostream& o) { o << out.dump(2) << '\n'; });
    };
  });

  // sweep
  KbArgs sw_kb;
  std::string sw_scores, sw_norm = "global", sw_match = "folded", sw_out;
  double sw_step = 0.05;
  auto* sw = app.add_subcommand("sweep", "Correction metrics over a grid of thresholds");
  sw_kb.attach(sw);
  sw->add_option("--scores", sw_scores, "Raw scores (JSON lines) whose targets carry ground truth")->required();
  sw->add_option("--step", sw_step, "Grid step");
  sw->add_option("--normalize", sw_norm, "global | per_property");
  sw->add_option("--label-match", sw_match, "folded | strict");
  sw->add_option("--out", sw_out, "Output TSV (default stdout)");
  sw->callback([&] {
    run = [&] {
      const auto scored = normalize_scores(load_scores(sw_scores), parse_scope(sw_norm));
      const auto rows = tau_sweep(scored, default_tau_grid(sw_step), sw_kb.load(), parse_label_match(sw_match));
      emit(sw_out, [&](std::ostream& o) { write_sweep(o, rows); });
      if (!sw_out.empty()) std::cout << json{{"bestTau", best_tau(rows)}}.dump() << '\n';
    };
  });

  // bench
  GenConfig gen;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  auto* bench = app.add_subcommand("bench", "Generate a synthetic benchmark case");
  bench->add_option("--out", gen_out, "Output directory")->required();
  bench->add_option("--seed", gen_seed, "Seed");
  bench->add_option("--entities", gen.entity_count, "Entity count");
  bench->add_option("--properties", gen.property_count, "Property count (4-8)");
  bench->add_option("--class-depth", gen.class_depth, "Class tree depth (>= 3)");
  bench->add_option("--confusability", gen.confusability, "Share of swaps to a same-class confusable entity");
  bench->add_option("--entity-gt", gen.entity_gt, "Targets with an entity ground truth");
  bench->add_option("--empty-gt", gen.empty_gt, "Targets with an empty ground truth");
  bench->callback([&] {
    run = [&] {
      const auto c = generate_synthetic_case(gen, gen_seed);
      write_synthetic_case(c, gen_out);
      std::cout << json{{"entities", c.kb.entities().size()},
                        {"assertions", c.kb.size()},
                        {"targets", c.targets.size()},
                        {"dir", gen_out}}
                       .dump()
                << '\n';
    };
  });

  // pipeline
  std::string pl_config;
  std::vector<std::string> pl_set;
  auto* pl = app.add_subcommand("pipeline", "Run every stage end to end from a config file");
  pl->add_option("--config", pl_config, "key = value config file")->required();
  pl->add_option("--set", pl_set, "Override a config key: key=value (repeatable)");
  pl->callback([&] {
    run = [&] {
      auto cfg = read_config_file(pl_config);
      const auto base = std::filesystem::path(pl_config).parent_path();
      for (const auto& kv : pl_set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
        set_config_value(cfg, std::string(text::trim(kv.substr(0, eq))),
                                 std::string(text::trim(kv.substr(eq + 1))), base);
      }
      const auto r = run_pipeline(cfg);
      write_pipeline_outputs(r, cfg.work_dir);
      json summary{{"tau", r.tau}, {"tauTuned", r.tau_tuned}, {"targets", r.targets.size()},
                   {"fromCache", r.stages_from_cache}, {"workDir", cfg.work_dir}};
      if (!r.metrics.is_null()) summary["metrics"] = r.metrics;
      std::cout << summary.dump(2) << '\n';
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    run();
  } catch (const std::exception& e) {
    std::cerr << error_record(e).dump() << '\n';
    return 1;
  }
  return 0;
}
