#pragma once
// Seeded synthetic benchmark: a small sports/music world made of local
// communities (a settlement, its club and band, athletes and musicians who
// know each other), with erroneous assertions injected as correction targets.
//
// Entity-GT targets come from functional assertions whose object was either
// swapped for a lexically confusable entity or stringified into a literal.
// Empty-GT targets are nickname literals (no entity range) and club
// assertions for athletes who belong to no club at all.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "kbfix/error.hpp"
#include "kbfix/kb_store.hpp"
#include "kbfix/random.hpp"
#include "kbfix/relate.hpp"
#include "kbfix/text.hpp"

namespace kbfix {

struct GenConfig {
  std::size_t entity_count = 500;
  std::size_t property_count = 8;  // 4..8, taken in a fixed order
  std::size_t class_depth = 3;     // depth of the leaf classes below the top class
  // Share of entity swaps that use a confusable entity of the same class as
  // the ground truth (the rest use one of a different class).
  double confusability = 0.5;
  std::size_t entity_gt = 40;
  std::size_t empty_gt = 20;
};

struct SyntheticCase {
  KnowledgeBase kb;
  std::vector<TargetAssertion> targets;
};

namespace synth {

inline constexpr const char* kPlaysFor = "ex:playsFor";
inline constexpr const char* kBornIn = "ex:bornIn";
inline constexpr const char* kKnows = "ex:knows";
inline constexpr const char* kMemberOf = "ex:memberOf";
inline constexpr const char* kCollaborates = "ex:collaboratesWith";
inline constexpr const char* kLivesIn = "ex:livesIn";
inline constexpr const char* kSupports = "ex:supports";
inline constexpr const char* kNickname = "ex:nickname";

inline const std::vector<std::string>& property_order() {
  static const std::vector<std::string> order{kPlaysFor,      kBornIn,  kKnows,    kMemberOf,
                                              kCollaborates, kLivesIn, kSupports, kNickname};
  return order;
}

inline constexpr std::size_t kAthletes = 6;
inline constexpr std::size_t kMusicians = 4;
inline constexpr std::size_t kCommunitySize = 3 + kAthletes + kMusicians;

inline std::vector<std::string> place_names() {
  static const char* pre[] = {"Ash", "Bel",  "Cor", "Dun", "Elm", "Fair", "Glen", "Hal",  "Ivy",   "Kings",
                              "Lin", "Mar",  "Nor", "Oak", "Pen", "Rid",  "Stan", "Thorn", "Wes", "Win"};
  static const char* mid[] = {"", "en", "er", "an", "ing"};
  static const char* suf[] = {"ford", "ton", "bury", "field", "wick", "ham", "ley", "mouth", "stead", "worth"};
  std::vector<std::string> out;
  for (const char* m : mid) {
    for (const char* p : pre) {
      for (const char* s : suf) out.push_back(std::string(p) + m + s);
    }
  }
  return out;
}

inline const std::vector<std::string> kClubSuffixes{"United", "Rovers", "Athletic", "Wanderers", "Albion", "County"};
inline const std::vector<std::string> kBandNouns{"Echoes", "Collective", "Orchestra", "Quartet", "Sound"};
inline const std::vector<std::string> kFirstNames{
    "Alice", "Bruno", "Clara", "Dmitri", "Elena", "Farid", "Greta", "Hugo",  "Ines",  "Jonas",
    "Kira",  "Luca",  "Maya",  "Nils",   "Olga",  "Pavel", "Rosa",  "Sami",  "Tessa", "Viktor"};
inline const std::vector<std::string> kLastNames{
    "Abbott", "Baker",  "Castro", "Dalton", "Evans",  "Fischer", "Garcia", "Hughes", "Ivanov", "Jensen",
    "Keller", "Larsen", "Moreno", "Nowak",  "Olsen",  "Petrov",  "Quinn",  "Rossi",  "Silva",  "Tanaka",
    "Ueda",   "Vargas", "Walsh",  "Young",  "Zeller", "Brandt",  "Costa",  "Duval",  "Ferris", "Hale"};
inline const std::vector<std::string> kNicknameNouns{"Rocket", "Wall", "Magician", "Hammer", "Fox", "Arrow"};

inline std::string lowercase(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace synth

inline SyntheticCase generate_synthetic_case(const GenConfig& cfg, std::uint64_t seed) {
  using namespace synth;
  if (cfg.property_count < 4 || cfg.property_count > property_order().size()) {
    throw Error("property count must lie in [4, 8]");
  }
  if (cfg.class_depth < 3) throw Error("class depth must be at least 3");
  if (!(cfg.confusability >= 0 && cfg.confusability <= 1)) throw Error("confusability must lie in [0, 1]");

  const std::set<std::string> used_props(property_order().begin(),
                                         property_order().begin() + static_cast<std::ptrdiff_t>(cfg.property_count));
  auto on = [&](const char* p) { return used_props.count(p) > 0; };

  const std::size_t orphans = std::max<std::size_t>(4, cfg.empty_gt);
  if (cfg.entity_count < orphans + 2 * kCommunitySize) {
    throw Error("entity count too small for two communities and " + std::to_string(orphans) + " unaffiliated athletes");
  }
  const std::size_t communities = (cfg.entity_count - orphans) / kCommunitySize;
  const std::size_t extra_places = (cfg.entity_count - orphans) % kCommunitySize;
  const std::size_t places = communities + extra_places;

  Rng rng(seed);
  auto names = place_names();
  if (places + cfg.empty_gt >= names.size()) throw Error("entity count exceeds the place-name pool");
  rng.shuffle(names);

  KnowledgeBaseBuilder b;
  b.top_classes({"owl:Thing", "rdfs:Resource"});

  // Class tree, with filler levels above the three top-level classes.
  std::string root = "owl:Thing";
  for (std::size_t i = 1; i + 3 <= cfg.class_depth; ++i) {
    const std::string c = "ex:Level" + std::to_string(i);
    b.add_subclass(c, root);
    root = c;
  }
  const std::map<std::string, std::string> parent{
      {"ex:Place", root},         {"ex:Agent", root},
      {"ex:Settlement", "ex:Place"}, {"ex:City", "ex:Settlement"},  {"ex:Town", "ex:Settlement"},
      {"ex:Person", "ex:Agent"},     {"ex:Athlete", "ex:Person"},   {"ex:Musician", "ex:Person"},
      {"ex:Organisation", "ex:Agent"}, {"ex:SportsClub", "ex:Organisation"}, {"ex:Band", "ex:Organisation"}};
  for (const auto& [c, sup] : parent) b.add_subclass(c, sup);

  std::map<std::string, std::string> leaf;  // entity -> leaf class
  std::map<std::string, std::string> label;
  auto make = [&](const std::string& id, const std::string& cls, const std::string& lab) {
    leaf[id] = cls;
    label[id] = lab;
    b.add_type(id, cls);
    if (rng.uniform() < 0.3) b.add_type(id, parent.at(cls));
    b.add_label(id, lab);
  };
  auto person_name = [&] {
    return kFirstNames[rng.index(kFirstNames.size())] + " " + kLastNames[rng.index(kLastNames.size())];
  };

  std::vector<std::string> settlements;
  for (std::size_t i = 0; i < places; ++i) {
    const std::string id = "ex:loc" + std::to_string(i);
    make(id, rng.coin() ? "ex:City" : "ex:Town", names[i]);
    settlements.push_back(id);
  }

  std::set<Triple> assertions;
  auto assert_entity = [&](const std::string& s, const char* p, const std::string& o) {
    if (on(p)) assertions.insert(Triple::entity(s, p, o));
  };
  auto assert_literal = [&](const std::string& s, const char* p, const std::string& o) {
    if (on(p)) assertions.insert(Triple::literal(s, p, o));
  };
  auto birthplace = [&](const std::string& home) {
    return rng.uniform() < 0.1 ? settlements[rng.index(settlements.size())] : home;
  };

  std::vector<std::string> clubs, athletes, musicians;
  for (std::size_t c = 0; c < communities; ++c) {
    const std::string home = settlements[c];
    const std::string town = names[c];
    const std::string club = "ex:club" + std::to_string(c);
    const std::string band = "ex:band" + std::to_string(c);
    make(club, "ex:SportsClub", town + " " + kClubSuffixes[rng.index(kClubSuffixes.size())]);
    make(band, "ex:Band", town + " " + kBandNouns[rng.index(kBandNouns.size())]);
    clubs.push_back(club);

    std::vector<std::string> as, ms;
    for (std::size_t i = 0; i < kAthletes; ++i) {
      as.push_back("ex:athlete" + std::to_string(c) + "_" + std::to_string(i));
      make(as.back(), "ex:Athlete", person_name());
    }
    for (std::size_t i = 0; i < kMusicians; ++i) {
      ms.push_back("ex:musician" + std::to_string(c) + "_" + std::to_string(i));
      make(ms.back(), "ex:Musician", person_name());
    }
    for (std::size_t i = 0; i < as.size(); ++i) {
      assert_entity(as[i], kPlaysFor, club);
      assert_entity(as[i], kBornIn, birthplace(home));
      assert_entity(as[i], kLivesIn, home);
      assert_entity(as[i], kKnows, as[(i + 1) % as.size()]);
      assert_entity(as[i], kKnows, as[(i + 2) % as.size()]);
      if (rng.coin()) {
        assert_literal(as[i], kNickname, "The " + town + " " + kNicknameNouns[rng.index(kNicknameNouns.size())]);
      }
    }
    for (std::size_t i = 0; i < ms.size(); ++i) {
      assert_entity(ms[i], kMemberOf, band);
      assert_entity(ms[i], kBornIn, birthplace(home));
      assert_entity(ms[i], kLivesIn, home);
      assert_entity(ms[i], kCollaborates, ms[(i + 1) % ms.size()]);
      if (rng.coin()) assert_entity(ms[i], kSupports, club);
    }
    athletes.insert(athletes.end(), as.begin(), as.end());
    musicians.insert(musicians.end(), ms.begin(), ms.end());
  }

  std::vector<std::string> loners;
  for (std::size_t i = 0; i < orphans; ++i) {
    loners.push_back("ex:free" + std::to_string(i));
    make(loners.back(), "ex:Athlete", person_name());
  }
  for (std::size_t i = 0; i < loners.size(); ++i) {
    assert_entity(loners[i], kBornIn, settlements[rng.index(settlements.size())]);
    assert_entity(loners[i], kLivesIn, settlements[rng.index(settlements.size())]);
    assert_entity(loners[i], kKnows, loners[(i + 1) % loners.size()]);
    if (rng.coin()) {
      assert_literal(loners[i], kNickname, "The " + names[rng.index(places)] + " " +
                                               kNicknameNouns[rng.index(kNicknameNouns.size())]);
    }
  }

  // Label tokens -> entities, for picking confusable objects.
  std::map<std::string, std::vector<std::string>> by_token;
  for (const auto& [e, lab] : label) {
    for (const auto& tok : text::normalize_phrase(lab, text::StopWords::english())) by_token[tok].push_back(e);
  }

  std::vector<TargetAssertion> targets;
  std::set<std::string> target_subjects;

  // Entity-GT: functional assertions of community members.
  std::vector<Triple> pool;
  for (const auto& t : assertions) {
    const bool member = t.s.rfind("ex:athlete", 0) == 0 || t.s.rfind("ex:musician", 0) == 0;
    const bool functional = t.p == kPlaysFor || t.p == kBornIn || t.p == kMemberOf || t.p == kLivesIn;
    if (member && functional && t.o.is_entity()) pool.push_back(t);
  }
  rng.shuffle(pool);
  std::vector<Triple> retract, inject;
  for (const auto& t : pool) {
    if (targets.size() == cfg.entity_gt) break;
    if (!target_subjects.insert(t.s).second) continue;
    const std::string& gt = t.o.value;
    std::vector<std::string> same, cross;
    std::set<std::string> seen;
    for (const auto& tok : text::normalize_phrase(label.at(gt), text::StopWords::english())) {
      for (const auto& e : by_token[tok]) {
        if (e == gt || e == t.s || !seen.insert(e).second) continue;
        (leaf.at(e) == leaf.at(gt) ? same : cross).push_back(e);
      }
    }
    Term wrong;
    const bool literal = rng.coin() || (same.empty() && cross.empty());
    if (literal) {
      wrong = Term::literal(rng.coin() ? label.at(gt) : lowercase(label.at(gt)));
    } else {
      const bool use_same = !same.empty() && (cross.empty() || rng.uniform() < cfg.confusability);
      const auto& from = use_same ? same : cross;
      wrong = Term::entity(from[rng.index(from.size())]);
    }
    retract.push_back(t);
    Triple bad{t.s, t.p, wrong};
    inject.push_back(bad);
    targets.push_back({t.s, t.p, wrong, GroundTruth::of(gt)});
  }
  if (targets.size() < cfg.entity_gt) {
    throw Error("only " + std::to_string(targets.size()) + " functional assertions available for " +
                std::to_string(cfg.entity_gt) + " entity-GT targets");
  }

  // Empty-GT: half nickname literals (when that property is in use), the rest
  // club claims for unaffiliated athletes.
  std::size_t nick_targets = on(kNickname) ? cfg.empty_gt / 2 : 0;
  std::vector<Triple> nicknames;
  for (const auto& t : assertions) {
    if (t.p == kNickname && t.s.rfind("ex:athlete", 0) == 0 && !target_subjects.count(t.s)) nicknames.push_back(t);
  }
  rng.shuffle(nicknames);
  nick_targets = std::min(nick_targets, nicknames.size());
  for (std::size_t i = 0; i < nick_targets; ++i) {
    const auto& t = nicknames[i];
    target_subjects.insert(t.s);
    targets.push_back({t.s, t.p, t.o, GroundTruth::none()});
  }
  const std::size_t claims = cfg.empty_gt - nick_targets;
  for (std::size_t i = 0; i < claims; ++i) {
    Term club = rng.coin() ? Term::entity(clubs[rng.index(clubs.size())])
                           : Term::literal(names[places + i] + " " + kClubSuffixes[rng.index(kClubSuffixes.size())]);
    inject.push_back({loners[i], kPlaysFor, club});
    targets.push_back({loners[i], kPlaysFor, club, GroundTruth::none()});
  }

  for (const auto& t : retract) assertions.erase(t);
  for (const auto& t : inject) assertions.insert(t);
  for (const auto& t : assertions) b.add(t);
  rng.shuffle(targets);
  return {b.build(), std::move(targets)};
}

/// Writes <dir>/triples.tsv, <dir>/labels.tsv and <dir>/targets.jsonl.
inline void write_synthetic_case(const SyntheticCase& c, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(dir + "/" + name, std::ios::binary);
    if (!out) throw Error("cannot write " + dir + "/" + name);
    return out;
  };
  auto triples = open("triples.tsv");
  write_kb_triples(triples, c.kb);
  auto labels = open("labels.tsv");
  write_kb_labels(labels, c.kb);
  auto targets = open("targets.jsonl");
  write_targets(targets, c.targets);
}

}  // namespace kbfix
