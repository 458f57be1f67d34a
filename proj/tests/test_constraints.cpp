#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "kbfix/constraints.hpp"
#include "kbfix/random.hpp"

using namespace kbfix;

namespace {

KnowledgeBase has_parent_kb() {
  KnowledgeBaseBuilder b;
  for (int i = 0; i < 10; ++i) {
    const auto s = "child" + std::to_string(i);
    b.add(s, "hasParent", "mother" + std::to_string(i));
    if (i > 0) b.add(s, "hasParent", "father" + std::to_string(i));
  }
  b.add("child0", "name", "Zero", TermKind::literal);
  return b.build();
}

// 10 City, 8 Town, 1 bare Place and 1 Region object of bornIn.
KnowledgeBase born_in_kb() {
  KnowledgeBaseBuilder b;
  b.add_subclass("City", "Settlement").add_subclass("Town", "Settlement").add_subclass("Settlement", "Place");
  b.add_subclass("Region", "Place").add_subclass("Village", "Settlement").add_subclass("Professor", "Person");
  b.add_subclass("Place", "owl:Thing").add_subclass("Person", "owl:Thing");
  for (int i = 0; i < 20; ++i) {
    const auto o = "o" + std::to_string(i);
    b.add("p" + std::to_string(i), "bornIn", o);
    b.add_type(o, i < 10 ? "City" : i < 18 ? "Town" : i == 18 ? "Place" : "Region");
  }
  return b.build();
}

// The consistency check written out line by line, independent of the library helpers.
ConsistencyScores straight_line_check(const KnowledgeBase& kb, const std::string& s, const std::string& p, const std::string& e,
                             const CardinalityConstraint& card, const RangeConstraint& range,
                             const ConsistencyParams& prm) {
  ConsistencyScores out;
  std::set<std::string> objs{e};
  for (const auto& t : kb.property_assertions())
    if (t.s == s && t.p == p && t.o.is_entity()) objs.insert(t.o.value);
  const int n = static_cast<int>(objs.size());
  if (card.on_max == 0) {
    out.y_car = 0;
  } else {
    const double r = static_cast<double>(n - card.on_max) / card.on_max;
    if (r >= prm.sigma) {
      out.y_car = 0;
    } else if (n == 1) {
      out.y_car = card.dist.count(1) ? card.dist.at(1) : 0.0;
    } else {
      double tail = 0;
      for (int i = 2; i <= card.on_max; ++i) tail += card.dist.count(i) ? card.dist.at(i) : 0.0;
      out.y_car = r <= 0 ? tail : std::max(0.0, (1 - r) * tail);
    }
  }
  const auto cls = kb.classes_of(e);
  double keep_c = 1, keep_g = 1;
  for (const auto& [c, d] : range.specific)
    if (cls.count(c)) keep_c *= 1 - d;
  for (const auto& [c, d] : range.general)
    if (cls.count(c)) keep_g *= 1 - d;
  out.y_ran_specific = 1 - keep_c;
  out.y_ran_general = 1 - keep_g;
  out.y_ran = prm.w_specific * out.y_ran_specific + prm.w_general * out.y_ran_general;
  return out;
}

}  // namespace

TEST(Cardinality, HasParentExample) {
  const auto c = mine_cardinality(has_parent_kb(), "hasParent");
  EXPECT_EQ(c.on_max, 2);
  EXPECT_NEAR(c.at(1), 0.1, 1e-12);
  EXPECT_NEAR(c.at(2), 0.9, 1e-12);
  EXPECT_NEAR(c.tail(1), 0.9, 1e-12);
  EXPECT_DOUBLE_EQ(c.tail(0), 1.0);
  EXPECT_DOUBLE_EQ(c.tail(2), 0.0);
}

TEST(Cardinality, LiteralOnlyPropertyIsEmpty) {
  const auto c = mine_cardinality(has_parent_kb(), "name");
  EXPECT_EQ(c.on_max, 0);
  EXPECT_TRUE(c.dist.empty());
  const auto missing = mine_cardinality(has_parent_kb(), "nothing");
  EXPECT_EQ(missing.on_max, 0);
}

TEST(Range, BornInDegrees) {
  const auto r = mine_range(born_in_kb(), "bornIn");
  EXPECT_NEAR(r.specific.at("City"), 0.5, 1e-12);
  EXPECT_NEAR(r.specific.at("Town"), 0.4, 1e-12);
  EXPECT_NEAR(r.specific.at("Place"), 0.05, 1e-12);
  EXPECT_NEAR(r.general.at("Place"), 0.95, 1e-12);
  EXPECT_FALSE(r.general.count("owl:Thing"));
}

TEST(Range, BornInScoresAndOrdering) {
  const auto r = mine_range(born_in_kb(), "bornIn");
  const ConsistencyParams prm;
  double c = 0, g = 0;
  const double city = range_score(r, {"City", "Place"}, prm, &c, &g);
  EXPECT_NEAR(c, 0.525, 1e-12);
  EXPECT_NEAR(g, 0.95, 1e-12);
  EXPECT_NEAR(city, 0.61, 1e-12);
  const double village = range_score(r, {"Village", "Place"}, prm, &c, &g);
  EXPECT_NEAR(c, 0.05, 1e-12);
  EXPECT_NEAR(g, 0.95, 1e-12);
  const double prof = range_score(r, {"Professor", "Person"}, prm, &c, &g);
  EXPECT_DOUBLE_EQ(c, 0.0);
  EXPECT_DOUBLE_EQ(g, 0.0);
  EXPECT_GT(city, village);
  EXPECT_GT(village, prof);
}

TEST(CardinalityScore, SigmaCases) {
  ConsistencyParams prm;
  const CardinalityConstraint functional{"p", {{1, 1.0}}, 1};
  EXPECT_DOUBLE_EQ(cardinality_score(functional, 2, prm), 0.0);
  EXPECT_DOUBLE_EQ(cardinality_score(functional, 1, prm), 1.0);

  prm.sigma = 0.5;
  const CardinalityConstraint four{"p", {{1, 0.4}, {2, 0.3}, {4, 0.3}}, 4};
  EXPECT_NEAR(cardinality_score(four, 5, prm), 0.75 * 0.6, 1e-12);
  EXPECT_NEAR(cardinality_score(four, 3, prm), 0.6, 1e-12);
  EXPECT_DOUBLE_EQ(cardinality_score(four, 6, prm), 0.0);
  EXPECT_DOUBLE_EQ(cardinality_score({"p", {}, 0}, 1, prm), 0.0);
}

TEST(Consistency, CheckCountsExistingObjects) {
  const auto kb = has_parent_kb();
  const auto card = mine_cardinality(kb, "hasParent");
  const ConsistencyParams prm;
  // child0 has one parent; adding a second gives n = 2.
  auto c = check_consistency(kb, "child0", "hasParent", "father1", card, {}, prm);
  EXPECT_NEAR(c.y_car, 0.9, 1e-12);
  // child1 already has two; a third gives r = 0.5.
  c = check_consistency(kb, "child1", "hasParent", "father2", card, {}, prm);
  EXPECT_NEAR(c.y_car, 0.45, 1e-12);
  // Re-asserting an existing object does not raise n.
  c = check_consistency(kb, "child1", "hasParent", "mother1", card, {}, prm);
  EXPECT_NEAR(c.y_car, 0.9, 1e-12);
  EXPECT_THROW(check_consistency(kb, "child1", "hasParent", "ghost", card, {}, prm), UnknownTermError);
}

TEST(Consistency, CombineModes) {
  EXPECT_DOUBLE_EQ(combine(0.4, 0.8, CombineMode::multiply), 0.32);
  EXPECT_DOUBLE_EQ(combine(0.4, 0.8, CombineMode::average), 0.6);
  ConsistencyScores s;
  s.y_car = 0.2;
  s.y_ran = 0.6;
  EXPECT_DOUBLE_EQ(consistency_score(s, ConsistencyModel::cardinality, CombineMode::average), 0.2);
  EXPECT_DOUBLE_EQ(consistency_score(s, ConsistencyModel::range, CombineMode::average), 0.6);
  EXPECT_DOUBLE_EQ(consistency_score(s, ConsistencyModel::both, CombineMode::average), 0.4);
  EXPECT_EQ(parse_consistency_model("car+ran"), ConsistencyModel::both);
  EXPECT_THROW(parse_consistency_model("xyz"), Error);
}

TEST(Consistency, ParamsValidate) {
  ConsistencyParams p;
  EXPECT_NO_THROW(p.validate());
  p.sigma = 0;
  EXPECT_THROW(p.validate(), Error);
  p.sigma = 1;
  p.w_specific = 0.5;
  EXPECT_THROW(p.validate(), Error);
}

TEST(ConsistencyProperty, MatchesStraightLineTranscription) {
  Rng rng(1000);
  const std::vector<std::string> classes{"A", "B", "C", "D", "E", "F"};
  for (int round = 0; round < 1000; ++round) {
    KnowledgeBaseBuilder b;
    // Random forest over the class list.
    for (std::size_t i = 1; i < classes.size(); ++i)
      if (rng.coin()) b.add_subclass(classes[i], classes[rng.index(i)]);
    const std::size_t n_obj = 1 + rng.index(6);
    for (std::size_t i = 0; i < n_obj; ++i) b.add("s", "p", "o" + std::to_string(rng.index(8)));
    for (int i = 0; i < 8; ++i) {
      const auto o = "o" + std::to_string(i);
      b.add("other", "q", o);
      if (rng.coin()) b.add_type(o, classes[rng.index(classes.size())]);
      if (rng.index(4) == 0) b.add_type(o, classes[rng.index(classes.size())]);
    }
    const auto kb = b.build();

    CardinalityConstraint card{"p", {}, 0};
    if (rng.index(6) != 0) {
      card.on_max = 1 + static_cast<int>(rng.index(6));
      double total = 0;
      std::vector<double> w(card.on_max);
      for (auto& x : w) total += (x = rng.uniform());
      for (int k = 1; k <= card.on_max; ++k)
        if (rng.index(4) != 0 || k == card.on_max) card.dist[k] = w[k - 1] / total;
    }
    RangeConstraint range{"p", {}, {}};
    for (const auto& c : classes) {
      if (rng.coin()) range.specific[c] = rng.uniform();
      if (rng.coin()) range.general[c] = rng.uniform();
    }
    ConsistencyParams prm;
    prm.sigma = rng.coin() ? 1.0 : 0.05 + 0.95 * rng.uniform();
    const auto e = "o" + std::to_string(rng.index(8));
    const auto got = check_consistency(kb, "s", "p", e, card, range, prm);
    const auto want = straight_line_check(kb, "s", "p", e, card, range, prm);
    EXPECT_EQ(got.y_car, want.y_car);
    EXPECT_EQ(got.y_ran, want.y_ran);
    EXPECT_EQ(got.y_ran_specific, want.y_ran_specific);
    EXPECT_EQ(got.y_ran_general, want.y_ran_general);
    for (double v : {got.y_car, got.y_ran, got.y_ran_specific, got.y_ran_general}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(MiningProperty, DistributionsAndDegreesAreWellFormed) {
  Rng rng(3);
  for (int round = 0; round < 50; ++round) {
    KnowledgeBaseBuilder b;
    b.add_subclass("A", "B").add_subclass("C", "B");
    for (int i = 0; i < 60; ++i) {
      const auto o = "o" + std::to_string(rng.index(20));
      b.add("s" + std::to_string(rng.index(15)), "p", o);
      if (rng.coin()) b.add_type(o, rng.coin() ? "A" : "C");
    }
    const auto kb = b.build();
    const auto card = mine_cardinality(kb, "p");
    double total = 0;
    for (const auto& [k, pr] : card.dist) {
      EXPECT_GE(k, 1);
      EXPECT_LE(k, card.on_max);
      EXPECT_GT(pr, 0.0);
      total += pr;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    // Straight count of subjects by object count.
    std::map<std::string, std::set<std::string>> objs;
    for (const auto& t : kb.assertions_of_property("p")) objs[t.s].insert(t.o.value);
    std::map<int, int> hist;
    for (const auto& [s, os] : objs) ++hist[static_cast<int>(os.size())];
    for (const auto& [k, n] : hist) EXPECT_DOUBLE_EQ(card.at(k), static_cast<double>(n) / objs.size());

    const auto range = mine_range(kb, "p");
    for (const auto& m : {range.specific, range.general})
      for (const auto& [c, d] : m) {
        EXPECT_GT(d, 0.0);
        EXPECT_LE(d, 1.0);
      }
  }
}

TEST(ConsistencyProperty, MoreMatchingClassesNeverLowerRangeScore) {
  Rng rng(21);
  const std::vector<std::string> classes{"A", "B", "C", "D", "E"};
  for (int round = 0; round < 200; ++round) {
    RangeConstraint r{"p", {}, {}};
    for (const auto& c : classes) {
      if (rng.coin()) r.specific[c] = rng.uniform();
      if (rng.coin()) r.general[c] = rng.uniform();
    }
    std::set<std::string> cls;
    double prev = range_score(r, cls, {});
    for (const auto& c : classes) {
      cls.insert(c);
      const double now = range_score(r, cls, {});
      EXPECT_GE(now, prev);
      prev = now;
    }
  }
}

TEST(ConstraintsFile, RoundTripAndOverride) {
  auto mined = mine_all(born_in_kb());
  const auto more = mine_all(has_parent_kb());
  mined.insert(more.begin(), more.end());
  const auto back = constraints_from_json(nlohmann::json::parse(to_json(mined).dump()));
  EXPECT_EQ(back, mined);

  const auto over = nlohmann::json::parse(R"({"hasParent": {"cardinality": {"dist": {"1": 1.0}, "onMax": 1}},
                                              "newProp": {"range": {"specific": {"City": 0.3}}}})");
  const auto merged = merge_constraints(mined, over);
  EXPECT_EQ(merged.at("hasParent").cardinality.on_max, 1);
  EXPECT_EQ(merged.at("hasParent").range, mined.at("hasParent").range);
  EXPECT_EQ(merged.at("bornIn"), mined.at("bornIn"));
  EXPECT_DOUBLE_EQ(merged.at("newProp").range.specific.at("City"), 0.3);
  EXPECT_EQ(constraints_for(merged, "unseen").cardinality.on_max, 0);

  EXPECT_THROW(constraints_from_json(nlohmann::json::parse(R"({"p": {"range": {"specific": {"A": 1.5}}}})")), Error);
  EXPECT_THROW(constraints_from_json(nlohmann::json::parse(R"({"p": {"cardinality": {"dist": {"0": 0.5}}}})")), Error);
}
