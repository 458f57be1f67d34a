#include <gtest/gtest.h>

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "kbfix/lexical_index.hpp"
#include "kbfix/random.hpp"
#include "kbfix/relate.hpp"
#include "kbfix/remote_lookup.hpp"

using namespace kbfix;

namespace {

const std::vector<std::string> kWords{"north", "south", "river", "lake", "city", "county", "three", "gorges",
                                      "district", "dam", "valley", "bay", "hill", "park", "old", "new"};

KnowledgeBase random_labeled_kb(Rng& rng, std::size_t n) {
  KnowledgeBaseBuilder b;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string e = "e" + std::to_string(i);
    const auto labels = 1 + rng.index(2);
    for (std::size_t l = 0; l < labels; ++l) {
      std::string label;
      const auto words = 1 + rng.index(3);
      for (std::size_t w = 0; w < words; ++w) label += (w ? " " : "") + kWords[rng.index(kWords.size())];
      b.add_label(e, label);
    }
  }
  return b.build();
}

std::string random_phrase(Rng& rng) {
  std::string s;
  const auto words = 1 + rng.index(4);
  for (std::size_t w = 0; w < words; ++w) s += (w ? " " : "") + kWords[rng.index(kWords.size())];
  return s;
}

// Scores every labelled entity: best token Jaccard over its labels, ties by
// shorter best label, then id.
std::vector<std::string> exhaustive_lookup(const KnowledgeBase& kb, const std::string& phrase, std::size_t k) {
  const auto qt = text::normalize_phrase(phrase);
  const std::set<std::string> q(qt.begin(), qt.end());
  struct Row {
    double j;
    std::size_t len;
    std::string e;
  };
  std::vector<Row> rows;
  for (const auto& [e, labels] : kb.all_labels()) {
    double best = 0;
    std::size_t best_len = 0;
    for (const auto& l : labels) {
      const auto lt = text::normalize_phrase(l);
      const std::set<std::string> ls(lt.begin(), lt.end());
      std::size_t inter = 0;
      for (const auto& t : q) inter += ls.count(t);
      const std::size_t uni = q.size() + ls.size() - inter;
      const double j = uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
      const std::size_t len = text::code_points(text::fold(l)).size();
      if (j > best || (j == best && j > 0 && len < best_len)) {
        best = j;
        best_len = len;
      }
    }
    if (best > 0) rows.push_back({best, best_len, e});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.j != b.j) return a.j > b.j;
    if (a.len != b.len) return a.len < b.len;
    return a.e < b.e;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < rows.size() && i < k; ++i) out.push_back(rows[i].e);
  return out;
}

std::vector<std::string> ids(const std::vector<Candidate>& cs) {
  std::vector<std::string> out;
  for (const auto& c : cs) out.push_back(c.entity);
  return out;
}

std::vector<std::string> ids(const std::vector<LookupHit>& hs) {
  std::vector<std::string> out;
  for (const auto& h : hs) out.push_back(h.entity);
  return out;
}

std::size_t dp_edit_distance(const std::u32string& a, const std::u32string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1])});
  return d[a.size()][b.size()];
}

// Provider with canned answers per sub-phrase, recording the calls it saw.
class ScriptedProvider : public LookupProvider {
 public:
  std::map<std::string, std::vector<std::string>> answers;
  mutable std::vector<std::string> calls;
  std::vector<LookupHit> lookup(std::string_view phrase, std::size_t k) const override {
    calls.emplace_back(phrase);
    std::vector<LookupHit> out;
    auto it = answers.find(std::string(phrase));
    if (it == answers.end()) return out;
    for (const auto& e : it->second) {
      if (out.size() == k) break;
      out.push_back({e, 1.0});
    }
    return out;
  }
};

}  // namespace

// --- lexical index -----------------------------------------------------------

TEST(Lookup, ExactLabelRanksFirst) {
  KnowledgeBaseBuilder b;
  b.add_label("gorges", "Three Gorges");
  b.add_label("dam", "Three Gorges Dam");
  b.add_label("other", "Other Place");
  const auto idx = build_lexical_index(b.build());
  const auto hits = idx.lookup("three gorges", 10);
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_EQ(hits[0].entity, "gorges");
  EXPECT_DOUBLE_EQ(hits[0].score, 1.0);
  EXPECT_EQ(hits[1].entity, "dam");
}

TEST(Lookup, NoSharedTokensGivesEmpty) {
  KnowledgeBaseBuilder b;
  b.add_label("x", "River Thames");
  const auto idx = build_lexical_index(b.build());
  EXPECT_TRUE(idx.lookup("mount everest", 5).empty());
  EXPECT_THROW(idx.lookup("river", 0), Error);
}

TEST(Lookup, TiesBreakOnShorterTextThenId) {
  KnowledgeBaseBuilder b;
  b.add_label("b", "Bay Area");
  b.add_label("a", "Bay Area!");
  b.add_label("c", "Area Bay");
  const auto idx = build_lexical_index(b.build());
  EXPECT_EQ(ids(idx.lookup("bay area", 3)), (std::vector<std::string>{"b", "c", "a"}));
}

TEST(Lookup, AnchorTextIsSearchable) {
  KnowledgeBaseBuilder b;
  b.add_label("x", "Yangtze");
  b.add_anchor("x", "three gorges reservoir");
  const auto idx = build_lexical_index(b.build());
  EXPECT_EQ(ids(idx.lookup("gorges", 3)), (std::vector<std::string>{"x"}));
}

TEST(LookupProperty, MatchesExhaustiveScan) {
  Rng rng(99);
  const auto kb = random_labeled_kb(rng, 50);
  const auto idx = build_lexical_index(kb);
  for (int i = 0; i < 200; ++i) {
    const auto phrase = random_phrase(rng);
    const std::size_t k = 1 + rng.index(20);
    const auto got = idx.lookup(phrase, k);
    EXPECT_EQ(ids(got), exhaustive_lookup(kb, phrase, k)) << phrase;
    EXPECT_LE(got.size(), k);
    for (const auto& h : got) EXPECT_TRUE(kb.has_entity(h.entity));
  }
}

// --- sub-phrases and Lookup* -----------------------------------------------

TEST(SubPhrases, LongestFirstLeftToRight) {
  EXPECT_EQ(sub_phrases({"three", "gorges", "district"}),
            (std::vector<std::string>{"three gorges district", "three gorges", "gorges district", "three", "gorges",
                                      "district"}));
  EXPECT_EQ(sub_phrases({"x"}), (std::vector<std::string>{"x"}));
  EXPECT_TRUE(sub_phrases({}).empty());
}

TEST(SubPhrases, CountIsTriangular) {
  for (std::size_t n = 1; n <= 8; ++n) {
    std::vector<std::string> toks;
    for (std::size_t i = 0; i < n; ++i) toks.push_back("t" + std::to_string(i));
    EXPECT_EQ(sub_phrases(toks).size(), n * (n + 1) / 2);
  }
}

TEST(LookupStar, FindsEntityOnlyReachableThroughSubPhrase) {
  KnowledgeBaseBuilder b;
  b.add_label("x", "Three Gorges");
  const auto kb = b.build();
  ScriptedProvider p;
  p.answers["three gorges"] = {"x"};
  EXPECT_TRUE(p.lookup("three gorges district", 5).empty());
  EXPECT_EQ(ids(lookup_star(p, "three gorges district", 5)), (std::vector<std::string>{"x"}));
}

TEST(LookupStar, StopsAfterFullPhraseWhenItFillsK) {
  ScriptedProvider p;
  p.answers["a b"] = {"e1", "e2", "e3"};
  p.answers["a"] = {"e9"};
  EXPECT_EQ(ids(lookup_star(p, "a b", 2, text::StopWords::none())), (std::vector<std::string>{"e1", "e2"}));
  EXPECT_EQ(p.calls, (std::vector<std::string>{"a b"}));
}

TEST(LookupStar, ConcatenatesDedupesAndCaps) {
  ScriptedProvider p;
  p.answers["x y"] = {"e1"};
  p.answers["x"] = {"e2", "e1", "e3"};
  p.answers["y"] = {"e3", "e4", "e5"};
  EXPECT_EQ(ids(lookup_star(p, "x y", 4, text::StopWords::none())),
            (std::vector<std::string>{"e1", "e2", "e3", "e4"}));
}

TEST(LookupStarProperty, MatchesReferenceLoop) {
  Rng rng(5);
  const auto kb = random_labeled_kb(rng, 60);
  const auto idx = build_lexical_index(kb);
  for (int i = 0; i < 100; ++i) {
    const auto phrase = random_phrase(rng);
    const std::size_t k = 1 + rng.index(15);
    std::vector<std::string> ref;
    const auto toks = text::normalize_phrase(phrase);
    const std::size_t n = toks.size();
    for (std::size_t len = n; len >= 1 && ref.size() < k; --len) {
      for (std::size_t st = 0; st + len <= n && ref.size() < k; ++st) {
        std::string sub;
        for (std::size_t t = st; t < st + len; ++t) sub += (t > st ? " " : "") + toks[t];
        for (const auto& e : exhaustive_lookup(kb, sub, k)) {
          if (ref.size() == k) break;
          if (std::find(ref.begin(), ref.end(), e) == ref.end()) ref.push_back(e);
        }
      }
    }
    const auto got = ids(lookup_star(idx, phrase, k));
    EXPECT_EQ(got, ref) << phrase;
    // The full phrase is the first sub-phrase, so plain lookup's list is a prefix.
    const auto plain = ids(idx.lookup(phrase, k));
    EXPECT_TRUE(std::equal(plain.begin(), plain.end(), got.begin())) << phrase;
  }
}

TEST(LookupStar, ProviderFailureNamesSubPhrase) {
  class Failing : public LookupProvider {
   public:
    std::vector<LookupHit> lookup(std::string_view, std::size_t) const override { throw std::runtime_error("down"); }
  };
  try {
    lookup_star(Failing{}, "alpha beta", 3);
    FAIL();
  } catch (const LookupError& e) {
    EXPECT_EQ(e.phrase(), "alpha beta");
  }
}

// --- edit distance -----------------------------------------------------------

TEST(EditDistance, Basics) {
  EXPECT_EQ(edit_distance("kitten", "kitten"), 0u);
  EXPECT_EQ(edit_distance("", "abc"), 3u);
  EXPECT_EQ(edit_distance("abc", ""), 3u);
  EXPECT_EQ(edit_distance("kitten", "sitting"), 3u);
  EXPECT_EQ(edit_distance("café", "cafe"), 1u);
}

TEST(EditDistanceProperty, MatchesDpOracleAndMetricAxioms) {
  Rng rng(12);
  const std::string alpha = "abcé";
  auto rnd = [&] {
    std::string s;
    const auto n = rng.index(7);
    for (std::size_t i = 0; i < n; ++i) s += rng.index(4) == 3 ? std::string("é") : std::string(1, alpha[rng.index(3)]);
    return s;
  };
  for (int i = 0; i < 500; ++i) {
    const auto a = rnd(), b = rnd(), c = rnd();
    const auto ab = edit_distance(a, b);
    EXPECT_EQ(ab, dp_edit_distance(text::code_points(a), text::code_points(b)));
    EXPECT_EQ(ab, edit_distance(b, a));
    EXPECT_EQ(ab == 0, a == b);
    EXPECT_LE(edit_distance(a, c), ab + edit_distance(b, c));
  }
}

TEST(EditCandidates, ExactLabelFirstAndLargeKReturnsAll) {
  KnowledgeBaseBuilder b;
  b.add_label("a", "Paris");
  b.add_label("b", "Parks");
  b.add_label("c", "London");
  const auto kb = b.build();
  const auto got = edit_candidates(kb, "paris", 10);
  ASSERT_EQ(got.size(), 3u);
  EXPECT_EQ(got[0].entity, "a");
  EXPECT_EQ(got[0].score, 0.0);
  EXPECT_EQ(ids(got), (std::vector<std::string>{"a", "b", "c"}));
  for (std::size_t i = 1; i < got.size(); ++i) EXPECT_GE(got[i - 1].score, got[i].score);
}

TEST(EditCandidatesProperty, MatchesExhaustiveScan) {
  Rng rng(31);
  const auto kb = random_labeled_kb(rng, 100);
  for (int i = 0; i < 50; ++i) {
    const auto phrase = random_phrase(rng);
    const std::size_t k = 1 + rng.index(30);
    const auto q = text::code_points(text::join(text::normalize_phrase(phrase)));
    std::vector<std::pair<std::size_t, std::string>> rows;
    for (const auto& [e, labels] : kb.all_labels()) {
      std::size_t best = SIZE_MAX;
      for (const auto& l : labels)
        best = std::min(best, dp_edit_distance(q, text::code_points(text::join(text::normalize_phrase(l)))));
      rows.emplace_back(best, e);
    }
    std::sort(rows.begin(), rows.end());
    std::vector<std::string> want;
    for (std::size_t j = 0; j < k && j < rows.size(); ++j) want.push_back(rows[j].second);
    EXPECT_EQ(ids(edit_candidates(kb, phrase, k)), want);
  }
}

// --- word vectors --------------------------------------------------------------

TEST(WordVec, LoadSkipsHeaderAndRejectsBadDims) {
  std::istringstream in("3 2\ndistrict 1 0\nregion 0.9 0.1\nenzyme 0 1\n");
  const auto m = WordVecModel::load(in);
  EXPECT_EQ(m.size(), 3u);
  EXPECT_EQ(m.dim(), 2u);
  std::istringstream bad("a 1 2\nb 1\n");
  EXPECT_THROW(WordVecModel::load(bad), ParseError);
  std::istringstream nan("a 1 x\n");
  EXPECT_THROW(WordVecModel::load(nan), ParseError);
}

TEST(WordVec, PhraseVectorIsMeanOfKnownTokens) {
  WordVecModel m(2);
  m.add("north", {1, 2});
  m.add("river", {3, 6});
  EXPECT_EQ(phrase_vector(m, "North"), (std::vector<double>{1, 2}));
  EXPECT_EQ(phrase_vector(m, "north river"), (std::vector<double>{2, 4}));
  EXPECT_EQ(phrase_vector(m, "north unknownword river"), (std::vector<double>{2, 4}));
  EXPECT_EQ(phrase_vector(m, "zzz"), (std::vector<double>{0, 0}));
}

TEST(WordVecProperty, PhraseVectorMatchesSummationOracleAndIsOrderFree) {
  Rng rng(7);
  WordVecModel m(5);
  std::map<std::string, std::vector<double>> ref;
  for (const auto& w : kWords) {
    std::vector<double> v(5);
    for (auto& x : v) x = rng.uniform(-1, 1);
    m.add(w, v);
    ref[w] = v;
  }
  for (int i = 0; i < 100; ++i) {
    std::vector<std::string> toks;
    const auto n = 1 + rng.index(5);
    for (std::size_t j = 0; j < n; ++j) toks.push_back(kWords[rng.index(kWords.size())]);
    std::vector<double> sum(5, 0.0);
    for (const auto& t : toks)
      for (std::size_t d = 0; d < 5; ++d) sum[d] += ref[t][d];
    const auto got = phrase_vector(m, text::join(toks));
    auto shuffled = toks;
    rng.shuffle(shuffled);
    const auto got2 = phrase_vector(m, text::join(shuffled));
    for (std::size_t d = 0; d < 5; ++d) {
      EXPECT_NEAR(got[d], sum[d] / static_cast<double>(n), 1e-12);
      EXPECT_NEAR(got2[d], got[d], 1e-12);
    }
  }
}

TEST(WordVec, SimilarWordsOutrankUnrelatedOnes) {
  std::ifstream in(std::string(KBFIX_FIXTURES) + "/vectors.txt");
  ASSERT_TRUE(in);
  const auto m = WordVecModel::load(in);
  const auto d = phrase_vector(m, "district");
  EXPECT_GT(cosine(d, phrase_vector(m, "region")), cosine(d, phrase_vector(m, "enzyme")));
}

TEST(WordVec, CandidatesRankSelfFirstAndOovDegeneratesToIdOrder) {
  WordVecModel m(2);
  m.add("north", {1, 0});
  m.add("south", {-1, 0});
  m.add("river", {0, 1});
  KnowledgeBaseBuilder b;
  b.add_label("z", "North River");
  b.add_label("a", "South");
  b.add_label("m", "North");
  const auto kb = b.build();
  const auto got = wordvec_candidates(m, kb, "north", 3);
  EXPECT_EQ(got[0].entity, "m");
  EXPECT_NEAR(got[0].score, 1.0, 1e-12);
  const auto oov = wordvec_candidates(m, kb, "qqq", 3);
  EXPECT_EQ(ids(oov), (std::vector<std::string>{"a", "m", "z"}));
  for (const auto& c : oov) EXPECT_EQ(c.score, 0.0);
}

// --- per-target candidates ----------------------------------------------------

TEST(Candidates, EntityObjectIsNeverItsOwnSubstitute) {
  KnowledgeBaseBuilder b;
  b.add_label("wrong", "Ashford United");
  b.add_label("right", "Ashford");
  b.add_label("band", "Ashford Echoes");
  const auto kb = b.build();
  const auto idx = build_lexical_index(kb);
  CandidateSources src{&kb, &idx, nullptr, text::StopWords::english()};
  const TargetAssertion t{"p1", "bornIn", Term::entity("wrong"), GroundTruth::of("right")};
  const auto list = candidates_for(t, CandidateMethod::lookup, 2, src);
  EXPECT_EQ(ids(list.entities), (std::vector<std::string>{"right", "band"}));
  EXPECT_FALSE(list.contains("wrong"));
  EXPECT_EQ(list.rank_of("band"), 2u);
  EXPECT_EQ(list.rank_of("nope"), 0u);
}

TEST(CandidatesProperty, DuplicateFreeCappedAndRecallMonotone) {
  Rng rng(44);
  const auto kb = random_labeled_kb(rng, 80);
  const auto idx = build_lexical_index(kb);
  CandidateSources src{&kb, &idx, nullptr, text::StopWords::english()};
  for (int i = 0; i < 40; ++i) {
    const TargetAssertion t{"s", "p", Term::literal(random_phrase(rng)), GroundTruth::of("e1")};
    for (auto method : {CandidateMethod::lookup, CandidateMethod::edit}) {
      std::size_t prev_hit = 0;
      for (std::size_t k : {1, 3, 5, 10, 30}) {
        const auto l = candidates_for(t, method, k, src);
        EXPECT_LE(l.entities.size(), k);
        const auto v = ids(l.entities);
        EXPECT_EQ(std::set<std::string>(v.begin(), v.end()).size(), v.size());
        const std::size_t hit = l.contains("e1");
        EXPECT_GE(hit, prev_hit);
        prev_hit = hit;
      }
    }
  }
}

TEST(Candidates, JsonRoundTrip) {
  CandidateList l{{"s", "p", Term::literal("x y"), GroundTruth::none()}, {{"a", 0.5}, {"b", 0.25}}, 30};
  std::stringstream ss;
  write_candidates(ss, {l});
  const auto back = read_candidates(ss);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].target, l.target);
  EXPECT_EQ(back[0].entities, l.entities);
  EXPECT_EQ(back[0].k, 30u);
}

TEST(Targets, GroundTruthEncodings) {
  std::istringstream in(
      R"({"s":"a","p":"p","o":"x","o_kind":"literal","gt":"e"})"
      "\n"
      R"({"s":"a","p":"p","o":"b","o_kind":"entity","gt":""})"
      "\n"
      R"({"s":"a","p":"p","o":"c","o_kind":"entity","gt":null})"
      "\n");
  const auto ts = read_targets(in);
  ASSERT_EQ(ts.size(), 3u);
  EXPECT_EQ(ts[0].gt, GroundTruth::of("e"));
  EXPECT_TRUE(ts[0].o.is_literal());
  EXPECT_EQ(ts[1].gt, GroundTruth::none());
  EXPECT_EQ(ts[2].gt, GroundTruth::unknown());
  std::stringstream out;
  write_targets(out, ts);
  EXPECT_EQ(read_targets(out), ts);
  std::istringstream bad(R"({"s":"a"})");
  EXPECT_THROW(read_targets(bad), ParseError);
}

// --- remote lookup ---------------------------------------------------------------

TEST(RemoteLookup, SpeaksTheSameProtocolAsTheLocalIndex) {
  KnowledgeBaseBuilder b;
  b.add_label("gorges", "Three Gorges");
  b.add_label("dam", "Three Gorges Dam");
  const auto idx = build_lexical_index(b.build());
  httplib::Server server;
  mount_lookup_endpoint(server, idx);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  RemoteLookup remote("127.0.0.1", port);
  EXPECT_EQ(ids(remote.lookup("three gorges", 5)), ids(idx.lookup("three gorges", 5)));
  EXPECT_EQ(remote.lookup("three gorges", 1).size(), 1u);
  EXPECT_EQ(ids(lookup_star(remote, "three gorges district", 5)), (std::vector<std::string>{"gorges", "dam"}));

  RemoteLookup wrong_path("127.0.0.1", port, "/nope");
  EXPECT_THROW(wrong_path.lookup("x", 3), LookupError);
  server.stop();
  th.join();

  RemoteLookup dead("127.0.0.1", port);
  EXPECT_THROW(dead.lookup("x", 3), LookupError);
}
