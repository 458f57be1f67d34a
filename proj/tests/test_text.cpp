#include <gtest/gtest.h>

#include <fstream>
#include <string>
#include <vector>

#include "kbfix/random.hpp"
#include "kbfix/text.hpp"

using namespace kbfix;

TEST(Text, TokenizesAndFolds) {
  EXPECT_EQ(text::normalize_phrase("Three Gorges District"),
            (std::vector<std::string>{"three", "gorges", "district"}));
  EXPECT_EQ(text::tokenize("Saint-Étienne, FRANCE!"), (std::vector<std::string>{"saint", "étienne", "france"}));
}

TEST(Text, AllStopWordsGiveEmptyPhrase) { EXPECT_TRUE(text::normalize_phrase("the of").empty()); }

TEST(Text, StopWordsCanBeDisabled) {
  EXPECT_EQ(text::normalize_phrase("the of", text::StopWords::none()), (std::vector<std::string>{"the", "of"}));
}

TEST(Text, NfcMakesComposedAndDecomposedEqual) {
  // "é" precomposed vs "e" + combining acute.
  EXPECT_EQ(text::fold("Caf\xC3\xA9"), text::fold("Cafe\xCC\x81"));
  EXPECT_EQ(text::code_points("Caf\xC3\xA9").size(), 4u);
}

TEST(Text, FoldUsesFullCaseFolding) { EXPECT_EQ(text::fold("Straße"), text::fold("STRASSE")); }

TEST(Text, TrimStripsSurroundingWhitespace) {
  EXPECT_EQ(text::trim("  a b \t\n"), "a b");
  EXPECT_EQ(text::trim("   "), "");
}

TEST(Text, StopWordFileIgnoresCommentsAndBlanks) {
  const std::string path = ::testing::TempDir() + "stop.txt";
  {
    std::ofstream out(path);
    out << "# custom\nFoo\n\n  bar  \n";
  }
  const auto sw = text::StopWords::from_file(path);
  EXPECT_EQ(sw.size(), 2u);
  EXPECT_EQ(text::normalize_phrase("foo BAR baz", sw), (std::vector<std::string>{"baz"}));
  EXPECT_THROW(text::StopWords::from_file(path + ".missing"), Error);
}

TEST(TextProperty, NormalizeIsIdempotent) {
  const std::vector<std::string> alphabet{"The", "of", "Gorges", "DISTRICT", "é", "x1", "--", " ", "Ω", "and", "über"};
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    std::string s;
    const auto n = rng.index(8);
    for (std::size_t j = 0; j < n; ++j) s += alphabet[rng.index(alphabet.size())] + (rng.coin() ? " " : "");
    const auto once = text::normalize_phrase(s);
    EXPECT_EQ(text::normalize_phrase(text::join(once)), once) << s;
  }
}

TEST(Rng, DeterministicAndInRange) {
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.index(7);
    EXPECT_EQ(x, b.index(7));
    EXPECT_LT(x, 7u);
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}
