#include <gtest/gtest.h>

#include <random>

#include "symplan/error.hpp"
#include "symplan/metrics.hpp"

using namespace symplan;

namespace {

SymbolSequence seq(const char* s) {
  SymbolSequence out;
  for (; *s; ++s) out.push_back(*s - 'a');
  return out;
}

}  // namespace

TEST(Metrics, SymbolError) {
  EXPECT_DOUBLE_EQ(symbol_error(seq("abcd"), seq("abcd")), 0.0);
  EXPECT_DOUBLE_EQ(symbol_error(seq("abcd"), seq("abdd")), 0.25);
  EXPECT_THROW(symbol_error(seq("ab"), seq("abc")), Error);
  EXPECT_THROW(symbol_error(seq(""), seq("")), Error);
}

TEST(Metrics, StructureIgnoresDurations) {
  EXPECT_TRUE(same_structure(seq("aaabbc"), seq("abbbbc")));
  EXPECT_FALSE(same_structure(seq("aabc"), seq("acb")));
  const std::vector<SequencePair> pairs{{seq("aab"), seq("abb")}, {seq("ab"), seq("ba")}};
  EXPECT_DOUBLE_EQ(structure_error(pairs), 0.5);
  EXPECT_THROW(structure_error(std::span<const SequencePair>{}), Error);
}

TEST(Metrics, Levenshtein) {
  EXPECT_EQ(levenshtein(seq("kitten"), seq("sitting")), 3u);
  EXPECT_EQ(levenshtein(seq(""), seq("abc")), 3u);
  EXPECT_EQ(levenshtein(seq("abc"), seq("")), 3u);
  EXPECT_EQ(levenshtein(seq("flaw"), seq("lawn")), 2u);
  EXPECT_DOUBLE_EQ(edit_distance(seq("abc"), seq("abd")), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(edit_distance(seq("a"), seq("")), 1.0);
  EXPECT_DOUBLE_EQ(edit_distance(seq("aaab"), seq("abbb"), true), 0.0);
}

TEST(Metrics, EditDistanceAxioms) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> len(0, 10), sym(0, 3);
  auto draw = [&] {
    SymbolSequence s(static_cast<std::size_t>(len(rng)));
    for (auto& x : s) x = sym(rng);
    return s;
  };
  for (int i = 0; i < 500; ++i) {
    const auto a = draw(), b = draw(), c = draw();
    EXPECT_EQ(levenshtein(a, a), 0u);
    EXPECT_EQ(levenshtein(a, b), levenshtein(b, a));
    EXPECT_LE(levenshtein(a, c), levenshtein(a, b) + levenshtein(b, c));
    if (a != b) EXPECT_GT(levenshtein(a, b), 0u);
  }
}

TEST(Metrics, EvaluatePairsAveragesPerEpisode) {
  const std::vector<SequencePair> pairs{{seq("ab"), seq("ab")}, {seq("aaab"), seq("abbb")}, {{}, {}}};
  const auto row = evaluate_pairs(pairs);
  EXPECT_EQ(row.episodes, 2u);
  EXPECT_DOUBLE_EQ(row.symbol_error, 0.25);
  EXPECT_DOUBLE_EQ(row.structure_error, 0.0);
  EXPECT_DOUBLE_EQ(row.edit_distance, 0.25);
}

TEST(Metrics, OracleIsZero) {
  SequenceData d;
  d.labels = {seq("aaaaabbbbbbbbbbbbccccccccc"), seq("aaaaaaaaaaaaaaaaaaaaaaaaabbbb")};
  const auto row = evaluate_oracle(d, 10, 1);
  EXPECT_DOUBLE_EQ(row.symbol_error, 0.0);
  EXPECT_DOUBLE_EQ(row.structure_error, 0.0);
  EXPECT_EQ(row.model, "oracle");
}

TEST(Metrics, Reports) {
  MetricsRow r;
  r.task = "c";
  r.sl = 20;
  r.model = "seq2seq";
  r.symbol_error = 0.05;
  r.episodes = 4;
  const std::vector<MetricsRow> rows{r};
  const auto csv = report_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "task,SL,model,symbol,structure,edit,edit_compact,episodes");
  EXPECT_NE(csv.find("c,20,seq2seq,0.050000"), std::string::npos);
  EXPECT_NE(report_table(rows).find("5.00"), std::string::npos);
}
