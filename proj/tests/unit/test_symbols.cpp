#include <gtest/gtest.h>

#include <random>

#include "symplan/error.hpp"
#include "symplan/symbols.hpp"

using namespace symplan;

TEST(Alphabet, ManipulationGlyphs) {
  const auto& a = manipulation_alphabet();
  EXPECT_EQ(a.size(), 12u);
  EXPECT_EQ(a.render(a.parse("ABCDEFGHIJ_#")), "ABCDEFGHIJ_#");
  EXPECT_EQ(a.no_action(), manip::kNoAction);
  ASSERT_TRUE(a.terminal().has_value());
  EXPECT_EQ(*a.terminal(), manip::kTerminal);
  EXPECT_EQ(a.id_of('G'), manip::kApproachCup);
}

TEST(Alphabet, BlocksHasNoTerminal) {
  const auto& a = blocks_alphabet();
  EXPECT_EQ(a.size(), 6u);
  EXPECT_FALSE(a.terminal().has_value());
  EXPECT_EQ(a.render(a.parse("B R Y G P _")), "BRYGP_");
}

TEST(Alphabet, RejectsUnknownGlyph) {
  EXPECT_THROW(manipulation_alphabet().parse("AZ"), Error);
  EXPECT_THROW(alphabet_for_task("nope"), Error);
}

TEST(Alphabet, RejectsDuplicateGlyph) {
  EXPECT_THROW(Alphabet("x", {{0, 'A', ""}, {1, 'A', ""}, {2, '_', ""}}), Error);
  EXPECT_THROW(Alphabet("x", {{0, 'A', ""}}), Error);
}

TEST(Alphabet, JsonRoundTrip) {
  const auto& a = blocks_alphabet();
  EXPECT_EQ(alphabet_from_json(a.name(), to_json(a)), a);
}

TEST(Compact, KnownForms) {
  const auto& m = manipulation_alphabet();
  const auto expanded = m.parse("EEEEBBBBBBAAACCCCCDDDDFFFF______");
  EXPECT_EQ(m.render(compact_encode(expanded).symbols()), "EBACDF_");
  const auto& b = blocks_alphabet();
  EXPECT_EQ(b.render(compact_encode(b.parse("___YYYY__BBB_GGGGG____RR_PPPP__")).symbols()), "_Y_B_G_R_P_");
}

TEST(Compact, EmptyAndSingleton) {
  EXPECT_TRUE(compact_encode(SymbolSequence{}).empty());
  EXPECT_EQ(compact_encode(SymbolSequence{3, 3, 3}).symbols(), (SymbolSequence{3}));
}

TEST(Compact, ConstructorRejectsAdjacentDuplicates) {
  EXPECT_THROW(CompactSequence(SymbolSequence{1, 1}), Error);
  EXPECT_NO_THROW(CompactSequence(SymbolSequence{1, 2, 1}));
}

TEST(Compact, IdempotentOnRandomSequences) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(0, 40), sym(0, 4);
  for (int i = 0; i < 2000; ++i) {
    SymbolSequence s(static_cast<std::size_t>(len(rng)));
    for (auto& x : s) x = sym(rng);
    const auto once = compact_encode(s);
    EXPECT_EQ(compact_encode(once.symbols()), once);
    for (std::size_t j = 1; j < once.size(); ++j) EXPECT_NE(once.symbols()[j], once.symbols()[j - 1]);
  }
}
