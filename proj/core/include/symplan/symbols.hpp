#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace symplan {

using SymbolId = int;

// Per-frame (or per-step) symbol ids, all drawn from one Alphabet.
using SymbolSequence = std::vector<SymbolId>;

struct ActionSymbol {
  SymbolId id = 0;
  char glyph = '_';
  std::string meaning;

  friend bool operator==(const ActionSymbol&, const ActionSymbol&) = default;
};

class Alphabet {
 public:
  // Throws Error if ids are not 0..n-1 or glyphs repeat, or if `_` is absent.
  Alphabet(std::string name, std::vector<ActionSymbol> symbols);

  const std::string& name() const noexcept { return name_; }
  std::size_t size() const noexcept { return symbols_.size(); }
  std::span<const ActionSymbol> symbols() const noexcept { return symbols_; }

  bool contains(SymbolId id) const noexcept { return id >= 0 && static_cast<std::size_t>(id) < symbols_.size(); }
  const ActionSymbol& at(SymbolId id) const;
  char glyph(SymbolId id) const { return at(id).glyph; }
  SymbolId id_of(char glyph) const;

  SymbolId no_action() const noexcept { return no_action_; }
  std::optional<SymbolId> terminal() const noexcept { return terminal_; }

  std::string render(std::span<const SymbolId> seq) const;
  // Whitespace is ignored so "G C #" and "GC#" parse alike.
  SymbolSequence parse(std::string_view glyphs) const;

  friend bool operator==(const Alphabet& a, const Alphabet& b) { return a.name_ == b.name_ && a.symbols_ == b.symbols_; }

 private:
  std::string name_;
  std::vector<ActionSymbol> symbols_;
  SymbolId no_action_ = -1;
  std::optional<SymbolId> terminal_;
};

// Ids of the manipulation alphabet.
namespace manip {
inline constexpr SymbolId kMoveCup = 0;          // A
inline constexpr SymbolId kMoveBall = 1;         // B
inline constexpr SymbolId kBallIntoCup = 2;      // C
inline constexpr SymbolId kMoveBallAndCup = 3;   // D
inline constexpr SymbolId kOpenDoor = 4;         // E
inline constexpr SymbolId kCloseDoor = 5;        // F
inline constexpr SymbolId kApproachCup = 6;      // G
inline constexpr SymbolId kApproachBall = 7;     // H
inline constexpr SymbolId kApproachOpen = 8;     // I
inline constexpr SymbolId kApproachClose = 9;    // J
inline constexpr SymbolId kNoAction = 10;        // _
inline constexpr SymbolId kTerminal = 11;        // #
}  // namespace manip

namespace blocks {
inline constexpr SymbolId kBlue = 0;
inline constexpr SymbolId kRed = 1;
inline constexpr SymbolId kYellow = 2;
inline constexpr SymbolId kGreen = 3;
inline constexpr SymbolId kPink = 4;
inline constexpr SymbolId kNoAction = 5;
inline constexpr int kNumBlocks = 5;
}  // namespace blocks

const Alphabet& manipulation_alphabet();
const Alphabet& blocks_alphabet();

// Accepts "manipulation", "blocks", or any task name ("c", "abc", "abcd",
// "abcdef"); throws Error for anything else.
const Alphabet& alphabet_for_task(std::string_view task_id);

// A symbol sequence with every run of equal adjacent symbols collapsed.
class CompactSequence {
 public:
  CompactSequence() = default;
  // Throws Error if two adjacent symbols are equal.
  explicit CompactSequence(SymbolSequence symbols);

  const SymbolSequence& symbols() const noexcept { return symbols_; }
  std::size_t size() const noexcept { return symbols_.size(); }
  bool empty() const noexcept { return symbols_.empty(); }

  friend bool operator==(const CompactSequence&, const CompactSequence&) = default;

 private:
  SymbolSequence symbols_;
};

CompactSequence compact_encode(std::span<const SymbolId> seq);

nlohmann::json to_json(const Alphabet& alphabet);
Alphabet alphabet_from_json(const std::string& name, const nlohmann::json& j);

}  // namespace symplan
