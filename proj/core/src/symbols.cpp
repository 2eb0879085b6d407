#include "symplan/symbols.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "symplan/error.hpp"

namespace symplan {

Alphabet::Alphabet(std::string name, std::vector<ActionSymbol> symbols)
    : name_(std::move(name)), symbols_(std::move(symbols)) {
  std::array<bool, 256> seen{};
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    const auto& s = symbols_[i];
    if (s.id != static_cast<SymbolId>(i)) throw Error("alphabet " + name_ + ": ids must be 0..n-1 in order");
    auto g = static_cast<unsigned char>(s.glyph);
    if (!std::isprint(g)) throw Error("alphabet " + name_ + ": glyph is not printable");
    if (seen[g]) throw Error(std::string("alphabet ") + name_ + ": duplicate glyph '" + s.glyph + "'");
    seen[g] = true;
    if (s.glyph == '_') no_action_ = s.id;
    if (s.glyph == '#') terminal_ = s.id;
  }
  if (no_action_ < 0) throw Error("alphabet " + name_ + " has no '_' symbol");
}

const ActionSymbol& Alphabet::at(SymbolId id) const {
  if (!contains(id)) throw Error("symbol id " + std::to_string(id) + " not in alphabet " + name_);
  return symbols_[static_cast<std::size_t>(id)];
}

SymbolId Alphabet::id_of(char glyph) const {
  for (const auto& s : symbols_)
    if (s.glyph == glyph) return s.id;
  throw Error(std::string("glyph '") + glyph + "' not in alphabet " + name_);
}

std::string Alphabet::render(std::span<const SymbolId> seq) const {
  std::string out;
  out.reserve(seq.size());
  for (auto id : seq) out.push_back(glyph(id));
  return out;
}

SymbolSequence Alphabet::parse(std::string_view glyphs) const {
  SymbolSequence out;
  out.reserve(glyphs.size());
  for (char c : glyphs) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    out.push_back(id_of(c));
  }
  return out;
}

const Alphabet& manipulation_alphabet() {
  static const Alphabet kAlphabet("manipulation", {
                                                      {0, 'A', "Move cup"},
                                                      {1, 'B', "Move ball"},
                                                      {2, 'C', "Move ball into cup"},
                                                      {3, 'D', "Move ball and cup"},
                                                      {4, 'E', "Open door"},
                                                      {5, 'F', "Close door"},
                                                      {6, 'G', "Approach cup"},
                                                      {7, 'H', "Approach ball"},
                                                      {8, 'I', "Approach to open"},
                                                      {9, 'J', "Approach to close"},
                                                      {10, '_', "No action"},
                                                      {11, '#', "Terminal/Done"},
                                                  });
  return kAlphabet;
}

const Alphabet& blocks_alphabet() {
  // Yellow and Green are renumbered 2 and 3 so ids stay unique.
  static const Alphabet kAlphabet("blocks", {
                                                {0, 'B', "Move Blue"},
                                                {1, 'R', "Move Red"},
                                                {2, 'Y', "Move Yellow"},
                                                {3, 'G', "Move Green"},
                                                {4, 'P', "Move Pink"},
                                                {5, '_', "No action"},
                                            });
  return kAlphabet;
}

const Alphabet& alphabet_for_task(std::string_view task_id) {
  std::string t(task_id);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "manipulation" || t == "c" || t == "abc" || t == "abcd" || t == "abcdef") return manipulation_alphabet();
  if (t == "blocks") return blocks_alphabet();
  throw Error("unknown task id: " + std::string(task_id));
}

CompactSequence::CompactSequence(SymbolSequence symbols) : symbols_(std::move(symbols)) {
  if (std::adjacent_find(symbols_.begin(), symbols_.end()) != symbols_.end())
    throw Error("compact sequence has adjacent duplicates");
}

CompactSequence compact_encode(std::span<const SymbolId> seq) {
  SymbolSequence out;
  for (auto s : seq)
    if (out.empty() || out.back() != s) out.push_back(s);
  return CompactSequence(std::move(out));
}

nlohmann::json to_json(const Alphabet& alphabet) {
  auto arr = nlohmann::json::array();
  for (const auto& s : alphabet.symbols())
    arr.push_back({{"id", s.id}, {"glyph", std::string(1, s.glyph)}, {"meaning", s.meaning}});
  return arr;
}

Alphabet alphabet_from_json(const std::string& name, const nlohmann::json& j) {
  if (!j.is_array()) throw Error("alphabet json must be an array");
  std::vector<ActionSymbol> symbols;
  for (const auto& e : j) {
    auto glyph = e.at("glyph").get<std::string>();
    if (glyph.size() != 1) throw Error("alphabet glyph must be a single character");
    symbols.push_back({e.at("id").get<SymbolId>(), glyph[0], e.at("meaning").get<std::string>()});
  }
  return Alphabet(name, std::move(symbols));
}

}  // namespace symplan
