#include "symplan/world.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "symplan/error.hpp"

namespace symplan {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr std::array<std::string_view, 2> kDoorNames = {"closed", "open"};
constexpr std::array<std::string_view, 3> kCupNames = {"cabinet", "table", "gripper"};
constexpr std::array<std::string_view, 4> kBallNames = {"cabinet", "table", "in_cup", "gripper"};
constexpr std::array<std::string_view, 4> kSiteNames = {"free", "cup", "ball", "handle"};
constexpr std::array<std::string_view, 3> kHeldNames = {"none", "cup", "ball"};
constexpr std::array<std::string_view, 5> kBlockNames = {"blue", "red", "yellow", "green", "pink"};

template <class E, std::size_t N>
std::string enum_name(E e, const std::array<std::string_view, N>& names) {
  return std::string(names.at(static_cast<std::size_t>(e)));
}

template <class E, std::size_t N>
E enum_parse(const std::string& s, const std::array<std::string_view, N>& names, const char* what) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == s) return static_cast<E>(i);
  throw Error(std::string("unknown ") + what + ": " + s);
}

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw Error("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

bool finite(const Vec3& v) { return v.allFinite(); }

std::optional<std::string> manipulation_violation(const ManipulationState& s) {
  if (s.ball == BallLoc::in_cup && s.cup == CupLoc::gripper) return "ball_in_cup=>cup_on_surface";
  if (s.ball == BallLoc::gripper && s.cup == CupLoc::gripper) return "single_object_in_gripper";
  if (!(s.door_fraction >= 0.0 && s.door_fraction <= 1.0)) return "door_fraction_in_unit_interval";
  if (!finite(s.ee) || !finite(s.cup_pose) || !finite(s.ball_pose)) return "finite_poses";
  return std::nullopt;
}

std::optional<std::string> blocks_violation(const BlocksState& s) {
  if (s.placed[blocks::kGreen] && !s.placed[blocks::kYellow]) return "placed(green)=>placed(yellow)";
  if (s.placed[blocks::kPink] && !s.placed[blocks::kRed]) return "placed(pink)=>placed(red)";
  if (s.held < -1 || s.held >= blocks::kNumBlocks) return "held_block_index";
  if (!finite(s.hand)) return "finite_poses";
  for (const auto& p : s.pose)
    if (!finite(p)) return "finite_poses";
  return std::nullopt;
}

}  // namespace

std::string_view to_string(TaskId task) {
  switch (task) {
    case TaskId::c: return "c";
    case TaskId::abc: return "abc";
    case TaskId::abcd: return "abcd";
    case TaskId::abcdef: return "abcdef";
    case TaskId::blocks: return "blocks";
  }
  return "?";
}

TaskId parse_task(std::string_view name) {
  auto n = lower(name);
  if (n.starts_with("manipulation-")) n = n.substr(13);
  for (auto t : kAllTasks)
    if (to_string(t) == n) return t;
  throw Error("unknown task id: " + std::string(name));
}

const Alphabet& alphabet_for(TaskId task) {
  return task == TaskId::blocks ? blocks_alphabet() : manipulation_alphabet();
}

bool is_manipulation(TaskId task) { return task != TaskId::blocks; }

bool TaskSpec::uses(SymbolId s) const {
  using namespace manip;
  switch (id) {
    case TaskId::c: return s == kBallIntoCup;
    case TaskId::abc: return s == kMoveCup || s == kMoveBall || s == kBallIntoCup;
    case TaskId::abcd: return s >= kMoveCup && s <= kMoveBallAndCup;
    case TaskId::abcdef: return s >= kMoveCup && s <= kCloseDoor;
    case TaskId::blocks: return s >= blocks::kBlue && s <= blocks::kPink;
  }
  return false;
}

std::optional<std::string> violated_invariant(const WorldState& state) {
  return std::visit(overloaded{[](const ManipulationState& s) { return manipulation_violation(s); },
                               [](const BlocksState& s) { return blocks_violation(s); }},
                    state);
}

void check_invariants(const WorldState& state) {
  if (auto v = violated_invariant(state)) throw PreconditionViolation(*v, "world state invariant");
}

std::string symbolic_key(const WorldState& state) {
  return std::visit(overloaded{[](const ManipulationState& s) {
                                 std::ostringstream k;
                                 k << "door=" << enum_name(s.door, kDoorNames) << " cup=" << enum_name(s.cup, kCupNames)
                                   << " ball=" << enum_name(s.ball, kBallNames)
                                   << " arm=" << enum_name(s.arm, kSiteNames);
                                 return k.str();
                               },
                               [](const BlocksState& s) {
                                 std::string k = "placed=";
                                 for (bool p : s.placed) k.push_back(p ? '1' : '0');
                                 return k;
                               }},
                    state);
}

bool same_symbolic_state(const WorldState& a, const WorldState& b) {
  return a.index() == b.index() && symbolic_key(a) == symbolic_key(b);
}

bool is_approach(SymbolId s) { return s >= manip::kApproachCup && s <= manip::kApproachClose; }

SymbolId approach_for(SymbolId m) {
  using namespace manip;
  switch (m) {
    case kMoveCup:
    case kBallIntoCup:
    case kMoveBallAndCup: return kApproachCup;
    case kMoveBall: return kApproachBall;
    case kOpenDoor: return kApproachOpen;
    case kCloseDoor: return kApproachClose;
    default: throw Error("symbol " + std::to_string(m) + " has no approach primitive");
  }
}

ArmSite site_of_approach(SymbolId a) {
  using namespace manip;
  switch (a) {
    case kApproachCup: return ArmSite::cup;
    case kApproachBall: return ArmSite::ball;
    case kApproachOpen:
    case kApproachClose: return ArmSite::handle;
    default: throw Error("symbol " + std::to_string(a) + " is not an approach");
  }
}

PrimitiveGeometry primitive_geometry(const WorldState& state, SymbolId symbol) {
  return std::visit(
      overloaded{
          [symbol](const ManipulationState& s) {
            using namespace manip;
            const auto& L = s.layout;
            PrimitiveGeometry g;
            switch (symbol) {
              case kMoveCup: g = {L.cup_table, Held::cup}; break;
              case kMoveBall: g = {L.ball_table, Held::ball}; break;
              case kBallIntoCup: g = {s.cup_pose, Held::ball}; break;
              case kMoveBallAndCup: g = {L.cup_cabinet, Held::cup}; break;
              case kOpenDoor: g = {L.handle_open, Held::none}; break;
              case kCloseDoor: g = {L.handle_closed, Held::none}; break;
              case kApproachCup: g = {s.cup_pose, Held::none}; break;
              case kApproachBall: g = {s.ball_pose, Held::none}; break;
              case kApproachOpen: g = {L.handle_closed, Held::none}; break;
              case kApproachClose: g = {L.handle_open, Held::none}; break;
              case kNoAction: g = {s.ee, Held::none}; break;
              case kTerminal: g = {L.default_pose, Held::none}; break;
              default: throw Error("unknown manipulation symbol " + std::to_string(symbol));
            }
            return g;
          },
          [symbol](const BlocksState& s) {
            PrimitiveGeometry g;
            if (symbol == blocks::kNoAction) {
              g.target = s.hand;
            } else if (symbol >= 0 && symbol < blocks::kNumBlocks) {
              g.target = s.layout.slot[static_cast<std::size_t>(symbol)];
              g.carried_block = symbol;
            } else {
              throw Error("unknown blocks symbol " + std::to_string(symbol));
            }
            return g;
          }},
      state);
}

Vec3 primitive_start(const WorldState& state, SymbolId symbol) {
  if (const auto* b = std::get_if<BlocksState>(&state)) {
    if (symbol >= 0 && symbol < blocks::kNumBlocks) return b->pose[static_cast<std::size_t>(symbol)];
    return b->hand;
  }
  return std::get<ManipulationState>(state).ee;
}

void move_effector(WorldState& state, SymbolId symbol, const Vec3& ee) {
  if (auto* b = std::get_if<BlocksState>(&state)) {
    b->hand = ee;
    if (symbol >= 0 && symbol < blocks::kNumBlocks) {
      b->held = symbol;
      b->pose[static_cast<std::size_t>(symbol)] = ee;
    }
    return;
  }
  auto& s = std::get<ManipulationState>(state);
  s.ee = ee;
  const auto geometry = primitive_geometry(state, symbol);
  s.held = geometry.carried;
  if (geometry.carried == Held::cup) {
    s.cup_pose = ee;
    if (s.ball == BallLoc::in_cup) s.ball_pose = ee;
  } else if (geometry.carried == Held::ball) {
    s.ball_pose = ee;
  }
  if (symbol == manip::kOpenDoor || symbol == manip::kCloseDoor) {
    const double span = s.layout.handle_closed.y() - s.layout.handle_open.y();
    s.door_fraction = std::clamp((s.layout.handle_closed.y() - ee.y()) / span, 0.0, 1.0);
  }
}

const Vec3& effector(const WorldState& state) {
  if (const auto* b = std::get_if<BlocksState>(&state)) return b->hand;
  return std::get<ManipulationState>(state).ee;
}

WorldState apply_mutation(const WorldState& state, const Mutation& mutation) {
  WorldState next = state;
  std::visit(
      overloaded{
          [&](const MoveObject& m) {
            auto* s = std::get_if<ManipulationState>(&next);
            if (!s) throw PreconditionViolation("world_kind", "move_object needs a manipulation scene");
            const auto& L = s->layout;
            if (m.object == "cup") {
              if (m.to == "cabinet") {
                s->cup = CupLoc::cabinet;
                s->cup_pose = L.cup_cabinet;
              } else if (m.to == "table") {
                s->cup = CupLoc::table;
                s->cup_pose = L.cup_table;
              } else {
                throw Error("cup can be moved to cabinet or table, not " + m.to);
              }
              if (s->ball == BallLoc::in_cup) s->ball_pose = s->cup_pose;
              if (s->held == Held::cup) s->held = Held::none;
              if (s->arm == ArmSite::cup) s->arm = ArmSite::free;
            } else if (m.object == "ball") {
              if (m.to == "cabinet") {
                s->ball = BallLoc::cabinet;
                s->ball_pose = L.ball_cabinet;
              } else if (m.to == "table") {
                s->ball = BallLoc::table;
                s->ball_pose = L.ball_table;
              } else if (m.to == "cup") {
                s->ball = BallLoc::in_cup;
                s->ball_pose = s->cup_pose;
              } else {
                throw Error("ball can be moved to cabinet, table or cup, not " + m.to);
              }
              if (s->held == Held::ball) s->held = Held::none;
              if (s->arm == ArmSite::ball) s->arm = ArmSite::free;
            } else {
              throw Error("unknown object: " + m.object);
            }
          },
          [&](const SetDoor& m) {
            auto* s = std::get_if<ManipulationState>(&next);
            if (!s) throw PreconditionViolation("world_kind", "set_door needs a manipulation scene");
            s->door = m.door;
            s->door_fraction = m.door == DoorState::open ? 1.0 : 0.0;
            if (s->arm == ArmSite::handle) s->arm = ArmSite::free;
          },
          [&](const MoveBlock& m) {
            auto* s = std::get_if<BlocksState>(&next);
            if (!s) throw PreconditionViolation("world_kind", "move_block needs a blocks scene");
            if (m.block < 0 || m.block >= blocks::kNumBlocks) throw Error("block index out of range");
            const auto b = static_cast<std::size_t>(m.block);
            s->placed[b] = m.placed;
            s->pose[b] = m.placed ? s->layout.slot[b] : s->layout.table[b];
            if (s->held == m.block) s->held = -1;
          }},
      mutation);
  check_invariants(next);
  return next;
}

Mutation mutation_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.size() != 1) throw Error("mutation must be an object with exactly one key");
  const auto& [key, body] = *j.items().begin();
  try {
    if (key == "move_object") {
      return MoveObject{body.at("object").get<std::string>(), body.at("to").get<std::string>()};
    }
    if (key == "set_door") {
      return SetDoor{enum_parse<DoorState>(body.get<std::string>(), kDoorNames, "door state")};
    }
    if (key == "move_block") {
      int block = body.at("block").is_string() ? parse_block(body.at("block").get<std::string>())
                                                : body.at("block").get<int>();
      return MoveBlock{block, body.at("placed").get<bool>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed mutation: ") + e.what());
  }
  throw Error("unknown mutation kind: " + key);
}

nlohmann::json to_json(const Mutation& m) {
  return std::visit(
      overloaded{[](const MoveObject& x) -> nlohmann::json {
                   return {{"move_object", {{"object", x.object}, {"to", x.to}}}};
                 },
                 [](const SetDoor& x) -> nlohmann::json { return {{"set_door", enum_name(x.door, kDoorNames)}}; },
                 [](const MoveBlock& x) -> nlohmann::json {
                   return {{"move_block", {{"block", std::string(block_name(x.block))}, {"placed", x.placed}}}};
                 }},
      m);
}

nlohmann::json to_json(const WorldState& state) {
  return std::visit(
      overloaded{[](const ManipulationState& s) -> nlohmann::json {
                   const auto& L = s.layout;
                   return {{"kind", "manipulation"},
                           {"door", enum_name(s.door, kDoorNames)},
                           {"cup", enum_name(s.cup, kCupNames)},
                           {"ball", enum_name(s.ball, kBallNames)},
                           {"arm", enum_name(s.arm, kSiteNames)},
                           {"held", enum_name(s.held, kHeldNames)},
                           {"door_fraction", s.door_fraction},
                           {"ee", vec_json(s.ee)},
                           {"cup_pose", vec_json(s.cup_pose)},
                           {"ball_pose", vec_json(s.ball_pose)},
                           {"layout",
                            {{"default_pose", vec_json(L.default_pose)},
                             {"handle_closed", vec_json(L.handle_closed)},
                             {"handle_open", vec_json(L.handle_open)},
                             {"cup_cabinet", vec_json(L.cup_cabinet)},
                             {"cup_table", vec_json(L.cup_table)},
                             {"ball_cabinet", vec_json(L.ball_cabinet)},
                             {"ball_table", vec_json(L.ball_table)}}}};
                 },
                 [](const BlocksState& s) -> nlohmann::json {
                   auto poses = nlohmann::json::array();
                   auto slots = nlohmann::json::array();
                   auto tables = nlohmann::json::array();
                   for (int b = 0; b < blocks::kNumBlocks; ++b) {
                     poses.push_back(vec_json(s.pose[b]));
                     slots.push_back(vec_json(s.layout.slot[b]));
                     tables.push_back(vec_json(s.layout.table[b]));
                   }
                   return {{"kind", "blocks"},
                           {"placed", s.placed},
                           {"pose", poses},
                           {"hand", vec_json(s.hand)},
                           {"held", s.held},
                           {"layout", {{"hand_home", vec_json(s.layout.hand_home)}, {"slot", slots}, {"table", tables}}}};
                 }},
      state);
}

WorldState world_state_from_json(const nlohmann::json& j) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "manipulation") {
      ManipulationState s;
      s.door = enum_parse<DoorState>(j.at("door").get<std::string>(), kDoorNames, "door state");
      s.cup = enum_parse<CupLoc>(j.at("cup").get<std::string>(), kCupNames, "cup location");
      s.ball = enum_parse<BallLoc>(j.at("ball").get<std::string>(), kBallNames, "ball location");
      s.arm = enum_parse<ArmSite>(j.at("arm").get<std::string>(), kSiteNames, "arm site");
      s.held = enum_parse<Held>(j.at("held").get<std::string>(), kHeldNames, "held object");
      s.door_fraction = j.at("door_fraction").get<double>();
      s.ee = vec_from(j.at("ee"));
      s.cup_pose = vec_from(j.at("cup_pose"));
      s.ball_pose = vec_from(j.at("ball_pose"));
      const auto& L = j.at("layout");
      s.layout.default_pose = vec_from(L.at("default_pose"));
      s.layout.handle_closed = vec_from(L.at("handle_closed"));
      s.layout.handle_open = vec_from(L.at("handle_open"));
      s.layout.cup_cabinet = vec_from(L.at("cup_cabinet"));
      s.layout.cup_table = vec_from(L.at("cup_table"));
      s.layout.ball_cabinet = vec_from(L.at("ball_cabinet"));
      s.layout.ball_table = vec_from(L.at("ball_table"));
      return s;
    }
    if (kind == "blocks") {
      BlocksState s;
      s.placed = j.at("placed").get<std::array<bool, blocks::kNumBlocks>>();
      for (int b = 0; b < blocks::kNumBlocks; ++b) {
        s.pose[b] = vec_from(j.at("pose").at(b));
        s.layout.slot[b] = vec_from(j.at("layout").at("slot").at(b));
        s.layout.table[b] = vec_from(j.at("layout").at("table").at(b));
      }
      s.hand = vec_from(j.at("hand"));
      s.held = j.at("held").get<int>();
      s.layout.hand_home = vec_from(j.at("layout").at("hand_home"));
      return s;
    }
    throw Error("unknown world kind: " + kind);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed world state: ") + e.what());
  }
}

std::string_view block_name(int block) { return kBlockNames.at(static_cast<std::size_t>(block)); }

int parse_block(std::string_view name) {
  const auto n = lower(name);
  for (std::size_t i = 0; i < kBlockNames.size(); ++i)
    if (kBlockNames[i] == n) return static_cast<int>(i);
  throw Error("unknown block: " + std::string(name));
}

}  // namespace symplan
