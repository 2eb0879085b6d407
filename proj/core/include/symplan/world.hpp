#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "symplan/symbols.hpp"

namespace symplan {

using Vec3 = Eigen::Vector3d;

enum class TaskId { c, abc, abcd, abcdef, blocks };

std::string_view to_string(TaskId task);
TaskId parse_task(std::string_view name);
const Alphabet& alphabet_for(TaskId task);
bool is_manipulation(TaskId task);
inline constexpr std::array<TaskId, 5> kAllTasks = {TaskId::c, TaskId::abc, TaskId::abcd, TaskId::abcdef,
                                                    TaskId::blocks};

// The task ladder: which sub-task symbols a task uses and what its goal is.
struct TaskSpec {
  TaskId id = TaskId::abcdef;

  bool uses(SymbolId manipulation_symbol) const;
  bool goal_cup_in_cabinet() const { return id == TaskId::abcd || id == TaskId::abcdef; }
  bool goal_door_closed() const { return id == TaskId::abcdef; }
};

enum class DoorState { closed, open };
enum class CupLoc { cabinet, table, gripper };
enum class BallLoc { cabinet, table, in_cup, gripper };
// Where the arm has been brought by an approach; `free` is the default.
enum class ArmSite { free, cup, ball, handle };
enum class Held { none, cup, ball };

// Fixed per-scene geometry: where each object rests in the cabinet or on the
// table and where the door handle sits.
struct ManipulationLayout {
  Vec3 default_pose{0.30, 0.0, 0.50};
  Vec3 handle_closed{0.55, 0.20, 0.30};
  Vec3 handle_open{0.55, -0.10, 0.30};
  Vec3 cup_cabinet{0.70, 0.05, 0.25};
  Vec3 cup_table{0.35, -0.15, 0.0};
  Vec3 ball_cabinet{0.70, 0.15, 0.25};
  Vec3 ball_table{0.35, 0.15, 0.0};
};

struct ManipulationState {
  DoorState door = DoorState::closed;
  CupLoc cup = CupLoc::table;
  BallLoc ball = BallLoc::table;
  ArmSite arm = ArmSite::free;
  Held held = Held::none;
  double door_fraction = 0.0;  // 0 closed, 1 fully slid open
  Vec3 ee{0.30, 0.0, 0.50};
  Vec3 cup_pose = Vec3::Zero();
  Vec3 ball_pose = Vec3::Zero();
  ManipulationLayout layout;
};

struct BlocksLayout {
  Vec3 hand_home{0.30, 0.0, 0.40};
  std::array<Vec3, blocks::kNumBlocks> slot{};   // stacked target per block
  std::array<Vec3, blocks::kNumBlocks> table{};  // scattered start pose per block
};

struct BlocksState {
  std::array<bool, blocks::kNumBlocks> placed{};
  std::array<Vec3, blocks::kNumBlocks> pose{};
  Vec3 hand{0.30, 0.0, 0.40};
  int held = -1;  // block index carried by the hand, -1 if none
  BlocksLayout layout;
};

using WorldState = std::variant<ManipulationState, BlocksState>;

// Names the first violated invariant, if any.
std::optional<std::string> violated_invariant(const WorldState& state);
// Throws PreconditionViolation when an invariant does not hold.
void check_invariants(const WorldState& state);

// Symbolic equality (ignores continuous poses).
bool same_symbolic_state(const WorldState& a, const WorldState& b);
std::string symbolic_key(const WorldState& state);

// Manipulation symbols (A-F) and their approach prefix (G-J).
bool is_approach(SymbolId s);
SymbolId approach_for(SymbolId manipulation_symbol);
ArmSite site_of_approach(SymbolId approach_symbol);

// Geometry of the primitive that realizes a symbol from the given state:
// the end-effector target and what, if anything, rides with the effector.
struct PrimitiveGeometry {
  Vec3 target = Vec3::Zero();
  Held carried = Held::none;  // manipulation
  int carried_block = -1;     // blocks
};

PrimitiveGeometry primitive_geometry(const WorldState& state, SymbolId symbol);
// Effector position at the start of a primitive (blocks: the hand takes the block).
Vec3 primitive_start(const WorldState& state, SymbolId symbol);
// Moves the effector to `ee` while `symbol` is executing, dragging carried
// objects and the door handle along. Does not change symbolic state.
void move_effector(WorldState& state, SymbolId symbol, const Vec3& ee);
const Vec3& effector(const WorldState& state);

// Human interference: edits that bypass robot reachability but must leave a
// state satisfying all invariants.
struct MoveObject {
  std::string object;  // "cup" | "ball"
  std::string to;      // "cabinet" | "table" | "cup" (ball only)
};
struct SetDoor {
  DoorState door = DoorState::open;
};
struct MoveBlock {
  int block = 0;
  bool placed = false;
};
using Mutation = std::variant<MoveObject, SetDoor, MoveBlock>;

// Throws PreconditionViolation (invariant violated or mutation not applicable
// to this kind of world) or Error for malformed input.
WorldState apply_mutation(const WorldState& state, const Mutation& mutation);
Mutation mutation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Mutation& m);

nlohmann::json to_json(const WorldState& state);
WorldState world_state_from_json(const nlohmann::json& j);

std::string_view block_name(int block);
int parse_block(std::string_view name);

}  // namespace symplan
