#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "symplan/symbols.hpp"
#include "symplan/world.hpp"

namespace symplan {

// --- transitions -----------------------------------------------------------

// Why `symbol` is not applicable in `state`, or nullopt if it is legal.
std::optional<std::string> precondition_failure(const WorldState& state, SymbolId symbol, const TaskSpec& task);

// Exactly the symbols whose preconditions hold, ascending by id. `_` is never
// listed (it is always a no-op); at a manipulation goal the result is {#}, at
// the blocks goal {_}. Throws PreconditionViolation on an invalid state.
SymbolSequence legal_actions(const WorldState& state, const TaskSpec& task);

// Deterministic successor. `_` returns the state unchanged. Throws
// PreconditionViolation carrying the violated predicate for illegal symbols.
WorldState apply(const WorldState& state, SymbolId symbol, const TaskSpec& task);

bool goal_reached(const WorldState& state, const TaskSpec& task);

// Sub-task symbols (A-F, or block moves) whose preconditions hold when the
// arm is free to approach anything.
SymbolSequence enabled_subtasks(const WorldState& state, const TaskSpec& task);

// Every goal-reaching ordering of sub-task symbols from `state`.
std::vector<SymbolSequence> enumerate_plans(const WorldState& state, const TaskSpec& task);
// The plan that always takes the lowest-id enabled sub-task.
SymbolSequence canonical_plan(const WorldState& state, const TaskSpec& task);
// Length of the shortest sub-task plan to the goal (0 at the goal); nullopt
// for dead ends.
std::optional<int> remaining_steps(const WorldState& state, const TaskSpec& task);

// Per-frame labels with approach prefixes and, for blocks, `_` gaps; the
// terminal symbol closes manipulation episodes.
SymbolSequence expand_plan(const SymbolSequence& plan, TaskId task);

// --- episodes --------------------------------------------------------------

inline constexpr const char* kGeneratorVersion = "symplan-gen/1";

struct Frame {
  double t = 0.0;
  Eigen::VectorXd obs;
  SymbolId label = 0;
};

struct EpisodeMeta {
  TaskId task = TaskId::abcdef;
  std::uint64_t seed = 0;
  std::string generator_version = kGeneratorVersion;
  double frame_rate = 10.0;
};

struct Episode {
  EpisodeMeta meta;
  WorldState initial;
  std::vector<Frame> frames;

  SymbolSequence labels() const;
  std::size_t size() const { return frames.size(); }
};

struct LengthBand {
  int min_frames = 90;
  int max_frames = 600;
};
LengthBand length_band(TaskId task);

struct DurationRange {
  int min_frames = 1;
  int max_frames = 1;
};

struct GeneratorConfig {
  DurationRange approach{10, 40};
  DurationRange manipulate{20, 80};
  DurationRange gap{5, 30};
  DurationRange terminal{10, 40};
  // Manipulation only: the arm rests this long before each primitive after
  // the first, and those frames already carry the upcoming symbol.
  DurationRange hold{0, 10};
  double frame_rate = 10.0;
  double obs_noise = 0.05;
  int max_attempts = 10000;
};

WorldState sample_initial_state(TaskId task, std::mt19937_64& rng);

// A goal-reaching demonstration: a uniformly drawn plan from the initial
// state, each symbol expanded into frames whose effector trajectory follows
// the same first-order attractor the executor uses. Episodes outside the
// task's length band are rejected and redrawn.
Episode sample_demonstration(TaskId task, std::uint64_t seed, const GeneratorConfig& config = {});

// Seeds for independent sub-streams (episodes, frames) derived from one seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct SplitCounts {
  std::size_t train = 0, val = 0, test = 0;
};
// 80/10/10 with the remainder going to test.
SplitCounts split_counts(std::size_t n);

struct DatasetSummary {
  SplitCounts counts;
  std::filesystem::path root;
};

// Writes train/ val/ test/ episode files and manifest.json under `root`.
// Requires n_episodes >= 10.
DatasetSummary generate_dataset(TaskId task, std::size_t n_episodes, std::uint64_t seed,
                                const std::filesystem::path& root, const GeneratorConfig& config = {});

}  // namespace symplan
