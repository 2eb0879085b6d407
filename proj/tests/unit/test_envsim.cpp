#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "symplan/episode_io.hpp"
#include "symplan/envsim.hpp"
#include "symplan/error.hpp"
#include "test_util.hpp"

using namespace symplan;

namespace {

ManipulationState closed_scene() {
  ManipulationState s;
  s.door = DoorState::closed;
  s.cup = CupLoc::table;
  s.ball = BallLoc::cabinet;
  return s;
}

}  // namespace

TEST(Transitions, ApproachThenManipulate) {
  const TaskSpec task{TaskId::abcdef};
  WorldState s = closed_scene();
  check_invariants(s);
  auto legal = legal_actions(s, task);
  EXPECT_NE(std::find(legal.begin(), legal.end(), manip::kApproachOpen), legal.end());
  EXPECT_EQ(std::find(legal.begin(), legal.end(), manip::kOpenDoor), legal.end());
  s = apply(s, manip::kApproachOpen, task);
  s = apply(s, manip::kOpenDoor, task);
  EXPECT_EQ(std::get<ManipulationState>(s).door, DoorState::open);
}

TEST(Transitions, IllegalSymbolNamesPredicate) {
  const TaskSpec task{TaskId::abcdef};
  const WorldState s = closed_scene();
  try {
    apply(s, manip::kMoveBall, task);
    FAIL() << "expected a precondition violation";
  } catch (const PreconditionViolation& e) {
    EXPECT_FALSE(e.predicate().empty());
  }
  EXPECT_TRUE(precondition_failure(s, manip::kMoveBall, task).has_value());
}

TEST(Transitions, NoActionIsIdentity) {
  const TaskSpec task{TaskId::abcdef};
  const WorldState s = closed_scene();
  EXPECT_TRUE(same_symbolic_state(apply(s, manip::kNoAction, task), s));
}

TEST(Transitions, LegalActionsMatchPreconditions) {
  std::mt19937_64 rng(4);
  for (TaskId id : kAllTasks) {
    const TaskSpec task{id};
    const auto& alphabet = alphabet_for(id);
    for (int i = 0; i < 20; ++i) {
      const auto s = sample_initial_state(id, rng);
      const auto legal = legal_actions(s, task);
      for (const auto& sym : alphabet.symbols()) {
        if (sym.id == alphabet.no_action() || (alphabet.terminal() && sym.id == *alphabet.terminal())) continue;
        const bool listed = std::find(legal.begin(), legal.end(), sym.id) != legal.end();
        EXPECT_EQ(listed, !precondition_failure(s, sym.id, task).has_value()) << to_string(id) << " " << sym.glyph;
      }
    }
  }
}

TEST(Transitions, BlocksPrecedence) {
  const TaskSpec task{TaskId::blocks};
  std::mt19937_64 rng(2);
  WorldState s = sample_initial_state(TaskId::blocks, rng);
  EXPECT_THROW(apply(s, blocks::kGreen, task), PreconditionViolation);
  EXPECT_THROW(apply(s, blocks::kPink, task), PreconditionViolation);
  s = apply(s, blocks::kYellow, task);
  EXPECT_NO_THROW(apply(s, blocks::kGreen, task));
}

TEST(Plans, CanonicalPlanReachesGoal) {
  std::mt19937_64 rng(8);
  for (TaskId id : kAllTasks) {
    const TaskSpec task{id};
    const auto s0 = sample_initial_state(id, rng);
    const auto plan = canonical_plan(s0, task);
    WorldState s = s0;
    for (auto sym : expand_plan(plan, id)) s = apply(s, sym, task);
    EXPECT_TRUE(goal_reached(s, task)) << to_string(id);
    EXPECT_EQ(static_cast<int>(plan.size()), *remaining_steps(s0, task)) << to_string(id);
  }
}

TEST(Plans, AbcdefHasManyOrderings) {
  std::mt19937_64 rng(1);
  const auto s = sample_initial_state(TaskId::abcdef, rng);
  EXPECT_GT(enumerate_plans(s, TaskSpec{TaskId::abcdef}).size(), 1u);
}

TEST(Mutations, HumanPlacementBypassesReachability) {
  ManipulationState m = closed_scene();
  m.ball = BallLoc::table;
  const auto out = apply_mutation(m, MoveObject{"ball", "cabinet"});
  EXPECT_EQ(std::get<ManipulationState>(out).ball, BallLoc::cabinet);
}

TEST(Mutations, RejectsInvalidResult) {
  std::mt19937_64 rng(3);
  const auto s = sample_initial_state(TaskId::blocks, rng);
  try {
    apply_mutation(s, MoveBlock{blocks::kPink, true});
    FAIL();
  } catch (const PreconditionViolation& e) {
    EXPECT_NE(e.predicate().find("placed"), std::string::npos);
  }
  EXPECT_THROW(apply_mutation(s, MoveObject{"ball", "cabinet"}), PreconditionViolation);
}

TEST(Mutations, JsonRoundTrip) {
  const Mutation m = MoveObject{"ball", "cabinet"};
  const auto j = to_json(m);
  EXPECT_EQ(to_json(mutation_from_json(j)), j);
  EXPECT_THROW(mutation_from_json(nlohmann::json{{"teleport", 1}}), Error);
  EXPECT_THROW(mutation_from_json(nlohmann::json::array()), Error);
}

TEST(Generator, Deterministic) {
  const auto a = sample_demonstration(TaskId::abcd, 42);
  const auto b = sample_demonstration(TaskId::abcd, 42);
  EXPECT_EQ(episode_to_jsonl(a), episode_to_jsonl(b));
  EXPECT_NE(episode_to_jsonl(a), episode_to_jsonl(sample_demonstration(TaskId::abcd, 43)));
}

TEST(Generator, EpisodesReplayToGoal) {
  for (TaskId id : kAllTasks) {
    const auto band = length_band(id);
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      const auto ep = sample_demonstration(id, seed);
      EXPECT_GE(static_cast<int>(ep.size()), band.min_frames);
      EXPECT_LE(static_cast<int>(ep.size()), band.max_frames);
      const auto steps = compact_encode(ep.labels()).symbols();
      WorldState s = ep.initial;
      for (auto sym : steps) ASSERT_NO_THROW(s = apply(s, sym, TaskSpec{id})) << to_string(id) << " seed " << seed;
      EXPECT_TRUE(goal_reached(s, TaskSpec{id}));
    }
  }
}

TEST(Generator, ManipulationEndsWithTerminal) {
  const auto ep = sample_demonstration(TaskId::abc, 5);
  EXPECT_EQ(ep.labels().back(), manip::kTerminal);
}

TEST(Generator, SplitCounts) {
  const auto s = split_counts(400);
  EXPECT_EQ(s.train, 320u);
  EXPECT_EQ(s.val, 40u);
  EXPECT_EQ(s.test, 40u);
  const auto t = split_counts(15);
  EXPECT_EQ(t.train + t.val + t.test, 15u);
}

TEST(EpisodeIo, JsonlRoundTrip) {
  const auto ep = sample_demonstration(TaskId::blocks, 9);
  const auto back = episode_from_jsonl(episode_to_jsonl(ep));
  EXPECT_EQ(back.labels(), ep.labels());
  ASSERT_EQ(back.size(), ep.size());
  EXPECT_TRUE(back.frames[3].obs.isApprox(ep.frames[3].obs));
  EXPECT_THROW(episode_from_jsonl("{\"nope\": 1}\n"), Error);
  EXPECT_THROW(episode_from_jsonl(""), Error);
}

TEST(EpisodeIo, DatasetOnDisk) {
  test_util::TempDir dir;
  const auto summary = generate_dataset(TaskId::c, 20, 3, dir.path() / "ds");
  EXPECT_EQ(summary.counts.train, 16u);
  const auto ds = load_dataset(dir.path() / "ds");
  EXPECT_EQ(ds.split("train").size(), 16u);
  EXPECT_EQ(ds.split("test").size(), 2u);
  EXPECT_EQ(ds.manifest.task, TaskId::c);
  EXPECT_THROW(generate_dataset(TaskId::c, 5, 3, dir.path() / "small"), Error);
  EXPECT_THROW(load_dataset(dir.path() / "missing"), Error);
}
