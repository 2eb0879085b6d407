#include "symplan/envsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <queue>
#include <unordered_map>

#include "symplan/embedder.hpp"
#include "symplan/episode_io.hpp"
#include "symplan/error.hpp"
#include "symplan/io.hpp"

namespace symplan {

namespace {

// Pending object work: the goal's object conditions are not yet met.
bool objects_pending(const ManipulationState& s) {
  return !(s.ball == BallLoc::in_cup && s.cup == CupLoc::cabinet);
}

std::optional<std::string> subtask_failure(const ManipulationState& s, SymbolId m, const TaskSpec& task) {
  using namespace manip;
  const char* names = "ABCDEF";
  if (!task.uses(m)) return std::string("task_uses(") + names[m] + ")";
  switch (m) {
    case kMoveCup:
      if (s.cup != CupLoc::cabinet) return "cup==cabinet";
      if (s.door != DoorState::open) return "door==open";
      if (s.ball == BallLoc::in_cup && task.goal_cup_in_cabinet()) return "!(ball==in_cup && goal(cup==cabinet))";
      return std::nullopt;
    case kMoveBall:
      if (s.ball != BallLoc::cabinet) return "ball==cabinet";
      if (s.door != DoorState::open) return "door==open";
      return std::nullopt;
    case kBallIntoCup:
      if (s.ball != BallLoc::table) return "ball==table";
      if (s.cup != CupLoc::table) return "cup==table";
      return std::nullopt;
    case kMoveBallAndCup:
      if (s.ball != BallLoc::in_cup) return "ball==in_cup";
      if (s.cup != CupLoc::table) return "cup==table";
      if (s.door != DoorState::open) return "door==open";
      return std::nullopt;
    case kOpenDoor:
      if (s.door != DoorState::closed) return "door==closed";
      if (!objects_pending(s)) return "objects_pending";
      return std::nullopt;
    case kCloseDoor:
      if (s.door != DoorState::open) return "door==open";
      if (objects_pending(s)) return "!objects_pending";
      return std::nullopt;
    default: return "subtask_symbol";
  }
}

bool manipulation_goal(const ManipulationState& s, const TaskSpec& task) {
  if (s.ball != BallLoc::in_cup) return false;
  if (task.goal_cup_in_cabinet() ? s.cup != CupLoc::cabinet : s.cup != CupLoc::table) return false;
  if (task.goal_door_closed() && s.door != DoorState::closed) return false;
  return true;
}

std::optional<std::string> manipulation_failure(const ManipulationState& s, SymbolId symbol, const TaskSpec& task) {
  using namespace manip;
  if (symbol == kNoAction) return std::nullopt;
  if (symbol == kTerminal) return manipulation_goal(s, task) ? std::nullopt : std::optional<std::string>("goal_reached");
  if (manipulation_goal(s, task)) return "!goal_reached";
  if (is_approach(symbol)) {
    for (SymbolId m = kMoveCup; m <= kCloseDoor; ++m)
      if (approach_for(m) == symbol && !subtask_failure(s, m, task)) return std::nullopt;
    return std::string("enabled_subtask_for(") + manipulation_alphabet().glyph(symbol) + ")";
  }
  if (symbol >= kMoveCup && symbol <= kCloseDoor) {
    if (auto f = subtask_failure(s, symbol, task)) return f;
    const auto site = site_of_approach(approach_for(symbol));
    if (s.arm != site) return std::string("arm==at(") + manipulation_alphabet().glyph(approach_for(symbol)) + ")";
    return std::nullopt;
  }
  return "symbol_in_alphabet";
}

std::optional<std::string> blocks_failure(const BlocksState& s, SymbolId symbol) {
  using namespace blocks;
  if (symbol == kNoAction) return std::nullopt;
  if (symbol < 0 || symbol >= kNumBlocks) return "symbol_in_alphabet";
  const auto b = static_cast<std::size_t>(symbol);
  if (s.placed[b]) return std::string("!placed(") + std::string(block_name(symbol)) + ")";
  if (symbol == kGreen && !s.placed[kYellow]) return "placed(yellow)";
  if (symbol == kPink && !s.placed[kRed]) return "placed(red)";
  return std::nullopt;
}

bool blocks_goal(const BlocksState& s) {
  return std::all_of(s.placed.begin(), s.placed.end(), [](bool p) { return p; });
}

void check_task_matches(const WorldState& state, const TaskSpec& task) {
  const bool manip_state = std::holds_alternative<ManipulationState>(state);
  if (manip_state != is_manipulation(task.id))
    throw PreconditionViolation("world_kind", "state kind does not match task " + std::string(to_string(task.id)));
}

// Applies a sub-task with its approach, arm bookkeeping included.
WorldState apply_subtask(const WorldState& state, SymbolId m, const TaskSpec& task) {
  if (std::holds_alternative<BlocksState>(state)) return apply(state, m, task);
  return apply(apply(state, approach_for(m), task), m, task);
}

Vec3 uniform_in(std::mt19937_64& rng, const Vec3& lo, const Vec3& hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec3 v;
  for (int i = 0; i < 3; ++i) v[i] = lo[i] + (hi[i] - lo[i]) * u(rng);
  return v;
}

// Draws `count` points in a box with pairwise distance >= min_sep.
std::vector<Vec3> scatter(std::mt19937_64& rng, std::size_t count, const Vec3& lo, const Vec3& hi, double min_sep) {
  std::vector<Vec3> pts;
  while (pts.size() < count) {
    Vec3 p = uniform_in(rng, lo, hi);
    bool ok = std::all_of(pts.begin(), pts.end(), [&](const Vec3& q) { return (p - q).norm() >= min_sep; });
    if (ok) pts.push_back(p);
  }
  return pts;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

struct Segment {
  SymbolId symbol;
  int frames;
  bool hold = false;  // arm at rest, about to start `symbol`
};

std::vector<Segment> draw_segments(const SymbolSequence& plan, TaskId task, const GeneratorConfig& cfg,
                                   std::mt19937_64& rng) {
  std::vector<Segment> segs;
  if (task == TaskId::blocks) {
    segs.push_back({blocks::kNoAction, uniform_int(rng, cfg.gap.min_frames, cfg.gap.max_frames)});
    for (auto m : plan) {
      segs.push_back({m, uniform_int(rng, cfg.manipulate.min_frames, cfg.manipulate.max_frames)});
      segs.push_back({blocks::kNoAction, uniform_int(rng, cfg.gap.min_frames, cfg.gap.max_frames)});
    }
    return segs;
  }
  auto push = [&](SymbolId symbol, const DurationRange& range) {
    if (!segs.empty()) {
      const int hold = uniform_int(rng, cfg.hold.min_frames, cfg.hold.max_frames);
      if (hold > 0) segs.push_back({symbol, hold, true});
    }
    segs.push_back({symbol, uniform_int(rng, range.min_frames, range.max_frames)});
  };
  for (auto m : plan) {
    push(approach_for(m), cfg.approach);
    push(m, cfg.manipulate);
  }
  push(manip::kTerminal, cfg.terminal);
  return segs;
}

}  // namespace

std::optional<std::string> precondition_failure(const WorldState& state, SymbolId symbol, const TaskSpec& task) {
  check_task_matches(state, task);
  if (const auto* m = std::get_if<ManipulationState>(&state)) return manipulation_failure(*m, symbol, task);
  return blocks_failure(std::get<BlocksState>(state), symbol);
}

SymbolSequence legal_actions(const WorldState& state, const TaskSpec& task) {
  check_invariants(state);
  check_task_matches(state, task);
  const auto& alphabet = alphabet_for(task.id);
  SymbolSequence out;
  for (SymbolId s = 0; s < static_cast<SymbolId>(alphabet.size()); ++s) {
    if (s == alphabet.no_action()) continue;
    if (!precondition_failure(state, s, task)) out.push_back(s);
  }
  if (out.empty() && task.id == TaskId::blocks && goal_reached(state, task)) out.push_back(blocks::kNoAction);
  return out;
}

WorldState apply(const WorldState& state, SymbolId symbol, const TaskSpec& task) {
  check_invariants(state);
  if (auto f = precondition_failure(state, symbol, task)) {
    const auto& alphabet = alphabet_for(task.id);
    std::string name = alphabet.contains(symbol) ? std::string(1, alphabet.glyph(symbol)) : std::to_string(symbol);
    throw PreconditionViolation(*f, "symbol " + name + " is not applicable");
  }
  WorldState next = state;
  const auto geometry = primitive_geometry(state, symbol);
  if (auto* b = std::get_if<BlocksState>(&next)) {
    if (symbol == blocks::kNoAction) return next;
    const auto i = static_cast<std::size_t>(symbol);
    b->placed[i] = true;
    b->pose[i] = geometry.target;
    b->hand = geometry.target;
    b->held = -1;
    return next;
  }
  using namespace manip;
  auto& s = std::get<ManipulationState>(next);
  if (symbol == kNoAction) return next;
  const auto& L = s.layout;
  s.ee = geometry.target;
  s.held = Held::none;
  s.arm = ArmSite::free;
  switch (symbol) {
    case kMoveCup:
      s.cup = CupLoc::table;
      s.cup_pose = L.cup_table;
      if (s.ball == BallLoc::in_cup) s.ball_pose = s.cup_pose;
      break;
    case kMoveBall:
      s.ball = BallLoc::table;
      s.ball_pose = L.ball_table;
      break;
    case kBallIntoCup:
      s.ball = BallLoc::in_cup;
      s.ball_pose = s.cup_pose;
      break;
    case kMoveBallAndCup:
      s.cup = CupLoc::cabinet;
      s.cup_pose = L.cup_cabinet;
      s.ball_pose = s.cup_pose;
      break;
    case kOpenDoor:
      s.door = DoorState::open;
      s.door_fraction = 1.0;
      break;
    case kCloseDoor:
      s.door = DoorState::closed;
      s.door_fraction = 0.0;
      break;
    case kTerminal: break;
    default: s.arm = site_of_approach(symbol); break;
  }
  return next;
}

bool goal_reached(const WorldState& state, const TaskSpec& task) {
  check_task_matches(state, task);
  if (const auto* m = std::get_if<ManipulationState>(&state)) return manipulation_goal(*m, task);
  return blocks_goal(std::get<BlocksState>(state));
}

SymbolSequence enabled_subtasks(const WorldState& state, const TaskSpec& task) {
  check_task_matches(state, task);
  SymbolSequence out;
  if (const auto* m = std::get_if<ManipulationState>(&state)) {
    if (manipulation_goal(*m, task)) return out;
    for (SymbolId s = manip::kMoveCup; s <= manip::kCloseDoor; ++s)
      if (!subtask_failure(*m, s, task)) out.push_back(s);
    return out;
  }
  const auto& b = std::get<BlocksState>(state);
  for (SymbolId s = 0; s < blocks::kNumBlocks; ++s)
    if (!blocks_failure(b, s)) out.push_back(s);
  return out;
}

std::vector<SymbolSequence> enumerate_plans(const WorldState& state, const TaskSpec& task) {
  std::vector<SymbolSequence> plans;
  SymbolSequence prefix;
  auto recurse = [&](auto&& self, const WorldState& s) -> void {
    if (goal_reached(s, task)) {
      plans.push_back(prefix);
      return;
    }
    if (prefix.size() > 12) return;
    for (auto m : enabled_subtasks(s, task)) {
      prefix.push_back(m);
      self(self, apply_subtask(s, m, task));
      prefix.pop_back();
    }
  };
  recurse(recurse, state);
  return plans;
}

SymbolSequence canonical_plan(const WorldState& state, const TaskSpec& task) {
  SymbolSequence plan;
  WorldState s = state;
  while (!goal_reached(s, task)) {
    auto enabled = enabled_subtasks(s, task);
    if (enabled.empty() || plan.size() > 12) throw Error("no plan to the goal from " + symbolic_key(state));
    plan.push_back(enabled.front());
    s = apply_subtask(s, enabled.front(), task);
  }
  return plan;
}

std::optional<int> remaining_steps(const WorldState& state, const TaskSpec& task) {
  // Breadth-first over symbolic states; the arm is treated as free.
  std::queue<std::pair<WorldState, int>> frontier;
  std::unordered_map<std::string, bool> seen;
  WorldState start = state;
  if (auto* m = std::get_if<ManipulationState>(&start)) m->arm = ArmSite::free;
  frontier.emplace(start, 0);
  seen[symbolic_key(start)] = true;
  while (!frontier.empty()) {
    auto [s, d] = frontier.front();
    frontier.pop();
    if (goal_reached(s, task)) return d;
    for (auto m : enabled_subtasks(s, task)) {
      WorldState n = apply_subtask(s, m, task);
      if (auto* ms = std::get_if<ManipulationState>(&n)) ms->arm = ArmSite::free;
      auto key = symbolic_key(n);
      if (!seen[key]) {
        seen[key] = true;
        frontier.emplace(std::move(n), d + 1);
      }
    }
  }
  return std::nullopt;
}

SymbolSequence expand_plan(const SymbolSequence& plan, TaskId task) {
  SymbolSequence out;
  if (task == TaskId::blocks) {
    out.push_back(blocks::kNoAction);
    for (auto m : plan) {
      out.push_back(m);
      out.push_back(blocks::kNoAction);
    }
    return out;
  }
  for (auto m : plan) {
    out.push_back(approach_for(m));
    out.push_back(m);
  }
  out.push_back(manip::kTerminal);
  return out;
}

SymbolSequence Episode::labels() const {
  SymbolSequence out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f.label);
  return out;
}

LengthBand length_band(TaskId task) {
  if (task == TaskId::blocks) return {136, 445};
  return {90, 600};
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over (seed, stream)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

WorldState sample_initial_state(TaskId task, std::mt19937_64& rng) {
  if (task == TaskId::blocks) {
    BlocksState s;
    auto table = scatter(rng, blocks::kNumBlocks, Vec3(0.15, -0.40, 0.0), Vec3(0.45, 0.40, 0.0), 0.10);
    const std::array<Vec3, blocks::kNumBlocks> slots = {Vec3(0.65, -0.25, 0.0), Vec3(0.65, 0.25, 0.0),
                                                        Vec3(0.65, 0.0, 0.0), Vec3(0.65, 0.0, 0.06),
                                                        Vec3(0.65, 0.25, 0.06)};
    const Vec3 jitter = uniform_in(rng, Vec3(-0.01, -0.01, 0.0), Vec3(0.01, 0.01, 0.0));
    for (int b = 0; b < blocks::kNumBlocks; ++b) {
      s.layout.table[b] = table[static_cast<std::size_t>(b)];
      s.layout.slot[b] = slots[static_cast<std::size_t>(b)] + jitter;
      s.pose[b] = s.layout.table[b];
    }
    s.hand = s.layout.hand_home;
    return s;
  }

  ManipulationState s;
  auto& L = s.layout;
  auto cab = scatter(rng, 2, Vec3(0.62, -0.05, 0.25), Vec3(0.78, 0.20, 0.25), 0.08);
  auto tab = scatter(rng, 2, Vec3(0.25, -0.30, 0.0), Vec3(0.45, 0.30, 0.0), 0.12);
  L.cup_cabinet = cab[0];
  L.ball_cabinet = cab[1];
  L.cup_table = tab[0];
  L.ball_table = tab[1];
  s.ee = L.default_pose;

  std::uniform_int_distribution<int> coin(0, 1);
  auto place = [&](bool cup_in_cabinet, bool ball_in_cabinet) {
    s.cup = cup_in_cabinet ? CupLoc::cabinet : CupLoc::table;
    s.ball = ball_in_cabinet ? BallLoc::cabinet : BallLoc::table;
  };
  switch (task) {
    case TaskId::c:
      s.door = coin(rng) ? DoorState::open : DoorState::closed;
      place(false, false);
      break;
    case TaskId::abc:
    case TaskId::abcd: {
      s.door = DoorState::open;
      const int config = uniform_int(rng, 0, 2);  // both inside, cup inside, ball inside
      place(config != 2, config != 1);
      break;
    }
    case TaskId::abcdef: {
      s.door = coin(rng) ? DoorState::open : DoorState::closed;
      const int config = uniform_int(rng, 0, 3);
      place(config & 1, config & 2);
      break;
    }
    case TaskId::blocks: break;
  }
  s.door_fraction = s.door == DoorState::open ? 1.0 : 0.0;
  s.cup_pose = s.cup == CupLoc::cabinet ? L.cup_cabinet : L.cup_table;
  s.ball_pose = s.ball == BallLoc::cabinet ? L.ball_cabinet : L.ball_table;
  return s;
}

Episode sample_demonstration(TaskId task, std::uint64_t seed, const GeneratorConfig& cfg) {
  const TaskSpec spec{task};
  const auto band = length_band(task);
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    WorldState initial = sample_initial_state(task, rng);
    const auto plans = enumerate_plans(initial, spec);
    if (plans.empty()) throw Error("generator produced a dead-end initial state");
    const auto& plan = plans[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(plans.size()) - 1))];
    const auto segments = draw_segments(plan, task, cfg, rng);
    const int total = std::accumulate(segments.begin(), segments.end(), 0,
                                      [](int acc, const Segment& s) { return acc + s.frames; });
    if (total < band.min_frames || total > band.max_frames) continue;

    Episode ep;
    ep.meta = {task, seed, kGeneratorVersion, cfg.frame_rate};
    ep.initial = initial;
    ep.frames.reserve(static_cast<std::size_t>(total));
    WorldState state = initial;
    const std::uint64_t noise_stream = derive_seed(seed, 0x0b5);
    const double dt = 1.0 / cfg.frame_rate;
    for (const auto& seg : segments) {
      if (seg.hold) {
        for (int i = 0; i < seg.frames; ++i) {
          const auto index = ep.frames.size();
          ep.frames.push_back({static_cast<double>(index) * dt,
                               render_observation(state, derive_seed(noise_stream, index), cfg.obs_noise),
                               seg.symbol});
        }
        continue;
      }
      const Vec3 start = primitive_start(state, seg.symbol);
      const Vec3 target = primitive_geometry(state, seg.symbol).target;
      const double duration = seg.frames * dt;
      // Gain chosen so the 1 cm completion radius is reached on the last frame.
      const double dist = (target - start).norm();
      const double gain = std::log(std::max(dist, 0.02) / 0.01) / duration;
      for (int i = 0; i < seg.frames; ++i) {
        const double tau = (i + 1) * dt;
        const Vec3 ee = target + (start - target) * std::exp(-gain * tau);
        if (seg.symbol != alphabet_for(task).no_action()) move_effector(state, seg.symbol, ee);
        const auto index = ep.frames.size();
        ep.frames.push_back({static_cast<double>(index) * dt,
                             render_observation(state, derive_seed(noise_stream, index), cfg.obs_noise), seg.symbol});
      }
      state = apply(state, seg.symbol, spec);
    }
    if (!goal_reached(state, spec)) throw Error("demonstration did not reach the goal");
    return ep;
  }
  throw Error("could not draw an episode inside the length band");
}

SplitCounts split_counts(std::size_t n) {
  SplitCounts c;
  c.train = n * 8 / 10;
  c.val = n / 10;
  c.test = n - c.train - c.val;
  return c;
}

DatasetSummary generate_dataset(TaskId task, std::size_t n, std::uint64_t seed, const std::filesystem::path& root,
                                const GeneratorConfig& cfg) {
  if (n < 10) throw Error("generate_dataset needs at least 10 episodes");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 split_rng(derive_seed(seed, 0x5917));
  std::shuffle(order.begin(), order.end(), split_rng);
  const auto counts = split_counts(n);

  DatasetManifest manifest;
  manifest.task = task;
  manifest.seed = seed;
  manifest.frame_rate = cfg.frame_rate;
  manifest.obs_noise = cfg.obs_noise;
  for (std::size_t k = 0; k < n; ++k) {
    const auto idx = order[k];
    const char* split = k < counts.train ? "train" : (k < counts.train + counts.val ? "val" : "test");
    char name[32];
    std::snprintf(name, sizeof name, "episode_%05zu.jsonl", idx);
    const auto rel = std::filesystem::path(split) / name;
    const auto episode = sample_demonstration(task, derive_seed(seed, idx), cfg);
    io::write_file_atomic(root / rel, episode_to_jsonl(episode));
    manifest.files[split].push_back(rel.generic_string());
  }
  for (auto& [split, files] : manifest.files) std::sort(files.begin(), files.end());
  io::write_file_atomic(root / "manifest.json", manifest_to_json(manifest).dump(2) + "\n");
  return {counts, root};
}

}  // namespace symplan
