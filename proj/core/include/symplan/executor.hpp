#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "symplan/embedder.hpp"
#include "symplan/envsim.hpp"
#include "symplan/seqmodel.hpp"

namespace symplan {

// Pending symbols plus the last symbol ever enqueued; the no-action symbol
// is never queued.
class SymbolQueue {
 public:
  explicit SymbolQueue(SymbolId no_action) : no_action_(no_action) {}

  // Appends iff `s` differs from the last enqueued symbol. Returns whether it did.
  bool enqueue_if_new(SymbolId s);
  std::optional<SymbolId> pop();
  // Drops pending symbols and forgets the last enqueued one.
  void clear();

  bool empty() const { return pending_.empty(); }
  std::size_t size() const { return pending_.size(); }
  const std::deque<SymbolId>& pending() const { return pending_; }
  std::optional<SymbolId> last_enqueued() const { return last_; }

 private:
  SymbolId no_action_;
  std::deque<SymbolId> pending_;
  std::optional<SymbolId> last_;
};

struct ExecutorConfig {
  double control_hz = 20.0;
  int observe_every = 2;   // control ticks per rendered frame (10 Hz)
  int predict_every = 10;  // control ticks per prediction (2 Hz)
  double approach_gain = 2.0;
  double manipulate_gain = 1.0;
  double tolerance = 0.01;  // meters
  long budget_ticks = 4800;
  int max_recoveries = 10;
  double obs_noise = 0.05;
  std::uint64_t seed = 0;

  double dt() const { return 1.0 / control_hz; }
};

// An attractor primitive bound at dispatch time.
struct PrimitiveSpec {
  SymbolId symbol = 0;
  Vec3 target = Vec3::Zero();
  double gain = 1.0;
};

PrimitiveSpec resolve_primitive(const WorldState& state, SymbolId symbol, const ExecutorConfig& cfg);
// One Euler step of x' = gain * (target - x).
Vec3 attractor_step(const Vec3& x, const Vec3& target, double gain, double dt);

struct PolicyContext {
  const WorldState& state;
  const TaskSpec& task;
  std::optional<SymbolId> active;
  long tick;
};

class Policy {
 public:
  virtual ~Policy() = default;
  // Called for every rendered frame.
  virtual void observe(const FrameObservation& obs) { (void)obs; }
  // Called at the prediction rate; nullopt while warming up.
  virtual std::optional<SymbolId> predict(const PolicyContext& ctx) = 0;
  virtual std::string name() const = 0;
};

// Ground truth from the simulator: the active symbol while one runs, else
// the next step of the lowest-id plan.
class OraclePolicy : public Policy {
 public:
  std::optional<SymbolId> predict(const PolicyContext& ctx) override;
  std::string name() const override { return "oracle"; }
};
SymbolId oracle_symbol(const PolicyContext& ctx);

// Emits one illegal symbol on its first call, then defers to the oracle.
class FaultyOncePolicy : public Policy {
 public:
  std::optional<SymbolId> predict(const PolicyContext& ctx) override;
  std::string name() const override { return "faulty_once"; }

 private:
  bool fired_ = false;
};

// Frame classifier embeddings into the sequence model.
class ModelPolicy : public Policy {
 public:
  ModelPolicy(std::shared_ptr<const FrameClassifier> classifier, std::shared_ptr<const SequenceModel> model);
  void observe(const FrameObservation& obs) override;
  std::optional<SymbolId> predict(const PolicyContext& ctx) override;
  std::string name() const override { return std::string(to_string(model_->kind)); }

 private:
  std::shared_ptr<const FrameClassifier> classifier_;
  std::shared_ptr<const SequenceModel> model_;
  Eigen::MatrixXd history_;  // last SL embeddings, oldest first
  long seen_ = 0;
};

using PolicyFactory = std::function<std::unique_ptr<Policy>()>;

// Fires once, when every given condition holds.
struct PerturbationTrigger {
  std::optional<long> at_tick;
  std::optional<SymbolId> when_executing;
  std::optional<SymbolId> after_completed;
};

struct Perturbation {
  PerturbationTrigger trigger;
  Mutation mutation;
};
using PerturbationScript = std::vector<Perturbation>;

// [{"at_tick": 40 | "when": "executing:A" | "completed:B", "mutation": {...}}]
PerturbationScript perturbation_script_from_json(const nlohmann::json& j, TaskId task);
nlohmann::json to_json(const PerturbationScript& script, TaskId task);

// Puts the ball back into the cabinet once it has been fetched, as the arm
// heads for the cup.
PerturbationScript ball_back_to_cabinet_script();

enum class Verdict { success, recovered, failure };
std::string_view to_string(Verdict v);

// Something that happened between two loop events.
struct TraceNote {
  long tick = 0;
  std::string kind;  // dispatch, complete, mispredict, recover, abort, perturb
  std::optional<SymbolId> symbol;
  std::string detail;
};

// One record per symbol-loop tick, plus a final record carrying the verdict.
struct TraceEvent {
  std::size_t seq = 0;
  long tick = 0;
  double time = 0.0;
  std::optional<SymbolId> predicted;
  bool enqueued = false;
  std::optional<SymbolId> active;
  SymbolSequence queue;
  SymbolSequence executed;  // completed since the previous event
  std::vector<TraceNote> notes;
  WorldState state;
  bool final = false;
  Verdict verdict = Verdict::failure;
  std::string reason;
  int mispredictions = 0;
};

nlohmann::json to_json(const TraceEvent& e, const Alphabet& alphabet);

struct EpisodeOutcome {
  Verdict verdict = Verdict::failure;
  std::string reason;
  long ticks = 0;
  int mispredictions = 0;
  SymbolSequence executed;  // completed symbols, in order
  std::vector<TraceEvent> trace;
  WorldState final_state;
};

using EventSink = std::function<void(const TraceEvent&)>;

// Dual-rate closed loop over one scene. Not thread-safe; callers serialize
// tick() and apply_external().
class Runtime {
 public:
  Runtime(TaskId task, WorldState initial, std::unique_ptr<Policy> policy, PerturbationScript script,
          ExecutorConfig cfg, EventSink sink = {});

  void tick();
  bool finished() const { return finished_; }
  // Human edit between ticks; cancels the active primitive when it moves
  // what the arm carries or invalidates the primitive.
  void apply_external(const Mutation& m, const std::string& source = "external");

  const WorldState& state() const { return state_; }
  long ticks() const { return tick_; }
  TaskId task() const { return task_.id; }
  const ExecutorConfig& config() const { return cfg_; }
  std::optional<SymbolId> active() const;
  const SymbolQueue& queue() const { return queue_; }
  const EpisodeOutcome& outcome() const { return outcome_; }
  nlohmann::json status_json() const;

 private:
  void note(std::string kind, std::optional<SymbolId> symbol, std::string detail = {});
  void emit(std::optional<SymbolId> predicted, bool enqueued, bool final);
  void dispatch();
  void integrate();
  void commit();
  void recover(const std::string& why);
  void fire_perturbations();
  void finish(Verdict v, std::string reason);

  TaskSpec task_;
  WorldState state_;
  std::unique_ptr<Policy> policy_;
  PerturbationScript script_;
  std::vector<bool> fired_;
  ExecutorConfig cfg_;
  EventSink sink_;
  SymbolQueue queue_;
  std::optional<PrimitiveSpec> active_;
  long tick_ = 0;
  long frame_ = 0;
  bool finished_ = false;
  EpisodeOutcome outcome_;
  std::vector<TraceNote> pending_notes_;
  SymbolSequence pending_executed_;
};

EpisodeOutcome run_episode(TaskId task, const WorldState& initial, std::unique_ptr<Policy> policy,
                           const PerturbationScript& script, const ExecutorConfig& cfg);

struct RolloutCounts {
  int success = 0;
  int recovered = 0;
  int failure = 0;
  double accuracy() const {
    const int n = success + recovered + failure;
    return n == 0 ? 0.0 : static_cast<double>(success + recovered) / n;
  }
};

// Episode i starts from sample_initial_state seeded with derive_seed(seed, i).
RolloutCounts batch_rollout(TaskId task, const PolicyFactory& policy, int n, std::uint64_t seed,
                            const PerturbationScript& script = {}, const ExecutorConfig& cfg = {},
                            std::vector<EpisodeOutcome>* outcomes = nullptr);

std::string trace_to_jsonl(const EpisodeOutcome& outcome, TaskId task);

}  // namespace symplan
