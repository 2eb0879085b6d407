#include "symplan/executor.hpp"

#include <algorithm>
#include <random>

#include "symplan/error.hpp"

namespace symplan {

bool SymbolQueue::enqueue_if_new(SymbolId s) {
  if (s == no_action_) return false;
  if (last_ && *last_ == s) return false;
  pending_.push_back(s);
  last_ = s;
  return true;
}

std::optional<SymbolId> SymbolQueue::pop() {
  if (pending_.empty()) return std::nullopt;
  const auto s = pending_.front();
  pending_.pop_front();
  return s;
}

void SymbolQueue::clear() {
  pending_.clear();
  last_.reset();
}

PrimitiveSpec resolve_primitive(const WorldState& state, SymbolId symbol, const ExecutorConfig& cfg) {
  PrimitiveSpec p;
  p.symbol = symbol;
  p.target = primitive_geometry(state, symbol).target;
  const bool manipulation = std::holds_alternative<ManipulationState>(state);
  const bool fast = manipulation && (is_approach(symbol) || symbol == manip::kTerminal);
  p.gain = fast ? cfg.approach_gain : cfg.manipulate_gain;
  return p;
}

Vec3 attractor_step(const Vec3& x, const Vec3& target, double gain, double dt) {
  return x + gain * (target - x) * dt;
}

SymbolId oracle_symbol(const PolicyContext& ctx) {
  if (ctx.active) return *ctx.active;
  const auto& alphabet = alphabet_for(ctx.task.id);
  if (goal_reached(ctx.state, ctx.task)) return alphabet.terminal().value_or(alphabet.no_action());
  if (ctx.task.id == TaskId::blocks) {
    const auto enabled = enabled_subtasks(ctx.state, ctx.task);
    return enabled.empty() ? alphabet.no_action() : enabled.front();
  }
  for (SymbolId m = manip::kMoveCup; m <= manip::kCloseDoor; ++m)
    if (!precondition_failure(ctx.state, m, ctx.task)) return m;
  const auto enabled = enabled_subtasks(ctx.state, ctx.task);
  return enabled.empty() ? alphabet.no_action() : approach_for(enabled.front());
}

std::optional<SymbolId> OraclePolicy::predict(const PolicyContext& ctx) { return oracle_symbol(ctx); }

std::optional<SymbolId> FaultyOncePolicy::predict(const PolicyContext& ctx) {
  if (!fired_) {
    fired_ = true;
    const auto& alphabet = alphabet_for(ctx.task.id);
    for (SymbolId s = 0; s < static_cast<SymbolId>(alphabet.size()); ++s)
      if (s != alphabet.no_action() && precondition_failure(ctx.state, s, ctx.task)) return s;
  }
  return oracle_symbol(ctx);
}

ModelPolicy::ModelPolicy(std::shared_ptr<const FrameClassifier> classifier, std::shared_ptr<const SequenceModel> model)
    : classifier_(std::move(classifier)), model_(std::move(model)) {
  if (!classifier_ || !model_) throw Error("model policy needs a classifier and a sequence model");
  if (classifier_->embed_dim() != model_->input_dim())
    throw Error("classifier embeds to " + std::to_string(classifier_->embed_dim()) + " dims, sequence model expects " +
                std::to_string(model_->input_dim()));
  history_ = Eigen::MatrixXd::Zero(model_->input_dim(), model_->sl);
}

void ModelPolicy::observe(const FrameObservation& obs) {
  const int sl = model_->sl;
  if (sl > 1) history_.leftCols(sl - 1) = history_.rightCols(sl - 1).eval();
  history_.col(sl - 1) = embed(*classifier_, obs);
  ++seen_;
}

std::optional<SymbolId> ModelPolicy::predict(const PolicyContext&) {
  if (seen_ < model_->sl) return std::nullopt;
  return predict_next(*model_, history_, 1).front();
}

namespace {

SymbolId parse_symbol(const Alphabet& alphabet, const std::string& glyph) {
  if (glyph.size() != 1) throw Error("trigger symbol must be a single glyph, got '" + glyph + "'");
  return alphabet.id_of(glyph[0]);
}

std::string glyph(const Alphabet& alphabet, SymbolId s) { return std::string(1, alphabet.glyph(s)); }

}  // namespace

PerturbationScript perturbation_script_from_json(const nlohmann::json& j, TaskId task) {
  if (!j.is_array()) throw Error("perturbation script must be a JSON array");
  const auto& alphabet = alphabet_for(task);
  PerturbationScript script;
  try {
    for (const auto& item : j) {
      Perturbation p;
      if (item.contains("at_tick")) p.trigger.at_tick = item.at("at_tick").get<long>();
      auto when = [&](const std::string& w) {
        const auto colon = w.find(':');
        if (colon == std::string::npos) throw Error("trigger must look like executing:X or completed:X");
        const auto kind = w.substr(0, colon);
        const auto sym = parse_symbol(alphabet, w.substr(colon + 1));
        if (kind == "executing") p.trigger.when_executing = sym;
        else if (kind == "completed") p.trigger.after_completed = sym;
        else throw Error("unknown trigger kind '" + kind + "'");
      };
      if (item.contains("when")) {
        const auto& w = item.at("when");
        if (w.is_array())
          for (const auto& x : w) when(x.get<std::string>());
        else
          when(w.get<std::string>());
      }
      if (!p.trigger.at_tick && !p.trigger.when_executing && !p.trigger.after_completed)
        throw Error("perturbation needs an at_tick or when trigger");
      p.mutation = mutation_from_json(item.at("mutation"));
      script.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed perturbation script: ") + e.what());
  }
  return script;
}

nlohmann::json to_json(const PerturbationScript& script, TaskId task) {
  const auto& alphabet = alphabet_for(task);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : script) {
    nlohmann::json item;
    if (p.trigger.at_tick) item["at_tick"] = *p.trigger.at_tick;
    nlohmann::json when = nlohmann::json::array();
    if (p.trigger.when_executing) when.push_back(std::string("executing:") + alphabet.glyph(*p.trigger.when_executing));
    if (p.trigger.after_completed) when.push_back(std::string("completed:") + alphabet.glyph(*p.trigger.after_completed));
    if (!when.empty()) item["when"] = when;
    item["mutation"] = to_json(p.mutation);
    out.push_back(item);
  }
  return out;
}

PerturbationScript ball_back_to_cabinet_script() {
  Perturbation p;
  p.trigger.when_executing = manip::kApproachCup;
  p.trigger.after_completed = manip::kMoveBall;
  p.mutation = MoveObject{"ball", "cabinet"};
  return {p};
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::success: return "success";
    case Verdict::recovered: return "recovered";
    case Verdict::failure: return "failure";
  }
  return "failure";
}

nlohmann::json to_json(const TraceEvent& e, const Alphabet& alphabet) {
  auto sym = [&](std::optional<SymbolId> x) { return x ? nlohmann::json(glyph(alphabet, *x)) : nlohmann::json(nullptr); };
  auto seq = [&](const SymbolSequence& v) {
    nlohmann::json a = nlohmann::json::array();
    for (auto x : v) a.push_back(glyph(alphabet, x));
    return a;
  };
  nlohmann::json j = {{"seq", e.seq},
                      {"tick", e.tick},
                      {"t", e.time},
                      {"predicted", sym(e.predicted)},
                      {"enqueued", e.enqueued},
                      {"active", sym(e.active)},
                      {"queue", seq(e.queue)},
                      {"executed", seq(e.executed)},
                      {"mispredictions", e.mispredictions}};
  if (!e.notes.empty()) {
    nlohmann::json notes = nlohmann::json::array();
    for (const auto& n : e.notes) {
      nlohmann::json nj = {{"tick", n.tick}, {"kind", n.kind}, {"symbol", sym(n.symbol)}};
      if (!n.detail.empty()) nj["detail"] = n.detail;
      notes.push_back(nj);
    }
    j["notes"] = notes;
  }
  j["state"] = to_json(e.state);
  if (e.final) {
    j["final"] = true;
    j["verdict"] = std::string(to_string(e.verdict));
    j["reason"] = e.reason;
  }
  return j;
}

Runtime::Runtime(TaskId task, WorldState initial, std::unique_ptr<Policy> policy, PerturbationScript script,
                 ExecutorConfig cfg, EventSink sink)
    : task_{task},
      state_(std::move(initial)),
      policy_(std::move(policy)),
      script_(std::move(script)),
      fired_(script_.size(), false),
      cfg_(cfg),
      sink_(std::move(sink)),
      queue_(alphabet_for(task).no_action()) {
  if (!policy_) throw Error("runtime needs a policy");
  if (cfg_.budget_ticks <= 0) throw Error("tick budget must be positive");
  if (cfg_.observe_every <= 0 || cfg_.predict_every <= 0) throw Error("loop rates must be positive");
  if (std::holds_alternative<ManipulationState>(state_) != is_manipulation(task))
    throw PreconditionViolation("world_kind", "initial state does not match task " + std::string(to_string(task)));
  check_invariants(state_);
  outcome_.final_state = state_;
}

std::optional<SymbolId> Runtime::active() const {
  if (!active_) return std::nullopt;
  return active_->symbol;
}

void Runtime::note(std::string kind, std::optional<SymbolId> symbol, std::string detail) {
  pending_notes_.push_back({tick_, std::move(kind), symbol, std::move(detail)});
}

void Runtime::emit(std::optional<SymbolId> predicted, bool enqueued, bool final) {
  TraceEvent e;
  e.seq = outcome_.trace.size();
  e.tick = tick_;
  e.time = static_cast<double>(tick_) * cfg_.dt();
  e.predicted = predicted;
  e.enqueued = enqueued;
  e.active = active();
  e.queue.assign(queue_.pending().begin(), queue_.pending().end());
  e.executed = std::move(pending_executed_);
  e.notes = std::move(pending_notes_);
  e.state = state_;
  e.final = final;
  e.verdict = outcome_.verdict;
  e.reason = outcome_.reason;
  e.mispredictions = outcome_.mispredictions;
  pending_executed_.clear();
  pending_notes_.clear();
  if (sink_) sink_(e);
  outcome_.trace.push_back(std::move(e));
}

void Runtime::finish(Verdict v, std::string reason) {
  finished_ = true;
  outcome_.verdict = v;
  outcome_.reason = std::move(reason);
  outcome_.ticks = tick_;
  outcome_.final_state = state_;
  emit(std::nullopt, false, true);
}

void Runtime::recover(const std::string& why) {
  queue_.clear();
  note("recover", std::nullopt, why);
}

void Runtime::dispatch() {
  const auto next = queue_.pop();
  if (!next) return;
  if (auto why = precondition_failure(state_, *next, task_)) {
    ++outcome_.mispredictions;
    note("mispredict", next, *why);
    if (outcome_.mispredictions > cfg_.max_recoveries) {
      finish(Verdict::failure, "too many mispredictions");
      return;
    }
    recover(*why);
    return;
  }
  active_ = resolve_primitive(state_, *next, cfg_);
  if (std::holds_alternative<BlocksState>(state_)) move_effector(state_, *next, primitive_start(state_, *next));
  note("dispatch", next);
}

void Runtime::integrate() {
  const Vec3 ee = attractor_step(effector(state_), active_->target, active_->gain, cfg_.dt());
  move_effector(state_, active_->symbol, ee);
  if ((ee - active_->target).norm() <= cfg_.tolerance) commit();
}

void Runtime::commit() {
  const auto symbol = active_->symbol;
  active_.reset();
  if (auto why = precondition_failure(state_, symbol, task_)) {
    note("abort", symbol, *why);
    recover(*why);
    return;
  }
  state_ = apply(state_, symbol, task_);
  outcome_.executed.push_back(symbol);
  pending_executed_.push_back(symbol);
  note("complete", symbol);
  if (symbol == manip::kTerminal && is_manipulation(task_.id))
    finish(outcome_.mispredictions > 0 ? Verdict::recovered : Verdict::success, "terminal symbol executed");
}

void Runtime::fire_perturbations() {
  for (std::size_t i = 0; i < script_.size(); ++i) {
    if (fired_[i]) continue;
    const auto& t = script_[i].trigger;
    if (t.at_tick && tick_ < *t.at_tick) continue;
    if (t.when_executing && (!active_ || active_->symbol != *t.when_executing)) continue;
    if (t.after_completed &&
        std::find(outcome_.executed.begin(), outcome_.executed.end(), *t.after_completed) == outcome_.executed.end())
      continue;
    fired_[i] = true;
    apply_external(script_[i].mutation, "script");
  }
}

void Runtime::apply_external(const Mutation& m, const std::string& source) {
  const WorldState before = state_;
  state_ = apply_mutation(state_, m);
  note("perturb", std::nullopt, source + ": " + to_json(m).dump());
  if (!active_) return;
  bool dropped = false;
  if (const auto* b = std::get_if<ManipulationState>(&before))
    dropped = b->held != Held::none && std::get<ManipulationState>(state_).held == Held::none;
  else
    dropped = std::get<BlocksState>(before).held >= 0 && std::get<BlocksState>(state_).held < 0;
  auto why = precondition_failure(state_, active_->symbol, task_);
  if (dropped || why) {
    const auto symbol = active_->symbol;
    active_.reset();
    note("abort", symbol, why ? *why : "carried object moved");
    recover("world changed under the active primitive");
  }
}

void Runtime::tick() {
  if (finished_) return;
  fire_perturbations();
  if (!active_) dispatch();
  if (finished_) return;
  if (active_) integrate();
  if (finished_) return;
  if (tick_ % cfg_.observe_every == 0) {
    const auto noise_seed = derive_seed(derive_seed(cfg_.seed, 0x0b5), static_cast<std::uint64_t>(frame_++));
    policy_->observe(render_observation(state_, noise_seed, cfg_.obs_noise));
  }
  if (tick_ % cfg_.predict_every == 0) {
    const PolicyContext ctx{state_, task_, active(), tick_};
    const auto p = policy_->predict(ctx);
    const bool enqueued = p && queue_.enqueue_if_new(*p);
    emit(p, enqueued, false);
  }
  ++tick_;
  outcome_.ticks = tick_;
  outcome_.final_state = state_;
  if (task_.id == TaskId::blocks && !active_ && goal_reached(state_, task_)) {
    finish(outcome_.mispredictions > 0 ? Verdict::recovered : Verdict::success, "goal reached");
    return;
  }
  if (tick_ >= cfg_.budget_ticks) finish(Verdict::failure, "tick budget exhausted");
}

nlohmann::json Runtime::status_json() const {
  const auto& alphabet = alphabet_for(task_.id);
  nlohmann::json queue = nlohmann::json::array();
  for (auto s : queue_.pending()) queue.push_back(glyph(alphabet, s));
  nlohmann::json executed = nlohmann::json::array();
  for (auto s : outcome_.executed) executed.push_back(glyph(alphabet, s));
  nlohmann::json j = {{"task", std::string(to_string(task_.id))},
                      {"tick", tick_},
                      {"t", static_cast<double>(tick_) * cfg_.dt()},
                      {"state", to_json(state_)},
                      {"goal_reached", goal_reached(state_, task_)},
                      {"queue", queue},
                      {"executed", executed},
                      {"mispredictions", outcome_.mispredictions},
                      {"finished", finished_}};
  j["active"] = active_ ? nlohmann::json(glyph(alphabet, active_->symbol)) : nlohmann::json(nullptr);
  if (const auto last = queue_.last_enqueued()) j["last_enqueued"] = glyph(alphabet, *last);
  if (finished_) {
    j["verdict"] = std::string(to_string(outcome_.verdict));
    j["reason"] = outcome_.reason;
  }
  return j;
}

EpisodeOutcome run_episode(TaskId task, const WorldState& initial, std::unique_ptr<Policy> policy,
                           const PerturbationScript& script, const ExecutorConfig& cfg) {
  Runtime rt(task, initial, std::move(policy), script, cfg);
  while (!rt.finished()) rt.tick();
  return rt.outcome();
}

RolloutCounts batch_rollout(TaskId task, const PolicyFactory& policy, int n, std::uint64_t seed,
                            const PerturbationScript& script, const ExecutorConfig& cfg,
                            std::vector<EpisodeOutcome>* outcomes) {
  if (n < 1) throw Error("batch_rollout needs at least one episode");
  RolloutCounts counts;
  for (int i = 0; i < n; ++i) {
    const auto episode_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    std::mt19937_64 rng(episode_seed);
    const auto initial = sample_initial_state(task, rng);
    auto run_cfg = cfg;
    run_cfg.seed = episode_seed;
    auto outcome = run_episode(task, initial, policy(), script, run_cfg);
    switch (outcome.verdict) {
      case Verdict::success: ++counts.success; break;
      case Verdict::recovered: ++counts.recovered; break;
      case Verdict::failure: ++counts.failure; break;
    }
    if (outcomes) outcomes->push_back(std::move(outcome));
  }
  return counts;
}

std::string trace_to_jsonl(const EpisodeOutcome& outcome, TaskId task) {
  const auto& alphabet = alphabet_for(task);
  std::string out;
  for (const auto& e : outcome.trace) {
    out += to_json(e, alphabet).dump();
    out.push_back('\n');
  }
  return out;
}

}  // namespace symplan
