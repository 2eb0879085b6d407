#include "symplan/service.hpp"

#define CPPHTTPLIB_THREAD_POOL_COUNT 16
#include <httplib.h>

#include <filesystem>
#include <future>
#include <random>

#include "symplan/embedder.hpp"
#include "symplan/seqmodel.hpp"

namespace symplan {

nlohmann::json ServiceError::body() const {
  nlohmann::json j = {{"error", what()}};
  if (!predicate_.empty()) j["predicate"] = predicate_;
  return j;
}

SessionRequest session_request_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ServiceError(400, "request body must be a JSON object");
  SessionRequest r;
  try {
    r.task = parse_task(j.at("task").get<std::string>());
    if (j.contains("policy")) {
      const auto& p = j.at("policy");
      if (p.is_string()) {
        r.policy = p.get<std::string>();
        if (r.policy != "oracle" && r.policy != "faulty_once")
          throw ServiceError(400, "policy must be \"oracle\", \"faulty_once\" or {\"model\", \"classifier\"}");
      } else if (p.is_object()) {
        r.policy = "model";
        r.model_path = p.at("model").get<std::string>();
        r.classifier_path = p.at("classifier").get<std::string>();
      } else {
        throw ServiceError(400, "policy must be a string or an object");
      }
    }
    r.seed = j.value("seed", std::uint64_t{0});
    r.rtf = j.value("rtf", 1.0);
    if (r.rtf < 0.0) throw ServiceError(400, "rtf must be >= 0");
    const auto clock = j.value("clock", std::string("paced"));
    if (clock != "paced" && clock != "manual") throw ServiceError(400, "clock must be \"paced\" or \"manual\"");
    r.manual = clock == "manual";
    r.budget_ticks = j.value("budget_ticks", r.budget_ticks);
    if (r.budget_ticks <= 0) throw ServiceError(400, "budget_ticks must be positive");
  } catch (const nlohmann::json::exception& e) {
    throw ServiceError(400, std::string("malformed session request: ") + e.what());
  } catch (const ServiceError&) {
    throw;
  } catch (const Error& e) {
    throw ServiceError(400, e.what());
  }
  return r;
}

namespace {

std::unique_ptr<Policy> make_policy(const SessionRequest& r) {
  if (r.policy == "oracle") return std::make_unique<OraclePolicy>();
  if (r.policy == "faulty_once") return std::make_unique<FaultyOncePolicy>();
  try {
    auto clf = std::make_shared<const FrameClassifier>(load_classifier(r.classifier_path).model);
    auto model = std::make_shared<const SequenceModel>(load_sequence_model(r.model_path));
    if (model->alphabet != alphabet_for(r.task).name())
      throw Error("model alphabet '" + model->alphabet + "' does not match task " + std::string(to_string(r.task)));
    return std::make_unique<ModelPolicy>(std::move(clf), std::move(model));
  } catch (const Error& e) {
    throw ServiceError(400, std::string("cannot load policy: ") + e.what());
  }
}

}  // namespace

Session::Session(std::string id, const SessionRequest& request) : id_(std::move(id)), request_(request) {
  ExecutorConfig cfg;
  cfg.seed = request.seed;
  cfg.budget_ticks = request.budget_ticks;
  std::mt19937_64 rng(request.seed);
  const auto initial = sample_initial_state(request.task, rng);
  runtime_ = std::make_unique<Runtime>(request.task, initial, make_policy(request), PerturbationScript{}, cfg,
                                       [this](const TraceEvent& e) { on_event(e); });
  {
    std::lock_guard lk(mu_);
    publish();
  }
  worker_ = std::thread([this] { run(); });
}

Session::~Session() { stop(); }

void Session::stop() {
  {
    std::lock_guard lk(mu_);
    stopping_ = true;
  }
  cmd_cv_.notify_all();
  event_cv_.notify_all();
  if (worker_.joinable() && worker_.get_id() != std::this_thread::get_id()) worker_.join();
}

void Session::publish() {
  snapshot_ = runtime_->status_json();
  snapshot_["id"] = id_;
  snapshot_["events"] = events_.size();
  finished_ = runtime_->finished();
}

void Session::on_event(const TraceEvent& e) {
  // Called on the worker with mu_ held.
  auto j = to_json(e, alphabet_for(request_.task));
  j["session"] = id_;
  if (e.final) {
    const auto& o = runtime_->outcome();
    nlohmann::json executed = nlohmann::json::array();
    for (auto s : o.executed) executed.push_back(std::string(1, alphabet_for(request_.task).glyph(s)));
    j["outcome"] = {{"verdict", std::string(to_string(o.verdict))},
                    {"reason", o.reason},
                    {"ticks", o.ticks},
                    {"mispredictions", o.mispredictions},
                    {"executed", executed}};
  }
  events_.push_back(std::move(j));
  event_cv_.notify_all();
}

void Session::run() {
  using clock = std::chrono::steady_clock;
  const auto period = request_.rtf > 0.0
                          ? std::chrono::duration_cast<clock::duration>(
                                std::chrono::duration<double>(runtime_->config().dt() / request_.rtf))
                          : clock::duration::zero();
  auto next = clock::now();
  std::unique_lock lk(mu_);
  while (!stopping_) {
    if (!commands_.empty()) {
      auto cmd = std::move(commands_.front());
      commands_.pop_front();
      cmd();
      continue;
    }
    if (request_.manual || finished_) {
      cmd_cv_.wait(lk, [&] { return stopping_ || !commands_.empty(); });
      next = clock::now();
      continue;
    }
    if (period > clock::duration::zero()) {
      if (cmd_cv_.wait_until(lk, next, [&] { return stopping_ || !commands_.empty(); })) continue;
      next += period;
    }
    runtime_->tick();
    publish();
  }
  event_cv_.notify_all();
}

void Session::post(Command cmd) {
  {
    std::lock_guard lk(mu_);
    if (stopping_) throw ServiceError(410, "session is shutting down");
    commands_.push_back(std::move(cmd));
  }
  cmd_cv_.notify_all();
}

nlohmann::json Session::snapshot() const {
  std::lock_guard lk(mu_);
  return snapshot_;
}

bool Session::finished() const {
  std::lock_guard lk(mu_);
  return finished_;
}

nlohmann::json Session::perturb(const nlohmann::json& body) {
  if (!body.is_object() || !body.contains("mutation")) throw ServiceError(400, "body must be {\"mutation\": {...}}");
  Mutation m;
  try {
    m = mutation_from_json(body.at("mutation"));
  } catch (const Error& e) {
    throw ServiceError(400, e.what());
  }
  auto done = std::make_shared<std::promise<nlohmann::json>>();
  auto result = done->get_future();
  post([this, m, done] {
    try {
      if (runtime_->finished()) throw ServiceError(409, "session has finished");
      runtime_->apply_external(m, "perturb");
      publish();
      done->set_value({{"accepted", true}, {"tick", runtime_->ticks()}, {"state", snapshot_.at("state")}});
    } catch (const PreconditionViolation& e) {
      done->set_exception(std::make_exception_ptr(ServiceError(422, e.what(), e.predicate())));
    } catch (const ServiceError&) {
      done->set_exception(std::current_exception());
    } catch (const Error& e) {
      done->set_exception(std::make_exception_ptr(ServiceError(400, e.what())));
    }
  });
  return result.get();
}

nlohmann::json Session::step(long ticks) {
  if (!request_.manual) throw ServiceError(409, "step needs a session created with \"clock\": \"manual\"");
  if (ticks < 1) throw ServiceError(400, "ticks must be >= 1");
  auto done = std::make_shared<std::promise<nlohmann::json>>();
  auto result = done->get_future();
  post([this, ticks, done] {
    for (long i = 0; i < ticks && !runtime_->finished(); ++i) runtime_->tick();
    publish();
    done->set_value(snapshot_);
  });
  return result.get();
}

std::vector<nlohmann::json> Session::events_since(std::size_t from, std::chrono::milliseconds timeout,
                                                  bool* done) const {
  std::unique_lock lk(mu_);
  event_cv_.wait_for(lk, timeout, [&] { return events_.size() > from || stopping_; });
  std::vector<nlohmann::json> out;
  for (std::size_t i = from; i < events_.size(); ++i) out.push_back(events_[i]);
  if (done) {
    const bool final_sent = !events_.empty() && events_.back().value("final", false) && from <= events_.size();
    *done = final_sent || (stopping_ && events_.size() <= from);
  }
  return out;
}

SessionRegistry::~SessionRegistry() { clear(); }

nlohmann::json SessionRegistry::create(const nlohmann::json& body) {
  const auto request = session_request_from_json(body);
  std::string id;
  {
    std::lock_guard lk(mu_);
    if (sessions_.size() >= max_sessions_) throw ServiceError(503, "too many sessions");
    id = "s" + std::to_string(next_++);
  }
  auto session = std::make_shared<Session>(id, request);
  {
    std::lock_guard lk(mu_);
    sessions_[id] = session;
  }
  return {{"id", id}, {"task", std::string(to_string(request.task))}, {"policy", request.policy}};
}

std::shared_ptr<Session> SessionRegistry::get(const std::string& id) const {
  std::lock_guard lk(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "unknown session: " + id);
  return it->second;
}

nlohmann::json SessionRegistry::list() const {
  std::lock_guard lk(mu_);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [id, s] : sessions_)
    out.push_back({{"id", id}, {"task", std::string(to_string(s->request().task))}, {"finished", s->finished()}});
  return out;
}

void SessionRegistry::erase(const std::string& id) {
  std::shared_ptr<Session> victim;
  {
    std::lock_guard lk(mu_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ServiceError(404, "unknown session: " + id);
    victim = std::move(it->second);
    sessions_.erase(it);
  }
  victim->stop();
}

void SessionRegistry::clear() {
  std::map<std::string, std::shared_ptr<Session>> all;
  {
    std::lock_guard lk(mu_);
    all.swap(sessions_);
  }
  for (auto& [id, s] : all) s->stop();
}

// --- HTTP ------------------------------------------------------------------

struct HttpServer::Impl {
  SessionRegistry& registry;
  httplib::Server server;
  std::thread thread;

  explicit Impl(SessionRegistry& r) : registry(r) { routes(); }

  static void reply(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <class F>
  static auto guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const ServiceError& e) {
        reply(res, e.status(), e.body());
      } catch (const nlohmann::json::exception& e) {
        reply(res, 400, {{"error", std::string("invalid JSON: ") + e.what()}});
      } catch (const std::exception& e) {
        reply(res, 500, {{"error", e.what()}});
      }
    };
  }

  static nlohmann::json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    try {
      return nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
      throw ServiceError(400, std::string("invalid JSON: ") + e.what());
    }
  }

  void routes() {
    server.Get("/health", [](const httplib::Request&, httplib::Response& res) { reply(res, 200, {{"ok", true}}); });
    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  reply(res, 201, registry.create(parse_body(req)));
                }));
    server.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
                 reply(res, 200, registry.list());
               }));
    server.Get("/sessions/:id/state", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 reply(res, 200, registry.get(req.path_params.at("id"))->snapshot());
               }));
    server.Post("/sessions/:id/perturb", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  auto s = registry.get(req.path_params.at("id"));
                  reply(res, 200, s->perturb(parse_body(req)));
                }));
    server.Post("/sessions/:id/step", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  auto s = registry.get(req.path_params.at("id"));
                  const auto body = parse_body(req);
                  const auto& ticks = body.contains("ticks") ? body.at("ticks") : nlohmann::json(1);
                  if (!ticks.is_number_integer()) throw ServiceError(400, "ticks must be an integer");
                  reply(res, 200, s->step(ticks.get<long>()));
                }));
    server.Delete("/sessions/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
                    registry.erase(req.path_params.at("id"));
                    reply(res, 200, {{"deleted", req.path_params.at("id")}});
                  }));
    server.Get("/sessions/:id/events", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 auto session = registry.get(req.path_params.at("id"));
                 std::size_t from = 0;
                 if (req.has_param("from")) {
                   try {
                     from = std::stoul(req.get_param_value("from"));
                   } catch (const std::exception&) {
                     throw ServiceError(400, "from must be a non-negative integer");
                   }
                 }
                 res.set_header("Cache-Control", "no-cache");
                 res.set_chunked_content_provider(
                     "text/event-stream", [session, next = from](std::size_t, httplib::DataSink& sink) mutable {
                       bool done = false;
                       const auto batch = session->events_since(next, std::chrono::milliseconds(250), &done);
                       for (const auto& e : batch) {
                         const std::string chunk =
                             "id: " + std::to_string(next) + "\ndata: " + e.dump() + "\n\n";
                         if (!sink.write(chunk.data(), chunk.size())) return false;
                         ++next;
                       }
                       if (done) sink.done();
                       return sink.is_writable();
                     });
               }));
  }
};

HttpServer::HttpServer(SessionRegistry& registry) : impl_(std::make_unique<Impl>(registry)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::start() {
  impl_->thread = std::thread([this] { listen(); });
  impl_->server.wait_until_ready();
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace symplan
