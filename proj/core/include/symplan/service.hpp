#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "symplan/error.hpp"
#include "symplan/executor.hpp"

namespace symplan {

// Carries the HTTP status a request failure maps to.
class ServiceError : public Error {
 public:
  ServiceError(int status, const std::string& what, std::string predicate = {})
      : Error(what), status_(status), predicate_(std::move(predicate)) {}
  int status() const noexcept { return status_; }
  const std::string& predicate() const noexcept { return predicate_; }
  nlohmann::json body() const;

 private:
  int status_;
  std::string predicate_;
};

struct SessionRequest {
  TaskId task = TaskId::abcdef;
  std::string policy = "oracle";  // oracle | faulty_once | model
  std::string model_path;
  std::string classifier_path;
  std::uint64_t seed = 0;
  double rtf = 1.0;     // simulated seconds per wall second; 0 runs unpaced
  bool manual = false;  // ticks only advance through step()
  long budget_ticks = ExecutorConfig{}.budget_ticks;
};

// Throws ServiceError(400) for malformed requests.
SessionRequest session_request_from_json(const nlohmann::json& j);

// One live episode. A worker thread owns the runtime; commands reach it
// through an ordered queue and run between ticks.
class Session {
 public:
  // Throws ServiceError(400) when a checkpoint cannot be loaded.
  Session(std::string id, const SessionRequest& request);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const noexcept { return id_; }
  const SessionRequest& request() const noexcept { return request_; }

  // Last published snapshot; never taken mid-tick.
  nlohmann::json snapshot() const;
  bool finished() const;

  // Applied between ticks. Throws ServiceError: 400 malformed, 409 finished,
  // 422 with the violated predicate when the result would be invalid.
  nlohmann::json perturb(const nlohmann::json& mutation);
  // Manual clock only. Returns the snapshot after the last tick.
  nlohmann::json step(long ticks);

  // Events with seq >= from, waiting up to `timeout` when none is ready.
  // `done` is set once the terminal event has been returned.
  std::vector<nlohmann::json> events_since(std::size_t from, std::chrono::milliseconds timeout, bool* done) const;

  void stop();

 private:
  using Command = std::function<void()>;
  void run();
  void post(Command cmd);
  void publish();  // requires mu_
  void on_event(const TraceEvent& e);

  std::string id_;
  SessionRequest request_;
  std::unique_ptr<Runtime> runtime_;

  mutable std::mutex mu_;
  std::condition_variable cmd_cv_;
  mutable std::condition_variable event_cv_;
  std::deque<Command> commands_;
  std::vector<nlohmann::json> events_;
  nlohmann::json snapshot_;
  bool finished_ = false;
  bool stopping_ = false;
  std::thread worker_;
};

class SessionRegistry {
 public:
  explicit SessionRegistry(std::size_t max_sessions = 64) : max_sessions_(max_sessions) {}
  ~SessionRegistry();

  // Returns {"id", "task", "policy"}.
  nlohmann::json create(const nlohmann::json& request);
  // Throws ServiceError(404) for unknown ids.
  std::shared_ptr<Session> get(const std::string& id) const;
  nlohmann::json list() const;
  void erase(const std::string& id);
  void clear();

 private:
  std::size_t max_sessions_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_ = 1;
};

// HTTP front end over a registry; routes are documented in docs/service_api.md.
class HttpServer {
 public:
  explicit HttpServer(SessionRegistry& registry);
  ~HttpServer();

  // Port 0 picks a free port. Returns the bound port; throws IoError.
  int bind(const std::string& host, int port);
  void listen();  // blocks until stop()
  void start();   // listen() on a background thread
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace symplan
