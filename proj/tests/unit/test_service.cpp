#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <thread>

// Eigen must come before httplib; resolv.h defines a _res macro.
#include "symplan/service.hpp"

#include <httplib.h>
#include "test_util.hpp"

using namespace symplan;
using nlohmann::json;

namespace {

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    server_ = std::make_unique<HttpServer>(registry_);
    port_ = server_->bind("127.0.0.1", 0);
    server_->start();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(10, 0);
  }
  void TearDown() override {
    server_->stop();
    registry_.clear();
  }

  std::pair<int, json> post(const std::string& path, const json& body) {
    auto r = client_->Post(path, body.dump(), "application/json");
    if (!r) return {0, json()};
    return {r->status, r->body.empty() ? json() : json::parse(r->body)};
  }
  std::pair<int, json> get(const std::string& path) {
    auto r = client_->Get(path);
    if (!r) return {0, json()};
    return {r->status, json::parse(r->body)};
  }
  std::string create(const json& body) {
    auto [status, j] = post("/sessions", body);
    EXPECT_EQ(status, 201) << j.dump();
    return j.value("id", "");
  }

  // Reads server-sent events until `max` arrive, the stream ends, or time runs out.
  std::vector<json> events(const std::string& id, std::size_t max, std::size_t from = 0, int seconds = 5) {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(seconds, 0);
    std::vector<json> out;
    std::string buffer;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(seconds);
    c.Get("/sessions/" + id + "/events?from=" + std::to_string(from), [&](const char* data, std::size_t n) {
      buffer.append(data, n);
      std::size_t end;
      while ((end = buffer.find("\n\n")) != std::string::npos) {
        const auto block = buffer.substr(0, end);
        buffer.erase(0, end + 2);
        const auto at = block.find("data: ");
        if (at != std::string::npos) out.push_back(json::parse(block.substr(at + 6)));
      }
      return out.size() < max && std::chrono::steady_clock::now() < deadline;
    });
    return out;
  }

  SessionRegistry registry_;
  std::unique_ptr<HttpServer> server_;
  std::unique_ptr<httplib::Client> client_;
  int port_ = 0;
};

}  // namespace

TEST_F(ServiceTest, CreateAndReadState) {
  const auto id = create({{"task", "abcdef"}, {"seed", 3}, {"clock", "manual"}});
  auto [status, state] = get("/sessions/" + id + "/state");
  EXPECT_EQ(status, 200);
  EXPECT_EQ(state.at("tick"), 0);
  EXPECT_EQ(state.at("state").at("kind"), "manipulation");
  EXPECT_EQ(state.at("finished"), false);
}

TEST_F(ServiceTest, SessionsAreIndependent) {
  const auto a = create({{"task", "abcdef"}, {"seed", 1}, {"clock", "manual"}});
  const auto b = create({{"task", "blocks"}, {"seed", 2}, {"clock", "manual"}});
  EXPECT_NE(a, b);
  post("/sessions/" + a + "/step", {{"ticks", 25}});
  EXPECT_EQ(get("/sessions/" + a + "/state").second.at("tick"), 25);
  EXPECT_EQ(get("/sessions/" + b + "/state").second.at("tick"), 0);
  EXPECT_EQ(get("/sessions/" + b + "/state").second.at("state").at("kind"), "blocks");
}

TEST_F(ServiceTest, BadRequests) {
  EXPECT_EQ(post("/sessions", {{"task", "nope"}}).first, 400);
  EXPECT_EQ(post("/sessions", {{"seed", 1}}).first, 400);
  auto r = client_->Post("/sessions", "{not json", "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 400);
  auto [status, body] =
      post("/sessions", {{"task", "abcdef"}, {"policy", {{"model", "/nope/m.json"}, {"classifier", "/nope/c.json"}}}});
  EXPECT_EQ(status, 400);
  EXPECT_NE(body.at("error").get<std::string>().find("cannot load policy"), std::string::npos);
  EXPECT_EQ(get("/sessions/unknown/state").first, 404);
  EXPECT_EQ(post("/sessions/unknown/perturb", {{"mutation", {{"set_door", "open"}}}}).first, 404);
}

TEST_F(ServiceTest, TenControlTicksGiveOneEvent) {
  const auto id = create({{"task", "abcdef"}, {"seed", 5}, {"clock", "manual"}});
  post("/sessions/" + id + "/step", {{"ticks", 10}});
  auto got = events(id, 2, 0, 1);
  ASSERT_EQ(got.size(), 1u);
  for (const char* key : {"tick", "predicted", "queue", "executed", "state"}) EXPECT_TRUE(got[0].contains(key)) << key;
  post("/sessions/" + id + "/step", {{"ticks", 10}});
  got = events(id, 3, 0, 1);
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[1].at("tick"), 10);
}

TEST_F(ServiceTest, FinishedSessionEndsWithOutcome) {
  const auto id = create({{"task", "c"}, {"seed", 2}, {"rtf", 0}});
  const auto got = events(id, 1000, 0, 10);
  ASSERT_FALSE(got.empty());
  EXPECT_EQ(got.back().at("final"), true);
  EXPECT_EQ(got.back().at("outcome").at("verdict"), "success");
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].at("seq"), i);
  for (std::size_t i = 1; i < got.size(); ++i) EXPECT_GE(got[i].at("tick"), got[i - 1].at("tick"));
  // Replay from an offset and a second subscriber see the same sequence.
  const auto again = events(id, 1000, 0, 10);
  EXPECT_EQ(again, got);
  const auto tail = events(id, 1000, 3, 10);
  ASSERT_EQ(tail.size(), got.size() - 3);
  EXPECT_EQ(tail.front(), got[3]);
  EXPECT_EQ(post("/sessions/" + id + "/perturb", {{"mutation", {{"set_door", "open"}}}}).first, 409);
}

TEST_F(ServiceTest, PerturbAppliesBetweenTicks) {
  const auto id = create({{"task", "abcdef"}, {"seed", 7}, {"clock", "manual"}});
  post("/sessions/" + id + "/step", {{"ticks", 5}});
  auto [status, body] = post("/sessions/" + id + "/perturb", {{"mutation", {{"set_door", "open"}}}});
  ASSERT_EQ(status, 200) << body.dump();
  EXPECT_EQ(body.at("accepted"), true);
  EXPECT_EQ(body.at("tick"), 5);
  EXPECT_EQ(body.at("state").at("door"), "open");
  post("/sessions/" + id + "/step", {{"ticks", 10}});
  const auto got = events(id, 2, 1, 1);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].at("state").at("door"), "open");
  ASSERT_TRUE(got[0].contains("notes"));
  const auto& notes = got[0].at("notes");
  EXPECT_TRUE(std::any_of(notes.begin(), notes.end(), [](const json& n) { return n.at("kind") == "perturb"; }));
}

TEST_F(ServiceTest, BallBackToCabinetIsReplanned) {
  const auto id = create({{"task", "abcdef"}, {"seed", 11}, {"clock", "manual"}});
  ASSERT_EQ(post("/sessions/" + id + "/perturb", {{"mutation", {{"move_object", {{"object", "ball"}, {"to", "cabinet"}}}}}}).first,
            200);
  // Run until the ball has been fetched.
  bool fetched = false;
  for (int i = 0; i < 400 && !fetched; ++i) {
    const auto s = post("/sessions/" + id + "/step", {{"ticks", 10}}).second;
    const auto& ex = s.at("executed");
    fetched = std::find(ex.begin(), ex.end(), "B") != ex.end();
  }
  ASSERT_TRUE(fetched);
  auto [status, body] =
      post("/sessions/" + id + "/perturb", {{"mutation", {{"move_object", {{"object", "ball"}, {"to", "cabinet"}}}}}});
  ASSERT_EQ(status, 200) << body.dump();
  json state;
  for (int i = 0; i < 500; ++i) {
    state = post("/sessions/" + id + "/step", {{"ticks", 20}}).second;
    if (state.at("finished") == true) break;
  }
  ASSERT_EQ(state.at("finished"), true);
  EXPECT_NE(state.at("verdict"), "failure");
  const auto& ex = state.at("executed");
  EXPECT_EQ(std::count(ex.begin(), ex.end(), "B"), 2);
}

TEST_F(ServiceTest, HandPlacementIgnoresReachability) {
  const auto id = create({{"task", "abcdef"}, {"seed", 3}, {"clock", "manual"}});
  post("/sessions/" + id + "/perturb", {{"mutation", {{"set_door", "closed"}}}});
  auto [status, body] =
      post("/sessions/" + id + "/perturb", {{"mutation", {{"move_object", {{"object", "ball"}, {"to", "cabinet"}}}}}});
  EXPECT_EQ(status, 200) << body.dump();
  EXPECT_EQ(body.at("state").at("ball"), "cabinet");
}

TEST_F(ServiceTest, InvalidMutationsAreRejected) {
  const auto id = create({{"task", "blocks"}, {"seed", 3}, {"clock", "manual"}});
  auto [status, body] = post("/sessions/" + id + "/perturb", {{"mutation", {{"move_block", {{"block", "pink"}, {"placed", true}}}}}});
  EXPECT_EQ(status, 422);
  EXPECT_FALSE(body.at("predicate").get<std::string>().empty());
  EXPECT_EQ(post("/sessions/" + id + "/perturb", {{"mutation", {{"bogus", 1}}}}).first, 400);
  EXPECT_EQ(post("/sessions/" + id + "/perturb", {{"nothing", 1}}).first, 400);
  EXPECT_EQ(get("/sessions/" + id + "/state").second.at("state").at("kind"), "blocks");
}

TEST_F(ServiceTest, StepNeedsManualClock) {
  const auto id = create({{"task", "c"}, {"seed", 1}, {"rtf", 50}});
  EXPECT_EQ(post("/sessions/" + id + "/step", {{"ticks", 5}}).first, 409);
}

TEST_F(ServiceTest, PacedClockAdvances) {
  const auto id = create({{"task", "abcdef"}, {"seed", 1}, {"rtf", 10}});
  std::this_thread::sleep_for(std::chrono::milliseconds(300));
  const long tick = get("/sessions/" + id + "/state").second.at("tick");
  EXPECT_GT(tick, 10);
  EXPECT_LT(tick, 200);
}

TEST_F(ServiceTest, DeleteSession) {
  const auto id = create({{"task", "c"}, {"seed", 1}, {"clock", "manual"}});
  auto r = client_->Delete("/sessions/" + id);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(get("/sessions/" + id + "/state").first, 404);
}
