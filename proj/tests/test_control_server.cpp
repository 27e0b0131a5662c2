#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "chamber/control_server.hpp"
#include "chamber/eval.hpp"
#include "test_support.hpp"

using namespace chamber;
using namespace chamber::testing;

namespace {

struct Api {
  Json body;
  int status = 0;
};

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override { start(); }

  void start(const std::string& script = "ukraine_script.json") {
    ServerOptions options;
    options.port = 0;
    options.scenario = load_scenario(fixture("ukraine_funding.json"));
    options.roster = load_roster(fixture("roster_intel_committee.json"));
    options.base_config.output_dir = dir.path() / "runs";
    options.scores_path = dir.path() / "scores.csv";
    auto path = fixture(script);
    options.backend_factory = [path] { return std::make_unique<ScriptedBackend>(load_script(path)); };
    server = std::make_unique<ControlServer>(std::move(options));
    port = server->start();
  }

  void TearDown() override { server->stop(); }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(std::chrono::seconds(30));
    return c;
  }

  Api post(const std::string& path, const Json& body = Json::object()) {
    auto res = client().Post(path, body.dump(), "application/json");
    EXPECT_TRUE(res) << path;
    if (!res) return {};
    return {Json::parse(res->body), res->status};
  }

  Api get(const std::string& path) {
    auto res = client().Get(path);
    EXPECT_TRUE(res) << path;
    if (!res) return {};
    return {Json::parse(res->body), res->status};
  }

  void step_n(int n) {
    for (int i = 0; i < n; ++i) ASSERT_EQ(post("/api/step").status, 200);
  }

  TempDir dir;
  std::unique_ptr<ControlServer> server;
  int port = 0;
};

void expect_error(const Api& api, int status, const std::string& type) {
  EXPECT_EQ(api.status, status) << api.body.dump();
  ASSERT_TRUE(api.body.contains("error")) << api.body.dump();
  EXPECT_EQ(api.body["error"]["type"], type);
  EXPECT_TRUE(api.body["error"]["message"].is_string());
}

}  // namespace

TEST_F(ServerTest, NoRunYet) {
  expect_error(get("/api/state"), 404, "NoRunError");
  expect_error(post("/api/step"), 404, "NoRunError");
  expect_error(get("/api/memory/rubio"), 404, "NoRunError");
}

TEST_F(ServerTest, CreateRunAndStep) {
  auto created = post("/api/runs", {{"seed", 3}});
  EXPECT_EQ(created.status, 201);
  EXPECT_EQ(created.body["run_id"], "ukraine_funding-seed3");
  EXPECT_EQ(created.body["mode"], "stepped");
  EXPECT_EQ(created.body["phase"], "not_started");
  EXPECT_EQ(created.body["roster"].size(), 6u);

  auto step = post("/api/step");
  EXPECT_EQ(step.status, 200);
  ASSERT_EQ(step.body["events"].size(), 1u);
  EXPECT_EQ(step.body["events"][0]["kind"], "scenario_prompt");
  EXPECT_EQ(step.body["state"]["event_count"], 1);

  auto state = get("/api/state");
  EXPECT_EQ(state.body["phase"], "opening");
  EXPECT_EQ(state.body["auto_stepping"], false);
}

TEST_F(ServerTest, RunConflictsAndReplace) {
  post("/api/runs");
  expect_error(post("/api/runs"), 409, "PhaseError");
  auto replaced = post("/api/runs", {{"replace", true}, {"run_id", "second"}});
  EXPECT_EQ(replaced.status, 201);
  EXPECT_EQ(replaced.body["run_id"], "second");
  auto first = load_transcript(dir.path() / "runs" / "ukraine_funding-seed0" / "transcript.jsonl");
  EXPECT_FALSE(first.header.complete);
}

TEST_F(ServerTest, BadRunRequests) {
  expect_error(post("/api/runs", {{"mode", "fast"}}), 400, "ValidationError");
  expect_error(post("/api/runs", {{"seed", "x"}}), 400, "ValidationError");
  auto bad_scenario = scenario_to_json(load_scenario(fixture("ukraine_funding.json")));
  bad_scenario["reflect_agents"] = Json::array({"cotton"});
  expect_error(post("/api/runs", {{"scenario", bad_scenario}}), 400, "ValidationError");
  auto res = client().Post("/api/runs", "{nope", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(Json::parse(res->body)["error"]["type"], "ParseError");
}

TEST_F(ServerTest, PerturbAndAskAtBoundary) {
  post("/api/runs");
  step_n(7);
  auto p = post("/api/perturb", {{"content", "The dollar just collapsed."}});
  EXPECT_EQ(p.status, 200);
  ASSERT_EQ(p.body["events"].size(), 1u);
  EXPECT_EQ(p.body["events"][0]["kind"], "perturbation");
  EXPECT_EQ(p.body["events"][0]["index"], 7);

  step_n(1);
  expect_error(post("/api/perturb", {{"content", "mid-cycle"}}), 409, "PhaseError");
  expect_error(post("/api/ask", {{"agent_id", "rubio"}, {"question", "Why?"}}), 409, "PhaseError");
  expect_error(post("/api/ask", {{"agent_id", "cotton"}, {"question", "Why?"}}), 404, "UnknownAgentError");
  expect_error(post("/api/perturb", {{"content", ""}}), 400, "ValidationError");
  expect_error(post("/api/perturb", Json::object()), 400, "ValidationError");

  auto memory = get("/api/memory/warner");
  EXPECT_EQ(memory.status, 200);
  EXPECT_EQ(memory.body["owner"], "warner");
  EXPECT_EQ(memory.body["entries"].size(), 10u);
  expect_error(get("/api/memory/cotton"), 404, "UnknownAgentError");
}

TEST_F(ServerTest, AskReflectionOverHttp) {
  post("/api/runs");
  step_n(32);
  auto s = get("/api/state");
  EXPECT_EQ(s.body["phase"], "reflection");
  EXPECT_EQ(s.body["event_count"], 32);
  EXPECT_EQ(s.body["can_ask"], true);
  // The fixture script has no spare reflection replies.
  expect_error(post("/api/ask", {{"agent_id", "warner"}, {"question", "Anything else?"}}), 502, "BackendError");
  EXPECT_EQ(get("/api/state").body["phase"], "aborted");
  expect_error(post("/api/step"), 409, "FinishedError");
}

TEST_F(ServerTest, ResumeUntilBoundaryAndPause) {
  post("/api/runs");
  step_n(1);
  post("/api/resume", {{"until", "boundary"}});
  server->current()->wait_idle();
  auto s = get("/api/state");
  EXPECT_EQ(s.body["event_count"], 7);
  EXPECT_EQ(s.body["at_boundary"], true);
  EXPECT_EQ(s.body["auto_stepping"], false);
  expect_error(post("/api/resume", {{"until", "later"}}), 400, "ValidationError");
  post("/api/resume");
  post("/api/pause");
  server->current()->wait_idle();
  s = get("/api/state");
  EXPECT_EQ(s.body["auto_stepping"], false);
  EXPECT_EQ(s.body["busy"], false);
  if (s.body["finished"] == false) {
    EXPECT_EQ(post("/api/resume", {{"until", "end"}}).status, 200);
    server->current()->wait_idle();
  }
  EXPECT_EQ(get("/api/state").body["finished"], true);
  EXPECT_EQ(get("/api/state").body["event_count"], 32);
  expect_error(post("/api/resume"), 409, "FinishedError");
}

TEST_F(ServerTest, BatchRunRejectsStepping) {
  auto created = post("/api/runs", {{"mode", "batch"}});
  EXPECT_EQ(created.status, 201);
  expect_error(post("/api/step"), 409, "PhaseError");
  expect_error(post("/api/perturb", {{"content", "x"}}), 409, "PhaseError");
  server->current()->wait_idle();
  auto s = get("/api/state");
  EXPECT_EQ(s.body["finished"], true);
  EXPECT_EQ(s.body["event_count"], 32);
  auto events = get("/api/events?since=30");
  EXPECT_EQ(events.body["events"].size(), 2u);
  EXPECT_EQ(events.body["finished"], true);
  expect_error(get("/api/events?since=-1"), 400, "ValidationError");
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "runs" / "ukraine_funding-seed0" / "run.json"));
}

TEST_F(ServerTest, EventStreamDeliversAllFramesThenEnd) {
  post("/api/runs", {{"mode", "batch"}});
  std::string body;
  auto res = client().Get("/api/events/stream", [&](const char* data, std::size_t len) {
    body.append(data, len);
    return true;
  });
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Content-Type"), "text/event-stream");

  std::vector<Json> events;
  std::size_t pos = 0;
  int last_id = -1;
  while ((pos = body.find("event: transcript\ndata: ", pos)) != std::string::npos) {
    auto id_start = body.rfind("id: ", pos);
    int id = std::stoi(body.substr(id_start + 4));
    EXPECT_EQ(id, last_id + 1);
    last_id = id;
    pos += 24;
    auto end = body.find('\n', pos);
    events.push_back(Json::parse(body.substr(pos, end - pos)));
  }
  ASSERT_EQ(events.size(), 32u);
  EXPECT_EQ(events.front()["kind"], "scenario_prompt");
  EXPECT_EQ(events.back()["kind"], "reflection_answer");
  EXPECT_NE(body.find("event: end\ndata: {\"run_id\":\"ukraine_funding-seed0\"}"), std::string::npos);
}

TEST_F(ServerTest, EventStreamResumesFromLastEventId) {
  post("/api/runs", {{"mode", "batch"}});
  std::string body;
  httplib::Headers headers{{"Last-Event-ID", "29"}};
  auto res = client().Get("/api/events/stream", headers, [&](const char* data, std::size_t len) {
    body.append(data, len);
    return true;
  });
  ASSERT_TRUE(res);
  EXPECT_EQ(body.find("id: 29\n"), std::string::npos);
  EXPECT_NE(body.find("id: 30\n"), std::string::npos);
  EXPECT_NE(body.find("id: 31\n"), std::string::npos);
}

TEST_F(ServerTest, EventStreamFollowsLiveSteps) {
  post("/api/runs");
  std::string body;
  std::thread reader([&] {
    client().Get("/api/events/stream?since=0", [&](const char* data, std::size_t len) {
      body.append(data, len);
      return true;
    });
  });
  step_n(3);
  post("/api/resume");
  server->current()->wait_idle();
  EXPECT_EQ(get("/api/state").body["phase"], "finished");
  reader.join();
  EXPECT_NE(body.find("id: 0\n"), std::string::npos);
  EXPECT_NE(body.find("id: 31\n"), std::string::npos);
  EXPECT_NE(body.find("event: end"), std::string::npos);
}

TEST_F(ServerTest, BackendFailureIs502) {
  server->stop();
  start("malformed/ukraine_script_short.json");
  post("/api/runs");
  post("/api/resume");
  server->current()->wait_idle();
  auto s = get("/api/state");
  EXPECT_EQ(s.body["phase"], "aborted");
  EXPECT_NE(s.body["last_error"].get<std::string>().find("rubio"), std::string::npos);
  expect_error(post("/api/step"), 409, "FinishedError");
}

TEST_F(ServerTest, ScoresEndpoints) {
  EXPECT_EQ(get("/api/scores").body["records"].size(), 0u);
  auto ok = post("/api/scores", {{"scenario_id", "s"}, {"run_id", "r1"}, {"rater_id", "Expert 1"}, {"score", 7}});
  EXPECT_EQ(ok.status, 201);
  expect_error(post("/api/scores", {{"scenario_id", "s"}, {"run_id", "r1"}, {"rater_id", "Expert 1"}, {"score", 5}}),
               400, "ValidationError");
  expect_error(post("/api/scores", {{"scenario_id", "s"}, {"run_id", "r1"}, {"rater_id", "Expert 2"}, {"score", 11}}),
               400, "RangeError");
  expect_error(post("/api/scores", {{"scenario_id", ""}, {"run_id", "r1"}, {"rater_id", "E"}, {"score", 1}}), 400,
               "ValidationError");
  expect_error(post("/api/scores", {{"scenario_id", "s"}, {"run_id", "r1"}, {"rater_id", "E"}}), 400,
               "ValidationError");
  auto records = get("/api/scores").body["records"];
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0]["rater_id"], "Expert 1");
  EXPECT_EQ(slurp(dir.path() / "scores.csv"), "scenario_id,run_id,rater_id,score\ns,r1,Expert 1,7\n");
}

TEST_F(ServerTest, ScoresFeedTheReport) {
  for (const auto& ds : ingest_scores(fixture("scores.csv"))) {
    for (const auto& r : ds.records) {
      ASSERT_EQ(post("/api/scores", {{"scenario_id", ds.scenario_id},
                                     {"run_id", r.run_id},
                                     {"rater_id", r.rater_id},
                                     {"score", r.score}})
                    .status,
                201);
    }
  }
  auto report = get("/api/report");
  EXPECT_EQ(report.status, 200);
  const auto& u = report.body["scenarios"][0];
  EXPECT_EQ(u["scenario_id"], "ukraine_funding");
  EXPECT_NEAR(u["raters"][0]["mean"].get<double>(), 8.1, 1e-12);
  EXPECT_NEAR(u["correlation"]["r"].get<double>(), 0.6288281455225324, 1e-12);
  EXPECT_NEAR(u["correlation"]["p"].get<double>(), 0.0514692259199, 1e-12);
  auto one = get("/api/report?tail=one");
  EXPECT_NEAR(one.body["scenarios"][1]["correlation"]["p"].get<double>(), 0.0357649786244, 1e-12);
  EXPECT_EQ(read_text_file(dir.path() / "scores.csv"), read_text_file(fixture("scores.csv")));
}

TEST_F(ServerTest, ReportOnIncompleteScoresIsTyped) {
  post("/api/scores", {{"scenario_id", "s"}, {"run_id", "r1"}, {"rater_id", "A"}, {"score", 7}});
  post("/api/scores", {{"scenario_id", "s"}, {"run_id", "r1"}, {"rater_id", "B"}, {"score", 7}});
  post("/api/scores", {{"scenario_id", "s"}, {"run_id", "r2"}, {"rater_id", "A"}, {"score", 7}});
  expect_error(get("/api/report"), 400, "PairingError");
}

TEST_F(ServerTest, CorsPreflight) {
  auto res = client().Options("/api/step");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 204);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
}

TEST(ControlServerBind, PortInUseIsIoError) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  ASSERT_GE(fd, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ASSERT_EQ(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
  ASSERT_EQ(::listen(fd, 1), 0);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ServerOptions options;
  options.port = ntohs(addr.sin_port);
  ControlServer server(options);
  EXPECT_THROW(server.bind(), IoError);
  ::close(fd);
}
