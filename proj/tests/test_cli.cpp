#include <cstdio>
#include <sstream>

#include <gtest/gtest.h>

#include "chamber/cli.hpp"
#include "chamber/profile_generation.hpp"
#include "chamber/transcript.hpp"
#include "test_support.hpp"

using namespace chamber;
using namespace chamber::testing;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  CliResult r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

int shell(const std::string& command) { return run_shell(command); }

std::string f(const std::string& name) { return fixture(name).string(); }

std::vector<std::string> ukraine_args(const std::string& out) {
  return {"--scenario", f("ukraine_funding.json"), "--roster", f("roster_intel_committee.json"), "--out", out};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST(Cli, HelpAndUsage) {
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({"run"}).code, kExitUsage);
  EXPECT_EQ(cli({"run", "--scenario", "/nonexistent.json", "--roster", f("roster_intel_committee.json")}).code,
            kExitUsage);
  EXPECT_EQ(cli({"eval"}).code, kExitUsage);
  EXPECT_EQ(cli({"validate"}).code, kExitUsage);
}

TEST(Cli, BackendFlagCombinations) {
  TempDir dir;
  auto base = ukraine_args((dir / "out").string());
  auto expect_usage = [&](const std::vector<std::string>& extra, const std::string& fragment) {
    auto r = cli(concat(concat({"run"}, base), extra));
    EXPECT_EQ(r.code, kExitUsage) << r.err;
    EXPECT_NE(r.err.find(fragment), std::string::npos) << r.err;
  };
  expect_usage({"--backend", "scripted"}, "requires --script");
  expect_usage({"--script", f("ukraine_script.json")}, "only valid with --backend scripted");
  expect_usage({"--backend", "scripted", "--script", f("ukraine_script.json"), "--base-url", "http://127.0.0.1:1"},
               "--base-url");
  expect_usage({"--backend", "replay"}, "requires --cache");
  expect_usage({"--backend", "replay", "--cache", dir.path().string(), "--record"}, "--record");
  expect_usage({"--backend", "scripted", "--script", f("ukraine_script.json"), "--record"}, "requires --cache");
  expect_usage({"--backend", "bogus"}, "");
  expect_usage({"--mode", "fast"}, "");
  EXPECT_FALSE(std::filesystem::exists(dir / "out"));
}

TEST(Cli, NoApiKeyFlag) {
  TempDir dir;
  auto r = cli(concat(concat({"run"}, ukraine_args((dir / "out").string())), {"--api-key", "sk-x"}));
  EXPECT_EQ(r.code, kExitUsage);
}

TEST(Cli, ScriptedRunWritesOutputs) {
  TempDir dir;
  const auto out = dir / "out";
  auto r = cli(concat(concat({"run"}, ukraine_args(out.string())),
                      {"--backend", "scripted", "--script", f("ukraine_script.json"), "--seed", "4"}));
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out, "run ukraine_funding-seed4: 32 events, complete, written to " + out.string() + "\n");
  auto t = load_transcript(out / "transcript.jsonl");
  EXPECT_TRUE(t.header.complete);
  EXPECT_EQ(t.header.seed, 4);
  EXPECT_TRUE(std::filesystem::exists(out / "transcript.txt"));
  EXPECT_TRUE(std::filesystem::exists(out / "memory" / "rubio.json"));
  EXPECT_TRUE(std::filesystem::exists(out / "run.json"));

  auto v = cli({"validate", "--scenario", f("ukraine_funding.json"), "--transcript", (out / "transcript.jsonl").string(),
                "--memory", (out / "memory" / "wyden.json").string()});
  EXPECT_EQ(v.code, kExitOk) << v.err;
  EXPECT_NE(v.out.find("ok transcript"), std::string::npos);
}

TEST(Cli, RuntimeFailureExitsOneWithTypedMessage) {
  TempDir dir;
  const auto out = dir / "out";
  auto r = cli(concat(concat({"run"}, ukraine_args(out.string())),
                      {"--backend", "scripted", "--script", f("malformed/ukraine_script_short.json")}));
  EXPECT_EQ(r.code, kExitRuntime);
  EXPECT_EQ(r.err.rfind("error: BackendError: ", 0), 0u) << r.err;
  EXPECT_NE(r.err.find("rubio"), std::string::npos);
  EXPECT_FALSE(load_transcript(out / "transcript.jsonl").header.complete);
}

TEST(Cli, ReplayMissWithColdCache) {
  TempDir dir;
  auto r = cli(concat(concat({"replay"}, ukraine_args((dir / "out").string())), {"--cache", (dir / "cache").string()}));
  EXPECT_EQ(r.code, kExitRuntime);
  EXPECT_NE(r.err.find("cache_miss"), std::string::npos) << r.err;
}

TEST(Cli, RecordThenReplayOfflineIsByteIdentical) {
  TempDir dir;
  const auto cache = (dir / "cache").string();
  auto rec = cli(concat(concat({"run"}, ukraine_args((dir / "recorded").string())),
                        {"--backend", "scripted", "--script", f("ukraine_script.json"), "--cache", cache, "--record"}));
  ASSERT_EQ(rec.code, kExitOk) << rec.err;
  const auto recorded = slurp(dir / "recorded" / "transcript.jsonl");

  const auto offline = offline_prefix();
  if (!offline) std::fprintf(stderr, "note: no network namespace available; replaying with networking enabled\n");
  const std::string prefix = offline.value_or("");
  for (const std::string mode : {"batch", "stepped"}) {
    const auto out = dir / ("replay-" + mode);
    std::string command = prefix + CHAMBER_CLI_PATH + " replay";
    for (const auto& a : ukraine_args(out.string())) command += " '" + a + "'";
    command += " --cache '" + cache + "' --mode " + mode + " >/dev/null 2>&1";
    ASSERT_EQ(shell(command), 0) << command;
    EXPECT_EQ(slurp(out / "transcript.jsonl"), recorded) << mode;
    auto meta = read_json_file(out / "run.json");
    EXPECT_EQ(meta["backend_sources"]["cache"], 48);
    EXPECT_EQ(meta["backend_sources"]["live"], 0);
  }
}

TEST(Cli, CacheWithoutRecordReadsThrough) {
  TempDir dir;
  const auto cache = (dir / "cache").string();
  auto args = concat(ukraine_args((dir / "a").string()),
                     {"--backend", "scripted", "--script", f("ukraine_script.json"), "--cache", cache});
  ASSERT_EQ(cli(concat({"run"}, args)).code, kExitOk);
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(cache)) ++entries;
  EXPECT_EQ(entries, 48u);
  auto again = cli(concat({"run"}, concat(ukraine_args((dir / "b").string()),
                                          {"--backend", "scripted", "--script", f("ukraine_script.json"), "--cache",
                                           cache})));
  ASSERT_EQ(again.code, kExitOk) << again.err;
  EXPECT_EQ(again.err.find("warning"), std::string::npos) << again.err;
  EXPECT_EQ(read_json_file(dir / "b" / "run.json")["backend_sources"]["cache"], 48);
}

TEST(Cli, Eval) {
  auto r = cli({"eval", "--scores", f("scores.csv")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("Pearson's correlation, p-value  0.63, 0.05"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("Pearson's correlation, p-value  0.59, 0.07"), std::string::npos) << r.out;

  TempDir dir;
  auto j = cli({"eval", "--scores", f("scores.csv"), "--json", "--one-tailed", "--out", dir.path().string()});
  ASSERT_EQ(j.code, kExitOk);
  auto report = Json::parse(j.out);
  EXPECT_EQ(report["scenarios"][0]["correlation"]["tail"], "one");
  EXPECT_EQ(slurp(dir / "report.json"), j.out);
  EXPECT_NE(slurp(dir / "report.txt").find("one-tailed"), std::string::npos);

  auto bad = cli({"eval", "--scores", f("malformed/scores_unpaired.csv")});
  EXPECT_EQ(bad.code, kExitRuntime);
  EXPECT_EQ(bad.err.rfind("error: PairingError: ", 0), 0u) << bad.err;
}

TEST(Cli, GenProfiles) {
  TempDir dir;
  Script script;
  for (const auto& req : profile_requests_from_json(read_json_file(fixture("profile_seeds.json")))) {
    script.add(req.agent_id.value_or(slugify(req.name)), PromptPhase::profile_gen,
               "POLICIES: Keep the lights on.\nTRAITS: steady, careful");
  }
  write_text_file(dir / "script.json", script_to_json(script).dump());
  auto r = cli({"gen-profiles", "--seeds", f("profile_seeds.json"), "--out", dir.path().string(), "--backend",
                "scripted", "--script", (dir / "script.json").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  auto roster = load_roster(dir / "roster.json");
  EXPECT_EQ(roster.size(), 6u);
  EXPECT_EQ(roster.at("rubio").party, Party::R);
  EXPECT_EQ(roster.at("rubio").traits, (std::vector<std::string>{"steady", "careful"}));
}

TEST(Cli, ValidateGoodFiles) {
  auto r = cli({"validate", "--scenario", f("ukraine_funding.json"), "--scenario", f("needed_bills.json"), "--roster",
                f("roster_intel_committee.json"), "--scores", f("scores.csv"), "--script", f("ukraine_script.json"),
                "--seeds", f("profile_seeds.json")});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 6);
}

TEST(Cli, ValidateRejectsEveryMalformedFixture) {
  const std::vector<std::tuple<std::string, std::string, std::string>> cases{
      {"--roster", "malformed/roster_duplicate_agent_id.json", "ValidationError"},
      {"--roster", "malformed/roster_empty_members.json", "ValidationError"},
      {"--scores", "malformed/scores_unpaired.csv", "PairingError"},
      {"--scores", "malformed/scores_out_of_range.csv", "RangeError"},
      {"--memory", "malformed/memory_out_of_order.json", "TimestepOrderError"},
      {"--scenario", "malformed/scenario_bad_schedule.json", "ValidationError"},
      {"--scenario", "malformed/scenario_bad_json.json", "ParseError"},
  };
  for (const auto& [flag, file, type] : cases) {
    auto r = cli({"validate", flag, f(file)});
    EXPECT_EQ(r.code, kExitRuntime) << file;
    EXPECT_EQ(r.err.rfind("error: " + type + ": ", 0), 0u) << file << ": " << r.err;
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1) << r.err;
  }
}

TEST(Cli, ValidateTranscriptNeedsOneScenario) {
  EXPECT_EQ(cli({"validate", "--transcript", f("scores.csv")}).code, kExitUsage);
}

TEST(Cli, ValidateRejectsUngrammaticalTranscript) {
  TempDir dir;
  ASSERT_EQ(cli(concat(concat({"run"}, ukraine_args((dir / "out").string())),
                       {"--backend", "scripted", "--script", f("ukraine_script.json")}))
                .code,
            kExitOk);
  auto t = load_transcript(dir / "out" / "transcript.jsonl");
  t.events.pop_back();
  write_text_file(dir / "cut.jsonl", to_jsonl(t));
  auto r = cli({"validate", "--scenario", f("ukraine_funding.json"), "--transcript", (dir / "cut.jsonl").string()});
  EXPECT_EQ(r.code, kExitRuntime);
  EXPECT_EQ(r.err.rfind("error: ValidationError: ", 0), 0u) << r.err;
}

TEST(Cli, BinaryExitCodes) {
  EXPECT_EQ(shell(std::string(CHAMBER_CLI_PATH) + " --help >/dev/null"), 0);
  EXPECT_EQ(shell(std::string(CHAMBER_CLI_PATH) + " >/dev/null 2>&1"), 2);
  EXPECT_EQ(shell(std::string(CHAMBER_CLI_PATH) + " eval --scores '" + f("malformed/scores_out_of_range.csv") +
                  "' >/dev/null 2>&1"),
            1);
}
