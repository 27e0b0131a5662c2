#include "chamber/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <memory>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "chamber/control_server.hpp"
#include "chamber/engine.hpp"
#include "chamber/eval.hpp"
#include "chamber/memory.hpp"
#include "chamber/openai_backend.hpp"
#include "chamber/profile_generation.hpp"
#include "chamber/replay_cache.hpp"
#include "chamber/scripted_backend.hpp"

namespace chamber {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) {
  g_interrupted = true;
}

struct BackendFlags {
  std::string backend = "openai";
  std::string script;
  std::string base_url;
  std::string cache;
  bool record = false;

  CLI::Option* script_opt = nullptr;
  CLI::Option* base_url_opt = nullptr;
  CLI::Option* cache_opt = nullptr;
};

void add_backend_flags(CLI::App& cmd, BackendFlags& flags, bool with_backend_choice) {
  if (with_backend_choice) {
    cmd.add_option("--backend", flags.backend, "Model backend")
        ->check(CLI::IsMember({"openai", "scripted", "replay"}))
        ->capture_default_str();
    flags.script_opt = cmd.add_option("--script", flags.script, "Scripted completions (scripted backend)");
    flags.base_url_opt = cmd.add_option("--base-url", flags.base_url, "Chat-completions endpoint (openai backend)");
    cmd.add_flag("--record", flags.record, "Record every live completion into --cache");
  }
  flags.cache_opt = cmd.add_option("--cache", flags.cache, "Replay cache directory");
}

void check_backend_flags(const BackendFlags& f) {
  if (f.backend == "scripted" && f.script.empty()) throw UsageError("--backend scripted requires --script");
  if (f.backend != "scripted" && !f.script.empty()) throw UsageError("--script is only valid with --backend scripted");
  if (f.backend != "openai" && !f.base_url.empty()) throw UsageError("--base-url is only valid with --backend openai");
  if (f.backend == "replay" && f.cache.empty()) throw UsageError("--backend replay requires --cache");
  if (f.backend == "replay" && f.record) throw UsageError("--record cannot be combined with --backend replay");
  if (f.record && f.cache.empty()) throw UsageError("--record requires --cache");
}

// One fresh backend per call; scripted queues restart for every run.
BackendFactory backend_factory(const BackendFlags& f) {
  std::shared_ptr<ReplayCache> cache;
  if (!f.cache.empty()) cache = std::make_shared<ReplayCache>(f.cache);
  if (f.backend == "replay") {
    return [cache] { return std::make_unique<ReplayBackend>(cache); };
  }
  std::function<std::shared_ptr<ModelBackend>()> upstream;
  if (f.backend == "scripted") {
    auto script = load_script(f.script);
    upstream = [script] { return std::make_shared<ScriptedBackend>(script); };
  } else {
    OpenAIConfig config;
    if (!f.base_url.empty()) config.base_url = f.base_url;
    config.api_key = api_key_from_env();
    OpenAIBackend probe(config);  // validates the URL up front
    upstream = [config] { return std::make_shared<OpenAIBackend>(config); };
  }
  if (!cache) {
    return [upstream]() -> std::unique_ptr<ModelBackend> {
      struct Owning final : ModelBackend {
        std::shared_ptr<ModelBackend> inner;
        CompletionResult complete(const CompletionRequest& r) override { return inner->complete(r); }
      };
      auto b = std::make_unique<Owning>();
      b->inner = upstream();
      return b;
    };
  }
  if (f.record) {
    return [upstream, cache] { return std::make_unique<RecordingBackend>(upstream(), cache); };
  }
  // Cache first; misses go upstream and are recorded.
  return [upstream, cache] {
    return std::make_unique<ReplayBackend>(cache, upstream());
  };
}

struct RunFlags {
  std::string scenario;
  std::string roster;
  std::string model = kDefaultModel;
  std::int64_t seed = 0;
  std::string out = "out";
  std::string templates;
  std::string mode = "batch";
  std::string run_id;
};

void add_run_flags(CLI::App& cmd, RunFlags& f, bool scenario_required) {
  auto* scenario = cmd.add_option("--scenario", f.scenario, "Scenario file")->check(CLI::ExistingFile);
  auto* roster = cmd.add_option("--roster", f.roster, "Roster file")->check(CLI::ExistingFile);
  if (scenario_required) {
    scenario->required();
    roster->required();
  }
  cmd.add_option("--model", f.model, "Model name")->capture_default_str();
  cmd.add_option("--seed", f.seed, "Seed for every request")->capture_default_str();
  cmd.add_option("--out", f.out, "Output directory")->capture_default_str();
  cmd.add_option("--templates", f.templates, "Prompt template override directory")->check(CLI::ExistingDirectory);
  cmd.add_option("--run-id", f.run_id, "Run identifier (default <scenario_id>-seed<seed>)");
}

RunConfig run_config(const RunFlags& f) {
  RunConfig config;
  config.mode = f.mode == "stepped" ? RunMode::stepped : RunMode::batch;
  config.seed = f.seed;
  config.model = f.model;
  config.run_id = f.run_id;
  config.output_dir = f.out;
  if (!f.templates.empty()) config.templates = PromptTemplates::from_directory(f.templates);
  return config;
}

int execute_run(const RunFlags& f, const BackendFactory& factory, std::ostream& out) {
  auto scenario = load_scenario(f.scenario);
  auto roster = load_roster(f.roster);
  auto backend = factory();
  Session session(std::move(scenario), std::move(roster), *backend, run_config(f));
  if (session.config().mode == RunMode::stepped) {
    while (!session.finished()) session.step();
  } else {
    session.run_to_completion();
  }
  const auto& t = session.transcript();
  out << "run " << t.header.run_id << ": " << t.events.size() << " events, complete, written to " << f.out << "\n";
  return kExitOk;
}

void print_ok(std::ostream& out, std::string_view kind, const std::string& path) {
  out << "ok " << kind << " " << path << "\n";
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Committee deliberation simulator", "chamber"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all");

  BackendFlags backend_flags;
  RunFlags run_flags;

  auto* run = app.add_subcommand("run", "Run a scenario to completion");
  add_run_flags(*run, run_flags, true);
  add_backend_flags(*run, backend_flags, true);
  run->add_option("--mode", run_flags.mode, "Execution mode")
      ->check(CLI::IsMember({"batch", "stepped"}))
      ->capture_default_str();

  auto* replay = app.add_subcommand("replay", "Re-run a scenario from a warm replay cache, offline");
  RunFlags replay_flags;
  BackendFlags replay_backend;
  replay_backend.backend = "replay";
  add_run_flags(*replay, replay_flags, true);
  add_backend_flags(*replay, replay_backend, false);
  replay_backend.cache_opt->required();
  replay->add_option("--mode", replay_flags.mode, "Execution mode")
      ->check(CLI::IsMember({"batch", "stepped"}))
      ->capture_default_str();

  auto* serve = app.add_subcommand("serve", "Serve the control API for stepped runs");
  RunFlags serve_flags;
  BackendFlags serve_backend;
  add_run_flags(*serve, serve_flags, false);
  add_backend_flags(*serve, serve_backend, true);
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string serve_scores = "scores.csv";
  serve->add_option("--port", port, "Listen port")->check(CLI::Range(0, 65535))->capture_default_str();
  serve->add_option("--host", host, "Listen address")->capture_default_str();
  serve->add_option("--scores", serve_scores, "Scores CSV the score endpoint appends to")->capture_default_str();

  auto* gen = app.add_subcommand("gen-profiles", "Generate a roster from name/party seeds");
  std::string seeds;
  std::string gen_out = "out";
  std::string gen_model = kDefaultModel;
  std::string gen_templates;
  BackendFlags gen_backend;
  gen->add_option("--seeds", seeds, "Seed document {\"members\": [...]}")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", gen_out, "Output directory (writes roster.json)")->capture_default_str();
  gen->add_option("--model", gen_model, "Model name")->capture_default_str();
  gen->add_option("--templates", gen_templates, "Prompt template override directory")
      ->check(CLI::ExistingDirectory);
  add_backend_flags(*gen, gen_backend, true);

  auto* eval = app.add_subcommand("eval", "Report rater means and inter-rater correlation");
  std::string scores;
  bool one_tailed = false;
  bool as_json = false;
  std::string eval_out;
  eval->add_option("--scores", scores, "Scores CSV")->required()->check(CLI::ExistingFile);
  eval->add_flag("--one-tailed", one_tailed, "One-tailed p-values (positive association)");
  eval->add_flag("--json", as_json, "Print the JSON report instead of text");
  eval->add_option("--out", eval_out, "Also write report.txt and report.json here");

  auto* validate = app.add_subcommand("validate", "Check input files without running anything");
  std::vector<std::string> v_scenarios, v_rosters, v_scores, v_scripts, v_memory, v_transcripts, v_seeds;
  validate->add_option("--scenario", v_scenarios, "Scenario file(s)");
  validate->add_option("--roster", v_rosters, "Roster file(s)");
  validate->add_option("--scores", v_scores, "Scores CSV file(s)");
  validate->add_option("--script", v_scripts, "Script file(s)");
  validate->add_option("--memory", v_memory, "Memory stream file(s)");
  validate->add_option("--transcript", v_transcripts, "Transcript file(s); grammar-checked against --scenario");
  validate->add_option("--seeds", v_seeds, "Profile seed document(s)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (run->parsed()) {
    check_backend_flags(backend_flags);
    return execute_run(run_flags, backend_factory(backend_flags), out);
  }
  if (replay->parsed()) {
    return execute_run(replay_flags, backend_factory(replay_backend), out);
  }
  if (serve->parsed()) {
    check_backend_flags(serve_backend);
    ServerOptions options;
    options.host = host;
    options.port = port;
    options.scores_path = serve_scores;
    options.backend_factory = backend_factory(serve_backend);
    if (!serve_flags.scenario.empty()) options.scenario = load_scenario(serve_flags.scenario);
    if (!serve_flags.roster.empty()) options.roster = load_roster(serve_flags.roster);
    options.base_config = run_config(serve_flags);
    options.base_config.run_id.clear();
    ControlServer server(std::move(options));
    const int bound = server.bind();
    out << "serving control API on http://" << host << ":" << bound << "/api\n" << std::flush;
    g_interrupted = false;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::thread listener([&] { server.serve(); });
    while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    listener.join();
    return kExitOk;
  }
  if (gen->parsed()) {
    check_backend_flags(gen_backend);
    auto requests = profile_requests_from_json(read_json_file(seeds));
    auto backend = backend_factory(gen_backend)();
    PromptBuilder prompts(gen_templates.empty() ? PromptTemplates::defaults()
                                                : PromptTemplates::from_directory(gen_templates));
    std::vector<AgentProfile> members;
    for (const auto& req : requests) {
      members.push_back(generate_profile(req, *backend, prompts, gen_model));
      err << "generated " << members.back().agent_id << "\n";
    }
    const auto path = std::filesystem::path(gen_out) / "roster.json";
    save_roster(Roster(std::move(members)), path);
    out << "wrote " << path.string() << "\n";
    return kExitOk;
  }
  if (eval->parsed()) {
    auto report = table_report(ingest_scores(scores), one_tailed ? Tail::one : Tail::two);
    const auto text = render_report_text(report);
    const auto json = report_to_json(report).dump(2) + "\n";
    out << (as_json ? json : text);
    if (!eval_out.empty()) {
      write_text_file(std::filesystem::path(eval_out) / "report.txt", text);
      write_text_file(std::filesystem::path(eval_out) / "report.json", json);
    }
    return kExitOk;
  }
  if (validate->parsed()) {
    if (v_scenarios.empty() && v_rosters.empty() && v_scores.empty() && v_scripts.empty() && v_memory.empty() &&
        v_transcripts.empty() && v_seeds.empty()) {
      throw UsageError("validate needs at least one file option");
    }
    if (!v_transcripts.empty() && v_scenarios.size() != 1) {
      throw UsageError("--transcript needs exactly one --scenario to check against");
    }
    std::vector<Scenario> scenarios;
    for (const auto& p : v_scenarios) {
      scenarios.push_back(load_scenario(p));
      print_ok(out, "scenario", p);
    }
    for (const auto& p : v_rosters) {
      auto roster = load_roster(p);
      for (const auto& sc : scenarios) validate_scenario(sc, roster);
      print_ok(out, "roster", p);
    }
    for (const auto& p : v_scores) {
      ingest_scores(p);
      print_ok(out, "scores", p);
    }
    for (const auto& p : v_scripts) {
      load_script(p);
      print_ok(out, "script", p);
    }
    for (const auto& p : v_memory) {
      load_stream(p);
      print_ok(out, "memory", p);
    }
    for (const auto& p : v_seeds) {
      profile_requests_from_json(read_json_file(p));
      print_ok(out, "seeds", p);
    }
    for (const auto& p : v_transcripts) {
      auto problems = check_grammar(load_transcript(p), scenarios.front());
      if (!problems.empty()) {
        throw ValidationError("events", p + ": " + problems.front() +
                                            (problems.size() > 1 ? " (+" + std::to_string(problems.size() - 1) +
                                                                       " more)"
                                                                 : std::string()));
      }
      print_ok(out, "transcript", p);
    }
    return kExitOk;
  }
  return kExitUsage;
}

std::string single_line(std::string text) {
  for (auto& c : text) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return text;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(argc, argv, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << single_line(e.what()) << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.type_name() << ": " << single_line(e.what()) << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: InternalError: " << single_line(e.what()) << "\n";
    return kExitRuntime;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"chamber"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace chamber
