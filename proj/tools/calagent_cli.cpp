// calagent: serve | eval | chat | parse-time
#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

#include "calagent/eval.hpp"
#include "calagent/service.hpp"
#include "calagent/temporal.hpp"

using namespace calagent;

namespace {

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  out << text;
}

std::shared_ptr<const ReferenceClock> cli_clock(const std::string& now, const std::string& tz) {
  TimeZone zone = TimeZone::load(tz);
  if (now.empty()) return std::make_shared<SystemClock>(zone);
  auto t = parse_rfc3339(now);
  if (!t) throw Error(ErrorCode::InvalidArgument, "--now must be RFC 3339");
  return std::make_shared<FixedClock>(*t, zone);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent calendar assistant"};
  app.require_subcommand(1);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the REST service");
  std::string config_path;
  std::string host;
  int port = -1;
  serve->add_option("-c,--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  serve->add_option("--host", host, "Listen address (overrides config)");
  serve->add_option("-p,--port", port, "Listen port (overrides config)");

  // eval
  auto* eval = app.add_subcommand("eval", "Replay a corpus and score calendar effects");
  std::string corpus;
  std::string out_json, out_md, out_csv;
  std::string backend = "deterministic";
  EvalOptions eopts;
  eval->add_option("corpus", corpus, "JSONL corpus")->required()->check(CLI::ExistingFile);
  eval->add_option("--backend", backend, "deterministic | remote")
      ->check(CLI::IsMember({"deterministic", "remote"}));
  eval->add_option("--json", out_json, "Write the JSON report here");
  eval->add_option("--markdown", out_md, "Write the Markdown table here");
  eval->add_option("--csv", out_csv, "Write the CSV table here");
  eval->add_option("--now", eopts.fixed_now, "Fixed clock instant (RFC 3339)");
  eval->add_option("--tz", eopts.time_zone, "Time zone");
  eval->add_option("--seed", eopts.seed, "Id seed");

  // chat
  auto* chat = app.add_subcommand("chat", "Talk to an in-process assistant on stdin");
  std::string chat_now, chat_tz = "UTC", chat_backend = "deterministic";
  chat->add_option("--now", chat_now, "Fixed clock instant (RFC 3339)");
  chat->add_option("--tz", chat_tz, "Time zone");
  chat->add_option("--backend", chat_backend, "deterministic | remote")
      ->check(CLI::IsMember({"deterministic", "remote"}));

  // parse-time
  auto* pt = app.add_subcommand("parse-time", "Resolve a temporal phrase");
  std::string phrase, pt_now, pt_tz = "UTC";
  pt->add_option("phrase", phrase, "e.g. \"next Monday 2 PM\"")->required();
  pt->add_option("--now", pt_now, "Reference instant (RFC 3339)");
  pt->add_option("--tz", pt_tz, "Time zone");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) {
      ServiceConfig cfg = load_config(config_path.empty()
                                          ? std::nullopt
                                          : std::optional<std::filesystem::path>(config_path));
      if (!host.empty()) cfg.host = host;
      if (port >= 0) cfg.port = port;
      cfg.validate();
      auto svc = std::make_shared<AssistantService>(cfg);
      HttpServer server(svc);
      const int bound = server.bind(cfg.host, cfg.port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << cfg.host << ":" << bound << " with " << cfg.supervisor_count
                << " supervisor instance(s)\n";
      server.listen();
      g_server = nullptr;
      return 0;
    }

    if (*eval) {
      eopts.service = apply_env_overrides(ServiceConfig{}, process_env());
      eopts.service.nlu_backend = backend;
      const auto cases = load_corpus(corpus);
      const EvalReport report = run_corpus(cases, eopts);
      const std::string md = render_markdown(report);
      std::cout << md;
      if (!out_json.empty()) write_file(out_json, to_json(report).dump(2) + "\n");
      if (!out_md.empty()) write_file(out_md, md);
      if (!out_csv.empty()) write_file(out_csv, render_csv(report));
      for (const auto& c : report.cases) {
        if (!c.passed) std::cerr << "FAILED " << c.case_id << ": " << c.failure << "\n";
      }
      const Tally all = report.overall();
      return all.correct == all.total ? 0 : 1;
    }

    if (*chat) {
      ServiceConfig cfg = apply_env_overrides(ServiceConfig{}, process_env());
      cfg.supervisor_count = 1;
      cfg.background_tasks = false;
      cfg.time_zone = chat_tz;
      cfg.nlu_backend = chat_backend;
      ServiceDeps deps;
      deps.clock = cli_clock(chat_now, chat_tz);
      AssistantService svc(cfg, deps);
      const auto s = svc.create_session();
      std::cout << "assistant> " << s.greeting << "\n";
      std::string line;
      while (std::cout << "you> " << std::flush, std::getline(std::cin, line)) {
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        try {
          const TurnResult t = svc.post_message(s.session_id, line);
          std::cout << "assistant> " << t.reply << "\n";
          for (const auto& a : t.actions) std::cout << "  [" << a.value("kind", "") << " " << a.value("event_id", "") << "]\n";
        } catch (const Error& e) {
          std::cout << "error> " << to_string(e.code()) << ": " << e.what() << "\n";
        }
      }
      return 0;
    }

    if (*pt) {
      auto clock = cli_clock(pt_now, pt_tz);
      const TemporalResolution r = parse_temporal(phrase, *clock);
      nlohmann::json j{{"start", format_in_zone(r.start, clock->zone())},
                       {"grain", to_string(r.grain)},
                       {"zone", r.zone}};
      if (r.end) j["end"] = format_in_zone(*r.end, clock->zone());
      std::cout << j.dump(2) << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << to_string(e.code()) << ": " << e.what() << "\n";
    return 2;
  }
  return 0;
}
