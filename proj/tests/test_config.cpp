#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "calagent/config.hpp"
#include "calagent/errors.hpp"

using namespace calagent;

namespace {

EnvLookup env_of(std::map<std::string, std::string> vars) {
  return [vars](const std::string& name) -> std::optional<std::string> {
    auto it = vars.find(name);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::HandlerFailure;
}

}  // namespace

TEST_CASE("defaults") {
  const ServiceConfig c;
  CHECK(c.supervisor_count == 3);
  CHECK(c.worker_capacity == 8);
  CHECK(c.queue_high_water == 64);
  CHECK(c.session_ttl_seconds == 1800);
  CHECK(c.probe_interval_ms == 5000);
  CHECK(c.probe_failure_threshold == 2);
  CHECK(c.step_budget == 16);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("JSON round trip and unknown keys") {
  ServiceConfig c;
  c.port = 9000;
  c.nlu_backend = "remote";
  c.nlu_base_url = "http://localhost:1/v1";
  c.fixed_now = "2025-04-28T13:00:00Z";
  const auto back = config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(code_of([] { config_from_json({{"prot", 1}}); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { config_from_json({{"port", "eighty"}}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("validation names the bad key") {
  auto bad = [](auto mutate) {
    ServiceConfig c;
    mutate(c);
    try {
      c.validate();
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(bad([](ServiceConfig& c) { c.supervisor_count = 0; }).find("supervisor_count") != std::string::npos);
  CHECK(bad([](ServiceConfig& c) { c.port = 70000; }).find("port") != std::string::npos);
  CHECK(bad([](ServiceConfig& c) { c.time_zone = "Mars/Olympus"; }).find("time_zone") != std::string::npos);
  CHECK(bad([](ServiceConfig& c) { c.nlu_backend = "magic"; }).find("nlu_backend") != std::string::npos);
  CHECK(bad([](ServiceConfig& c) { c.nlu_backend = "remote"; }).find("nlu_base_url") != std::string::npos);
  CHECK(bad([](ServiceConfig& c) { c.fixed_now = "yesterday"; }).find("fixed_now") != std::string::npos);
}

TEST_CASE("environment overrides the file, the file overrides defaults") {
  const auto path = std::filesystem::temp_directory_path() / "calagent_config_test.json";
  {
    std::ofstream out(path);
    out << R"({"port": 9100, "supervisor_count": 5, "time_zone": "Europe/Berlin"})";
  }
  const auto c = load_config(path, env_of({{"CALAGENT_PORT", "9200"}, {"CALAGENT_BACKGROUND_TASKS", "false"}}));
  std::filesystem::remove(path);
  CHECK(c.port == 9200);
  CHECK(c.supervisor_count == 5);
  CHECK(c.time_zone == "Europe/Berlin");
  CHECK_FALSE(c.background_tasks);

  CHECK(code_of([] { load_config(std::nullopt, env_of({{"CALAGENT_PORT", "x"}})); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { load_config(std::filesystem::path("/nonexistent/calagent.json"), env_of({})); }) ==
        ErrorCode::InvalidArgument);
}
