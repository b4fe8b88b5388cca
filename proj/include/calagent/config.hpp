#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

namespace calagent {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t supervisor_count = 3;
  std::size_t worker_capacity = 8;
  std::size_t queue_high_water = 64;
  std::int64_t session_ttl_seconds = 1800;
  std::int64_t sweep_interval_seconds = 60;
  std::int64_t probe_interval_ms = 5000;
  int probe_failure_threshold = 2;
  std::size_t step_budget = 16;
  std::int64_t default_duration_minutes = 60;
  std::string time_zone = "UTC";
  std::string nlu_backend = "deterministic";  // deterministic | remote
  std::string nlu_base_url;
  std::string nlu_model;
  std::string nlu_api_key;
  std::int64_t nlu_timeout_seconds = 30;
  std::string calendar_snapshot_path;  // empty: memory only
  std::uint64_t seed = 0;
  std::string fixed_now;  // RFC 3339; empty: wall clock
  bool background_tasks = true;  // sweeper and gateway probes

  /// Throws Error(InvalidArgument) naming the offending key.
  void validate() const;
};

nlohmann::json to_json(const ServiceConfig& c);
/// Unknown keys are rejected. Missing keys keep their defaults.
ServiceConfig config_from_json(const nlohmann::json& j, ServiceConfig base = {});

using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;
EnvLookup process_env();

/// Each key K is overridable by CALAGENT_<K upper-cased>.
ServiceConfig apply_env_overrides(ServiceConfig c, const EnvLookup& env);

/// Defaults, then the file (if given), then the environment; validated.
ServiceConfig load_config(const std::optional<std::filesystem::path>& path,
                          const EnvLookup& env = process_env());

}  // namespace calagent
