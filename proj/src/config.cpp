#include "calagent/config.hpp"

#include <cstdlib>
#include <fstream>

#include "calagent/errors.hpp"
#include "calagent/time.hpp"

namespace calagent {

void ServiceConfig::validate() const {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); };
  if (supervisor_count < 1) bad("supervisor_count must be >= 1");
  if (worker_capacity < 1) bad("worker_capacity must be >= 1");
  if (session_ttl_seconds <= 0) bad("session_ttl_seconds must be > 0");
  if (port < 0 || port > 65535) bad("port must be in [0, 65535]");
  if (sweep_interval_seconds <= 0) bad("sweep_interval_seconds must be > 0");
  if (probe_interval_ms <= 0) bad("probe_interval_ms must be > 0");
  if (probe_failure_threshold < 1) bad("probe_failure_threshold must be >= 1");
  if (step_budget < 1) bad("step_budget must be >= 1");
  if (default_duration_minutes <= 0) bad("default_duration_minutes must be > 0");
  if (nlu_backend != "deterministic" && nlu_backend != "remote") {
    bad("nlu_backend must be 'deterministic' or 'remote'");
  }
  if (nlu_backend == "remote" && (nlu_base_url.empty() || nlu_model.empty())) {
    bad("remote nlu_backend needs nlu_base_url and nlu_model");
  }
  if (!fixed_now.empty() && !parse_rfc3339(fixed_now)) bad("fixed_now is not RFC 3339");
  try {
    TimeZone::load(time_zone);
  } catch (const Error&) {
    bad("time_zone '" + time_zone + "' is not a known zone");
  }
}

#define CALAGENT_CONFIG_FIELDS(X)                                                            \
  X(host) X(port) X(supervisor_count) X(worker_capacity) X(queue_high_water)                 \
  X(session_ttl_seconds) X(sweep_interval_seconds) X(probe_interval_ms)                      \
  X(probe_failure_threshold) X(step_budget) X(default_duration_minutes) X(time_zone)         \
  X(nlu_backend) X(nlu_base_url) X(nlu_model) X(nlu_api_key) X(nlu_timeout_seconds)          \
  X(calendar_snapshot_path) X(seed) X(fixed_now) X(background_tasks)

nlohmann::json to_json(const ServiceConfig& c) {
  nlohmann::json j;
#define X(k) j[#k] = c.k;
  CALAGENT_CONFIG_FIELDS(X)
#undef X
  return j;
}

ServiceConfig config_from_json(const nlohmann::json& j, ServiceConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
#define X(k)                         \
  if (key == #k) {                   \
    value.get_to(c.k);               \
    continue;                        \
  }
      CALAGENT_CONFIG_FIELDS(X)
#undef X
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, "config key '" + key + "': " + e.what());
    }
    throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
  }
  return c;
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

namespace {

template <class T>
void from_env_text(const std::string& name, const std::string& text, T& out) {
  if constexpr (std::is_same_v<T, std::string>) {
    out = text;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (text == "1" || text == "true") out = true;
    else if (text == "0" || text == "false") out = false;
    else throw Error(ErrorCode::InvalidArgument, name + " must be true/false");
  } else {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size()) {
      throw Error(ErrorCode::InvalidArgument, name + " must be an integer");
    }
    if constexpr (std::is_unsigned_v<T>) {
      if (v < 0) throw Error(ErrorCode::InvalidArgument, name + " must be non-negative");
    }
    out = static_cast<T>(v);
  }
}

std::string env_name(std::string key) {
  for (auto& ch : key) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return "CALAGENT_" + key;
}

}  // namespace

ServiceConfig apply_env_overrides(ServiceConfig c, const EnvLookup& env) {
#define X(k)                                               \
  if (auto v = env(env_name(#k))) from_env_text(env_name(#k), *v, c.k);
  CALAGENT_CONFIG_FIELDS(X)
#undef X
  return c;
}

ServiceConfig load_config(const std::optional<std::filesystem::path>& path, const EnvLookup& env) {
  ServiceConfig c;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read config " + path->string());
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::InvalidArgument, path->string() + " is not valid JSON");
    c = config_from_json(j, c);
  }
  c = apply_env_overrides(std::move(c), env);
  c.validate();
  return c;
}

}  // namespace calagent
