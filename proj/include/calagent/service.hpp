#pragma once

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "calagent/calendar.hpp"
#include "calagent/config.hpp"
#include "calagent/distributed.hpp"
#include "calagent/graph.hpp"
#include "calagent/nlu.hpp"
#include "calagent/sessions.hpp"
#include "calagent/supervisor.hpp"

namespace calagent {

/// Optional replacements for the pieces the service would build itself.
struct ServiceDeps {
  std::shared_ptr<const ReferenceClock> clock;
  std::shared_ptr<CalendarStore> calendar;
  std::shared_ptr<SessionStore> sessions;
  std::shared_ptr<const NluBackend> nlu;
  /// Runs after the default agents are registered.
  std::function<void(AgentRegistry&, std::shared_ptr<CalendarStore>,
                     std::shared_ptr<const ReferenceClock>)>
      configure_registry;
};

struct CreatedSession {
  std::string session_id;
  std::string supervisor_id;
  std::string greeting;
};

struct TurnResult {
  std::string reply;
  std::vector<nlohmann::json> actions;  // {kind, event_id, event}
  std::string next_route;               // user | FINISH
  std::string supervisor_id;
  std::size_t transcript_length = 0;
};

nlohmann::json to_json(const CreatedSession& s);
nlohmann::json to_json(const TurnResult& t);

/// Every primary module wired together: N supervisor instances over one
/// shared session store, the agent registry and worker pool, the gateway.
class AssistantService {
 public:
  explicit AssistantService(ServiceConfig config, ServiceDeps deps = {});
  ~AssistantService();
  AssistantService(const AssistantService&) = delete;
  AssistantService& operator=(const AssistantService&) = delete;

  /// Throws NoHealthySupervisor.
  CreatedSession create_session();
  /// Throws InvalidArgument (empty text), UnknownSession, TurnInProgress,
  /// NoHealthySupervisor, HandlerFailure, StepBudgetExceeded.
  TurnResult post_message(const std::string& session_id, const std::string& text);
  std::optional<SessionRecord> get_session(const std::string& session_id);
  bool delete_session(const std::string& session_id);

  /// Throws RangeInverted.
  std::vector<CalendarEvent> list_events(Instant start, Instant end) const;

  MetricsSnapshot metrics() const;
  /// True while some supervisor instance can take work.
  bool healthy() const;

  /// Process-level failure injection. A killed instance fails its requests
  /// and health probes until revived.
  void kill_instance(const std::string& instance_id);
  void revive_instance(const std::string& instance_id);
  bool instance_alive(const std::string& instance_id) const;

  /// Instance that should serve a request (session-affine when given one).
  std::string route_request(const std::optional<std::string>& session_id);

  const ServiceConfig& config() const noexcept { return config_; }
  std::shared_ptr<const ReferenceClock> clock() const { return clock_; }
  CalendarStore& calendar() { return *calendar_; }
  SessionStore& sessions() { return *sessions_; }
  SupervisorPool& pool() { return *pool_; }
  AgentRegistry& registry() { return *registry_; }
  WorkerPool& workers() { return *workers_; }
  Gateway& gateway() { return *gateway_; }

 private:
  struct Instance {
    std::string id;
    std::atomic<bool> alive{true};
    std::shared_ptr<const Supervisor> supervisor;
    std::shared_ptr<const CompiledGraph> graph;
  };

  Instance& instance(const std::string& id) const;
  void finish_turn(const std::string& session_id);

  ServiceConfig config_;
  std::shared_ptr<const ReferenceClock> clock_;
  std::shared_ptr<CalendarStore> calendar_;
  std::shared_ptr<SessionStore> sessions_;
  std::shared_ptr<const NluBackend> nlu_;
  std::shared_ptr<AgentRegistry> registry_;
  std::shared_ptr<WorkerPool> workers_;
  std::unique_ptr<SupervisorPool> pool_;
  std::map<std::string, std::unique_ptr<Instance>> instances_;
  std::unique_ptr<Gateway> gateway_;
  std::unique_ptr<SessionSweeper> sweeper_;
  std::unique_ptr<IdGenerator> session_ids_;
  std::chrono::steady_clock::time_point started_;

  std::mutex turns_mu_;
  std::set<std::string> turns_in_flight_;
};

/// HTTP status for a library error.
int http_status(ErrorCode code);

/// REST surface over an AssistantService.
class HttpServer {
 public:
  explicit HttpServer(std::shared_ptr<AssistantService> service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves on a background thread after bind().
  void start();
  /// Serves on the calling thread until stop().
  void listen();
  void stop();
  int port() const noexcept { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = -1;
};

}  // namespace calagent
