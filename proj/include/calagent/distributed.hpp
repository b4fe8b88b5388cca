#pragma once

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "calagent/agents.hpp"
#include "calagent/directive.hpp"
#include "calagent/errors.hpp"
#include "calagent/sessions.hpp"
#include "calagent/supervisor.hpp"

namespace calagent {

struct SupervisorInstance {
  std::string instance_id;
  std::size_t active_sessions = 0;
  bool healthy = true;
  Instant started_at{};
};

nlohmann::json to_json(const SupervisorInstance& s);

/// Supervisor instances plus the session-affine least-loaded balancer.
/// Load is the number of live sessions owned, read from the store.
class SupervisorPool {
 public:
  SupervisorPool(std::shared_ptr<SessionStore> store, std::shared_ptr<const ReferenceClock> clock);

  void add_instance(const std::string& instance_id);
  /// Throws UnknownInstance.
  void mark_health(const std::string& instance_id, bool healthy);
  bool is_healthy(const std::string& instance_id) const;

  std::vector<std::string> instance_ids() const;
  std::vector<SupervisorInstance> instances() const;
  /// Every instance, including ones with no sessions.
  std::map<std::string, std::size_t> loads() const;

  /// Owner if healthy, else least-loaded healthy instance (ties: smallest
  /// id). A stored session gets its owner rewritten. Throws
  /// NoHealthySupervisor.
  std::string route_session(const std::string& session_id);

  /// Placement for a session that is not stored yet.
  std::string pick_least_loaded() const;

 private:
  std::string pick_locked(const std::map<std::string, std::size_t>& loads) const;
  std::map<std::string, std::size_t> loads_locked() const;

  std::shared_ptr<SessionStore> store_;
  std::shared_ptr<const ReferenceClock> clock_;
  mutable std::mutex mu_;
  struct Entry {
    bool healthy = true;
    Instant started_at{};
  };
  std::map<std::string, Entry> instances_;
};

struct AgentCapability {
  std::string agent_name;
  std::set<TaskType> capabilities;
  bool active = true;
};

nlohmann::json to_json(const AgentCapability& c);

using AgentFn = std::function<AgentResult(const TaskDirective&)>;

/// Runtime registry. At most one active agent per task type.
class AgentRegistry {
 public:
  /// Throws DuplicateAgent, DuplicateCapability.
  void register_agent(AgentCapability capability, AgentFn fn);
  /// Throws UnknownAgent.
  void deregister_agent(const std::string& agent_name);
  /// Throws UnknownAgent; DuplicateCapability when activation would clash.
  void set_active(const std::string& agent_name, bool active);

  /// Throws NoCapableAgent.
  std::pair<std::string, AgentFn> resolve(TaskType task) const;
  std::vector<AgentCapability> list() const;

  void record_completion(const std::string& agent_name);
  /// Completed runs per agent; registered agents appear with 0.
  std::map<std::string, std::uint64_t> utilization() const;

 private:
  void check_clash_locked(const AgentCapability& cap, const std::string& ignore) const;

  mutable std::mutex mu_;
  struct Entry {
    AgentCapability capability;
    AgentFn fn;
  };
  std::map<std::string, Entry> agents_;
  std::map<std::string, std::uint64_t> completed_;
};

/// The four built-in agents bound to a calendar.
void register_default_agents(AgentRegistry& registry, std::shared_ptr<CalendarStore> calendar,
                             std::shared_ptr<const ReferenceClock> clock,
                             SchedulerOptions scheduler_options = {});

/// Bounded worker pool. Tasks beyond `high_water` queued ones are shed.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t capacity = 8, std::size_t high_water = 64);
  /// Finishes queued work before returning.
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  /// Throws CapacitySaturated.
  template <class F>
  auto submit(F&& f) -> std::future<std::invoke_result_t<std::decay_t<F>>> {
    using R = std::invoke_result_t<std::decay_t<F>>;
    auto task = std::make_shared<std::packaged_task<R()>>(std::forward<F>(f));
    auto fut = task->get_future();
    enqueue([task] { (*task)(); });
    return fut;
  }

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t high_water() const noexcept { return high_water_; }
  std::size_t pending() const;
  std::size_t running() const;

 private:
  void enqueue(std::function<void()> job);
  void work(std::stop_token stop);

  std::size_t capacity_;
  std::size_t high_water_;
  mutable std::mutex mu_;
  std::condition_variable_any cv_;
  std::deque<std::function<void()>> queue_;
  std::size_t running_ = 0;
  bool closing_ = false;
  std::vector<std::jthread> threads_;
};

/// Runs the agent for `task` on the pool and waits for it.
/// Throws NoCapableAgent, CapacitySaturated.
AgentResult delegate(const TaskDirective& task, AgentRegistry& registry, WorkerPool& pool);

/// Invoker for the calendar graph. A missing agent becomes a failed report
/// for the supervisor to relay; saturation propagates.
AgentInvoker registry_invoker(std::shared_ptr<AgentRegistry> registry,
                              std::shared_ptr<WorkerPool> pool);

struct GatewayOptions {
  std::chrono::milliseconds probe_interval{5000};
  int failure_threshold = 2;
};

/// Round-robin front door with active health probing.
class Gateway {
 public:
  using Probe = std::function<bool(const std::string& instance_id)>;
  using SessionRouter = std::function<std::string(const std::string& session_id)>;
  using HealthListener = std::function<void(const std::string& instance_id, bool healthy)>;

  Gateway(std::vector<std::string> instances, Probe probe, SessionRouter session_router,
          GatewayOptions options = {});
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Session requests go to the session router; others rotate over healthy
  /// instances in fixed order. Throws NoHealthyInstance.
  std::string route(const std::optional<std::string>& session_id = std::nullopt);

  /// One probe round over every instance.
  void probe_once();
  void start();
  void stop();

  void set_health_listener(HealthListener listener);
  bool healthy(const std::string& instance_id) const;
  std::vector<std::string> healthy_instances() const;

 private:
  std::vector<std::string> order_;
  Probe probe_;
  SessionRouter session_router_;
  GatewayOptions options_;
  HealthListener listener_;
  mutable std::mutex mu_;
  std::vector<bool> healthy_;
  std::vector<int> failures_;
  std::size_t cursor_ = 0;
  std::mutex probe_mu_;
  std::condition_variable_any cv_;
  std::jthread thread_;
};

struct MetricsSnapshot {
  std::size_t active_sessions_total = 0;
  std::map<std::string, std::size_t> per_supervisor_load;
  std::map<std::string, std::uint64_t> agent_utilization;
  double uptime_seconds = 0;
};

nlohmann::json to_json(const MetricsSnapshot& m);

/// Computed from live state on every call.
MetricsSnapshot collect_metrics(const SupervisorPool& pool, const AgentRegistry& registry,
                                std::chrono::steady_clock::time_point started);

}  // namespace calagent
