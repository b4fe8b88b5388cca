#include "calagent/distributed.hpp"

#include <algorithm>

namespace calagent {

nlohmann::json to_json(const SupervisorInstance& s) {
  return {{"instance_id", s.instance_id},
          {"active_sessions", s.active_sessions},
          {"healthy", s.healthy},
          {"started_at", format_utc(s.started_at)}};
}

SupervisorPool::SupervisorPool(std::shared_ptr<SessionStore> store,
                               std::shared_ptr<const ReferenceClock> clock)
    : store_(std::move(store)), clock_(std::move(clock)) {
  if (!store_ || !clock_) throw Error(ErrorCode::InvalidArgument, "pool needs a store and a clock");
}

void SupervisorPool::add_instance(const std::string& instance_id) {
  if (instance_id.empty()) throw Error(ErrorCode::InvalidArgument, "instance id is empty");
  std::lock_guard lock(mu_);
  if (!instances_.emplace(instance_id, Entry{true, clock_->now()}).second) {
    throw Error(ErrorCode::InvalidArgument, "instance '" + instance_id + "' already exists");
  }
}

void SupervisorPool::mark_health(const std::string& instance_id, bool healthy) {
  std::lock_guard lock(mu_);
  auto it = instances_.find(instance_id);
  if (it == instances_.end()) {
    throw Error(ErrorCode::UnknownInstance, "no supervisor instance '" + instance_id + "'");
  }
  it->second.healthy = healthy;
}

bool SupervisorPool::is_healthy(const std::string& instance_id) const {
  std::lock_guard lock(mu_);
  auto it = instances_.find(instance_id);
  if (it == instances_.end()) {
    throw Error(ErrorCode::UnknownInstance, "no supervisor instance '" + instance_id + "'");
  }
  return it->second.healthy;
}

std::vector<std::string> SupervisorPool::instance_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, e] : instances_) out.push_back(id);
  return out;
}

std::map<std::string, std::size_t> SupervisorPool::loads_locked() const {
  std::map<std::string, std::size_t> out;
  for (const auto& [id, e] : instances_) out[id] = 0;
  for (const auto& r : store_->live_records()) {
    if (r.owner_supervisor) {
      auto it = out.find(*r.owner_supervisor);
      if (it != out.end()) ++it->second;
    }
  }
  return out;
}

std::map<std::string, std::size_t> SupervisorPool::loads() const {
  std::lock_guard lock(mu_);
  return loads_locked();
}

std::vector<SupervisorInstance> SupervisorPool::instances() const {
  std::lock_guard lock(mu_);
  const auto l = loads_locked();
  std::vector<SupervisorInstance> out;
  for (const auto& [id, e] : instances_) {
    out.push_back(SupervisorInstance{id, l.at(id), e.healthy, e.started_at});
  }
  return out;
}

std::string SupervisorPool::pick_locked(const std::map<std::string, std::size_t>& loads) const {
  const std::string* best = nullptr;
  std::size_t best_load = 0;
  // std::map iterates ids in lexicographic order, so the first minimum wins ties.
  for (const auto& [id, e] : instances_) {
    if (!e.healthy) continue;
    const std::size_t l = loads.at(id);
    if (!best || l < best_load) {
      best = &id;
      best_load = l;
    }
  }
  if (!best) throw Error(ErrorCode::NoHealthySupervisor, "no healthy supervisor instance");
  return *best;
}

std::string SupervisorPool::pick_least_loaded() const {
  std::lock_guard lock(mu_);
  return pick_locked(loads_locked());
}

std::string SupervisorPool::route_session(const std::string& session_id) {
  std::lock_guard lock(mu_);
  auto record = store_->get(session_id);
  if (record && record->owner_supervisor) {
    auto it = instances_.find(*record->owner_supervisor);
    if (it != instances_.end() && it->second.healthy) return it->first;
  }
  const std::string chosen = pick_locked(loads_locked());
  if (record) {
    record->owner_supervisor = chosen;
    store_->put(*record);
  }
  return chosen;
}

nlohmann::json to_json(const AgentCapability& c) {
  nlohmann::json caps = nlohmann::json::array();
  for (TaskType t : c.capabilities) caps.push_back(std::string(to_string(t)));
  return {{"agent_name", c.agent_name}, {"capabilities", caps}, {"active", c.active}};
}

void AgentRegistry::check_clash_locked(const AgentCapability& cap, const std::string& ignore) const {
  if (!cap.active) return;
  for (const auto& [name, e] : agents_) {
    if (name == ignore || !e.capability.active) continue;
    for (TaskType t : cap.capabilities) {
      if (e.capability.capabilities.count(t)) {
        throw Error(ErrorCode::DuplicateCapability,
                    "task type '" + std::string(to_string(t)) + "' is already served by '" + name +
                        "'");
      }
    }
  }
}

void AgentRegistry::register_agent(AgentCapability capability, AgentFn fn) {
  if (capability.agent_name.empty() || !fn) {
    throw Error(ErrorCode::InvalidArgument, "agent needs a name and a function");
  }
  std::lock_guard lock(mu_);
  if (agents_.count(capability.agent_name)) {
    throw Error(ErrorCode::DuplicateAgent, "agent '" + capability.agent_name + "' is already registered");
  }
  check_clash_locked(capability, {});
  completed_.try_emplace(capability.agent_name, 0);
  const std::string name = capability.agent_name;
  agents_.emplace(name, Entry{std::move(capability), std::move(fn)});
}

void AgentRegistry::deregister_agent(const std::string& agent_name) {
  std::lock_guard lock(mu_);
  if (!agents_.erase(agent_name)) {
    throw Error(ErrorCode::UnknownAgent, "agent '" + agent_name + "' is not registered");
  }
}

void AgentRegistry::set_active(const std::string& agent_name, bool active) {
  std::lock_guard lock(mu_);
  auto it = agents_.find(agent_name);
  if (it == agents_.end()) {
    throw Error(ErrorCode::UnknownAgent, "agent '" + agent_name + "' is not registered");
  }
  AgentCapability next = it->second.capability;
  next.active = active;
  check_clash_locked(next, agent_name);
  it->second.capability.active = active;
}

std::pair<std::string, AgentFn> AgentRegistry::resolve(TaskType task) const {
  std::lock_guard lock(mu_);
  for (const auto& [name, e] : agents_) {
    if (e.capability.active && e.capability.capabilities.count(task)) return {name, e.fn};
  }
  throw Error(ErrorCode::NoCapableAgent,
              "no active agent handles '" + std::string(to_string(task)) + "' tasks");
}

std::vector<AgentCapability> AgentRegistry::list() const {
  std::lock_guard lock(mu_);
  std::vector<AgentCapability> out;
  for (const auto& [name, e] : agents_) out.push_back(e.capability);
  return out;
}

void AgentRegistry::record_completion(const std::string& agent_name) {
  std::lock_guard lock(mu_);
  ++completed_[agent_name];
}

std::map<std::string, std::uint64_t> AgentRegistry::utilization() const {
  std::lock_guard lock(mu_);
  auto out = completed_;
  for (const auto& [name, e] : agents_) out.try_emplace(name, 0);
  return out;
}

void register_default_agents(AgentRegistry& registry, std::shared_ptr<CalendarStore> calendar,
                             std::shared_ptr<const ReferenceClock> clock,
                             SchedulerOptions scheduler_options) {
  registry.register_agent({"event_scheduler_agent", {TaskType::schedule}, true},
                          [calendar, clock, scheduler_options](const TaskDirective& d) {
                            return scheduler_run(d, *calendar, *clock, scheduler_options);
                          });
  registry.register_agent({"calendar_checker_agent", {TaskType::check_availability}, true},
                          [calendar, clock](const TaskDirective& d) {
                            return checker_run(d, *calendar, *clock);
                          });
  registry.register_agent({"event_remover_agent", {TaskType::delete_event}, true},
                          [calendar, clock](const TaskDirective& d) {
                            return remover_run(d, *calendar, *clock);
                          });
  registry.register_agent({"event_modifier_agent", {TaskType::edit}, true},
                          [calendar, clock](const TaskDirective& d) {
                            return modifier_run(d, *calendar, *clock);
                          });
}

WorkerPool::WorkerPool(std::size_t capacity, std::size_t high_water)
    : capacity_(capacity), high_water_(high_water) {
  if (capacity_ == 0) throw Error(ErrorCode::InvalidArgument, "worker capacity must be >= 1");
  threads_.reserve(capacity_);
  for (std::size_t i = 0; i < capacity_; ++i) {
    threads_.emplace_back([this](std::stop_token st) { work(st); });
  }
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mu_);
    closing_ = true;
  }
  cv_.notify_all();
  threads_.clear();
}

void WorkerPool::enqueue(std::function<void()> job) {
  {
    std::lock_guard lock(mu_);
    if (closing_) throw Error(ErrorCode::CapacitySaturated, "worker pool is shutting down");
    if (queue_.size() >= high_water_) {
      throw Error(ErrorCode::CapacitySaturated,
                  "worker queue is full (" + std::to_string(high_water_) +
                      " pending); retry shortly");
    }
    queue_.push_back(std::move(job));
  }
  cv_.notify_one();
}

void WorkerPool::work(std::stop_token) {
  std::unique_lock lock(mu_);
  for (;;) {
    cv_.wait(lock, [this] { return closing_ || !queue_.empty(); });
    if (queue_.empty()) return;  // closing and drained
    auto job = std::move(queue_.front());
    queue_.pop_front();
    ++running_;
    lock.unlock();
    job();  // packaged_task stores any exception in its future
    lock.lock();
    --running_;
  }
}

std::size_t WorkerPool::pending() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

std::size_t WorkerPool::running() const {
  std::lock_guard lock(mu_);
  return running_;
}

AgentResult delegate(const TaskDirective& task, AgentRegistry& registry, WorkerPool& pool) {
  auto [name, fn] = registry.resolve(task.task_type);
  auto fut = pool.submit([fn = std::move(fn), task] { return fn(task); });
  AgentResult r = fut.get();
  registry.record_completion(name);
  return r;
}

AgentInvoker registry_invoker(std::shared_ptr<AgentRegistry> registry,
                              std::shared_ptr<WorkerPool> pool) {
  return [registry, pool](RouteTarget, const TaskDirective& d) -> AgentResult {
    try {
      return delegate(d, *registry, *pool);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoCapableAgent) throw;
      AgentResult r;
      r.status = AgentStatus::failed;
      r.messages = "No agent is currently available to handle " +
                   std::string(to_string(d.task_type)) + " requests.";
      r.error = ErrorCode::NoCapableAgent;
      return r;
    }
  };
}

Gateway::Gateway(std::vector<std::string> instances, Probe probe, SessionRouter session_router,
                 GatewayOptions options)
    : order_(std::move(instances)),
      probe_(std::move(probe)),
      session_router_(std::move(session_router)),
      options_(options),
      healthy_(order_.size(), true),
      failures_(order_.size(), 0) {
  if (order_.empty()) throw Error(ErrorCode::InvalidArgument, "gateway needs at least one instance");
  if (options_.failure_threshold < 1 || options_.probe_interval <= std::chrono::milliseconds{0}) {
    throw Error(ErrorCode::InvalidArgument, "bad gateway probe settings");
  }
}

Gateway::~Gateway() { stop(); }

std::string Gateway::route(const std::optional<std::string>& session_id) {
  if (session_id && session_router_) return session_router_(*session_id);
  std::lock_guard lock(mu_);
  for (std::size_t i = 0; i < order_.size(); ++i) {
    const std::size_t idx = (cursor_ + i) % order_.size();
    if (healthy_[idx]) {
      cursor_ = (idx + 1) % order_.size();
      return order_[idx];
    }
  }
  throw Error(ErrorCode::NoHealthyInstance, "no healthy service instance");
}

void Gateway::probe_once() {
  std::vector<std::pair<std::string, bool>> changes;
  for (std::size_t i = 0; i < order_.size(); ++i) {
    bool ok = false;
    try {
      ok = probe_ && probe_(order_[i]);
    } catch (...) {
      ok = false;
    }
    std::lock_guard lock(mu_);
    if (ok) {
      failures_[i] = 0;
      if (!healthy_[i]) {
        healthy_[i] = true;
        changes.emplace_back(order_[i], true);
      }
    } else if (++failures_[i] >= options_.failure_threshold && healthy_[i]) {
      healthy_[i] = false;
      changes.emplace_back(order_[i], false);
    }
  }
  HealthListener listener;
  {
    std::lock_guard lock(mu_);
    listener = listener_;
  }
  if (listener) {
    for (const auto& [id, h] : changes) listener(id, h);
  }
}

void Gateway::start() {
  if (thread_.joinable()) return;
  thread_ = std::jthread([this](std::stop_token stop) {
    std::unique_lock lock(probe_mu_);
    while (!stop.stop_requested()) {
      if (cv_.wait_for(lock, stop, options_.probe_interval, [] { return false; })) break;
      if (stop.stop_requested()) break;
      lock.unlock();
      probe_once();
      lock.lock();
    }
  });
}

void Gateway::stop() {
  if (!thread_.joinable()) return;
  thread_.request_stop();
  cv_.notify_all();
  thread_.join();
}

void Gateway::set_health_listener(HealthListener listener) {
  std::lock_guard lock(mu_);
  listener_ = std::move(listener);
}

bool Gateway::healthy(const std::string& instance_id) const {
  std::lock_guard lock(mu_);
  for (std::size_t i = 0; i < order_.size(); ++i) {
    if (order_[i] == instance_id) return healthy_[i];
  }
  throw Error(ErrorCode::UnknownInstance, "no service instance '" + instance_id + "'");
}

std::vector<std::string> Gateway::healthy_instances() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < order_.size(); ++i) {
    if (healthy_[i]) out.push_back(order_[i]);
  }
  return out;
}

nlohmann::json to_json(const MetricsSnapshot& m) {
  return {{"active_sessions_total", m.active_sessions_total},
          {"per_supervisor_load", m.per_supervisor_load},
          {"agent_utilization", m.agent_utilization},
          {"uptime_seconds", m.uptime_seconds}};
}

MetricsSnapshot collect_metrics(const SupervisorPool& pool, const AgentRegistry& registry,
                                std::chrono::steady_clock::time_point started) {
  MetricsSnapshot m;
  m.per_supervisor_load = pool.loads();
  for (const auto& [id, n] : m.per_supervisor_load) m.active_sessions_total += n;
  m.agent_utilization = registry.utilization();
  m.uptime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return m;
}

}  // namespace calagent
