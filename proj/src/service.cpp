#include "calagent/service.hpp"

#include <algorithm>

#include "calagent/errors.hpp"

namespace calagent {

nlohmann::json to_json(const CreatedSession& s) {
  return {{"session_id", s.session_id}, {"supervisor_id", s.supervisor_id}, {"greeting", s.greeting}};
}

nlohmann::json to_json(const TurnResult& t) {
  return {{"reply", t.reply},
          {"actions", t.actions},
          {"next_route", t.next_route},
          {"supervisor_id", t.supervisor_id},
          {"transcript_length", t.transcript_length}};
}

namespace {

std::shared_ptr<const ReferenceClock> make_clock(const ServiceConfig& c) {
  TimeZone zone = TimeZone::load(c.time_zone);
  if (!c.fixed_now.empty()) {
    return std::make_shared<ManualClock>(*parse_rfc3339(c.fixed_now), zone);
  }
  return std::make_shared<SystemClock>(zone);
}

std::shared_ptr<const NluBackend> make_nlu(const ServiceConfig& c) {
  if (c.nlu_backend == "remote") {
    RemoteNluConfig r;
    r.base_url = c.nlu_base_url;
    r.model = c.nlu_model;
    r.api_key = c.nlu_api_key;
    r.timeout = std::chrono::seconds{c.nlu_timeout_seconds};
    return std::make_shared<RemoteNlu>(r);
  }
  return std::make_shared<DeterministicNlu>();
}

class TurnGuard {
 public:
  TurnGuard(std::mutex& mu, std::set<std::string>& in_flight, std::string id)
      : mu_(mu), in_flight_(in_flight), id_(std::move(id)) {
    std::lock_guard lock(mu_);
    if (!in_flight_.insert(id_).second) {
      throw Error(ErrorCode::TurnInProgress, "a turn for session '" + id_ + "' is already running");
    }
  }
  ~TurnGuard() {
    std::lock_guard lock(mu_);
    in_flight_.erase(id_);
  }
  TurnGuard(const TurnGuard&) = delete;
  TurnGuard& operator=(const TurnGuard&) = delete;

 private:
  std::mutex& mu_;
  std::set<std::string>& in_flight_;
  std::string id_;
};

std::string instance_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "supervisor-%zu", i + 1);
  return buf;
}

}  // namespace

AssistantService::AssistantService(ServiceConfig config, ServiceDeps deps)
    : config_(std::move(config)), started_(std::chrono::steady_clock::now()) {
  config_.validate();
  clock_ = deps.clock ? deps.clock : make_clock(config_);
  calendar_ = deps.calendar;
  if (!calendar_) {
    std::optional<std::filesystem::path> snap;
    if (!config_.calendar_snapshot_path.empty()) snap = config_.calendar_snapshot_path;
    calendar_ = std::make_shared<InMemoryCalendarStore>(clock_, config_.seed, snap);
  }
  sessions_ = deps.sessions ? deps.sessions : std::make_shared<InMemorySessionStore>(clock_);
  nlu_ = deps.nlu ? deps.nlu : make_nlu(config_);
  session_ids_ = std::make_unique<IdGenerator>(clock_, config_.seed ^ 0x5e55107ULL, "ses_");

  registry_ = std::make_shared<AgentRegistry>();
  register_default_agents(*registry_, calendar_, clock_,
                          SchedulerOptions{std::chrono::minutes{config_.default_duration_minutes}});
  if (deps.configure_registry) deps.configure_registry(*registry_, calendar_, clock_);
  workers_ = std::make_shared<WorkerPool>(config_.worker_capacity, config_.queue_high_water);

  pool_ = std::make_unique<SupervisorPool>(sessions_, clock_);
  std::vector<std::string> ids;
  const AgentInvoker invoker = registry_invoker(registry_, workers_);
  for (std::size_t i = 0; i < config_.supervisor_count; ++i) {
    auto inst = std::make_unique<Instance>();
    inst->id = instance_name(i);
    inst->supervisor = std::make_shared<Supervisor>(nlu_, clock_);
    inst->graph = std::make_shared<CompiledGraph>(
        build_calendar_graph(inst->supervisor, invoker, clock_, config_.step_budget));
    pool_->add_instance(inst->id);
    ids.push_back(inst->id);
    instances_.emplace(inst->id, std::move(inst));
  }

  gateway_ = std::make_unique<Gateway>(
      ids, [this](const std::string& id) { return instance_alive(id); },
      [this](const std::string& sid) { return pool_->route_session(sid); },
      GatewayOptions{std::chrono::milliseconds{config_.probe_interval_ms},
                     config_.probe_failure_threshold});
  gateway_->set_health_listener(
      [this](const std::string& id, bool healthy) { pool_->mark_health(id, healthy); });

  if (config_.background_tasks) {
    gateway_->start();
    sweeper_ = std::make_unique<SessionSweeper>(
        sessions_, clock_, std::chrono::seconds{config_.sweep_interval_seconds});
  }
}

AssistantService::~AssistantService() {
  sweeper_.reset();
  if (gateway_) gateway_->stop();
}

AssistantService::Instance& AssistantService::instance(const std::string& id) const {
  auto it = instances_.find(id);
  if (it == instances_.end()) throw Error(ErrorCode::UnknownInstance, "no supervisor instance '" + id + "'");
  return *it->second;
}

CreatedSession AssistantService::create_session() {
  for (std::size_t attempt = 0; attempt <= instances_.size(); ++attempt) {
    const std::string owner = pool_->pick_least_loaded();
    if (!instance(owner).alive) {
      pool_->mark_health(owner, false);
      continue;
    }
    SessionRecord r;
    r.session_id = session_ids_->next();
    r.state.session_id = r.session_id;
    r.state.transcript.push_back(Message{std::string(kSupervisorNode), nlu_text::kGreeting, clock_->now()});
    r.state.next_route = std::string(kUserRoute);
    r.owner_supervisor = owner;
    r.last_active = clock_->now();
    r.ttl = std::chrono::seconds{config_.session_ttl_seconds};
    sessions_->put(r);
    return CreatedSession{r.session_id, owner, nlu_text::kGreeting};
  }
  throw Error(ErrorCode::NoHealthySupervisor, "no live supervisor instance");
}

TurnResult AssistantService::post_message(const std::string& session_id, const std::string& text) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "message text is empty");
  }
  TurnGuard guard(turns_mu_, turns_in_flight_, session_id);
  if (!sessions_->get(session_id)) {
    throw Error(ErrorCode::UnknownSession, "session '" + session_id + "' is absent or expired");
  }

  for (std::size_t attempt = 0; attempt <= instances_.size(); ++attempt) {
    const std::string owner = pool_->route_session(session_id);
    Instance& inst = instance(owner);
    if (!inst.alive) {
      // Passive failure detection; the next route picks a survivor.
      pool_->mark_health(owner, false);
      continue;
    }
    auto record = sessions_->get(session_id);
    if (!record) throw Error(ErrorCode::UnknownSession, "session '" + session_id + "' expired");
    const std::size_t before = record->state.transcript.size();

    TurnTrace trace;
    std::optional<StepBudgetExceeded> budget;
    GraphState next;
    try {
      next = inst.graph->run_turn(record->state, text, &trace);
    } catch (const StepBudgetExceeded& e) {
      budget.emplace(e);
      next = e.state();
    }
    if (!inst.alive) continue;  // died mid-turn: abandon, retry from the stored state

    record->state = next;
    record->owner_supervisor = owner;
    record->last_active = clock_->now();
    sessions_->put(*record);
    if (budget) throw *budget;

    TurnResult out;
    out.supervisor_id = owner;
    out.next_route = next.next_route;
    out.actions = trace.effects;
    out.transcript_length = next.transcript.size();
    for (std::size_t i = next.transcript.size(); i > before; --i) {
      const Message& m = next.transcript[i - 1];
      if (m.role == kSupervisorNode) {
        out.reply = m.content;
        break;
      }
    }
    return out;
  }
  throw Error(ErrorCode::NoHealthySupervisor, "no live supervisor instance");
}

std::optional<SessionRecord> AssistantService::get_session(const std::string& session_id) {
  return sessions_->get(session_id);
}

bool AssistantService::delete_session(const std::string& session_id) {
  return sessions_->erase(session_id);
}

std::vector<CalendarEvent> AssistantService::list_events(Instant start, Instant end) const {
  if (end < start) throw Error(ErrorCode::RangeInverted, "range end precedes start");
  return calendar_->list_events(start, end);
}

MetricsSnapshot AssistantService::metrics() const {
  return collect_metrics(*pool_, *registry_, started_);
}

bool AssistantService::healthy() const {
  for (const auto& [id, inst] : instances_) {
    if (inst->alive && pool_->is_healthy(id)) return true;
  }
  return false;
}

void AssistantService::kill_instance(const std::string& instance_id) {
  instance(instance_id).alive = false;
}

void AssistantService::revive_instance(const std::string& instance_id) {
  instance(instance_id).alive = true;
}

bool AssistantService::instance_alive(const std::string& instance_id) const {
  return instance(instance_id).alive;
}

std::string AssistantService::route_request(const std::optional<std::string>& session_id) {
  return gateway_->route(session_id);
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::RangeInverted:
    case ErrorCode::TemporalParseFailure:
    case ErrorCode::ValidationFailure:
      return 400;
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownEventId:
    case ErrorCode::UnknownEvent:
      return 404;
    case ErrorCode::TurnInProgress:
      return 409;
    case ErrorCode::NoHealthySupervisor:
    case ErrorCode::NoHealthyInstance:
    case ErrorCode::CapacitySaturated:
    case ErrorCode::StoreUnavailable:
      return 503;
    default:
      return 500;
  }
}

}  // namespace calagent
