#include <doctest.h>

#include <atomic>
#include <latch>
#include <thread>

#include "calagent/distributed.hpp"
#include "support/helpers.hpp"

using namespace calagent;
using namespace calagent::testing;
using namespace std::chrono_literals;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

struct PoolFixture {
  std::shared_ptr<ManualClock> clock = test_utc_clock();
  std::shared_ptr<InMemorySessionStore> store = std::make_shared<InMemorySessionStore>(clock);
  SupervisorPool pool{store, clock};
  int next = 0;

  PoolFixture() {
    for (const char* id : {"A", "B", "C"}) pool.add_instance(id);
  }

  std::string owned_by(const std::string& owner) {
    SessionRecord r;
    r.session_id = "ses_" + std::to_string(next++);
    r.state.session_id = r.session_id;
    r.owner_supervisor = owner;
    r.last_active = clock->now();
    store->put(r);
    return r.session_id;
  }
};

TaskDirective check_directive() {
  TaskDirective d;
  d.task_type = TaskType::check_availability;
  d.slots = {{"start_date", "2025-05-01T00:00"}, {"end_date", "2025-05-02T00:00"}};
  return d;
}

}  // namespace

TEST_CASE("new sessions go to the least-loaded instance") {
  PoolFixture f;
  for (int i = 0; i < 3; ++i) f.owned_by("A");
  f.owned_by("B");
  for (int i = 0; i < 2; ++i) f.owned_by("C");
  CHECK(f.pool.pick_least_loaded() == "B");
  const auto loads = f.pool.loads();
  CHECK(loads.at("A") == 3);
  CHECK(loads.at("B") == 1);
  CHECK(loads.at("C") == 2);
}

TEST_CASE("routing keeps affinity while the owner is healthy") {
  PoolFixture f;
  const auto s = f.owned_by("C");
  f.owned_by("A");
  for (int i = 0; i < 10; ++i) CHECK(f.pool.route_session(s) == "C");
}

TEST_CASE("failover picks the least-loaded survivor, ties to the smallest id") {
  PoolFixture f;
  const auto s = f.owned_by("B");
  f.owned_by("A");
  f.owned_by("C");
  f.pool.mark_health("B", false);
  CHECK(f.pool.route_session(s) == "A");
  CHECK(f.store->get(s)->owner_supervisor == "A");
  // Once moved, the session stays put even after B recovers.
  f.pool.mark_health("B", true);
  CHECK(f.pool.route_session(s) == "A");
}

TEST_CASE("expired sessions do not count toward load") {
  PoolFixture f;
  f.owned_by("A");
  f.owned_by("A");
  f.owned_by("B");
  f.clock->advance(std::chrono::duration_cast<Millis>(kDefaultSessionTtl));
  f.owned_by("B");
  CHECK(f.pool.loads().at("A") == 0);
  CHECK(f.pool.pick_least_loaded() == "A");
}

TEST_CASE("pool errors") {
  PoolFixture f;
  CHECK(code_of([&] { f.pool.mark_health("Z", false); }) == ErrorCode::UnknownInstance);
  for (const char* id : {"A", "B", "C"}) f.pool.mark_health(id, false);
  CHECK(code_of([&] { f.pool.pick_least_loaded(); }) == ErrorCode::NoHealthySupervisor);
  CHECK(code_of([&] { f.pool.route_session("ses_nope"); }) == ErrorCode::NoHealthySupervisor);
}

TEST_CASE("worker pool runs capacity tasks at once and queues the rest") {
  WorkerPool pool(8, 64);
  std::atomic<int> started{0};
  std::latch release(1);
  std::vector<std::future<void>> futs;
  for (int i = 0; i < 9; ++i) {
    futs.push_back(pool.submit([&] {
      ++started;
      release.wait();
    }));
  }
  for (int i = 0; i < 400 && started.load() < 8; ++i) std::this_thread::sleep_for(5ms);
  std::this_thread::sleep_for(20ms);
  CHECK(started.load() == 8);
  CHECK(pool.running() == 8);
  CHECK(pool.pending() == 1);
  release.count_down();
  for (auto& fu : futs) fu.get();
  CHECK(started.load() == 9);
}

TEST_CASE("worker pool sheds load above the high-water mark") {
  WorkerPool pool(1, 64);
  std::latch release(1);
  std::atomic<bool> blocker_started{false};
  std::vector<std::future<void>> futs;
  futs.push_back(pool.submit([&] {
    blocker_started = true;
    release.wait();
  }));
  while (!blocker_started) std::this_thread::sleep_for(1ms);
  for (int i = 0; i < 64; ++i) futs.push_back(pool.submit([] {}));
  CHECK(pool.pending() == 64);
  CHECK(code_of([&] { pool.submit([] {}); }) == ErrorCode::CapacitySaturated);
  release.count_down();
  for (auto& fu : futs) fu.get();
}

TEST_CASE("concurrent checks through the registry match serial execution") {
  auto clock = test_utc_clock();
  auto cal = std::make_shared<InMemoryCalendarStore>(clock);
  for (int h = 0; h < 10; ++h) {
    const Instant s = at("2025-05-01T08:00:00Z") + std::chrono::hours{h};
    cal->create_event(details("Event " + std::to_string(h), s, s + 30min));
  }
  AgentRegistry registry;
  register_default_agents(registry, cal, clock);
  WorkerPool pool(8, 256);

  const auto serial = checker_run(check_directive(), *cal, *clock);
  std::vector<std::future<AgentResult>> futs;
  std::vector<std::jthread> callers;
  std::mutex mu;
  for (int i = 0; i < 100; ++i) {
    callers.emplace_back([&] {
      auto r = delegate(check_directive(), registry, pool);
      std::lock_guard lock(mu);
      std::promise<AgentResult> p;
      p.set_value(std::move(r));
      futs.push_back(p.get_future());
    });
  }
  callers.clear();
  REQUIRE(futs.size() == 100);
  for (auto& fu : futs) {
    const auto r = fu.get();
    CHECK(r.status == serial.status);
    CHECK(r.messages == serial.messages);
  }
  CHECK(registry.utilization().at("calendar_checker_agent") == 100);
}

TEST_CASE("registry enforces one active agent per capability") {
  AgentRegistry registry;
  auto ok = [](const TaskDirective&) { return AgentResult{}; };
  registry.register_agent({"a", {TaskType::schedule}, true}, ok);
  CHECK(code_of([&] { registry.register_agent({"a", {TaskType::edit}, true}, ok); }) == ErrorCode::DuplicateAgent);
  CHECK(code_of([&] { registry.register_agent({"b", {TaskType::schedule}, true}, ok); }) ==
        ErrorCode::DuplicateCapability);
  registry.register_agent({"b", {TaskType::schedule}, false}, ok);
  CHECK(code_of([&] { registry.set_active("b", true); }) == ErrorCode::DuplicateCapability);
  registry.set_active("a", false);
  registry.set_active("b", true);
  CHECK(registry.resolve(TaskType::schedule).first == "b");
  CHECK(code_of([&] { registry.resolve(TaskType::edit); }) == ErrorCode::NoCapableAgent);
  CHECK(code_of([&] { registry.deregister_agent("zzz"); }) == ErrorCode::UnknownAgent);
}

TEST_CASE("deregistering an agent yields an inability report, re-registering restores it") {
  auto clock = test_utc_clock();
  auto cal = std::make_shared<InMemoryCalendarStore>(clock);
  auto registry = std::make_shared<AgentRegistry>();
  register_default_agents(*registry, cal, clock);
  auto pool = std::make_shared<WorkerPool>(2, 16);
  const auto invoke = registry_invoker(registry, pool);

  const auto ev = cal->create_event(details("Standup", at("2025-05-01T10:00:00Z"), at("2025-05-01T10:15:00Z")));
  TaskDirective del;
  del.task_type = TaskType::delete_event;
  del.slots = SlotMap{{"event_id", ev.event_id}};

  registry->deregister_agent("event_remover_agent");
  const auto r = invoke(RouteTarget::event_remover_agent, del);
  CHECK(r.status == AgentStatus::failed);
  CHECK(r.messages == "No agent is currently available to handle delete requests.");
  CHECK(cal->size() == 1);

  registry->register_agent({"event_remover_agent", {TaskType::delete_event}, true},
                           [cal, clock](const TaskDirective& d) { return remover_run(d, *cal, *clock); });
  CHECK(invoke(RouteTarget::event_remover_agent, del).status == AgentStatus::ok);
  CHECK(cal->size() == 0);
}

TEST_CASE("gateway rotates over healthy instances in fixed order") {
  std::map<std::string, bool> up{{"s1", true}, {"s2", true}, {"s3", true}};
  Gateway gw({"s1", "s2", "s3"}, [&](const std::string& id) { return up.at(id); },
             [](const std::string&) { return std::string("s2"); }, {1000ms, 2});
  std::vector<std::string> seen;
  for (int i = 0; i < 6; ++i) seen.push_back(gw.route());
  CHECK(seen == std::vector<std::string>{"s1", "s2", "s3", "s1", "s2", "s3"});
  CHECK(gw.route("ses_x") == "s2");

  std::vector<std::pair<std::string, bool>> events;
  gw.set_health_listener([&](const std::string& id, bool h) { events.emplace_back(id, h); });
  up["s2"] = false;
  gw.probe_once();
  CHECK(gw.healthy("s2"));  // one failure is below the threshold
  gw.probe_once();
  CHECK_FALSE(gw.healthy("s2"));
  CHECK(events == std::vector<std::pair<std::string, bool>>{{"s2", false}});
  for (int i = 0; i < 4; ++i) CHECK(gw.route() != "s2");

  up["s2"] = true;
  gw.probe_once();
  CHECK(gw.healthy("s2"));
  CHECK(events.back() == std::pair<std::string, bool>{"s2", true});

  for (auto& [id, u] : up) u = false;
  gw.probe_once();
  gw.probe_once();
  CHECK(code_of([&] { gw.route(); }) == ErrorCode::NoHealthyInstance);
}

TEST_CASE("metrics reflect live state") {
  PoolFixture f;
  f.owned_by("A");
  f.owned_by("A");
  f.owned_by("C");
  AgentRegistry registry;
  registry.register_agent({"x", {TaskType::schedule}, true}, [](const TaskDirective&) { return AgentResult{}; });
  registry.record_completion("x");
  const auto m = collect_metrics(f.pool, registry, std::chrono::steady_clock::now() - 2s);
  CHECK(m.active_sessions_total == 3);
  CHECK(m.per_supervisor_load == std::map<std::string, std::size_t>{{"A", 2}, {"B", 0}, {"C", 1}});
  CHECK(m.agent_utilization.at("x") == 1);
  CHECK(m.uptime_seconds >= 2.0);
  const auto j = to_json(m);
  CHECK(j.at("active_sessions_total") == 3);
  CHECK(j.contains("per_supervisor_load"));
  CHECK(j.contains("agent_utilization"));
  CHECK(j.contains("uptime_seconds"));
}
