#include <doctest.h>

#include <random>
#include <set>

#include "calagent/agents.hpp"
#include "support/helpers.hpp"

using namespace calagent;
using namespace calagent::testing;
using namespace std::chrono;

namespace {

TaskDirective directive(TaskType t, SlotMap slots) {
  TaskDirective d;
  d.task_type = t;
  d.slots = std::move(slots);
  d.natural_instruction = render_instruction(d);
  return d;
}

TaskDirective schedule(const std::string& title, const std::string& date, const std::string& time) {
  return directive(TaskType::schedule, {{"title", title}, {"date", date}, {"time", time}});
}

/// Counts every call so tests can check the conflict-check-before-create rule.
class RecordingStore final : public CalendarStore {
 public:
  explicit RecordingStore(std::shared_ptr<const ReferenceClock> clock) : inner(clock) {}
  CalendarEvent create_event(const EventDetails& d) override {
    log.push_back("create");
    return inner.create_event(d);
  }
  std::vector<CalendarEvent> list_events(Instant s, Instant e) const override {
    log.push_back("list");
    return inner.list_events(s, e);
  }
  std::vector<CalendarEvent> check_conflicts(const EventDetails& d) const override {
    log.push_back("check");
    return inner.check_conflicts(d);
  }
  CalendarEvent update_event(const std::string& id, const EventPatch& p) override {
    log.push_back("update");
    return inner.update_event(id, p);
  }
  CalendarEvent delete_event(const std::string& id) override {
    log.push_back("delete");
    return inner.delete_event(id);
  }
  std::optional<CalendarEvent> get_event(const std::string& id) const override { return inner.get_event(id); }

  InMemoryCalendarStore inner;
  mutable std::vector<std::string> log;
};

}  // namespace

TEST_CASE("report format round trip") {
  AgentResult r;
  r.status = AgentStatus::needs_info;
  r.messages = "Which one?";
  CHECK(format_report(r) == "needs_info: Which one?");
  const auto p = parse_report("needs_info: Which one?");
  CHECK(p.status == AgentStatus::needs_info);
  CHECK(p.text == "Which one?");
  CHECK(parse_report("plain text").status == AgentStatus::ok);
}

TEST_CASE("scheduler creates on an empty calendar") {
  auto clock = test_ny_clock();
  RecordingStore cal(clock);
  const auto r = scheduler_run(schedule("Team Meeting", "2025-05-01", "10:00 AM"), cal, *clock);
  CHECK(r.status == AgentStatus::ok);
  REQUIRE(r.actions.size() == 1);
  CHECK(r.actions[0].kind == "created");
  const auto e = cal.inner.get_event(r.actions[0].event_id);
  REQUIRE(e);
  CHECK(format_in_zone(e->details.start, clock->zone()) == "2025-05-01T10:00:00-04:00");
  CHECK(e->details.end - e->details.start == minutes{60});
  CHECK(r.messages.find(e->event_id) != std::string::npos);
  CHECK(cal.log == std::vector<std::string>{"check", "create"});
}

TEST_CASE("scheduler reports conflicts and leaves the store alone") {
  auto clock = test_ny_clock();
  RecordingStore cal(clock);
  cal.inner.create_event(details("Existing", at("2025-05-01T14:00:00Z"), at("2025-05-01T15:00:00Z")));
  const auto r = scheduler_run(schedule("Team Meeting", "2025-05-01", "10:00 AM"), cal, *clock);
  CHECK(r.status == AgentStatus::needs_info);
  CHECK(r.messages.find("Existing") != std::string::npos);
  CHECK(r.messages.find("11:00 AM - 12:00 PM") != std::string::npos);  // suggested slot
  CHECK(r.actions.empty());
  CHECK(cal.inner.size() == 1);
}

TEST_CASE("adjacent slot is not a conflict") {
  auto clock = test_ny_clock();
  InMemoryCalendarStore cal(clock);
  cal.create_event(details("Existing", at("2025-05-01T14:00:00Z"), at("2025-05-01T15:00:00Z")));
  const auto r = scheduler_run(schedule("After", "2025-05-01", "11:00 AM"), cal, *clock);
  CHECK(r.status == AgentStatus::ok);
  CHECK(cal.size() == 2);
}

TEST_CASE("scheduler with an unparseable time fails cleanly") {
  auto clock = test_ny_clock();
  InMemoryCalendarStore cal(clock);
  const auto r = scheduler_run(schedule("X", "2025-05-01", "blorp"), cal, *clock);
  CHECK(r.status == AgentStatus::failed);
  CHECK(r.error == ErrorCode::TemporalParseFailure);
  CHECK(cal.size() == 0);
}

TEST_CASE("checker lists a range") {
  auto clock = test_ny_clock();
  InMemoryCalendarStore cal(clock);
  const auto e = cal.create_event(details("Client Call", at("2025-05-01T18:00:00Z"), at("2025-05-01T18:30:00Z")));
  const auto r = checker_run(
      directive(TaskType::check_availability, {{"start_date", "2025-05-01"}, {"end_date", "2025-05-01"}}), cal,
      *clock);
  CHECK(r.status == AgentStatus::ok);
  REQUIRE(r.events.size() == 1);
  CHECK(r.messages.find(e.event_id) != std::string::npos);

  const auto free = checker_run(
      directive(TaskType::check_availability, {{"start_date", "2025-05-02"}, {"end_date", "2025-05-02"}}), cal,
      *clock);
  CHECK(free.status == AgentStatus::ok);
  CHECK(free.events.empty());
  CHECK(free.messages.find("You are free") != std::string::npos);
}

TEST_CASE("checker over 50 random events matches a brute-force scan") {
  std::mt19937_64 rng(8);
  auto clock = test_utc_clock("2025-05-01T00:00:00Z");
  for (int round = 0; round < 30; ++round) {
    InMemoryCalendarStore cal(clock, static_cast<std::uint64_t>(round));
    std::vector<CalendarEvent> all;
    for (int i = 0; i < 50; ++i) {
      const int s = static_cast<int>(rng() % (10 * 24 * 60));
      const int l = 1 + static_cast<int>(rng() % 300);
      all.push_back(cal.create_event(details("e", at("2025-05-01T00:00:00Z") + minutes{s},
                                             at("2025-05-01T00:00:00Z") + minutes{s + l})));
    }
    const int d0 = 1 + static_cast<int>(rng() % 10);
    const int d1 = d0 + static_cast<int>(rng() % 3);
    char a[16], b[16];
    std::snprintf(a, sizeof a, "2025-05-%02d", d0);
    std::snprintf(b, sizeof b, "2025-05-%02d", d1);
    const auto r = checker_run(directive(TaskType::check_availability, {{"start_date", a}, {"end_date", b}}), cal,
                               *clock);
    // Day-grain end is inclusive: the window is [d0 00:00, d1+1 00:00).
    const std::int64_t w0 = (d0 - 1) * 1440, w1 = d1 * 1440;
    std::set<std::string> expect;
    for (const auto& e : all) {
      const auto s = duration_cast<minutes>(e.details.start - at("2025-05-01T00:00:00Z")).count();
      const auto t = duration_cast<minutes>(e.details.end - at("2025-05-01T00:00:00Z")).count();
      if (intersects_oracle(s, t, w0, w1)) expect.insert(e.event_id);
    }
    std::set<std::string> got;
    for (const auto& e : r.events) got.insert(e.event_id);
    CHECK(got == expect);
  }
}

TEST_CASE("checker rejects an inverted range") {
  auto clock = test_ny_clock();
  InMemoryCalendarStore cal(clock);
  const auto r = checker_run(
      directive(TaskType::check_availability, {{"start_date", "2025-05-03"}, {"end_date", "2025-05-01"}}), cal,
      *clock);
  CHECK(r.status == AgentStatus::failed);
  CHECK(r.error == ErrorCode::RangeInverted);
}

TEST_CASE("remover") {
  auto clock = test_ny_clock();
  InMemoryCalendarStore cal(clock);
  const auto e = cal.create_event(details("Gone", at("2025-05-01T14:00:00Z"), at("2025-05-01T15:00:00Z")));
  const auto ok = remover_run(directive(TaskType::delete_event, {{"event_id", e.event_id}}), cal, *clock);
  CHECK(ok.status == AgentStatus::ok);
  CHECK_FALSE(cal.get_event(e.event_id));

  const auto missing = remover_run(directive(TaskType::delete_event, {}), cal, *clock);
  CHECK(missing.status == AgentStatus::needs_info);
  CHECK(missing.messages.find("event_ID not provided") != std::string::npos);

  const auto stale = remover_run(directive(TaskType::delete_event, {{"event_id", e.event_id}}), cal, *clock);
  CHECK(stale.status == AgentStatus::failed);
  CHECK(stale.error == ErrorCode::UnknownEventId);
}

TEST_CASE("modifier moves a uniquely titled event") {
  auto clock = test_ny_clock();
  InMemoryCalendarStore cal(clock);
  const auto e = cal.create_event(details("Team Meeting", at("2025-05-01T14:00:00Z"), at("2025-05-01T15:00:00Z")));
  const auto r = modifier_run(
      directive(TaskType::edit, {{"title", "Team Meeting"}, {"edit_instruction", "move to 11:00"}}), cal, *clock);
  CHECK(r.status == AgentStatus::ok);
  const auto u = cal.get_event(e.event_id);
  CHECK(format_in_zone(u->details.start, clock->zone()) == "2025-05-01T11:00:00-04:00");
  CHECK(u->details.end - u->details.start == minutes{60});
}

TEST_CASE("modifier refuses ambiguous titles") {
  auto clock = test_ny_clock();
  InMemoryCalendarStore cal(clock);
  const auto a = cal.create_event(details("Sync", at("2025-05-01T14:00:00Z"), at("2025-05-01T15:00:00Z")));
  const auto b = cal.create_event(details("Sync", at("2025-05-02T14:00:00Z"), at("2025-05-02T15:00:00Z")));
  const auto r = modifier_run(
      directive(TaskType::edit, {{"title", "Sync"}, {"edit_instruction", "move to 11:00"}}), cal, *clock);
  CHECK(r.status == AgentStatus::needs_info);
  CHECK(r.error == ErrorCode::AmbiguousTitle);
  CHECK(r.messages.find(a.event_id) != std::string::npos);
  CHECK(r.messages.find(b.event_id) != std::string::npos);
}

TEST_CASE("modifier will not move into an occupied slot") {
  auto clock = test_ny_clock();
  InMemoryCalendarStore cal(clock);
  const auto e = cal.create_event(details("Team Meeting", at("2025-05-01T14:00:00Z"), at("2025-05-01T15:00:00Z")));
  const auto busy = cal.create_event(details("Busy", at("2025-05-01T18:00:00Z"), at("2025-05-01T19:00:00Z")));
  const auto before = cal.all_events();
  const auto r = modifier_run(
      directive(TaskType::edit, {{"event_id", e.event_id}, {"edit_instruction", "move to 2:30 PM"}}), cal, *clock);
  CHECK(r.status == AgentStatus::needs_info);
  CHECK(r.error == ErrorCode::ConflictOnMove);
  CHECK(cal.all_events() == before);
  // Oracle: the proposed interval really overlaps the busy one.
  CHECK(intersects_oracle(14 * 60 + 30, 15 * 60 + 30, 14 * 60, 15 * 60));
  (void)busy;
}

TEST_CASE("modifier edit vocabulary") {
  auto clock = test_ny_clock();
  InMemoryCalendarStore cal(clock);
  const auto e = cal.create_event(details("Standup", at("2025-04-30T13:00:00Z"), at("2025-04-30T13:15:00Z")));
  auto edit = [&](const std::string& instruction) {
    return modifier_run(directive(TaskType::edit, {{"event_id", e.event_id}, {"edit_instruction", instruction}}),
                        cal, *clock);
  };
  CHECK(edit("later by 30 minutes").status == AgentStatus::ok);
  CHECK(format_utc(cal.get_event(e.event_id)->details.start) == "2025-04-30T13:30:00Z");
  CHECK(edit("extend by 15 minutes").status == AgentStatus::ok);
  CHECK(format_utc(cal.get_event(e.event_id)->details.end) == "2025-04-30T14:00:00Z");
  CHECK(edit("rename to 'Daily Standup'").status == AgentStatus::ok);
  CHECK(cal.get_event(e.event_id)->details.title == "Daily Standup");
  CHECK(edit("for 2 hours").status == AgentStatus::ok);
  CHECK(cal.get_event(e.event_id)->details.end - cal.get_event(e.event_id)->details.start == hours{2});
  CHECK(edit("add a note: bring slides").status == AgentStatus::ok);
  CHECK(cal.get_event(e.event_id)->details.description == "bring slides");
}

TEST_CASE("title matching prefers exact, then substring") {
  std::vector<CalendarEvent> evs(3);
  evs[0].details.title = "Team Meeting";
  evs[1].details.title = "Team Meeting Prep";
  evs[2].details.title = "Lunch";
  CHECK(match_title(evs, "team meeting").size() == 1);
  CHECK(match_title(evs, "Meeting").size() == 2);
  CHECK(match_title(evs, "Lunch with Sam").size() == 1);
  CHECK(match_title(evs, "Dinner").empty());
}

TEST_CASE("earliest gap within the local day") {
  auto clock = test_ny_clock();
  InMemoryCalendarStore cal(clock);
  cal.create_event(details("a", at("2025-05-01T13:00:00Z"), at("2025-05-01T14:00:00Z")));
  cal.create_event(details("b", at("2025-05-01T14:00:00Z"), at("2025-05-01T15:30:00Z")));
  const auto g = earliest_gap(cal, at("2025-05-01T13:30:00Z"), minutes{60}, clock->zone());
  REQUIRE(g);
  CHECK(format_utc(*g) == "2025-05-01T15:30:00Z");
  CHECK_FALSE(earliest_gap(cal, at("2025-05-02T03:30:00Z"), minutes{60}, clock->zone()));
}
