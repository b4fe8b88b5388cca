#include <doctest.h>

#include <atomic>
#include <deque>
#include <mutex>

#include "calagent/supervisor.hpp"
#include "support/helpers.hpp"

using namespace calagent;
using namespace calagent::testing;

namespace {

/// Replays scripted outputs; an empty string means "throw".
class ScriptedNlu final : public NluBackend {
 public:
  explicit ScriptedNlu(std::deque<std::string> script) : script_(std::move(script)) {}
  std::string name() const override { return "scripted"; }
  std::string interpret(const std::vector<Message>& t, const ReferenceClock&) const override {
    std::lock_guard lock(mu_);
    ++calls;
    seen.push_back(t);
    if (script_.empty()) throw Error(ErrorCode::TransportFailure, "script exhausted");
    std::string next = script_.front();
    script_.pop_front();
    if (next.empty()) throw Error(ErrorCode::TransportFailure, "scripted outage");
    return next;
  }
  mutable int calls = 0;
  mutable std::vector<std::vector<Message>> seen;

 private:
  mutable std::mutex mu_;
  mutable std::deque<std::string> script_;
};

GraphState user_says(const std::string& text) {
  GraphState s;
  s.transcript.push_back(Message{"supervisor", nlu_text::kGreeting, {}});
  s.transcript.push_back(Message{"user", text, {}});
  return s;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("parse_decision accepts fenced JSON") {
  const auto d = parse_decision(
      "```json\n{\"next\":\"event_scheduler_agent\",\"messages\":\"Schedule an event titled 'Team Meeting' on "
      "2025-05-01 at 10:00 AM.\"}\n```");
  CHECK(d.next == RouteTarget::event_scheduler_agent);
  CHECK(d.messages.find("Team Meeting") != std::string::npos);
}

TEST_CASE("parse_decision maps the editor alias and rejects unknown routes") {
  CHECK(parse_decision(R"({"next":"event_editor_agent","messages":"x"})").next == RouteTarget::event_modifier_agent);
  CHECK(code_of([] { parse_decision(R"({"next":"oracle_agent","messages":"x"})"); }) == ErrorCode::MalformedDecision);
  CHECK(code_of([] { parse_decision(R"({"next":"user"})"); }) == ErrorCode::MalformedDecision);
  CHECK(code_of([] { parse_decision(R"({"next":"user","messages":"x","extra":1})"); }) ==
        ErrorCode::MalformedDecision);
  CHECK(code_of([] { parse_decision("not json"); }) == ErrorCode::MalformedDecision);
  CHECK(parse_decision(to_wire({RouteTarget::finish, "bye"})) == RoutingDecision{RouteTarget::finish, "bye"});
}

TEST_CASE("decide with the deterministic backend") {
  auto clock = test_ny_clock();
  Supervisor sup(std::make_shared<DeterministicNlu>(), clock);

  SUBCASE("complete schedule request is delegated") {
    const auto d = sup.decide(user_says("Schedule an event titled 'Team Meeting' on 2025-05-01 at 10:00 AM."));
    CHECK(d.decision.next == RouteTarget::event_scheduler_agent);
    CHECK(d.decision.messages == "Schedule an event titled 'Team Meeting' on 2025-05-01 at 10:00 AM.");
    REQUIRE(d.directive);
    CHECK(d.directive->slots.at("title") == "Team Meeting");
  }
  SUBCASE("missing title is asked for, once") {
    const auto d = sup.decide(user_says("Schedule a meeting tomorrow"));
    CHECK(d.decision.next == RouteTarget::user);
    CHECK(d.decision.messages == followup_question(TaskType::schedule, "title"));
    CHECK(std::count(d.decision.messages.begin(), d.decision.messages.end(), '?') == 1);
  }
  SUBCASE("delete by title looks the id up first") {
    const auto d = sup.decide(user_says("Delete my 'Dentist Appointment'"));
    CHECK(d.decision.next == RouteTarget::calendar_checker_agent);
    CHECK(d.decision.messages.rfind(nlu_text::kLookupPrefix, 0) == 0);
  }
}

TEST_CASE("supervisor gating: a delegated directive never misses a required slot") {
  auto clock = test_ny_clock();
  // Backend that proposes delegation with partial instructions.
  const std::vector<std::pair<std::string, std::string>> partial{
      {"event_scheduler_agent", "Schedule an event titled 'X' on 2025-05-01."},
      {"event_scheduler_agent", "Schedule an event on 2025-05-01 at 10:00 AM."},
      {"event_remover_agent", "Delete the event."},
      {"event_modifier_agent", "Edit the event titled 'X'."},
      {"calendar_checker_agent", "Check availability."},
  };
  for (const auto& [route, text] : partial) {
    auto nlu = std::make_shared<ScriptedNlu>(
        std::deque<std::string>{nlohmann::json{{"next", route}, {"messages", text}}.dump()});
    Supervisor sup(nlu, clock);
    const auto d = sup.decide(user_says("anything"));
    INFO(route, ": ", text);
    CHECK(d.decision.next == RouteTarget::user);
    CHECK(d.gated);
    CHECK(std::count(d.decision.messages.begin(), d.decision.messages.end(), '?') == 1);
  }
}

TEST_CASE("NLU outages are retried, then surface as NluFailure") {
  auto clock = test_ny_clock();
  auto flaky = std::make_shared<ScriptedNlu>(std::deque<std::string>{"", "", R"({"next":"user","messages":"Hi?"})"});
  Supervisor ok(flaky, clock);
  CHECK(ok.decide(user_says("hello")).nlu_calls == 3);

  auto dead = std::make_shared<ScriptedNlu>(std::deque<std::string>{"", "", ""});
  Supervisor bad(dead, clock);
  CHECK(code_of([&] { bad.decide(user_says("hello")); }) == ErrorCode::NluFailure);
  CHECK(dead->calls == 3);
}

TEST_CASE("malformed output triggers bounded repair prompts") {
  auto clock = test_ny_clock();
  auto nlu = std::make_shared<ScriptedNlu>(
      std::deque<std::string>{"garbage", R"({"next":"nowhere","messages":"x"})", R"({"next":"user","messages":"Ok?"})"});
  Supervisor sup(nlu, clock);
  const auto d = sup.decide(user_says("hello"));
  CHECK(d.decision.messages == "Ok?");
  REQUIRE(nlu->seen.size() == 3);
  CHECK(nlu->seen[1].back().role == "tool");
  CHECK(nlu->seen[2].size() == nlu->seen[0].size() + 2);

  auto hopeless = std::make_shared<ScriptedNlu>(std::deque<std::string>{"a", "b", "c", "d"});
  Supervisor sup2(hopeless, clock);
  CHECK(code_of([&] { sup2.decide(user_says("hello")); }) == ErrorCode::MalformedDecision);
  CHECK(hopeless->calls == 3);
}

TEST_CASE("FINISH as the very first decision becomes a prompt to the user") {
  auto clock = test_ny_clock();
  auto nlu = std::make_shared<ScriptedNlu>(std::deque<std::string>{R"({"next":"FINISH","messages":""})"});
  Supervisor sup(nlu, clock);
  const auto d = sup.decide(user_says("hi"));
  CHECK(d.decision.next == RouteTarget::user);
  CHECK(d.decision.messages == "Is there anything I can help you with on your calendar?");
}

TEST_CASE("full graph turn with direct agents") {
  auto clock = test_ny_clock();
  auto cal = std::make_shared<InMemoryCalendarStore>(clock);
  auto sup = std::make_shared<Supervisor>(std::make_shared<DeterministicNlu>(), clock);
  auto g = build_calendar_graph(sup, direct_invoker(cal, clock), clock);
  GraphState s;
  s.transcript.push_back(Message{"supervisor", nlu_text::kGreeting, clock->now()});
  TurnTrace trace;
  s = g.run_turn(s, "Schedule 'Team Meeting' on 2025-05-01 at 10:00 AM", &trace);
  CHECK(s.next_route == "FINISH");
  CHECK(cal->size() == 1);
  REQUIRE(trace.effects.size() == 1);
  CHECK(trace.effects[0].at("kind") == "created");
  CHECK_FALSE(s.pending_directive);

  s = g.run_turn(s, "What's on my calendar on 2025-05-01?");
  CHECK(s.transcript.back().role == "supervisor");
  CHECK(s.transcript.back().content.find("Team Meeting") != std::string::npos);
}
