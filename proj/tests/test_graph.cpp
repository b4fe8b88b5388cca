#include <doctest.h>

#include <random>

#include "calagent/graph.hpp"
#include "support/helpers.hpp"

using namespace calagent;
using namespace calagent::testing;

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

NodeDelta say(std::string role, std::string text, std::optional<std::string> route = std::nullopt) {
  NodeDelta d;
  d.messages.push_back(Message{std::move(role), std::move(text), {}});
  d.route = std::move(route);
  return d;
}

const std::vector<std::string> kAgents{"calendar_checker_agent", "event_scheduler_agent",
                                       "event_remover_agent", "event_modifier_agent"};

/// Supervisor whose route comes from `choose`; agents just report.
GraphSpec star(std::function<std::string(const GraphState&)> choose) {
  GraphSpec spec;
  spec.add_node("supervisor", [choose](const GraphState& s) { return say("supervisor", "routing", choose(s)); });
  spec.set_entry("supervisor");
  std::vector<std::string> targets{"user", "FINISH"};
  for (const auto& a : kAgents) {
    targets.push_back(a);
    spec.add_node(a, [a](const GraphState&) { return say("agent:" + a, "ok: done"); });
    spec.add_edge(a, "supervisor");
  }
  spec.add_conditional_edges("supervisor", targets, [](const GraphState& s) { return s.next_route; });
  return spec;
}

}  // namespace

TEST_CASE("compile accepts the supervisor star") {
  auto clock = test_utc_clock();
  CHECK_NOTHROW(compile_graph(star([](const GraphState&) { return "user"; }), {16, clock}));
}

TEST_CASE("compile rejects edges to unknown nodes") {
  auto clock = test_utc_clock();
  GraphSpec spec = star([](const GraphState&) { return "user"; });
  spec.add_node("ghost_source", [](const GraphState&) { return NodeDelta{}; });
  spec.add_edge("ghost_source", "ghost");
  CHECK(code_of([&] { compile_graph(spec, {16, clock}); }) == ErrorCode::UnknownRoute);
}

TEST_CASE("compile rejects agent-to-agent edges") {
  auto clock = test_utc_clock();
  GraphSpec spec;
  spec.add_node("supervisor", [](const GraphState&) { return NodeDelta{}; });
  spec.set_entry("supervisor");
  spec.add_node("event_scheduler_agent", [](const GraphState&) { return NodeDelta{}; });
  spec.add_node("event_remover_agent", [](const GraphState&) { return NodeDelta{}; });
  spec.add_conditional_edges("supervisor", {"event_scheduler_agent", "user"},
                             [](const GraphState& s) { return s.next_route; });
  spec.add_edge("event_scheduler_agent", "event_remover_agent");
  spec.add_edge("event_remover_agent", "supervisor");
  CHECK(code_of([&] { compile_graph(spec, {16, clock}); }) == ErrorCode::NonStarTopology);
}

TEST_CASE("a second entry is a MultipleEntryViolation") {
  GraphSpec spec;
  spec.add_node("supervisor", [](const GraphState&) { return NodeDelta{}; });
  spec.add_node("other", [](const GraphState&) { return NodeDelta{}; });
  spec.set_entry("supervisor");
  spec.set_entry("other");
  auto clock = test_utc_clock();
  CHECK(code_of([&] { compile_graph(spec, {16, clock}); }) == ErrorCode::MultipleEntryViolation);
}

TEST_CASE("step on an agent appends its output and returns to the supervisor") {
  auto clock = test_utc_clock();
  auto g = compile_graph(star([](const GraphState&) { return "user"; }), {16, clock});
  GraphState s;
  s.next_route = "event_scheduler_agent";
  s.transcript.push_back(Message{"user", "hi", clock->now()});
  const GraphState out = g.step(s);
  REQUIRE(out.transcript.size() == 2);
  CHECK(out.transcript.back().role == "agent:event_scheduler_agent");
  CHECK(out.transcript.back().ts == clock->now());
  CHECK(out.next_route == "supervisor");
}

TEST_CASE("stepping a sentinel is an error") {
  auto clock = test_utc_clock();
  auto g = compile_graph(star([](const GraphState&) { return "user"; }), {16, clock});
  GraphState s;
  s.next_route = "FINISH";
  CHECK(code_of([&] { g.step(s); }) == ErrorCode::SentinelStep);
}

TEST_CASE("a failing handler leaves the state byte-identical") {
  auto clock = test_utc_clock();
  GraphSpec spec = star([](const GraphState&) -> std::string { throw Error(ErrorCode::NluFailure, "boom"); });
  auto g = compile_graph(spec, {16, clock});
  GraphState s;
  s.session_id = "s1";
  s.transcript.push_back(Message{"user", "hello", clock->now()});
  s.next_route = "supervisor";
  const std::string before = serialize(s);
  try {
    g.step(s);
    FAIL("expected HandlerFailure");
  } catch (const HandlerFailure& e) {
    CHECK(e.cause() == ErrorCode::NluFailure);
  }
  CHECK(serialize(s) == before);
}

TEST_CASE("run_turn threads the user message through to a sentinel") {
  auto clock = test_utc_clock();
  auto g = compile_graph(star([](const GraphState& s) {
                           return s.transcript.back().role == "user" ? "calendar_checker_agent" : "user";
                         }),
                         {16, clock});
  GraphState s;
  TurnTrace trace;
  const GraphState out = g.run_turn(s, "What's on my calendar tomorrow?", &trace);
  CHECK(out.next_route == "user");
  CHECK(out.turn_count == 1);
  REQUIRE(out.transcript.size() == 4);
  CHECK(out.transcript[0].role == "user");
  CHECK(out.transcript[1].role == "supervisor");
  CHECK(out.transcript[2].role == "agent:calendar_checker_agent");
  CHECK(out.transcript[3].role == "supervisor");
  CHECK(trace.activations == std::vector<std::string>{"supervisor", "calendar_checker_agent", "supervisor"});
}

TEST_CASE("empty input is rejected without touching state") {
  auto clock = test_utc_clock();
  auto g = compile_graph(star([](const GraphState&) { return "user"; }), {16, clock});
  GraphState s;
  CHECK(code_of([&] { g.run_turn(s, "   "); }) == ErrorCode::InvalidArgument);
  CHECK(s.transcript.empty());
}

TEST_CASE("livelocked supervisor hits the step budget after 16 steps") {
  auto clock = test_utc_clock();
  auto g = compile_graph(star([](const GraphState&) { return "calendar_checker_agent"; }), {16, clock});
  GraphState s;
  try {
    g.run_turn(s, "loop forever");
    FAIL("expected StepBudgetExceeded");
  } catch (const StepBudgetExceeded& e) {
    // user message + 16 node outputs + diagnostic
    CHECK(e.state().transcript.size() == 1 + 16 + 1);
    CHECK(e.state().next_route == "user");
  }
}

TEST_CASE("property: GraphState JSON round trip over generated states") {
  std::mt19937_64 rng(17);
  const char* roles[] = {"user", "supervisor", "tool", "agent:event_scheduler_agent"};
  for (int i = 0; i < 300; ++i) {
    GraphState s;
    s.session_id = "ses_" + std::to_string(rng());
    const int n = static_cast<int>(rng() % 12);
    for (int k = 0; k < n; ++k) {
      std::string text;
      for (int c = 0, len = static_cast<int>(rng() % 40); c < len; ++c) {
        text += static_cast<char>(32 + rng() % 95);
      }
      text += "\xC3\xA9\n\"";
      s.transcript.push_back(Message{roles[rng() % 4], text, Instant{Millis{static_cast<std::int64_t>(rng() % 4000000000000ULL)}}});
    }
    s.next_route = rng() % 2 ? "user" : "FINISH";
    if (rng() % 2) {
      TaskDirective d;
      d.task_type = static_cast<TaskType>(rng() % 4);
      d.slots["title"] = "t" + std::to_string(rng() % 100);
      d.natural_instruction = "x";
      s.pending_directive = d;
    }
    s.turn_count = rng() % 1000;
    CHECK(deserialize(serialize(s)) == s);
    CHECK(serialize(deserialize(serialize(s))) == serialize(s));
  }
}
