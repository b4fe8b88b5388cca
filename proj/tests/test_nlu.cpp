#include <doctest.h>

#include "calagent/nlu.hpp"
#include "calagent/prompts.hpp"
#include "calagent/supervisor.hpp"
#include "support/fakes.hpp"
#include "support/helpers.hpp"

using namespace calagent;
using namespace calagent::testing;

namespace {

std::vector<Message> convo(std::initializer_list<std::pair<const char*, const char*>> msgs) {
  std::vector<Message> out;
  for (const auto& [role, text] : msgs) out.push_back(Message{role, text, {}});
  return out;
}

RoutingDecision interpret(std::initializer_list<std::pair<const char*, const char*>> msgs,
                          const ReferenceClock& clock) {
  return parse_decision(deterministic_interpret(convo(msgs), clock));
}

}  // namespace

TEST_CASE("afternoon availability routes to the checker with a 12:00-18:00 window") {
  auto clock = test_ny_clock();  // Monday 2025-04-28
  const auto d = interpret({{"user", "Am I free on Friday afternoon?"}}, *clock);
  CHECK(d.next == RouteTarget::calendar_checker_agent);
  const auto dir = decode_instruction(TaskType::check_availability, d.messages, *clock);
  CHECK(dir.slots.at("start_date") == "2025-05-02T12:00");
  CHECK(dir.slots.at("end_date") == "2025-05-02T18:00");
}

TEST_CASE("gibberish asks the user to clarify") {
  auto clock = test_ny_clock();
  const auto d = interpret({{"user", "blorp the zingus"}}, *clock);
  CHECK(d.next == RouteTarget::user);
  CHECK(d.messages == nlu_text::kClarify);
}

TEST_CASE("explicit event id goes straight to the remover") {
  auto clock = test_ny_clock();
  const auto d = interpret({{"user", "Delete event evt_01JT0000000000000000000007"}}, *clock);
  CHECK(d.next == RouteTarget::event_remover_agent);
  CHECK(decode_instruction(TaskType::delete_event, d.messages, *clock).slots.at("event_id") ==
        "evt_01JT0000000000000000000007");
}

TEST_CASE("complete schedule request yields the canonical instruction") {
  auto clock = test_ny_clock();
  const auto d = interpret({{"user", "Schedule an event titled 'Team Meeting' on 2025-05-01 at 10:00 AM."}}, *clock);
  CHECK(d.next == RouteTarget::event_scheduler_agent);
  CHECK(d.messages == "Schedule an event titled 'Team Meeting' on 2025-05-01 at 10:00 AM.");
}

TEST_CASE("follow-up answers fill the asked slot") {
  auto clock = test_ny_clock();
  const auto d = interpret({{"user", "Can you schedule 'Dentist' for me?"},
                            {"supervisor", "Which date should I schedule it on?"},
                            {"user", "tomorrow"},
                            {"supervisor", "What time should it start?"},
                            {"user", "3:30 PM"}},
                           *clock);
  CHECK(d.next == RouteTarget::event_scheduler_agent);
  CHECK(d.messages == "Schedule an event titled 'Dentist' on 2025-04-29 at 3:30 PM.");
}

TEST_CASE("an agent success finishes with the agent's text") {
  auto clock = test_ny_clock();
  const auto d = interpret({{"user", "Delete event evt_01JT0000000000000000000007"},
                            {"supervisor", "Delete the event with ID evt_01JT0000000000000000000007."},
                            {"agent:event_remover_agent", "ok: Deleted 'X'."}},
                           *clock);
  CHECK(d.next == RouteTarget::finish);
  CHECK(d.messages == "Deleted 'X'.");
}

TEST_CASE("thanks ends the conversation") {
  auto clock = test_ny_clock();
  const auto d = interpret({{"user", "Delete event evt_01JT0000000000000000000007"},
                            {"supervisor", "Deleted 'X'."},
                            {"user", "thanks!"}},
                           *clock);
  CHECK(d.next == RouteTarget::finish);
}

TEST_CASE("deterministic backend is a pure function of its input") {
  auto clock = test_ny_clock();
  const auto t = convo({{"user", "What's on my calendar tomorrow?"}});
  CHECK(deterministic_interpret(t, *clock) == deterministic_interpret(t, *clock));
}

TEST_CASE("rendered prompts fill the clock placeholders") {
  auto clock = test_ny_clock();
  const std::string p = render_prompt(PromptId::supervisor, *clock);
  CHECK(p.find("2025-04-28 09:00") != std::string::npos);
  CHECK(p.find("{current_date_time}") == std::string::npos);
  CHECK(p.find("Only send a task to another agent once you have") != std::string::npos);
}

TEST_CASE("remote backend against a fake chat endpoint") {
  auto clock = test_ny_clock();
  FakeChatEndpoint fake;
  RemoteNluConfig cfg{fake.base_url(), "test-model", "secret-key", std::chrono::seconds{5}};
  const auto transcript = convo({{"supervisor", nlu_text::kGreeting},
                                 {"user", "Schedule 'Demo' on 2025-05-01 at 10:00 AM"},
                                 {"agent:event_scheduler_agent", "ok: Scheduled."}});

  SUBCASE("canned reply comes back verbatim") {
    const std::string canned = R"({"next":"FINISH","messages":"Scheduled."})";
    fake.push({200, canned});
    CHECK(remote_interpret(transcript, *clock, cfg) == canned);
    const auto req = fake.requests().at(0);
    CHECK(req.at("model") == "test-model");
    CHECK(req.at("temperature") == 0);
    CHECK(fake.auth_headers().at(0) == "Bearer secret-key");
    const auto& msgs = req.at("messages");
    CHECK(msgs.at(0).at("role") == "system");
    CHECK(msgs.at(0).at("content").get<std::string>().find(
              "Only send a task to another agent once you have") != std::string::npos);
    CHECK(msgs.at(1).at("role") == "assistant");
    CHECK(msgs.at(2).at("role") == "user");
    CHECK(msgs.at(3).at("content").get<std::string>().find("event_scheduler_agent") != std::string::npos);
  }
  SUBCASE("server error is an EndpointError") {
    fake.push({500, ""});
    try {
      remote_interpret(transcript, *clock, cfg);
      FAIL("expected EndpointError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EndpointError);
    }
  }
  SUBCASE("no server is a TransportFailure") {
    RemoteNluConfig gone = cfg;
    gone.base_url = "http://127.0.0.1:1/v1";
    gone.timeout = std::chrono::seconds{1};
    try {
      remote_interpret(transcript, *clock, gone);
      FAIL("expected TransportFailure");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::TransportFailure);
    }
  }
}

TEST_CASE("attribute nouns are not read as event titles") {
  auto clock = test_ny_clock();
  for (const char* text : {"Change the time to 9 AM", "Update the date to tomorrow", "Move the start to 3 PM"}) {
    INFO(std::string(text));
    const auto d = interpret({{"user", text}}, *clock);
    CHECK(d.next == RouteTarget::user);
    CHECK(d.messages == followup_question(TaskType::edit, "title"));
  }
}
