#include "calagent/supervisor.hpp"

#include <nlohmann/json.hpp>

#include "calagent/temporal.hpp"
#include "text_util.hpp"

namespace calagent {

using namespace std::chrono;

namespace {

constexpr const char* kFirstTurnPrompt =
    "Is there anything I can help you with on your calendar?";

std::string strip_fences(std::string_view raw) {
  std::string s = detail::trim(raw);
  if (s.rfind("```", 0) == 0) {
    const auto nl = s.find('\n');
    s = nl == std::string::npos ? std::string() : s.substr(nl + 1);
    const auto close = s.rfind("```");
    if (close != std::string::npos) s = s.substr(0, close);
  }
  return detail::trim(s);
}

std::string local_stamp(LocalTime t) {
  const auto day = floor<days>(t);
  const auto tod = duration_cast<minutes>(t - day);
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d:%02d", static_cast<int>(tod.count() / 60),
                static_cast<int>(tod.count() % 60));
  return format_iso_date(year_month_day{sys_days{day.time_since_epoch()}}) + "T" + buf;
}

TaskDirective lookup_directive(const std::string& title, const ReferenceClock& clock) {
  const LocalTime today = floor<days>(clock.zone().to_local(clock.now()));
  TaskDirective d;
  d.task_type = TaskType::check_availability;
  d.slots[slot::title] = title;
  d.slots[slot::start_date] = local_stamp(today - days{365});
  d.slots[slot::end_date] = local_stamp(today + days{366});
  d.natural_instruction = render_instruction(d);
  return d;
}

bool agent_since_last_user(const std::vector<Message>& t) {
  for (auto it = t.rbegin(); it != t.rend(); ++it) {
    if (it->role == "user") return false;
    if (it->role.rfind("agent:", 0) == 0) return true;
  }
  return false;
}

bool first_decision(const std::vector<Message>& t) {
  std::size_t users = 0;
  for (const auto& m : t) {
    if (m.role.rfind("agent:", 0) == 0) return false;
    if (m.role == "user") ++users;
  }
  return users <= 1;
}

}  // namespace

RoutingDecision parse_decision(std::string_view raw) {
  const std::string body = strip_fences(raw);
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::MalformedDecision, "decision is not a JSON object");
  }
  if (j.size() != 2 || !j.contains("next") || !j.contains("messages")) {
    throw Error(ErrorCode::MalformedDecision,
                "decision must have exactly the keys 'next' and 'messages'");
  }
  if (!j["next"].is_string() || !j["messages"].is_string()) {
    throw Error(ErrorCode::MalformedDecision, "'next' and 'messages' must be strings");
  }
  const auto next = route_target_from_string(j["next"].get<std::string>());
  if (!next) {
    throw Error(ErrorCode::MalformedDecision, "unknown route '" + j["next"].get<std::string>() + "'");
  }
  return RoutingDecision{*next, j["messages"].get<std::string>()};
}

std::string to_wire(const RoutingDecision& d) {
  return nlohmann::json{{"next", to_string(d.next)}, {"messages", d.messages}}.dump();
}

Supervisor::Supervisor(std::shared_ptr<const NluBackend> nlu,
                       std::shared_ptr<const ReferenceClock> clock, SupervisorOptions options)
    : nlu_(std::move(nlu)), clock_(std::move(clock)), options_(options) {
  if (!nlu_ || !clock_) throw Error(ErrorCode::InvalidArgument, "supervisor needs an NLU and a clock");
}

std::string Supervisor::interpret_with_retries(std::vector<Message>& transcript, int& calls) const {
  std::string last_error;
  for (int attempt = 0; attempt <= options_.nlu_retries; ++attempt) {
    ++calls;
    try {
      return nlu_->interpret(transcript, *clock_);
    } catch (const std::exception& e) {
      last_error = e.what();
    }
  }
  throw Error(ErrorCode::NluFailure, "NLU backend '" + nlu_->name() + "' failed after " +
                                         std::to_string(options_.nlu_retries + 1) +
                                         " attempts: " + last_error);
}

SupervisorDecision Supervisor::decide(const GraphState& state) const {
  const auto& t = state.transcript;
  if (t.empty() || !(t.back().role == "user" || t.back().role.rfind("agent:", 0) == 0)) {
    throw Error(ErrorCode::InvalidArgument, "decide needs a transcript ending in a user or agent message");
  }

  SupervisorDecision out;
  std::vector<Message> working = t;
  RoutingDecision dec;
  for (int repair = 0;; ++repair) {
    const std::string raw = interpret_with_retries(working, out.nlu_calls);
    try {
      dec = parse_decision(raw);
      break;
    } catch (const Error& e) {
      if (repair == options_.repair_retries) {
        throw Error(ErrorCode::MalformedDecision,
                    std::string("NLU output still malformed after ") +
                        std::to_string(options_.repair_retries) + " repairs: " + e.what());
      }
      working.push_back(Message{"tool",
                                std::string("Your last reply could not be used (") + e.what() +
                                    "). Reply with only a JSON object with exactly the keys "
                                    "\"next\" and \"messages\".",
                                clock_->now()});
    }
  }

  if (is_agent(dec.next)) {
    TaskDirective d = decode_instruction(task_for(dec.next), dec.messages, *clock_);
    const bool id_addressed =
        d.task_type == TaskType::delete_event || d.task_type == TaskType::edit;
    if (id_addressed && !d.has(slot::event_id) && d.has(slot::title) &&
        (d.task_type == TaskType::delete_event || d.has(slot::edit_instruction)) &&
        !agent_since_last_user(t)) {
      // Ids come from the checker first.
      d = lookup_directive(d.slots[slot::title], *clock_);
      dec = RoutingDecision{RouteTarget::calendar_checker_agent, d.natural_instruction};
    }
    if (const auto missing = missing_slots(d); !missing.empty()) {
      out.gated = true;
      dec = RoutingDecision{RouteTarget::user, followup_question(d.task_type, missing.front())};
    } else if (d.natural_instruction.empty()) {
      d.natural_instruction = render_instruction(d);
      dec.messages = d.natural_instruction;
    }
    out.directive = std::move(d);
  }

  if (dec.next == RouteTarget::finish && first_decision(t)) {
    dec = RoutingDecision{RouteTarget::user, kFirstTurnPrompt};
  }
  if (detail::trim(dec.messages).empty()) {
    dec.messages = dec.next == RouteTarget::finish ? nlu_text::kFarewell : nlu_text::kClarify;
  }
  out.decision = std::move(dec);
  return out;
}

NodeDelta Supervisor::run_node(const GraphState& state) const {
  SupervisorDecision d = decide(state);
  NodeDelta delta;
  delta.messages.push_back(Message{std::string(kSupervisorNode), d.decision.messages, {}});
  delta.route = std::string(to_string(d.decision.next));
  if (d.directive) {
    delta.directive = std::optional<TaskDirective>(std::move(*d.directive));
  } else if (d.decision.next == RouteTarget::finish) {
    delta.directive = std::optional<TaskDirective>();
  }
  return delta;
}

AgentInvoker direct_invoker(std::shared_ptr<CalendarStore> store,
                            std::shared_ptr<const ReferenceClock> clock) {
  return [store, clock](RouteTarget agent, const TaskDirective& d) -> AgentResult {
    switch (agent) {
      case RouteTarget::event_scheduler_agent: return scheduler_run(d, *store, *clock);
      case RouteTarget::calendar_checker_agent: return checker_run(d, *store, *clock);
      case RouteTarget::event_remover_agent: return remover_run(d, *store, *clock);
      case RouteTarget::event_modifier_agent: return modifier_run(d, *store, *clock);
      default: break;
    }
    throw Error(ErrorCode::InvalidArgument, std::string(to_string(agent)) + " is not an agent");
  };
}

CompiledGraph build_calendar_graph(std::shared_ptr<const Supervisor> supervisor,
                                   AgentInvoker invoker,
                                   std::shared_ptr<const ReferenceClock> clock,
                                   std::size_t step_budget) {
  static constexpr RouteTarget kAgents[] = {
      RouteTarget::calendar_checker_agent, RouteTarget::event_scheduler_agent,
      RouteTarget::event_remover_agent, RouteTarget::event_modifier_agent};

  GraphSpec spec;
  const std::string sup(kSupervisorNode);
  spec.add_node(sup, [supervisor](const GraphState& s) { return supervisor->run_node(s); });
  spec.set_entry(sup);

  std::vector<std::string> targets{std::string(kUserRoute), std::string(kFinishRoute)};
  for (RouteTarget agent : kAgents) {
    const std::string name(to_string(agent));
    targets.push_back(name);
    spec.add_node(name, [invoker, clock, agent, name](const GraphState& s) {
      const TaskType task = task_for(agent);
      TaskDirective d;
      if (s.pending_directive && s.pending_directive->task_type == task) {
        d = *s.pending_directive;
      } else {
        std::string instruction;
        for (auto it = s.transcript.rbegin(); it != s.transcript.rend(); ++it) {
          if (it->role == kSupervisorNode) {
            instruction = it->content;
            break;
          }
        }
        d = decode_instruction(task, instruction, *clock);
      }
      const AgentResult r = invoker(agent, d);
      NodeDelta delta;
      delta.messages.push_back(Message{agent_role(name), format_report(r), {}});
      for (const auto& a : r.actions) delta.effects.push_back(to_json(a));
      return delta;
    });
    spec.add_edge(name, sup);
  }
  spec.add_conditional_edges(sup, targets, [](const GraphState& s) { return s.next_route; });
  return compile_graph(std::move(spec), GraphOptions{step_budget, std::move(clock)});
}

}  // namespace calagent
