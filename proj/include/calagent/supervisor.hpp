#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "calagent/agents.hpp"
#include "calagent/directive.hpp"
#include "calagent/graph.hpp"
#include "calagent/nlu.hpp"

namespace calagent {

struct RoutingDecision {
  RouteTarget next = RouteTarget::user;
  std::string messages;

  bool operator==(const RoutingDecision&) const = default;
};

/// Strips markdown fences, then requires a JSON object with exactly the keys
/// `next` and `messages`. Throws Error(MalformedDecision).
RoutingDecision parse_decision(std::string_view raw);
std::string to_wire(const RoutingDecision& d);

struct SupervisorOptions {
  int nlu_retries = 2;     // extra attempts after a backend error
  int repair_retries = 2;  // re-prompts after malformed output
};

struct SupervisorDecision {
  RoutingDecision decision;
  /// Directive decoded for an agent route, or the partial one behind a
  /// gating question.
  std::optional<TaskDirective> directive;
  bool gated = false;
  int nlu_calls = 0;
};

/// Stateless routing policy over an NLU backend.
class Supervisor {
 public:
  Supervisor(std::shared_ptr<const NluBackend> nlu, std::shared_ptr<const ReferenceClock> clock,
             SupervisorOptions options = {});

  /// Pre: the transcript ends with a user or agent message.
  SupervisorDecision decide(const GraphState& state) const;

  /// Graph handler for the supervisor node.
  NodeDelta run_node(const GraphState& state) const;

  const NluBackend& nlu() const noexcept { return *nlu_; }

 private:
  std::string interpret_with_retries(std::vector<Message>& transcript, int& calls) const;

  std::shared_ptr<const NluBackend> nlu_;
  std::shared_ptr<const ReferenceClock> clock_;
  SupervisorOptions options_;
};

/// Executes one agent for a directive. The simple form calls the agent
/// functions directly; the distributed layer goes through the registry.
using AgentInvoker = std::function<AgentResult(RouteTarget agent, const TaskDirective& directive)>;

AgentInvoker direct_invoker(std::shared_ptr<CalendarStore> store,
                            std::shared_ptr<const ReferenceClock> clock);

/// Supervisor plus the four agent nodes, star-wired.
CompiledGraph build_calendar_graph(std::shared_ptr<const Supervisor> supervisor,
                                   AgentInvoker invoker,
                                   std::shared_ptr<const ReferenceClock> clock,
                                   std::size_t step_budget = 16);

}  // namespace calagent
