#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "calagent/directive.hpp"
#include "calagent/errors.hpp"
#include "calagent/time.hpp"

namespace calagent {

inline constexpr std::string_view kUserRoute = "user";
inline constexpr std::string_view kFinishRoute = "FINISH";
inline constexpr std::string_view kSupervisorNode = "supervisor";

bool is_sentinel(std::string_view route) noexcept;

/// role is one of: user, supervisor, tool, agent:<name>.
struct Message {
  std::string role;
  std::string content;
  Instant ts{};

  bool operator==(const Message&) const = default;
};

bool is_valid_role(std::string_view role) noexcept;
std::string agent_role(std::string_view agent_name);

/// Conversation state threaded through the graph. Serializes to one JSON
/// object whose keys are ordered by name.
struct GraphState {
  std::string session_id;
  std::vector<Message> transcript;
  std::string next_route = std::string(kUserRoute);
  std::optional<TaskDirective> pending_directive;
  std::uint64_t turn_count = 0;

  bool operator==(const GraphState&) const = default;
};

nlohmann::json to_json(const GraphState& state);
GraphState state_from_json(const nlohmann::json& j);
std::string serialize(const GraphState& state);
GraphState deserialize(std::string_view text);

/// What a node hands back to the executor. Handlers never mutate state.
struct NodeDelta {
  std::vector<Message> messages;
  /// Route proposal written to next_route before the node's edge runs.
  std::optional<std::string> route;
  /// Outer optional: touch pending_directive at all; inner: new value.
  std::optional<std::optional<TaskDirective>> directive;
  /// Side effects reported to the caller of the turn (not persisted).
  std::vector<nlohmann::json> effects;
};

using NodeHandler = std::function<NodeDelta(const GraphState&)>;
using RouteSelector = std::function<std::string(const GraphState&)>;

struct ConditionalEdge {
  std::vector<std::string> targets;  // every route the selector may return
  RouteSelector select;
};

class GraphSpec {
 public:
  GraphSpec& add_node(std::string name, NodeHandler handler);
  GraphSpec& set_entry(std::string name);
  GraphSpec& add_conditional_edges(std::string from, std::vector<std::string> targets,
                                   RouteSelector select);
  GraphSpec& add_edge(std::string from, std::string to);

 private:
  friend class CompiledGraph;
  std::map<std::string, NodeHandler> nodes_;
  std::vector<std::string> entries_;
  std::map<std::string, ConditionalEdge> edges_;
};

/// Activations and effects observed during a turn.
struct TurnTrace {
  std::vector<std::string> activations;
  std::vector<nlohmann::json> effects;
};

struct GraphOptions {
  std::size_t step_budget = 16;
  std::shared_ptr<const ReferenceClock> clock;
};

class StepBudgetExceeded : public Error {
 public:
  StepBudgetExceeded(const std::string& what, GraphState state)
      : Error(ErrorCode::StepBudgetExceeded, what), state_(std::move(state)) {}
  /// State after the aborted turn, with a diagnostic message appended.
  const GraphState& state() const noexcept { return state_; }

 private:
  GraphState state_;
};

/// Wraps a node failure. The cause code is kept when the node threw an Error.
class HandlerFailure : public Error {
 public:
  HandlerFailure(const std::string& what, std::optional<ErrorCode> cause)
      : Error(ErrorCode::HandlerFailure, what), cause_(cause) {}
  std::optional<ErrorCode> cause() const noexcept { return cause_; }

 private:
  std::optional<ErrorCode> cause_;
};

/// Immutable after compile; safe to share across threads.
class CompiledGraph {
 public:
  /// Validates route closure and the supervisor-star topology.
  static CompiledGraph compile(GraphSpec spec, GraphOptions options);

  const std::string& entry() const noexcept { return entry_; }
  std::set<std::string> routes() const;
  std::size_t step_budget() const noexcept { return options_.step_budget; }

  /// Runs the node named by state.next_route exactly once.
  GraphState step(const GraphState& state, TurnTrace* trace = nullptr) const;

  /// Appends the user's message and steps from the entry node until the
  /// route settles on user or FINISH.
  GraphState run_turn(const GraphState& state, std::string_view user_input,
                      TurnTrace* trace = nullptr) const;

 private:
  CompiledGraph() = default;

  std::map<std::string, NodeHandler> nodes_;
  std::map<std::string, ConditionalEdge> edges_;
  std::string entry_;
  GraphOptions options_;
};

inline CompiledGraph compile_graph(GraphSpec spec, GraphOptions options) {
  return CompiledGraph::compile(std::move(spec), std::move(options));
}

}  // namespace calagent
