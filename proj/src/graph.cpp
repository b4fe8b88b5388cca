#include "calagent/graph.hpp"

#include <algorithm>

namespace calagent {

bool is_sentinel(std::string_view route) noexcept {
  return route == kUserRoute || route == kFinishRoute;
}

bool is_valid_role(std::string_view role) noexcept {
  if (role == "user" || role == "supervisor" || role == "tool") return true;
  return role.size() > 6 && role.substr(0, 6) == "agent:";
}

std::string agent_role(std::string_view agent_name) {
  return "agent:" + std::string(agent_name);
}

nlohmann::json to_json(const GraphState& state) {
  nlohmann::json transcript = nlohmann::json::array();
  for (const auto& m : state.transcript) {
    transcript.push_back({{"role", m.role}, {"content", m.content}, {"ts", format_utc(m.ts)}});
  }
  return nlohmann::json{
      {"session_id", state.session_id},
      {"transcript", std::move(transcript)},
      {"next_route", state.next_route},
      {"pending_directive",
       state.pending_directive ? to_json(*state.pending_directive) : nlohmann::json(nullptr)},
      {"turn_count", state.turn_count},
  };
}

GraphState state_from_json(const nlohmann::json& j) {
  try {
    GraphState s;
    s.session_id = j.at("session_id").get<std::string>();
    for (const auto& m : j.at("transcript")) {
      Message msg;
      msg.role = m.at("role").get<std::string>();
      msg.content = m.at("content").get<std::string>();
      auto ts = parse_rfc3339(m.at("ts").get<std::string>());
      if (!ts) throw Error(ErrorCode::InvalidArgument, "bad transcript timestamp");
      if (!is_valid_role(msg.role)) throw Error(ErrorCode::InvalidArgument, "bad role " + msg.role);
      msg.ts = *ts;
      s.transcript.push_back(std::move(msg));
    }
    s.next_route = j.at("next_route").get<std::string>();
    const auto& pd = j.at("pending_directive");
    if (!pd.is_null()) s.pending_directive = directive_from_json(pd);
    s.turn_count = j.at("turn_count").get<std::uint64_t>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed graph state: ") + e.what());
  }
}

std::string serialize(const GraphState& state) { return to_json(state).dump(); }

GraphState deserialize(std::string_view text) {
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::InvalidArgument, "graph state is not valid JSON");
  return state_from_json(j);
}

// ---------------------------------------------------------------------------

GraphSpec& GraphSpec::add_node(std::string name, NodeHandler handler) {
  nodes_[std::move(name)] = std::move(handler);
  return *this;
}

GraphSpec& GraphSpec::set_entry(std::string name) {
  entries_.push_back(std::move(name));
  return *this;
}

GraphSpec& GraphSpec::add_conditional_edges(std::string from, std::vector<std::string> targets,
                                            RouteSelector select) {
  edges_[std::move(from)] = ConditionalEdge{std::move(targets), std::move(select)};
  return *this;
}

GraphSpec& GraphSpec::add_edge(std::string from, std::string to) {
  std::string target = to;
  return add_conditional_edges(std::move(from), {std::move(to)},
                               [target](const GraphState&) { return target; });
}

CompiledGraph CompiledGraph::compile(GraphSpec spec, GraphOptions options) {
  if (spec.nodes_.empty()) throw Error(ErrorCode::InvalidArgument, "graph has no nodes");
  if (!options.clock) throw Error(ErrorCode::InvalidArgument, "graph needs a clock");
  if (options.step_budget == 0) throw Error(ErrorCode::InvalidArgument, "step budget must be > 0");

  std::set<std::string> distinct(spec.entries_.begin(), spec.entries_.end());
  if (distinct.empty()) throw Error(ErrorCode::InvalidArgument, "graph has no entry node");
  if (distinct.size() > 1) {
    throw Error(ErrorCode::MultipleEntryViolation, "graph declares more than one entry node");
  }
  const std::string entry = *distinct.begin();
  if (!spec.nodes_.count(entry)) {
    throw Error(ErrorCode::UnknownRoute, "entry node '" + entry + "' does not exist");
  }

  for (const auto& [name, handler] : spec.nodes_) {
    if (is_sentinel(name)) throw Error(ErrorCode::InvalidArgument, "node name is reserved: " + name);
  }

  for (const auto& [from, edge] : spec.edges_) {
    if (!spec.nodes_.count(from)) {
      throw Error(ErrorCode::UnknownRoute, "edge leaves unknown node '" + from + "'");
    }
    for (const auto& target : edge.targets) {
      if (!is_sentinel(target) && !spec.nodes_.count(target)) {
        throw Error(ErrorCode::UnknownRoute, "edge " + from + " -> '" + target + "' names no node");
      }
    }
  }

  // Every non-entry node must return to the entry and nowhere else.
  for (const auto& [name, handler] : spec.nodes_) {
    if (name == entry) continue;
    auto it = spec.edges_.find(name);
    if (it == spec.edges_.end() || it->second.targets.empty()) {
      throw Error(ErrorCode::NonStarTopology, "node '" + name + "' has no edge back to " + entry);
    }
    for (const auto& target : it->second.targets) {
      if (target != entry) {
        throw Error(ErrorCode::NonStarTopology,
                    "node '" + name + "' routes to '" + target + "' instead of " + entry);
      }
    }
  }
  if (!spec.edges_.count(entry)) {
    throw Error(ErrorCode::InvalidArgument, "entry node '" + entry + "' has no outgoing edges");
  }

  CompiledGraph g;
  g.nodes_ = std::move(spec.nodes_);
  g.edges_ = std::move(spec.edges_);
  g.entry_ = entry;
  g.options_ = std::move(options);
  return g;
}

std::set<std::string> CompiledGraph::routes() const {
  std::set<std::string> out;
  for (const auto& [name, h] : nodes_) out.insert(name);
  return out;
}

GraphState CompiledGraph::step(const GraphState& state, TurnTrace* trace) const {
  if (is_sentinel(state.next_route)) {
    throw Error(ErrorCode::SentinelStep, "cannot step from sentinel route " + state.next_route);
  }
  auto node = nodes_.find(state.next_route);
  if (node == nodes_.end()) {
    throw Error(ErrorCode::UnknownRoute, "no node named '" + state.next_route + "'");
  }

  NodeDelta delta;
  try {
    delta = node->second(state);
  } catch (const Error& e) {
    throw HandlerFailure("node '" + node->first + "' failed: " + e.what(), e.code());
  } catch (const std::exception& e) {
    throw HandlerFailure("node '" + node->first + "' failed: " + e.what(), std::nullopt);
  }

  GraphState next = state;
  const Instant now = options_.clock->now();
  for (auto& m : delta.messages) {
    if (!is_valid_role(m.role) || m.content.empty()) {
      throw HandlerFailure("node '" + node->first + "' emitted an invalid message", std::nullopt);
    }
    if (m.ts == Instant{}) m.ts = now;
    next.transcript.push_back(std::move(m));
  }
  if (delta.directive) next.pending_directive = *delta.directive;
  if (delta.route) next.next_route = *delta.route;

  const ConditionalEdge& edge = edges_.at(node->first);
  std::string route;
  try {
    route = edge.select(next);
  } catch (const std::exception& e) {
    throw HandlerFailure("edge of '" + node->first + "' failed: " + e.what(), std::nullopt);
  }
  if (std::find(edge.targets.begin(), edge.targets.end(), route) == edge.targets.end()) {
    throw Error(ErrorCode::UnknownRoute,
                "node '" + node->first + "' selected undeclared route '" + route + "'");
  }
  next.next_route = route;

  if (trace) {
    trace->activations.push_back(node->first);
    for (auto& e : delta.effects) trace->effects.push_back(std::move(e));
  }
  return next;
}

GraphState CompiledGraph::run_turn(const GraphState& state, std::string_view user_input,
                                   TurnTrace* trace) const {
  if (user_input.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw Error(ErrorCode::InvalidArgument, "user input is empty");
  }
  if (!is_sentinel(state.next_route)) {
    throw Error(ErrorCode::InvalidArgument,
                "a turn can only start when the graph awaits the user (route is " +
                    state.next_route + ")");
  }

  GraphState current = state;
  current.transcript.push_back(Message{"user", std::string(user_input), options_.clock->now()});
  current.next_route = entry_;

  std::size_t steps = 0;
  while (!is_sentinel(current.next_route)) {
    if (steps == options_.step_budget) {
      current.transcript.push_back(
          Message{std::string(kSupervisorNode),
                  "Sorry, I could not finish that request (routing did not settle after " +
                      std::to_string(options_.step_budget) + " steps). Could you rephrase it?",
                  options_.clock->now()});
      current.next_route = std::string(kUserRoute);
      current.turn_count = state.turn_count + 1;
      throw StepBudgetExceeded("turn exceeded the step budget of " +
                                   std::to_string(options_.step_budget),
                               std::move(current));
    }
    current = step(current, trace);
    ++steps;
  }
  current.turn_count = state.turn_count + 1;
  return current;
}

}  // namespace calagent
