#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "calagent/graph.hpp"
#include "calagent/time.hpp"

namespace calagent {

/// Turns a transcript into raw supervisor decision text
/// ({"next": ..., "messages": ...}, possibly wrapped in noise).
class NluBackend {
 public:
  virtual ~NluBackend() = default;
  virtual std::string name() const = 0;
  virtual std::string interpret(const std::vector<Message>& transcript,
                                const ReferenceClock& clock) const = 0;
};

/// Rule-based English interpreter. Pure function of (transcript, clock).
std::string deterministic_interpret(const std::vector<Message>& transcript,
                                    const ReferenceClock& clock);

class DeterministicNlu final : public NluBackend {
 public:
  std::string name() const override { return "deterministic"; }
  std::string interpret(const std::vector<Message>& transcript,
                        const ReferenceClock& clock) const override {
    return deterministic_interpret(transcript, clock);
  }
};

struct RemoteNluConfig {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string model;
  std::string api_key;
  std::chrono::seconds timeout{30};

  /// CALAGENT_NLU_BASE_URL, CALAGENT_NLU_MODEL, CALAGENT_NLU_API_KEY.
  static RemoteNluConfig from_env();
};

/// Request body sent to {base_url}/chat/completions.
nlohmann::json build_chat_request(const std::vector<Message>& transcript,
                                  const ReferenceClock& clock, const RemoteNluConfig& config);

/// Throws TransportFailure (no response) or EndpointError (non-2xx).
std::string remote_interpret(const std::vector<Message>& transcript, const ReferenceClock& clock,
                             const RemoteNluConfig& config);

class RemoteNlu final : public NluBackend {
 public:
  explicit RemoteNlu(RemoteNluConfig config) : config_(std::move(config)) {}
  std::string name() const override { return "remote"; }
  std::string interpret(const std::vector<Message>& transcript,
                        const ReferenceClock& clock) const override {
    return remote_interpret(transcript, clock, config_);
  }

 private:
  RemoteNluConfig config_;
};

/// Fixed supervisor wording the deterministic backend relies on.
namespace nlu_text {
inline constexpr const char* kGreeting =
    "Hello! I can schedule, check, edit or delete calendar events for you. What would you like "
    "to do?";
inline constexpr const char* kClarify =
    "Sorry, I didn't understand that. I can schedule, check, edit or delete calendar events. "
    "What would you like to do?";
inline constexpr const char* kFarewell = "You're welcome! Let me know if you need anything else.";
inline constexpr const char* kCancelled = "Okay, I've dropped that request.";
inline constexpr const char* kLookupPrefix = "Find events titled ";
}  // namespace nlu_text

}  // namespace calagent
