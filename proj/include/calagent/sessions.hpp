#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <stop_token>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "calagent/graph.hpp"
#include "calagent/time.hpp"

namespace calagent {

inline constexpr std::chrono::seconds kDefaultSessionTtl{1800};

struct SessionRecord {
  std::string session_id;
  GraphState state;
  std::optional<std::string> owner_supervisor;
  Instant last_active{};
  std::chrono::seconds ttl = kDefaultSessionTtl;

  /// Live iff now - last_active < ttl.
  bool live_at(Instant now) const { return now - last_active < ttl; }
  bool operator==(const SessionRecord&) const = default;
};

nlohmann::json to_json(const SessionRecord& r);
SessionRecord session_from_json(const nlohmann::json& j);

/// Shared session state seen by every supervisor instance. Per-key
/// operations are atomic.
class SessionStore {
 public:
  virtual ~SessionStore() = default;
  /// Last writer wins; last_active never moves backwards.
  virtual void put(const SessionRecord& record) = 0;
  /// Live record or nothing. Expired records are dropped on sight.
  virtual std::optional<SessionRecord> get(const std::string& session_id) = 0;
  /// Throws Error(UnknownSession) when absent or expired at `now`.
  virtual void touch(const std::string& session_id, Instant now) = 0;
  /// Removes every record expired at `now`; returns how many.
  virtual std::size_t sweep(Instant now) = 0;
  virtual bool erase(const std::string& session_id) = 0;
  virtual std::vector<SessionRecord> live_records() = 0;
};

class InMemorySessionStore final : public SessionStore {
 public:
  explicit InMemorySessionStore(std::shared_ptr<const ReferenceClock> clock);

  void put(const SessionRecord& record) override;
  std::optional<SessionRecord> get(const std::string& session_id) override;
  void touch(const std::string& session_id, Instant now) override;
  std::size_t sweep(Instant now) override;
  bool erase(const std::string& session_id) override;
  std::vector<SessionRecord> live_records() override;

  /// Stored records including expired ones not yet swept.
  std::size_t raw_size() const;

  /// All live sessions as {session_id: record}.
  nlohmann::json dump();
  void restore(const nlohmann::json& dump);
  void dump_to(const std::filesystem::path& path);
  void restore_from(const std::filesystem::path& path);

  /// Failure injection: while unavailable every call throws StoreUnavailable.
  void set_available(bool available);

 private:
  void check_available() const;

  std::shared_ptr<const ReferenceClock> clock_;
  mutable std::mutex mu_;
  std::map<std::string, SessionRecord> records_;
  bool available_ = true;
};

/// Periodic background sweep.
class SessionSweeper {
 public:
  SessionSweeper(std::shared_ptr<SessionStore> store, std::shared_ptr<const ReferenceClock> clock,
                 std::chrono::milliseconds interval);
  ~SessionSweeper();
  SessionSweeper(const SessionSweeper&) = delete;
  SessionSweeper& operator=(const SessionSweeper&) = delete;

  std::size_t total_removed() const;

 private:
  std::shared_ptr<SessionStore> store_;
  std::shared_ptr<const ReferenceClock> clock_;
  std::chrono::milliseconds interval_;
  mutable std::mutex mu_;
  std::condition_variable_any cv_;
  std::size_t removed_ = 0;
  std::jthread thread_;
};

}  // namespace calagent
