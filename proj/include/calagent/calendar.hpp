#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <vector>

#include "calagent/time.hpp"

namespace calagent {

/// Pre-creation payload of a calendar entry. Intervals are half-open
/// [start, end); `time_zone` is kept only for display.
struct EventDetails {
  std::string title;
  Instant start{};
  Instant end{};
  std::optional<std::string> description;
  std::string time_zone = "UTC";

  bool operator==(const EventDetails&) const = default;
};

/// Partial update. Unset fields are left alone.
struct EventPatch {
  std::optional<std::string> title;
  std::optional<Instant> start;
  std::optional<Instant> end;
  std::optional<std::string> description;
};

struct CalendarEvent {
  std::string event_id;
  EventDetails details;
  Instant created_at{};
  Instant updated_at{};

  bool operator==(const CalendarEvent&) const = default;
};

inline constexpr Instant kBeginningOfTime = Instant{Millis{-62135596800000}};  // 0001-01-01
inline constexpr Instant kEndOfTime = Instant{Millis{253402300799000}};        // 9999-12-31

/// Strict overlap of half-open intervals: touching endpoints do not conflict.
constexpr bool overlaps(Instant a_start, Instant a_end, Instant b_start, Instant b_end) {
  return std::max(a_start, b_start) < std::min(a_end, b_end);
}

/// Throws Error(ValidationFailure) unless title is non-empty and end > start.
void validate(const EventDetails& details);

/// Canonical wire form: {"id","title","start","end","description"}.
nlohmann::json to_json(const CalendarEvent& event);
/// Accepts the canonical form; missing id yields an empty event_id.
CalendarEvent event_from_json(const nlohmann::json& j);

/// Snapshot form adds time_zone/created_at/updated_at so reloads are lossless.
nlohmann::json to_snapshot_json(const CalendarEvent& event);
CalendarEvent event_from_snapshot_json(const nlohmann::json& j);

/// Sortable 26-character Crockford base32 ids (48-bit millisecond time +
/// 80-bit monotonic random part), prefixed with "evt_".
class IdGenerator {
 public:
  IdGenerator(std::shared_ptr<const ReferenceClock> clock, std::uint64_t seed,
              std::string prefix = "evt_");
  std::string next();

 private:
  std::shared_ptr<const ReferenceClock> clock_;
  std::string prefix_;
  std::mutex mu_;
  std::mt19937_64 rng_;
  std::int64_t last_ms_ = -1;
  std::uint64_t hi_ = 0;  // top 16 bits of the random part
  std::uint64_t lo_ = 0;  // low 64 bits
};

/// The five calendar tools every agent works through.
class CalendarStore {
 public:
  virtual ~CalendarStore() = default;

  virtual CalendarEvent create_event(const EventDetails& details) = 0;
  /// Events intersecting [start, end), ordered by start then id.
  virtual std::vector<CalendarEvent> list_events(Instant start, Instant end) const = 0;
  virtual std::vector<CalendarEvent> check_conflicts(const EventDetails& details) const = 0;
  virtual CalendarEvent update_event(const std::string& event_id, const EventPatch& patch) = 0;
  virtual CalendarEvent delete_event(const std::string& event_id) = 0;
  virtual std::optional<CalendarEvent> get_event(const std::string& event_id) const = 0;
};

class InMemoryCalendarStore final : public CalendarStore {
 public:
  /// With a snapshot path, existing contents are loaded at construction and
  /// every mutation is written through.
  explicit InMemoryCalendarStore(std::shared_ptr<const ReferenceClock> clock,
                                 std::uint64_t seed = 0,
                                 std::optional<std::filesystem::path> snapshot_path = std::nullopt);

  CalendarEvent create_event(const EventDetails& details) override;
  std::vector<CalendarEvent> list_events(Instant start, Instant end) const override;
  std::vector<CalendarEvent> check_conflicts(const EventDetails& details) const override;
  CalendarEvent update_event(const std::string& event_id, const EventPatch& patch) override;
  CalendarEvent delete_event(const std::string& event_id) override;
  std::optional<CalendarEvent> get_event(const std::string& event_id) const override;

  /// Inserts a record verbatim (fixtures, snapshot load). Duplicate ids are
  /// a ValidationFailure.
  void restore(const CalendarEvent& event);

  std::vector<CalendarEvent> all_events() const;
  std::size_t size() const;
  nlohmann::json snapshot() const;

 private:
  void write_through_locked() const;

  std::shared_ptr<const ReferenceClock> clock_;
  IdGenerator ids_;
  std::optional<std::filesystem::path> snapshot_path_;
  mutable std::shared_mutex mu_;
  std::map<std::string, CalendarEvent> events_;
};

struct RemoteCalendarConfig {
  /// e.g. "http://127.0.0.1:8089/calendar"; the path prefix is kept.
  std::string base_url;
  std::function<std::string()> token_provider;
  std::chrono::seconds timeout{10};
};

/// HTTP adapter speaking the canonical event schema with bearer auth:
///   GET    {base}/events?start=&end=
///   GET    {base}/events/{id}
///   POST   {base}/events
///   PATCH  {base}/events/{id}
///   DELETE {base}/events/{id}
std::unique_ptr<CalendarStore> remote_calendar_client(RemoteCalendarConfig config);

}  // namespace calagent
