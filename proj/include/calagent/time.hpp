#pragma once

#include <absl/time/time.h>

#include <atomic>
#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace calagent {

/// UTC instant at millisecond resolution. All stored times use this.
using Instant = std::chrono::sys_time<std::chrono::milliseconds>;
/// Wall-clock reading in some zone, not yet bound to an instant.
using LocalTime = std::chrono::local_time<std::chrono::milliseconds>;
using Millis = std::chrono::milliseconds;

/// IANA time zone backed by the system tz database.
class TimeZone {
 public:
  TimeZone();  // UTC

  /// Throws Error(InvalidArgument) for an unknown zone name.
  static TimeZone load(std::string_view name);
  static TimeZone utc() { return TimeZone(); }

  const std::string& name() const noexcept { return name_; }
  const absl::TimeZone& native() const noexcept { return tz_; }

  /// Non-existent local times (DST gaps) shift forward; repeated ones take
  /// the earlier instant.
  Instant to_instant(LocalTime local) const;
  LocalTime to_local(Instant instant) const;

  friend bool operator==(const TimeZone& a, const TimeZone& b) {
    return a.name_ == b.name_;
  }

 private:
  std::string name_;
  absl::TimeZone tz_;
};

/// RFC 3339 with "Z" suffix; fractional seconds only when non-zero.
std::string format_utc(Instant t);
/// RFC 3339 with the zone's offset at that instant.
std::string format_in_zone(Instant t, const TimeZone& zone);
std::optional<Instant> parse_rfc3339(std::string_view text);

/// "Thu May 1, 10:00 AM" style rendering for chat replies.
std::string format_human(Instant t, const TimeZone& zone);
std::string format_human_time(Instant t, const TimeZone& zone);

/// Time source injected into every component that needs "now".
class ReferenceClock {
 public:
  virtual ~ReferenceClock() = default;
  virtual Instant now() const = 0;
  virtual const TimeZone& zone() const = 0;
};

class FixedClock final : public ReferenceClock {
 public:
  FixedClock(Instant now, TimeZone zone) : now_(now), zone_(std::move(zone)) {}
  Instant now() const override { return now_; }
  const TimeZone& zone() const override { return zone_; }

 private:
  Instant now_;
  TimeZone zone_;
};

/// Test clock that only moves when told to.
class ManualClock final : public ReferenceClock {
 public:
  explicit ManualClock(Instant start, TimeZone zone = TimeZone::utc())
      : now_ms_(start.time_since_epoch().count()), zone_(std::move(zone)) {}

  Instant now() const override { return Instant{Millis{now_ms_.load()}}; }
  const TimeZone& zone() const override { return zone_; }

  void set(Instant t) { now_ms_.store(t.time_since_epoch().count()); }
  void advance(Millis d) { now_ms_.fetch_add(d.count()); }

 private:
  std::atomic<std::int64_t> now_ms_;
  TimeZone zone_;
};

class SystemClock final : public ReferenceClock {
 public:
  explicit SystemClock(TimeZone zone = TimeZone::utc()) : zone_(std::move(zone)) {}
  Instant now() const override;
  const TimeZone& zone() const override { return zone_; }

 private:
  TimeZone zone_;
};

}  // namespace calagent
