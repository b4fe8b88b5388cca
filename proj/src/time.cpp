#include "calagent/time.hpp"

#include <absl/time/civil_time.h>

#include "calagent/errors.hpp"

namespace calagent {
namespace {

absl::Time to_absl(Instant t) {
  return absl::FromUnixMillis(t.time_since_epoch().count());
}

Instant from_absl(absl::Time t) { return Instant{Millis{absl::ToUnixMillis(t)}}; }

constexpr const char* kRfc3339 = "%Y-%m-%dT%H:%M:%E*S%Ez";

}  // namespace

TimeZone::TimeZone() : name_("UTC"), tz_(absl::UTCTimeZone()) {}

TimeZone TimeZone::load(std::string_view name) {
  TimeZone zone;
  if (name == "UTC" || name == "Etc/UTC") return zone;
  if (!absl::LoadTimeZone(std::string(name), &zone.tz_)) {
    throw Error(ErrorCode::InvalidArgument, "unknown time zone: " + std::string(name));
  }
  zone.name_ = std::string(name);
  return zone;
}

Instant TimeZone::to_instant(LocalTime local) const {
  const auto ms = local.time_since_epoch().count();
  const auto secs = ms >= 0 ? ms / 1000 : -((-ms + 999) / 1000);
  const auto rem = ms - secs * 1000;
  const absl::CivilSecond civil = absl::CivilSecond(1970, 1, 1, 0, 0, 0) + secs;
  // pre applies the offset in force before any transition: a skipped local
  // time lands past the gap, a repeated one resolves to its first occurrence.
  const absl::Time base = tz_.At(civil).pre;
  return from_absl(base) + Millis{rem};
}

LocalTime TimeZone::to_local(Instant instant) const {
  const absl::Time t = to_absl(instant);
  const absl::CivilSecond civil = absl::ToCivilSecond(t, tz_);
  const auto secs = civil - absl::CivilSecond(1970, 1, 1, 0, 0, 0);
  const auto ms = instant.time_since_epoch().count();
  auto rem = ms % 1000;
  if (rem < 0) rem += 1000;
  return LocalTime{Millis{secs * 1000 + rem}};
}

std::string format_utc(Instant t) {
  std::string s = absl::FormatTime(kRfc3339, to_absl(t), absl::UTCTimeZone());
  if (s.size() >= 6 && s.compare(s.size() - 6, 6, "+00:00") == 0) {
    s.replace(s.size() - 6, 6, "Z");
  }
  return s;
}

std::string format_in_zone(Instant t, const TimeZone& zone) {
  if (zone.name() == "UTC") return format_utc(t);
  return absl::FormatTime(kRfc3339, to_absl(t), zone.native());
}

std::optional<Instant> parse_rfc3339(std::string_view text) {
  absl::Time t;
  std::string err;
  std::string input(text);
  if (!absl::ParseTime(absl::RFC3339_full, input, &t, &err)) return std::nullopt;
  return from_absl(t);
}

std::string format_human(Instant t, const TimeZone& zone) {
  const absl::TimeZone& tz = zone.native();
  std::string s = absl::FormatTime("%a %b %d, %I:%M %p", to_absl(t), tz);
  // "May 01" -> "May 1", "09:00" -> "9:00"
  auto strip = [&s](std::size_t pos) {
    if (pos < s.size() && s[pos] == '0') s.erase(pos, 1);
  };
  strip(8);
  const auto comma = s.find(", ");
  if (comma != std::string::npos) strip(comma + 2);
  return s;
}

std::string format_human_time(Instant t, const TimeZone& zone) {
  const absl::TimeZone& tz = zone.native();
  std::string s = absl::FormatTime("%I:%M %p", to_absl(t), tz);
  if (!s.empty() && s[0] == '0') s.erase(0, 1);
  return s;
}

Instant SystemClock::now() const {
  return std::chrono::time_point_cast<Millis>(std::chrono::system_clock::now());
}

}  // namespace calagent
