#pragma once

#include <memory>
#include <random>

#include "calagent/calendar.hpp"
#include "calagent/time.hpp"

namespace calagent::testing {

inline Instant at(const char* rfc3339) {
  auto t = parse_rfc3339(rfc3339);
  if (!t) throw std::runtime_error(std::string("bad test timestamp ") + rfc3339);
  return *t;
}

inline std::shared_ptr<ManualClock> test_ny_clock(const char* now = "2025-04-28T13:00:00Z") {
  return std::make_shared<ManualClock>(at(now), TimeZone::load("America/New_York"));
}

inline std::shared_ptr<ManualClock> test_utc_clock(const char* now = "2025-05-01T09:00:00Z") {
  return std::make_shared<ManualClock>(at(now), TimeZone::utc());
}

inline EventDetails details(std::string title, Instant start, Instant end) {
  EventDetails d;
  d.title = std::move(title);
  d.start = start;
  d.end = end;
  return d;
}

/// Brute-force intersection of half-open intervals, written independently
/// of calendar::overlaps: walk the points of the shorter interval.
inline bool intersects_oracle(std::int64_t a0, std::int64_t a1, std::int64_t b0, std::int64_t b1) {
  if (a1 - a0 > b1 - b0) {
    std::swap(a0, b0);
    std::swap(a1, b1);
  }
  for (std::int64_t x = a0; x < a1; ++x) {
    if (b0 <= x && x < b1) return true;
  }
  return false;
}

}  // namespace calagent::testing
