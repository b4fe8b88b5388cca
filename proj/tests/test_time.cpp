#include <doctest.h>

#include "calagent/errors.hpp"
#include "calagent/time.hpp"
#include "support/helpers.hpp"

using namespace calagent;
using namespace calagent::testing;
using namespace std::chrono;

TEST_CASE("rfc3339 parse and format") {
  CHECK(format_utc(at("2025-05-01T10:00:00-04:00")) == "2025-05-01T14:00:00Z");
  CHECK(format_utc(at("2025-05-01T14:00:00.250Z")) == "2025-05-01T14:00:00.25Z");
  CHECK(parse_rfc3339(format_utc(at("2025-05-01T14:00:00.250Z"))) == at("2025-05-01T14:00:00.250Z"));
  CHECK_FALSE(parse_rfc3339("2025-05-01"));
  CHECK_FALSE(parse_rfc3339("not a time"));
  CHECK_FALSE(parse_rfc3339("2025-13-01T00:00:00Z"));
}

TEST_CASE("zone conversion follows the tz database") {
  const TimeZone ny = TimeZone::load("America/New_York");
  const Instant t = at("2025-05-01T14:00:00Z");
  CHECK(format_in_zone(t, ny) == "2025-05-01T10:00:00-04:00");
  CHECK(ny.to_instant(ny.to_local(t)) == t);
  // Winter offset.
  CHECK(format_in_zone(at("2025-01-15T15:00:00Z"), ny) == "2025-01-15T10:00:00-05:00");
  CHECK_THROWS_AS(TimeZone::load("Mars/Olympus_Mons"), Error);
}

TEST_CASE("DST gap shifts forward, overlap takes the earlier instant") {
  const TimeZone ny = TimeZone::load("America/New_York");
  // 2025-03-09 02:30 does not exist in New York.
  const LocalTime gap = local_days{2025y / March / 9} + hours{2} + minutes{30};
  CHECK(format_in_zone(ny.to_instant(gap), ny) == "2025-03-09T03:30:00-04:00");
  // 2025-11-02 01:30 happens twice.
  const LocalTime twice = local_days{2025y / November / 2} + hours{1} + minutes{30};
  CHECK(format_utc(ny.to_instant(twice)) == "2025-11-02T05:30:00Z");
}

TEST_CASE("human formatting") {
  const TimeZone ny = TimeZone::load("America/New_York");
  CHECK(format_human(at("2025-05-01T14:00:00Z"), ny) == "Thu May 1, 10:00 AM");
  CHECK(format_human_time(at("2025-05-01T16:30:00Z"), ny) == "12:30 PM");
}

TEST_CASE("manual clock only moves when told") {
  ManualClock c(at("2025-05-01T00:00:00Z"));
  const Instant t0 = c.now();
  CHECK(c.now() == t0);
  c.advance(seconds{5});
  CHECK(c.now() - t0 == seconds{5});
}
