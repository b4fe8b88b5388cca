#include "calagent/calendar.hpp"

#include <httplib.h>

#include <fstream>

#include "calagent/errors.hpp"
#include "http_util.hpp"

namespace calagent {
namespace {

constexpr char kCrockford[] = "0123456789ABCDEFGHJKMNPQRSTVWXYZ";

Instant require_time(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw Error(ErrorCode::ValidationFailure, std::string("missing timestamp field: ") + key);
  }
  auto t = parse_rfc3339(j[key].get<std::string>());
  if (!t) throw Error(ErrorCode::ValidationFailure, "bad RFC 3339 timestamp: " + j[key].dump());
  return *t;
}

std::string zone_or_utc(const std::string& name) {
  try {
    return TimeZone::load(name).name();
  } catch (const Error&) {
    return "UTC";
  }
}

bool by_start_then_id(const CalendarEvent& a, const CalendarEvent& b) {
  if (a.details.start != b.details.start) return a.details.start < b.details.start;
  return a.event_id < b.event_id;
}

}  // namespace

void validate(const EventDetails& details) {
  if (details.title.empty()) throw Error(ErrorCode::ValidationFailure, "event title is empty");
  if (details.end <= details.start) {
    throw Error(ErrorCode::ValidationFailure, "event end must be after its start");
  }
}

nlohmann::json to_json(const CalendarEvent& event) {
  const auto zone = TimeZone::load(zone_or_utc(event.details.time_zone));
  nlohmann::json j;
  j["id"] = event.event_id;
  j["title"] = event.details.title;
  j["start"] = format_in_zone(event.details.start, zone);
  j["end"] = format_in_zone(event.details.end, zone);
  j["description"] = event.details.description ? nlohmann::json(*event.details.description)
                                               : nlohmann::json(nullptr);
  return j;
}

CalendarEvent event_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ValidationFailure, "event must be a JSON object");
  CalendarEvent e;
  if (j.contains("id") && j["id"].is_string()) e.event_id = j["id"].get<std::string>();
  if (!j.contains("title") || !j["title"].is_string()) {
    throw Error(ErrorCode::ValidationFailure, "event title missing");
  }
  e.details.title = j["title"].get<std::string>();
  e.details.start = require_time(j, "start");
  e.details.end = require_time(j, "end");
  if (j.contains("description") && j["description"].is_string()) {
    e.details.description = j["description"].get<std::string>();
  }
  return e;
}

nlohmann::json to_snapshot_json(const CalendarEvent& event) {
  nlohmann::json j = to_json(event);
  j["time_zone"] = event.details.time_zone;
  j["created_at"] = format_utc(event.created_at);
  j["updated_at"] = format_utc(event.updated_at);
  return j;
}

CalendarEvent event_from_snapshot_json(const nlohmann::json& j) {
  CalendarEvent e = event_from_json(j);
  if (j.contains("time_zone") && j["time_zone"].is_string()) {
    e.details.time_zone = zone_or_utc(j["time_zone"].get<std::string>());
  }
  e.created_at = j.contains("created_at") ? require_time(j, "created_at") : Instant{};
  e.updated_at = j.contains("updated_at") ? require_time(j, "updated_at") : e.created_at;
  return e;
}

// ---------------------------------------------------------------------------

IdGenerator::IdGenerator(std::shared_ptr<const ReferenceClock> clock, std::uint64_t seed,
                         std::string prefix)
    : clock_(std::move(clock)), prefix_(std::move(prefix)), rng_(seed) {}

std::string IdGenerator::next() {
  std::lock_guard lock(mu_);
  std::int64_t ms = clock_->now().time_since_epoch().count();
  if (ms < 0) ms = 0;
  if (ms <= last_ms_) {
    // Same or earlier millisecond: keep the time part, bump the random part.
    ms = last_ms_;
    if (++lo_ == 0) hi_ = (hi_ + 1) & 0xFFFF;
  } else {
    last_ms_ = ms;
    lo_ = rng_();
    // Leave headroom so increments within one millisecond never wrap.
    hi_ = rng_() & 0x7FFF;
  }

  std::string out(26, '0');
  auto time = static_cast<std::uint64_t>(ms) & 0xFFFFFFFFFFFFULL;
  for (int i = 9; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kCrockford[time & 31];
    time >>= 5;
  }
  // 80 random bits: hi_ (16) then lo_ (64), emitted 5 bits at a time.
  std::uint64_t hi = hi_, lo = lo_;
  for (int i = 25; i >= 10; --i) {
    out[static_cast<std::size_t>(i)] = kCrockford[lo & 31];
    lo = (lo >> 5) | ((hi & 31) << 59);
    hi >>= 5;
  }
  return prefix_ + out;
}

// ---------------------------------------------------------------------------

InMemoryCalendarStore::InMemoryCalendarStore(std::shared_ptr<const ReferenceClock> clock,
                                             std::uint64_t seed,
                                             std::optional<std::filesystem::path> snapshot_path)
    : clock_(clock), ids_(std::move(clock), seed), snapshot_path_(std::move(snapshot_path)) {
  if (snapshot_path_ && std::filesystem::exists(*snapshot_path_)) {
    std::ifstream in(*snapshot_path_);
    nlohmann::json arr;
    try {
      in >> arr;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::StoreFailure, std::string("corrupt calendar snapshot: ") + e.what());
    }
    if (!arr.is_array()) throw Error(ErrorCode::StoreFailure, "calendar snapshot is not an array");
    for (const auto& item : arr) {
      CalendarEvent e = event_from_snapshot_json(item);
      events_.emplace(e.event_id, std::move(e));
    }
  }
}

CalendarEvent InMemoryCalendarStore::create_event(const EventDetails& details) {
  validate(details);
  std::unique_lock lock(mu_);
  CalendarEvent e;
  e.event_id = ids_.next();
  e.details = details;
  e.created_at = e.updated_at = clock_->now();
  events_.emplace(e.event_id, e);
  write_through_locked();
  return e;
}

std::vector<CalendarEvent> InMemoryCalendarStore::list_events(Instant start, Instant end) const {
  if (end < start) throw Error(ErrorCode::RangeInverted, "range end precedes range start");
  std::shared_lock lock(mu_);
  std::vector<CalendarEvent> out;
  for (const auto& [id, e] : events_) {
    if (overlaps(e.details.start, e.details.end, start, end)) out.push_back(e);
  }
  std::sort(out.begin(), out.end(), by_start_then_id);
  return out;
}

std::vector<CalendarEvent> InMemoryCalendarStore::check_conflicts(const EventDetails& details) const {
  validate(details);
  return list_events(details.start, details.end);
}

CalendarEvent InMemoryCalendarStore::update_event(const std::string& event_id,
                                                  const EventPatch& patch) {
  std::unique_lock lock(mu_);
  auto it = events_.find(event_id);
  if (it == events_.end()) throw Error(ErrorCode::UnknownEventId, "no event with id " + event_id);
  CalendarEvent merged = it->second;
  if (patch.title) merged.details.title = *patch.title;
  if (patch.start) merged.details.start = *patch.start;
  if (patch.end) merged.details.end = *patch.end;
  if (patch.description) merged.details.description = *patch.description;
  validate(merged.details);
  merged.updated_at = std::max(clock_->now(), merged.created_at);
  it->second = merged;
  write_through_locked();
  return merged;
}

CalendarEvent InMemoryCalendarStore::delete_event(const std::string& event_id) {
  std::unique_lock lock(mu_);
  auto it = events_.find(event_id);
  if (it == events_.end()) throw Error(ErrorCode::UnknownEventId, "no event with id " + event_id);
  CalendarEvent removed = std::move(it->second);
  events_.erase(it);
  write_through_locked();
  return removed;
}

std::optional<CalendarEvent> InMemoryCalendarStore::get_event(const std::string& event_id) const {
  std::shared_lock lock(mu_);
  auto it = events_.find(event_id);
  if (it == events_.end()) return std::nullopt;
  return it->second;
}

void InMemoryCalendarStore::restore(const CalendarEvent& event) {
  validate(event.details);
  if (event.event_id.empty()) throw Error(ErrorCode::ValidationFailure, "restored event needs an id");
  std::unique_lock lock(mu_);
  if (!events_.emplace(event.event_id, event).second) {
    throw Error(ErrorCode::ValidationFailure, "duplicate event id " + event.event_id);
  }
  write_through_locked();
}

std::vector<CalendarEvent> InMemoryCalendarStore::all_events() const {
  return list_events(kBeginningOfTime, kEndOfTime);
}

std::size_t InMemoryCalendarStore::size() const {
  std::shared_lock lock(mu_);
  return events_.size();
}

nlohmann::json InMemoryCalendarStore::snapshot() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : all_events()) arr.push_back(to_snapshot_json(e));
  return arr;
}

void InMemoryCalendarStore::write_through_locked() const {
  if (!snapshot_path_) return;
  std::vector<CalendarEvent> ordered;
  ordered.reserve(events_.size());
  for (const auto& [id, e] : events_) ordered.push_back(e);
  std::sort(ordered.begin(), ordered.end(), by_start_then_id);
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : ordered) arr.push_back(to_snapshot_json(e));

  auto tmp = *snapshot_path_;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorCode::StoreFailure, "cannot write snapshot " + tmp.string());
    out << arr.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, *snapshot_path_);
}

// ---------------------------------------------------------------------------

namespace {

class RemoteCalendarClient final : public CalendarStore {
 public:
  explicit RemoteCalendarClient(RemoteCalendarConfig config)
      : config_(std::move(config)), url_(detail::split_url(config_.base_url)) {}

  CalendarEvent create_event(const EventDetails& details) override {
    validate(details);
    CalendarEvent draft;
    draft.details = details;
    nlohmann::json body = to_json(draft);
    body.erase("id");
    auto res = call([&](httplib::Client& c) {
      return c.Post(path("/events"), body.dump(), "application/json");
    });
    return parse_event(res.body, details.time_zone);
  }

  std::vector<CalendarEvent> list_events(Instant start, Instant end) const override {
    if (end < start) throw Error(ErrorCode::RangeInverted, "range end precedes range start");
    httplib::Params params{{"start", format_utc(start)}, {"end", format_utc(end)}};
    auto res = call([&](httplib::Client& c) {
      return c.Get(path("/events"), params, httplib::Headers{});
    });
    nlohmann::json arr = parse_body(res.body);
    if (!arr.is_array()) throw Error(ErrorCode::TransportFailure, "expected an event array");
    std::vector<CalendarEvent> out;
    for (const auto& item : arr) out.push_back(event_from_json(item));
    std::sort(out.begin(), out.end(), by_start_then_id);
    return out;
  }

  std::vector<CalendarEvent> check_conflicts(const EventDetails& details) const override {
    validate(details);
    // For positive-length candidates, half-open intersection is exactly
    // strict overlap, so a range listing answers the question.
    return list_events(details.start, details.end);
  }

  CalendarEvent update_event(const std::string& event_id, const EventPatch& patch) override {
    nlohmann::json body = nlohmann::json::object();
    if (patch.title) body["title"] = *patch.title;
    if (patch.start) body["start"] = format_utc(*patch.start);
    if (patch.end) body["end"] = format_utc(*patch.end);
    if (patch.description) body["description"] = *patch.description;
    auto res = call([&](httplib::Client& c) {
      return c.Patch(path("/events/" + event_id), body.dump(), "application/json");
    });
    return parse_event(res.body, "UTC");
  }

  CalendarEvent delete_event(const std::string& event_id) override {
    auto res = call([&](httplib::Client& c) { return c.Delete(path("/events/" + event_id)); });
    return parse_event(res.body, "UTC");
  }

  std::optional<CalendarEvent> get_event(const std::string& event_id) const override {
    try {
      auto res = call([&](httplib::Client& c) { return c.Get(path("/events/" + event_id)); });
      return parse_event(res.body, "UTC");
    } catch (const Error& e) {
      if (e.code() == ErrorCode::UnknownEventId) return std::nullopt;
      throw;
    }
  }

 private:
  std::string path(const std::string& suffix) const { return url_.path + suffix; }

  template <typename Fn>
  httplib::Response call(Fn&& fn) const {
    httplib::Client client(url_.origin);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    if (config_.token_provider) client.set_bearer_token_auth(config_.token_provider());
    httplib::Result res = fn(client);
    if (!res) {
      throw Error(ErrorCode::TransportFailure,
                  "calendar request failed: " + httplib::to_string(res.error()));
    }
    const int status = res->status;
    if (status == 401 || status == 403) {
      throw Error(ErrorCode::AuthFailure, "calendar rejected credentials (" +
                                              std::to_string(status) + ")");
    }
    if (status == 404) throw Error(ErrorCode::UnknownEventId, remote_message(res->body));
    if (status >= 400 && status < 500) {
      throw Error(ErrorCode::RemoteValidationFailure, remote_message(res->body));
    }
    if (status >= 500) {
      throw Error(ErrorCode::TransportFailure, "calendar server error " + std::to_string(status));
    }
    return *res;
  }

  static std::string remote_message(const std::string& body) {
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_object() && j.contains("error") && j["error"].is_string()) {
      return j["error"].get<std::string>();
    }
    return body.empty() ? "remote calendar error" : body;
  }

  static nlohmann::json parse_body(const std::string& body) {
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::TransportFailure, "malformed JSON from calendar");
    return j;
  }

  static CalendarEvent parse_event(const std::string& body, const std::string& zone) {
    CalendarEvent e = event_from_json(parse_body(body));
    e.details.time_zone = zone;
    return e;
  }

  RemoteCalendarConfig config_;
  detail::SplitUrl url_;
};

}  // namespace

std::unique_ptr<CalendarStore> remote_calendar_client(RemoteCalendarConfig config) {
  if (config.base_url.empty()) throw Error(ErrorCode::InvalidArgument, "calendar base URL required");
  return std::make_unique<RemoteCalendarClient>(std::move(config));
}

}  // namespace calagent
