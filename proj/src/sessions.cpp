#include "calagent/sessions.hpp"

#include <fstream>

#include "calagent/errors.hpp"

namespace calagent {

nlohmann::json to_json(const SessionRecord& r) {
  return nlohmann::json{
      {"session_id", r.session_id},
      {"state", to_json(r.state)},
      {"owner_supervisor", r.owner_supervisor ? nlohmann::json(*r.owner_supervisor) : nlohmann::json()},
      {"last_active", format_utc(r.last_active)},
      {"ttl_seconds", r.ttl.count()},
  };
}

SessionRecord session_from_json(const nlohmann::json& j) {
  try {
    SessionRecord r;
    r.session_id = j.at("session_id").get<std::string>();
    r.state = state_from_json(j.at("state"));
    if (!j.at("owner_supervisor").is_null()) {
      r.owner_supervisor = j.at("owner_supervisor").get<std::string>();
    }
    auto ts = parse_rfc3339(j.at("last_active").get<std::string>());
    if (!ts) throw Error(ErrorCode::InvalidArgument, "bad last_active timestamp");
    r.last_active = *ts;
    r.ttl = std::chrono::seconds{j.at("ttl_seconds").get<std::int64_t>()};
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed session record: ") + e.what());
  }
}

InMemorySessionStore::InMemorySessionStore(std::shared_ptr<const ReferenceClock> clock)
    : clock_(std::move(clock)) {
  if (!clock_) throw Error(ErrorCode::InvalidArgument, "session store needs a clock");
}

void InMemorySessionStore::check_available() const {
  if (!available_) throw Error(ErrorCode::StoreUnavailable, "session store is unavailable");
}

void InMemorySessionStore::put(const SessionRecord& record) {
  if (record.session_id.empty()) throw Error(ErrorCode::InvalidArgument, "session_id is empty");
  if (record.ttl <= std::chrono::seconds{0}) throw Error(ErrorCode::InvalidArgument, "ttl must be > 0");
  std::lock_guard lock(mu_);
  check_available();
  SessionRecord copy = record;
  auto it = records_.find(record.session_id);
  if (it != records_.end() && it->second.live_at(clock_->now())) {
    copy.last_active = std::max(copy.last_active, it->second.last_active);
  }
  records_[record.session_id] = std::move(copy);
}

std::optional<SessionRecord> InMemorySessionStore::get(const std::string& session_id) {
  std::lock_guard lock(mu_);
  check_available();
  auto it = records_.find(session_id);
  if (it == records_.end()) return std::nullopt;
  if (!it->second.live_at(clock_->now())) {
    records_.erase(it);
    return std::nullopt;
  }
  return it->second;
}

void InMemorySessionStore::touch(const std::string& session_id, Instant now) {
  std::lock_guard lock(mu_);
  check_available();
  auto it = records_.find(session_id);
  if (it == records_.end() || !it->second.live_at(now)) {
    if (it != records_.end()) records_.erase(it);
    throw Error(ErrorCode::UnknownSession, "session '" + session_id + "' is absent or expired");
  }
  it->second.last_active = std::max(it->second.last_active, now);
}

std::size_t InMemorySessionStore::sweep(Instant now) {
  std::lock_guard lock(mu_);
  check_available();
  return std::erase_if(records_, [&](const auto& kv) { return !kv.second.live_at(now); });
}

bool InMemorySessionStore::erase(const std::string& session_id) {
  std::lock_guard lock(mu_);
  check_available();
  auto it = records_.find(session_id);
  if (it == records_.end()) return false;
  const bool was_live = it->second.live_at(clock_->now());
  records_.erase(it);
  return was_live;
}

std::vector<SessionRecord> InMemorySessionStore::live_records() {
  std::lock_guard lock(mu_);
  check_available();
  const Instant now = clock_->now();
  std::vector<SessionRecord> out;
  for (const auto& [id, r] : records_) {
    if (r.live_at(now)) out.push_back(r);
  }
  return out;
}

std::size_t InMemorySessionStore::raw_size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

nlohmann::json InMemorySessionStore::dump() {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& r : live_records()) out[r.session_id] = to_json(r);
  return out;
}

void InMemorySessionStore::restore(const nlohmann::json& dump) {
  if (!dump.is_object()) throw Error(ErrorCode::InvalidArgument, "session dump must be a JSON object");
  for (const auto& [id, value] : dump.items()) {
    SessionRecord r = session_from_json(value);
    if (r.session_id != id) {
      throw Error(ErrorCode::InvalidArgument, "session dump key '" + id + "' does not match its record");
    }
    put(r);
  }
}

void InMemorySessionStore::dump_to(const std::filesystem::path& path) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorCode::StoreUnavailable, "cannot write " + tmp);
    out << dump().dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

void InMemorySessionStore::restore_from(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return;
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::InvalidArgument, path.string() + " is not valid JSON");
  restore(j);
}

void InMemorySessionStore::set_available(bool available) {
  std::lock_guard lock(mu_);
  available_ = available;
}

SessionSweeper::SessionSweeper(std::shared_ptr<SessionStore> store,
                               std::shared_ptr<const ReferenceClock> clock,
                               std::chrono::milliseconds interval)
    : store_(std::move(store)), clock_(std::move(clock)), interval_(interval) {
  if (interval_ <= std::chrono::milliseconds{0}) {
    throw Error(ErrorCode::InvalidArgument, "sweep interval must be > 0");
  }
  thread_ = std::jthread([this](std::stop_token stop) {
    std::unique_lock lock(mu_);
    while (!stop.stop_requested()) {
      if (cv_.wait_for(lock, stop, interval_, [] { return false; })) break;
      if (stop.stop_requested()) break;
      lock.unlock();
      std::size_t n = 0;
      try {
        n = store_->sweep(clock_->now());
      } catch (const Error&) {
        // Store outage: try again next tick.
      }
      lock.lock();
      removed_ += n;
    }
  });
}

SessionSweeper::~SessionSweeper() {
  thread_.request_stop();
  cv_.notify_all();
}

std::size_t SessionSweeper::total_removed() const {
  std::lock_guard lock(mu_);
  return removed_;
}

}  // namespace calagent
