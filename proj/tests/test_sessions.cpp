#include <doctest.h>

#include <filesystem>
#include <map>
#include <random>
#include <thread>

#include "calagent/sessions.hpp"
#include "support/helpers.hpp"

using namespace calagent;
using namespace calagent::testing;
using namespace std::chrono_literals;

namespace {

SessionRecord record(const std::string& id, Instant last, std::chrono::seconds ttl = kDefaultSessionTtl) {
  SessionRecord r;
  r.session_id = id;
  r.state.session_id = id;
  r.owner_supervisor = "supervisor-1";
  r.last_active = last;
  r.ttl = ttl;
  return r;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("expiry boundary is exclusive at last_active + ttl") {
  auto clock = test_utc_clock();
  InMemorySessionStore store(clock);
  const Instant t0 = clock->now();
  store.put(record("ses_a", t0));

  clock->set(t0 + 1799s);
  CHECK(store.get("ses_a"));
  clock->set(t0 + 1800s);
  CHECK_FALSE(store.get("ses_a"));
  CHECK(store.raw_size() == 0);
}

TEST_CASE("touch extends life; touching an expired session fails") {
  auto clock = test_utc_clock();
  InMemorySessionStore store(clock);
  const Instant t0 = clock->now();
  store.put(record("ses_a", t0));
  store.touch("ses_a", t0 + 1000s);
  clock->set(t0 + 2500s);
  CHECK(store.get("ses_a"));
  CHECK(code_of([&] { store.touch("ses_a", t0 + 2800s); }) == ErrorCode::UnknownSession);
  CHECK(code_of([&] { store.touch("ses_missing", t0); }) == ErrorCode::UnknownSession);
}

TEST_CASE("sweep removes exactly the expired records") {
  auto clock = test_utc_clock();
  InMemorySessionStore store(clock);
  const Instant t0 = clock->now();
  store.put(record("ses_short", t0, 60s));
  store.put(record("ses_long", t0, 3600s));
  CHECK(store.sweep(t0 + 59s) == 0);
  CHECK(store.sweep(t0 + 60s) == 1);
  CHECK(store.raw_size() == 1);
  CHECK(store.live_records().at(0).session_id == "ses_long");
}

TEST_CASE("last_active never moves backwards on overwrite") {
  auto clock = test_utc_clock();
  InMemorySessionStore store(clock);
  const Instant t0 = clock->now();
  store.put(record("ses_a", t0 + 100s));
  store.put(record("ses_a", t0));
  CHECK(store.get("ses_a")->last_active == t0 + 100s);
}

TEST_CASE("invalid records are rejected") {
  auto clock = test_utc_clock();
  InMemorySessionStore store(clock);
  CHECK(code_of([&] { store.put(record("", clock->now())); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { store.put(record("ses_a", clock->now(), 0s)); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("unavailable store fails every call") {
  auto clock = test_utc_clock();
  InMemorySessionStore store(clock);
  store.put(record("ses_a", clock->now()));
  store.set_available(false);
  CHECK(code_of([&] { store.get("ses_a"); }) == ErrorCode::StoreUnavailable);
  CHECK(code_of([&] { store.put(record("ses_b", clock->now())); }) == ErrorCode::StoreUnavailable);
  CHECK(code_of([&] { store.sweep(clock->now()); }) == ErrorCode::StoreUnavailable);
  store.set_available(true);
  CHECK(store.get("ses_a"));
}

TEST_CASE("record JSON round trip and dump/restore") {
  auto clock = test_utc_clock();
  InMemorySessionStore store(clock);
  auto r = record("ses_a", clock->now(), 900s);
  r.state.transcript.push_back(Message{"user", "hello", clock->now()});
  r.owner_supervisor.reset();
  CHECK(session_from_json(to_json(r)) == r);
  CHECK(to_json(r).at("owner_supervisor").is_null());
  CHECK(to_json(r).at("ttl_seconds") == 900);

  store.put(r);
  store.put(record("ses_b", clock->now()));
  const auto path = std::filesystem::temp_directory_path() / "calagent_sessions_test.json";
  store.dump_to(path);
  InMemorySessionStore other(clock);
  other.restore_from(path);
  std::filesystem::remove(path);
  CHECK(other.dump() == store.dump());
  CHECK(*other.get("ses_a") == r);
}

TEST_CASE("model-based: random ops agree with a reference map") {
  auto clock = test_utc_clock();
  InMemorySessionStore store(clock);
  struct Model {
    Instant last;
    std::chrono::seconds ttl;
  };
  std::map<std::string, Model> model;
  std::mt19937 rng(1234);
  const Instant t0 = clock->now();
  Instant now = t0;
  auto model_live = [&](const std::string& id) {
    auto it = model.find(id);
    return it != model.end() && now - it->second.last < it->second.ttl;
  };

  for (int i = 0; i < 2000; ++i) {
    const std::string id = "ses_" + std::to_string(rng() % 12);
    switch (rng() % 5) {
      case 0: {
        const std::chrono::seconds ttl{1 + rng() % 600};
        Instant last = now;
        if (model_live(id) && model[id].last > last) last = model[id].last;
        model[id] = Model{last, ttl};
        store.put(record(id, now, ttl));
        break;
      }
      case 1: {
        const bool live = model_live(id);
        if (!live) model.erase(id);
        CHECK(store.get(id).has_value() == live);
        break;
      }
      case 2: {
        if (model_live(id)) {
          model[id].last = std::max(model[id].last, now);
          store.touch(id, now);
        } else {
          model.erase(id);
          CHECK(code_of([&] { store.touch(id, now); }) == ErrorCode::UnknownSession);
        }
        break;
      }
      case 3: {
        std::size_t expected = 0;
        for (auto it = model.begin(); it != model.end();) {
          if (now - it->second.last >= it->second.ttl) {
            it = model.erase(it);
            ++expected;
          } else {
            ++it;
          }
        }
        CHECK(store.sweep(now) == expected);
        break;
      }
      case 4: {
        now += std::chrono::seconds{rng() % 120};
        clock->set(now);
        break;
      }
    }
  }
  std::size_t live = 0;
  for (const auto& [id, m] : model) live += model_live(id) ? 1 : 0;
  CHECK(store.live_records().size() == live);
}

TEST_CASE("background sweeper removes expired records") {
  auto clock = test_utc_clock();
  auto store = std::make_shared<InMemorySessionStore>(clock);
  const Instant t0 = clock->now();
  for (int i = 0; i < 5; ++i) store->put(record("ses_" + std::to_string(i), t0, 10s));
  clock->set(t0 + 11s);
  SessionSweeper sweeper(store, clock, 10ms);
  for (int i = 0; i < 200 && sweeper.total_removed() < 5; ++i) std::this_thread::sleep_for(5ms);
  CHECK(sweeper.total_removed() == 5);
  CHECK(store->raw_size() == 0);
}
