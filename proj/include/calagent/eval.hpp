#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "calagent/calendar.hpp"
#include "calagent/config.hpp"
#include "calagent/directive.hpp"

namespace calagent {

enum class EffectKind { event_exists, event_absent, event_updated, availability_report_contains };

std::string_view to_string(EffectKind k) noexcept;
std::optional<EffectKind> effect_kind_from_string(std::string_view s);

/// Declarative post-state check over the final store and final reply.
struct ExpectedEffect {
  EffectKind kind = EffectKind::event_exists;
  std::optional<std::string> event_id;
  std::optional<std::string> title;
  std::optional<Instant> start;
  std::optional<Instant> end;
  std::optional<std::string> description;
  std::vector<std::string> reply_contains;
  /// Store size after the conversation, when given.
  std::optional<std::size_t> event_count;
};

struct TestCase {
  std::string case_id;
  std::string language;
  TaskType task_type = TaskType::schedule;
  std::vector<std::string> turns;
  std::vector<CalendarEvent> fixture;
  ExpectedEffect expected;
};

TestCase test_case_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TestCase& c);

/// One case per non-empty line. Throws CorpusParseFailure naming the line.
std::vector<TestCase> parse_corpus(std::string_view jsonl);
std::vector<TestCase> load_corpus(const std::filesystem::path& path);

/// Empty when the effect holds, else the reason it does not.
std::optional<std::string> check_effect(const ExpectedEffect& e,
                                        const std::vector<CalendarEvent>& final_store,
                                        const std::string& final_reply);

struct CaseResult {
  std::string case_id;
  std::string language;
  TaskType task_type = TaskType::schedule;
  bool passed = false;
  std::string failure;
  /// "role: content" lines; kept for failed cases only.
  std::vector<std::string> transcript;
};

struct Tally {
  std::size_t correct = 0;
  std::size_t total = 0;
  bool operator==(const Tally&) const = default;
};

struct EvalReport {
  std::map<std::string, std::map<TaskType, Tally>> cells;  // language -> task -> tally
  std::vector<CaseResult> cases;                           // sorted by case_id

  Tally language_total(const std::string& language) const;
  Tally overall() const;
};

nlohmann::json to_json(const EvalReport& r);

struct EvalOptions {
  std::string fixed_now = "2025-04-28T13:00:00Z";  // 09:00 in New York
  std::string time_zone = "America/New_York";
  std::uint64_t seed = 0;
  /// Backend settings; supervisor count and background tasks are forced.
  ServiceConfig service;
};

/// Each case runs on its own fresh service. Throws FixtureFailure for a
/// fixture the store rejects.
CaseResult run_case(const TestCase& c, const EvalOptions& options);
EvalReport run_corpus(const std::vector<TestCase>& cases, const EvalOptions& options);

/// Columns: Language, Schedule, Avail., Edit, Delete, Total, Success%.
std::string render_markdown(const EvalReport& r);
std::string render_csv(const EvalReport& r);
/// Per-cell tallies read back from render_csv output.
std::map<std::string, std::map<TaskType, Tally>> parse_csv(std::string_view csv);

}  // namespace calagent
