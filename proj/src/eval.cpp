#include "calagent/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "calagent/errors.hpp"
#include "calagent/service.hpp"
#include "text_util.hpp"

namespace calagent {

namespace {

constexpr TaskType kColumns[] = {TaskType::schedule, TaskType::check_availability, TaskType::edit,
                                 TaskType::delete_event};
constexpr const char* kHeaders[] = {"Language", "Schedule", "Avail.", "Edit",
                                    "Delete",   "Total",    "Success%"};

Instant require_instant(const nlohmann::json& j, const char* key) {
  auto t = parse_rfc3339(j.at(key).get<std::string>());
  if (!t) throw Error(ErrorCode::CorpusParseFailure, std::string("'") + key + "' is not RFC 3339");
  return *t;
}

std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

std::string percent(const Tally& t) {
  if (t.total == 0) return "-";
  const double p = 100.0 * static_cast<double>(t.correct) / static_cast<double>(t.total);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.0f%%", p);
  return buf;
}

std::string frac(const Tally& t) { return std::to_string(t.correct) + "/" + std::to_string(t.total); }

std::vector<std::vector<std::string>> table_rows(const EvalReport& r) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& [lang, tasks] : r.cells) {
    std::vector<std::string> row{lang};
    for (TaskType t : kColumns) {
      auto it = tasks.find(t);
      row.push_back(frac(it == tasks.end() ? Tally{} : it->second));
    }
    const Tally total = r.language_total(lang);
    row.push_back(frac(total));
    row.push_back(percent(total));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string_view to_string(EffectKind k) noexcept {
  switch (k) {
    case EffectKind::event_exists: return "event_exists";
    case EffectKind::event_absent: return "event_absent";
    case EffectKind::event_updated: return "event_updated";
    case EffectKind::availability_report_contains: return "availability_report_contains";
  }
  return "event_exists";
}

std::optional<EffectKind> effect_kind_from_string(std::string_view s) {
  for (EffectKind k : {EffectKind::event_exists, EffectKind::event_absent, EffectKind::event_updated,
                       EffectKind::availability_report_contains}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

TestCase test_case_from_json(const nlohmann::json& j) {
  try {
    TestCase c;
    c.case_id = j.at("case_id").get<std::string>();
    c.language = j.at("language").get<std::string>();
    const auto task = task_type_from_string(j.at("task_type").get<std::string>());
    if (!task) throw Error(ErrorCode::CorpusParseFailure, "unknown task_type");
    c.task_type = *task;
    c.turns = j.at("turns").get<std::vector<std::string>>();
    if (c.case_id.empty() || c.turns.empty()) {
      throw Error(ErrorCode::CorpusParseFailure, "case_id and turns must be non-empty");
    }
    if (j.contains("fixture")) {
      for (const auto& e : j.at("fixture")) c.fixture.push_back(event_from_json(e));
    }
    const auto& x = j.at("expected_effect");
    const auto kind = effect_kind_from_string(x.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::CorpusParseFailure, "unknown expected_effect kind");
    c.expected.kind = *kind;
    if (x.contains("event_id")) c.expected.event_id = x["event_id"].get<std::string>();
    if (x.contains("title")) c.expected.title = x["title"].get<std::string>();
    if (x.contains("start")) c.expected.start = require_instant(x, "start");
    if (x.contains("end")) c.expected.end = require_instant(x, "end");
    if (x.contains("description")) c.expected.description = x["description"].get<std::string>();
    if (x.contains("reply_contains")) {
      c.expected.reply_contains = x["reply_contains"].get<std::vector<std::string>>();
    }
    if (x.contains("event_count")) c.expected.event_count = x["event_count"].get<std::size_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorpusParseFailure, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorpusParseFailure) throw;
    throw Error(ErrorCode::CorpusParseFailure, e.what());
  }
}

nlohmann::json to_json(const TestCase& c) {
  nlohmann::json fixture = nlohmann::json::array();
  for (const auto& e : c.fixture) fixture.push_back(to_json(e));
  nlohmann::json x{{"kind", to_string(c.expected.kind)}};
  const auto& e = c.expected;
  if (e.event_id) x["event_id"] = *e.event_id;
  if (e.title) x["title"] = *e.title;
  if (e.start) x["start"] = format_utc(*e.start);
  if (e.end) x["end"] = format_utc(*e.end);
  if (e.description) x["description"] = *e.description;
  if (!e.reply_contains.empty()) x["reply_contains"] = e.reply_contains;
  if (e.event_count) x["event_count"] = *e.event_count;
  return {{"case_id", c.case_id},   {"language", c.language},
          {"task_type", to_string(c.task_type)}, {"turns", c.turns},
          {"fixture", fixture},     {"expected_effect", x}};
}

std::vector<TestCase> parse_corpus(std::string_view jsonl) {
  std::vector<TestCase> out;
  std::size_t line_no = 0;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    try {
      if (j.is_discarded()) throw Error(ErrorCode::CorpusParseFailure, "invalid JSON");
      out.push_back(test_case_from_json(j));
    } catch (const Error& e) {
      throw Error(ErrorCode::CorpusParseFailure,
                  "corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<TestCase> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::CorpusParseFailure, "cannot read corpus " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_corpus(ss.str());
}

std::optional<std::string> check_effect(const ExpectedEffect& e,
                                        const std::vector<CalendarEvent>& store,
                                        const std::string& reply) {
  if (e.event_count && store.size() != *e.event_count) {
    return "store holds " + std::to_string(store.size()) + " events, expected " +
           std::to_string(*e.event_count);
  }
  auto fields_match = [&](const CalendarEvent& ev) {
    if (e.title && ev.details.title != *e.title) return false;
    if (e.start && ev.details.start != *e.start) return false;
    if (e.end && ev.details.end != *e.end) return false;
    if (e.description && ev.details.description != e.description) return false;
    return true;
  };
  switch (e.kind) {
    case EffectKind::event_exists: {
      const auto n = std::count_if(store.begin(), store.end(), fields_match);
      if (n == 1) return std::nullopt;
      return "expected exactly one matching event, found " + std::to_string(n);
    }
    case EffectKind::event_absent: {
      for (const auto& ev : store) {
        if (e.event_id && ev.event_id == *e.event_id) return "event " + *e.event_id + " still exists";
        if (!e.event_id && e.title && ev.details.title == *e.title) {
          return "an event titled '" + *e.title + "' still exists";
        }
      }
      return std::nullopt;
    }
    case EffectKind::event_updated: {
      if (!e.event_id) return std::string("event_updated needs an event_id");
      for (const auto& ev : store) {
        if (ev.event_id != *e.event_id) continue;
        if (fields_match(ev)) return std::nullopt;
        return "event " + *e.event_id + " is now " + to_json(ev).dump();
      }
      return "event " + *e.event_id + " no longer exists";
    }
    case EffectKind::availability_report_contains: {
      const std::string hay = lower(reply);
      for (const auto& needle : e.reply_contains) {
        if (hay.find(lower(needle)) == std::string::npos) {
          return "reply lacks '" + needle + "'";
        }
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

Tally EvalReport::language_total(const std::string& language) const {
  Tally t;
  auto it = cells.find(language);
  if (it == cells.end()) return t;
  for (const auto& [task, cell] : it->second) {
    t.correct += cell.correct;
    t.total += cell.total;
  }
  return t;
}

Tally EvalReport::overall() const {
  Tally t;
  for (const auto& [lang, tasks] : cells) {
    const Tally l = language_total(lang);
    t.correct += l.correct;
    t.total += l.total;
  }
  return t;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json languages = nlohmann::json::object();
  for (const auto& [lang, tasks] : r.cells) {
    nlohmann::json row = nlohmann::json::object();
    for (const auto& [task, cell] : tasks) {
      row[std::string(to_string(task))] = {{"correct", cell.correct}, {"total", cell.total}};
    }
    const Tally total = r.language_total(lang);
    languages[lang] = {{"tasks", row},
                       {"correct", total.correct},
                       {"total", total.total},
                       {"success_percent", total.total ? 100.0 * total.correct / total.total : 0.0}};
  }
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : r.cases) {
    nlohmann::json jc{{"case_id", c.case_id},
                      {"language", c.language},
                      {"task_type", to_string(c.task_type)},
                      {"passed", c.passed}};
    if (!c.passed) {
      jc["failure"] = c.failure;
      jc["transcript"] = c.transcript;
    }
    cases.push_back(jc);
  }
  const Tally all = r.overall();
  return {{"note", "Locally authored corpus, 5 cases per task type; exact effect assertions."},
          {"languages", languages},
          {"overall", {{"correct", all.correct}, {"total", all.total}}},
          {"cases", cases}};
}

CaseResult run_case(const TestCase& c, const EvalOptions& options) {
  CaseResult out{c.case_id, c.language, c.task_type, false, {}, {}};

  ServiceConfig cfg = options.service;
  cfg.supervisor_count = 1;
  cfg.background_tasks = false;
  cfg.calendar_snapshot_path.clear();
  cfg.fixed_now = options.fixed_now;
  cfg.time_zone = options.time_zone;
  cfg.seed = options.seed;

  const auto now = parse_rfc3339(options.fixed_now);
  if (!now) throw Error(ErrorCode::InvalidArgument, "fixed_now is not RFC 3339");
  auto clock = std::make_shared<FixedClock>(*now, TimeZone::load(options.time_zone));
  auto calendar = std::make_shared<InMemoryCalendarStore>(clock, options.seed);
  for (auto ev : c.fixture) {
    try {
      if (ev.event_id.empty()) throw Error(ErrorCode::ValidationFailure, "fixture event without id");
      if (ev.details.time_zone.empty() || ev.details.time_zone == "UTC") {
        ev.details.time_zone = options.time_zone;
      }
      ev.created_at = ev.updated_at = *now;
      calendar->restore(ev);
    } catch (const Error& e) {
      throw Error(ErrorCode::FixtureFailure, "case " + c.case_id + ": " + e.what());
    }
  }

  ServiceDeps deps;
  deps.clock = clock;
  deps.calendar = calendar;
  AssistantService svc(cfg, deps);
  std::string reply;
  std::string sid;
  try {
    sid = svc.create_session().session_id;
    for (const auto& turn : c.turns) reply = svc.post_message(sid, turn).reply;
  } catch (const Error& e) {
    out.failure = std::string(to_string(e.code())) + ": " + e.what();
  }

  if (out.failure.empty()) {
    if (auto why = check_effect(c.expected, calendar->all_events(), reply)) {
      out.failure = *why;
    } else {
      out.passed = true;
    }
  }
  if (!out.passed && !sid.empty()) {
    if (auto rec = svc.get_session(sid)) {
      for (const auto& m : rec->state.transcript) out.transcript.push_back(m.role + ": " + m.content);
    }
  }
  return out;
}

EvalReport run_corpus(const std::vector<TestCase>& cases, const EvalOptions& options) {
  EvalReport r;
  for (const auto& c : cases) {
    CaseResult res = run_case(c, options);
    Tally& cell = r.cells[c.language][c.task_type];
    ++cell.total;
    if (res.passed) ++cell.correct;
    r.cases.push_back(std::move(res));
  }
  std::sort(r.cases.begin(), r.cases.end(),
            [](const CaseResult& a, const CaseResult& b) { return a.case_id < b.case_id; });
  return r;
}

std::string render_markdown(const EvalReport& r) {
  std::ostringstream out;
  out << "|";
  for (const char* h : kHeaders) out << ' ' << h << " |";
  out << "\n|";
  for (std::size_t i = 0; i < std::size(kHeaders); ++i) out << (i == 0 ? " --- |" : " ---: |");
  out << '\n';
  for (const auto& row : table_rows(r)) {
    out << "|";
    for (const auto& cell : row) out << ' ' << cell << " |";
    out << '\n';
  }
  return out.str();
}

std::string render_csv(const EvalReport& r) {
  std::ostringstream out;
  for (std::size_t i = 0; i < std::size(kHeaders); ++i) out << (i ? "," : "") << kHeaders[i];
  out << '\n';
  for (const auto& row : table_rows(r)) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      const bool quote = row[i].find_first_of(",\"") != std::string::npos;
      std::string cell = row[i];
      if (quote) {
        std::string q = "\"";
        for (char ch : cell) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        cell = q + "\"";
      }
      out << (i ? "," : "") << cell;
    }
    out << '\n';
  }
  return out.str();
}

std::map<std::string, std::map<TaskType, Tally>> parse_csv(std::string_view csv) {
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char ch = line[i];
      if (in_quotes) {
        if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else if (ch == '"') {
          in_quotes = false;
        } else {
          cur += ch;
        }
      } else if (ch == '"') {
        in_quotes = true;
      } else if (ch == ',') {
        cells.push_back(std::move(cur));
        cur.clear();
      } else {
        cur += ch;
      }
    }
    cells.push_back(std::move(cur));
    return cells;
  };
  auto parse_frac = [](const std::string& s) {
    const auto slash = s.find('/');
    if (slash == std::string::npos) throw Error(ErrorCode::InvalidArgument, "bad tally '" + s + "'");
    return Tally{std::stoul(s.substr(0, slash)), std::stoul(s.substr(slash + 1))};
  };

  std::map<std::string, std::map<TaskType, Tally>> out;
  std::istringstream in{std::string(csv)};
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != std::size(kHeaders)) {
      throw Error(ErrorCode::InvalidArgument, "CSV row has " + std::to_string(cells.size()) + " cells");
    }
    auto& row = out[cells[0]];
    for (std::size_t i = 0; i < std::size(kColumns); ++i) {
      const Tally t = parse_frac(cells[i + 1]);
      if (t.total > 0) row[kColumns[i]] = t;
    }
  }
  return out;
}

}  // namespace calagent
