#include "calagent/nlu.hpp"

#include <httplib.h>

#include <cstdlib>
#include <regex>
#include <set>

#include "calagent/agents.hpp"
#include "calagent/directive.hpp"
#include "calagent/prompts.hpp"
#include "calagent/temporal.hpp"
#include "http_util.hpp"
#include "text_util.hpp"

namespace calagent {

using namespace std::chrono;

namespace {

enum class Intent { none, schedule, check, edit, del };

TaskType task_of(Intent i) {
  switch (i) {
    case Intent::schedule: return TaskType::schedule;
    case Intent::check: return TaskType::check_availability;
    case Intent::edit: return TaskType::edit;
    case Intent::del: return TaskType::delete_event;
    case Intent::none: break;
  }
  return TaskType::schedule;
}

const std::set<std::string> kDeleteVerbs{"delete", "remove", "cancel", "erase", "drop", "scrap"};
const std::set<std::string> kEditVerbs{"move",   "reschedule", "rename",   "change",  "edit",
                                       "modify", "update",     "shift",    "push",    "postpone",
                                       "extend", "shorten",    "retitle",  "bump",    "prepone"};
const std::set<std::string> kScheduleVerbs{"schedule", "book",     "add",      "create",
                                           "set",      "plan",     "arrange",  "put",
                                           "organize", "organise", "setup"};
const std::set<std::string> kCheckVerbs{"free", "available", "availability", "busy",
                                        "check", "agenda",   "show",         "list"};
const std::set<std::string> kQuestionStarts{
    "am",    "is",    "are",  "do",   "does", "what",  "what's", "whats", "what\xE2\x80\x99s",
    "when",  "how",   "any",  "anything", "who", "where", "which", "will"};
const std::set<std::string> kPronouns{"it", "that", "this", "them"};

struct Detected {
  Intent intent = Intent::none;
  bool strong = false;  // a verb named the task (not just question form)
};

Detected detect_intent(const std::vector<std::string>& words) {
  if (words.empty()) return {};
  if (kQuestionStarts.count(words[0])) {
    for (std::size_t i = 1; i < words.size(); ++i) {
      if (kDeleteVerbs.count(words[i])) return {Intent::del, true};
      if (kEditVerbs.count(words[i])) return {Intent::edit, true};
      if (kScheduleVerbs.count(words[i])) {
        const std::string& prev = words[i - 1];
        if (prev == "to" || prev == "you" || prev == "i" || prev == "please" || prev == "we") {
          return {Intent::schedule, true};
        }
      }
    }
    return {Intent::check, false};
  }
  for (const auto& w : words) {
    if (kDeleteVerbs.count(w)) return {Intent::del, true};
    if (kEditVerbs.count(w)) return {Intent::edit, true};
    if (kScheduleVerbs.count(w)) return {Intent::schedule, true};
    if (kCheckVerbs.count(w)) return {Intent::check, true};
  }
  return {};
}

bool has_any_phrase(const std::string& lower, std::initializer_list<const char*> phrases) {
  for (const char* p : phrases) {
    if (detail::has_word(lower, p)) return true;
  }
  return false;
}

bool is_farewell(const std::string& lower) {
  return has_any_phrase(lower, {"bye", "goodbye", "thanks", "thank you", "thx", "that's all",
                                "that is all", "nothing else", "no thanks", "that's it"});
}

bool is_greeting(const std::vector<std::string>& words) {
  static const std::set<std::string> kGreet{"hi", "hello", "hey", "morning", "afternoon", "evening",
                                            "good", "there", "greetings"};
  if (words.empty()) return false;
  return std::all_of(words.begin(), words.end(), [](const std::string& w) { return kGreet.count(w); });
}

bool is_cancel(const std::string& lower) {
  return has_any_phrase(lower, {"never mind", "nevermind", "forget it", "forget about it",
                                "cancel that", "cancel this request", "stop"});
}

bool is_yes(const std::vector<std::string>& words) {
  static const std::set<std::string> kYes{"yes", "yeah", "yep", "sure", "ok", "okay", "fine",
                                          "please", "do", "that", "works", "sounds", "good",
                                          "great", "perfect", "book", "it", "go", "ahead"};
  if (words.empty() || words.size() > 6) return false;
  static const std::set<std::string> kLead{"yes", "yeah", "yep", "sure", "ok", "okay", "perfect",
                                           "great", "sounds", "that"};
  return kLead.count(words[0]) &&
         std::all_of(words.begin(), words.end(), [](const std::string& w) { return kYes.count(w); });
}

std::optional<std::size_t> ordinal_choice(const std::vector<std::string>& words) {
  static const std::vector<std::pair<std::string, std::size_t>> kOrd{
      {"first", 0}, {"1st", 0}, {"second", 1}, {"2nd", 1}, {"third", 2},
      {"3rd", 2},   {"fourth", 3}, {"4th", 3}, {"last", 99}};
  for (const auto& w : words) {
    for (const auto& [name, idx] : kOrd) {
      if (w == name) return idx;
    }
  }
  return std::nullopt;
}

std::string local_stamp(LocalTime t) {
  const auto day = floor<days>(t);
  const auto tod = duration_cast<minutes>(t - day);
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d:%02d", static_cast<int>(tod.count() / 60),
                static_cast<int>(tod.count() % 60));
  return format_iso_date(year_month_day{sys_days{day.time_since_epoch()}}) + "T" + buf;
}

minutes time_of_day(LocalTime t) { return duration_cast<minutes>(t - floor<days>(t)); }

std::string strip_edges(std::string s) {
  s = detail::trim(s);
  while (!s.empty() && std::string(".,!?;:").find(s.back()) != std::string::npos) s.pop_back();
  return detail::trim(s);
}

/// Text with quoted phrases and event ids blanked so the temporal scanner
/// never reads titles or ids as dates.
std::string mask_for_time(const std::string& text, const std::vector<detail::Quoted>& quoted) {
  std::string masked = detail::mask_ranges(text, quoted);
  static const std::regex id_re(R"(\bevt_[0-9A-Za-z]+)");
  for (auto it = std::sregex_iterator(text.begin(), text.end(), id_re); it != std::sregex_iterator();
       ++it) {
    for (std::size_t k = 0; k < static_cast<std::size_t>(it->length()); ++k) {
      masked[static_cast<std::size_t>(it->position()) + k] = ' ';
    }
  }
  return masked;
}

/// "titled X", "called X", "named X" without quotes.
std::optional<std::string> labelled_title(const std::string& text) {
  static const std::regex re(
      R"(\b(?:titled|called|named|title is|name is)\s+(.+?)(?=\s+(?:on|at|for|from|tomorrow|today|next|this|in|by)\b|[,.!?]|$))",
      std::regex::icase);
  std::smatch m;
  if (std::regex_search(text, m, re)) {
    auto t = strip_edges(m[1].str());
    if (!t.empty()) return t;
  }
  return std::nullopt;
}

struct TitleRef {
  std::string title;
  std::size_t begin = 0;  // byte range of the reference in the message
  std::size_t end = 0;
};

/// Object of an edit/delete verb: "cancel my dentist appointment tomorrow"
/// -> "dentist appointment".
std::optional<TitleRef> object_title(const std::string& text, const std::string& masked_lower,
                                     const std::set<std::string>& verbs, bool stop_at_to,
                                     std::size_t stop_at) {
  const std::string lower = detail::to_lower(text);
  std::size_t verb_end = std::string::npos;
  std::size_t pos = 0;
  while (pos < lower.size()) {
    while (pos < lower.size() && !detail::is_word_char(lower[pos])) ++pos;
    std::size_t e = pos;
    while (e < lower.size() && (detail::is_word_char(lower[e]) || lower[e] == '\'')) ++e;
    if (e > pos && verbs.count(lower.substr(pos, e - pos))) {
      verb_end = e;
      break;
    }
    pos = e;
  }
  if (verb_end == std::string::npos) return std::nullopt;
  std::size_t limit = std::min(stop_at, text.size());
  auto cut = [&](const std::string& needle) {
    const auto p = masked_lower.find(needle, verb_end);
    if (p != std::string::npos && p < limit) limit = p;
  };
  for (const char* s : {" from my calendar", " from the calendar", " from calendar", " on my calendar",
                        " in my calendar", " please", " for me", ",", ".", "!", "?", " and ", " so "}) {
    cut(s);
  }
  if (stop_at_to) {
    for (const char* s : {" to ", " so it", " by ", " for ", " until ", " till ", " later",
                          " earlier", " starts", " ends", " start ", " end "}) {
      cut(s);
    }
  }
  if (limit <= verb_end) return std::nullopt;
  std::string obj = text.substr(verb_end, limit - verb_end);
  std::size_t obj_begin = verb_end;
  // Drop "the time of", determiners and similar lead-ins.
  static const std::regex lead(
      R"(^\s*(?:up\s+)?(?:(?:the\s+)?(?:time|date|title|name|description|start|end)\s+(?:of|for)\s+)?(?:(?:my|the|our|your|a|an)\s+)*)",
      std::regex::icase);
  std::smatch m;
  if (std::regex_search(obj, m, lead)) {
    obj_begin += static_cast<std::size_t>(m.length(0));
    obj = obj.substr(static_cast<std::size_t>(m.length(0)));
  }
  std::string title = strip_edges(obj);
  const std::string lt = detail::to_lower(title);
  static const std::set<std::string> kVague{"", "it", "that", "this", "them", "event", "the event",
                                            "that event", "this event", "one", "that one",
                                            "this one", "an event", "something", "meeting",
                                            "appointment", "my event", "time", "date", "title",
                                            "name", "description", "start", "end", "start time",
                                            "end time", "duration", "the", "my", "a", "an"};
  if (kVague.count(lt)) return std::nullopt;
  return TitleRef{title, obj_begin, obj_begin + obj.size()};
}

std::optional<minutes> duration_phrase(const std::string& lower) {
  static const std::regex re(
      R"(\bfor\s+(\d+(?:\.\d+)?|an|a|one|two|three|four|half an?)\s*(hours?|hrs?|minutes?|mins?)\b)");
  std::smatch m;
  if (!std::regex_search(lower, m, re)) return std::nullopt;
  const std::string n = m[1].str();
  double v = 0;
  if (n == "a" || n == "an" || n == "one") v = 1;
  else if (n == "two") v = 2;
  else if (n == "three") v = 3;
  else if (n == "four") v = 4;
  else if (n.rfind("half", 0) == 0) v = 0.5;
  else v = std::stod(n);
  const bool hours = m[2].str()[0] == 'h';
  return minutes{static_cast<long>(v * (hours ? 60 : 1))};
}

/// Everything the current request has accumulated so far.
struct Segment {
  Intent intent = Intent::none;
  SlotMap slots;
  std::optional<minutes> time_tod;
  std::optional<minutes> duration;
  std::optional<std::string> lookup_start;
  std::optional<std::string> lookup_end;
};

class Interpreter {
 public:
  Interpreter(const std::vector<Message>& transcript, const ReferenceClock& clock)
      : t_(transcript), clock_(clock) {}

  std::string run();

 private:
  std::size_t segment_start() const;
  bool is_lookup_report(std::size_t idx) const;
  void absorb_user(const std::string& text, const std::string& last_sup, std::size_t seg_begin);
  void extract_schedule(const std::string& masked);
  void extract_range(const std::string& masked, bool into_lookup);
  std::optional<std::pair<std::string, std::string>> previous_reference(std::size_t seg_begin) const;
  std::string decide_for_user(const std::string& text);
  std::string decide_for_agent(std::size_t idx);
  std::string dispatch_or_ask();
  std::string lookup_instruction() const;
  void finalize_schedule_end();
  void reset(Intent i) {
    seg_ = Segment{};
    seg_.intent = i;
  }

  const std::vector<Message>& t_;
  const ReferenceClock& clock_;
  Segment seg_;
};

std::string decision(std::string_view next, const std::string& messages) {
  return nlohmann::json{{"next", next}, {"messages", messages}}.dump();
}

std::string last_supervisor_before(const std::vector<Message>& t, std::size_t idx) {
  for (std::size_t k = idx; k-- > 0;) {
    if (t[k].role == "supervisor") return t[k].content;
  }
  return {};
}

bool Interpreter::is_lookup_report(std::size_t idx) const {
  if (t_[idx].role != agent_role("calendar_checker_agent")) return false;
  return last_supervisor_before(t_, idx).rfind(nlu_text::kLookupPrefix, 0) == 0;
}

std::size_t Interpreter::segment_start() const {
  for (std::size_t k = t_.size(); k-- > 0;) {
    const Message& m = t_[k];
    if (m.role.rfind("agent:", 0) == 0) {
      if (k + 1 == t_.size()) continue;  // the report being answered belongs to the segment
      const auto rep = parse_report(m.content);
      if (rep.status != AgentStatus::needs_info && !is_lookup_report(k)) return k + 1;
    } else if (m.role == "supervisor" &&
               (m.content == nlu_text::kCancelled || m.content == nlu_text::kFarewell)) {
      return k + 1;
    }
  }
  return 0;
}

std::optional<std::pair<std::string, std::string>> Interpreter::previous_reference(
    std::size_t seg_begin) const {
  static const std::regex title_re(R"('([^']+)')");
  for (std::size_t k = std::min(seg_begin, t_.size()); k-- > 0;) {
    const Message& m = t_[k];
    if (m.role.rfind("agent:", 0) != 0) continue;
    const auto ids = find_event_ids(m.content);
    if (ids.size() != 1) return std::nullopt;
    std::smatch sm;
    std::string title;
    if (std::regex_search(m.content, sm, title_re)) title = sm[1].str();
    return std::make_pair(ids.front(), title);
  }
  return std::nullopt;
}

void Interpreter::extract_schedule(const std::string& masked) {
  const auto spans = find_temporal_spans(masked, clock_);
  for (const auto& span : spans) {
    if (span.expr.date) seg_.slots[slot::date] = format_iso_date(*span.expr.date);
  }
  for (const auto& span : spans) {
    if (!span.expr.time) continue;
    TemporalExpr x = span.expr;
    if (!x.date && seg_.slots.count(slot::date)) {
      try {
        x.date = parse_temporal_expr(seg_.slots[slot::date], clock_).date;
      } catch (const Error&) {
      }
    }
    try {
      const auto r = resolve(x, clock_);
      seg_.time_tod = time_of_day(r.local_start);
      seg_.slots[slot::time] = format_clock(*seg_.time_tod);
      if (r.local_end) {
        seg_.slots[slot::end_time] = format_clock(time_of_day(*r.local_end));
      } else {
        seg_.slots.erase(slot::end_time);
      }
    } catch (const Error&) {
    }
    break;
  }
  if (auto d = duration_phrase(detail::to_lower(masked))) {
    seg_.duration = d;
    seg_.slots.erase(slot::end_time);
  }
}

void Interpreter::extract_range(const std::string& masked, bool into_lookup) {
  for (const auto& span : find_temporal_spans(masked, clock_)) {
    try {
      const auto r = resolve(span.expr, clock_);
      const LocalTime end = r.local_end.value_or(r.local_start + hours{1});
      if (into_lookup) {
        seg_.lookup_start = local_stamp(r.local_start);
        seg_.lookup_end = local_stamp(end);
      } else {
        seg_.slots[slot::start_date] = local_stamp(r.local_start);
        seg_.slots[slot::end_date] = local_stamp(end);
      }
      return;
    } catch (const Error&) {
    }
  }
}

void Interpreter::absorb_user(const std::string& text, const std::string& last_sup,
                              std::size_t seg_begin) {
  const std::string lower = detail::to_lower(text);
  const auto words = detail::words_of(lower);
  const auto quoted = detail::find_quoted(text);
  const std::string masked = mask_for_time(text, quoted);
  const auto ids = find_event_ids(text);
  const Detected det = detect_intent(words);
  const bool pronoun_only =
      quoted.empty() && ids.empty() &&
      std::any_of(words.begin(), words.end(), [](const std::string& w) { return kPronouns.count(w); });

  if (det.intent != Intent::none) {
    if (seg_.intent == Intent::none) {
      reset(det.intent);
    } else if (det.intent != seg_.intent && det.strong &&
               !(seg_.intent == Intent::schedule && det.intent == Intent::edit && pronoun_only)) {
      reset(det.intent);
    }
  }
  if (seg_.intent == Intent::none) return;
  const TaskType task = task_of(seg_.intent);

  // Short answer to the supervisor's last follow-up question.
  if (auto q = question_slot(last_sup); q && q->first == task && det.intent == Intent::none) {
    const std::string& name = q->second;
    if (name == slot::title) {
      std::string answer = quoted.empty() ? strip_edges(text) : quoted.front().content;
      static const std::regex lead(
          R"(^(?:it'?s\s+|it is\s+|call it\s+|name it\s+|the title is\s+|title:\s*|the\s+)?)",
          std::regex::icase);
      if (quoted.empty()) answer = strip_edges(std::regex_replace(answer, lead, ""));
      if (!answer.empty()) seg_.slots[slot::title] = answer;
    } else if (name == slot::time) {
      static const std::regex bare(R"(^\s*(\d{1,2}(?::\d{2})?)\s*[.!]?\s*$)");
      std::smatch m;
      const std::string probe = std::regex_match(masked, m, bare) ? "at " + m[1].str() : masked;
      extract_schedule(probe);
    } else if (name == slot::edit_instruction) {
      seg_.slots[slot::edit_instruction] = strip_edges(text);
    }
  }

  if (!ids.empty()) seg_.slots[slot::event_id] = ids.front();

  // Pick from a candidate list the supervisor just showed.
  if (const auto candidates = parse_event_lines(last_sup); !candidates.empty() && ids.empty()) {
    if (auto idx = ordinal_choice(words)) {
      const auto& c = *idx >= candidates.size() ? candidates.back() : candidates[*idx];
      seg_.slots[slot::event_id] = c.event_id;
      seg_.slots[slot::title] = c.title;
    }
  }

  switch (seg_.intent) {
    case Intent::schedule: {
      if (!quoted.empty()) {
        seg_.slots[slot::title] = quoted.front().content;
      } else if (auto t = labelled_title(text)) {
        seg_.slots[slot::title] = *t;
      }
      extract_schedule(masked);
      static const std::regex suggestion(
          R"(earliest free slot that day is (?:\w{3} \w{3} \d{1,2}, )?(\d{1,2}:\d{2} [AP]M) - (\d{1,2}:\d{2} [AP]M))");
      std::smatch m;
      if (is_yes(words) && std::regex_search(last_sup, m, suggestion)) {
        seg_.slots[slot::time] = m[1].str();
        seg_.slots[slot::end_time] = m[2].str();
        seg_.duration.reset();
        seg_.time_tod.reset();
      }
      break;
    }
    case Intent::check:
      extract_range(masked, false);
      break;
    case Intent::del: {
      if (!quoted.empty()) {
        seg_.slots[slot::title] = quoted.front().content;
      } else if (ids.empty() && det.intent == Intent::del) {
        const auto spans = find_temporal_spans(masked, clock_);
        const std::size_t stop = spans.empty() ? text.size() : spans.front().begin;
        if (auto ref = object_title(text, detail::to_lower(masked), kDeleteVerbs, false, stop)) {
          seg_.slots[slot::title] = ref->title;
        }
      }
      if (det.intent == Intent::del) extract_range(masked, true);
      break;
    }
    case Intent::edit: {
      std::optional<TitleRef> ref;
      if (!quoted.empty()) {
        ref = TitleRef{quoted.front().content, quoted.front().begin, quoted.front().end};
      } else if (ids.empty() && det.intent == Intent::edit) {
        const auto spans = find_temporal_spans(masked, clock_);
        std::size_t stop = text.size();
        for (const auto& s : spans) {
          // A date right after the object narrows nothing for edits; the
          // time phrase belongs to the instruction.
          stop = std::min(stop, s.begin);
          break;
        }
        ref = object_title(text, detail::to_lower(masked), kEditVerbs, true, stop);
      }
      if (ref) seg_.slots[slot::title] = ref->title;
      if (det.intent == Intent::edit) {
        std::string instr = text;
        if (ref) instr = text.substr(0, ref->begin) + "it" + text.substr(ref->end);
        for (const auto& id : ids) {
          const auto p = instr.find(id);
          if (p != std::string::npos) instr.replace(p, id.size(), "it");
        }
        static const std::regex polite(R"(^\s*(?:please\s+|can you\s+|could you\s+|would you\s+)+)",
                                       std::regex::icase);
        static const std::regex dup_it(R"(\b(?:my|the|event|with id)\s+it\b)", std::regex::icase);
        instr = strip_edges(std::regex_replace(std::regex_replace(instr, polite, ""), dup_it, "it"));
        // Only keep it when it says what to change.
        const std::string il = detail::to_lower(instr);
        const auto iq = detail::find_quoted(instr);
        const bool actionable =
            !iq.empty() || !find_temporal_spans(mask_for_time(instr, iq), clock_).empty() ||
            has_any_phrase(il, {"rename", "retitle", "title", "name", "description", "note",
                                "longer", "shorter", "later", "earlier", "extend", "shorten",
                                "hour", "hours", "minutes", "mins"});
        if (actionable) seg_.slots[slot::edit_instruction] = instr;
      }
      break;
    }
    case Intent::none:
      break;
  }

  if ((seg_.intent == Intent::edit || seg_.intent == Intent::del) &&
      !seg_.slots.count(slot::event_id) && !seg_.slots.count(slot::title) && pronoun_only) {
    if (auto prev = previous_reference(seg_begin)) {
      seg_.slots[slot::event_id] = prev->first;
      if (!prev->second.empty()) seg_.slots[slot::title] = prev->second;
    }
  }
}

void Interpreter::finalize_schedule_end() {
  if (seg_.intent != Intent::schedule || !seg_.duration || seg_.slots.count(slot::end_time)) return;
  if (!seg_.slots.count(slot::time)) return;
  std::optional<minutes> tod = seg_.time_tod;
  if (!tod) {
    try {
      const auto e = parse_temporal_expr(seg_.slots[slot::time], clock_);
      if (e.time) {
        int h = e.time->hour;
        if (e.time->meridiem == Meridiem::am && h == 12) h = 0;
        if (e.time->meridiem == Meridiem::pm && h != 12) h += 12;
        tod = minutes{h * 60 + e.time->minute};
      }
    } catch (const Error&) {
    }
  }
  if (!tod) return;
  const minutes end = *tod + *seg_.duration;
  if (end >= hours{24}) return;
  seg_.slots[slot::end_time] = format_clock(end);
}

std::string Interpreter::lookup_instruction() const {
  TaskDirective d;
  d.task_type = TaskType::check_availability;
  d.slots[slot::title] = seg_.slots.at(slot::title);
  if (seg_.lookup_start && seg_.lookup_end) {
    d.slots[slot::start_date] = *seg_.lookup_start;
    d.slots[slot::end_date] = *seg_.lookup_end;
  } else {
    const LocalTime local = clock_.zone().to_local(clock_.now());
    const LocalTime today = floor<days>(local);
    d.slots[slot::start_date] = local_stamp(today - days{365});
    d.slots[slot::end_date] = local_stamp(today + days{366});
  }
  return render_instruction(d);
}

std::string Interpreter::dispatch_or_ask() {
  finalize_schedule_end();
  TaskDirective d;
  d.task_type = task_of(seg_.intent);
  d.slots = seg_.slots;
  if (d.task_type == TaskType::delete_event && !d.has(slot::event_id)) {
    if (d.has(slot::title)) return decision("calendar_checker_agent", lookup_instruction());
    return decision("user", followup_question(d.task_type, slot::event_id));
  }
  if (d.task_type == TaskType::edit) {
    if (!d.has(slot::title) && !d.has(slot::event_id)) {
      return decision("user", followup_question(d.task_type, slot::title));
    }
    if (!d.has(slot::edit_instruction)) {
      return decision("user", followup_question(d.task_type, slot::edit_instruction));
    }
    if (!d.has(slot::event_id)) return decision("calendar_checker_agent", lookup_instruction());
  }
  if (d.task_type == TaskType::check_availability) d.slots.erase(slot::title);
  const auto missing = missing_slots(d);
  if (!missing.empty()) return decision("user", followup_question(d.task_type, missing.front()));
  return decision(to_string(agent_for(d.task_type)), render_instruction(d));
}

std::string Interpreter::decide_for_user(const std::string& text) {
  const std::string lower = detail::to_lower(text);
  const auto words = detail::words_of(lower);
  const Detected det = detect_intent(words);
  if (det.intent == Intent::none || !det.strong) {
    if (is_cancel(lower) && det.intent == Intent::none) return decision("user", nlu_text::kCancelled);
  }
  if (seg_.intent == Intent::none) {
    if (is_farewell(lower)) return decision("FINISH", nlu_text::kFarewell);
    if (is_greeting(words)) return decision("user", nlu_text::kGreeting);
    return decision("user", nlu_text::kClarify);
  }
  if (det.intent == Intent::none && is_farewell(lower) && words.size() <= 4) {
    return decision("FINISH", nlu_text::kFarewell);
  }
  return dispatch_or_ask();
}

std::string Interpreter::decide_for_agent(std::size_t idx) {
  const Message& m = t_[idx];
  const auto rep = parse_report(m.content);
  if (is_lookup_report(idx) && rep.status == AgentStatus::ok &&
      (seg_.intent == Intent::del || seg_.intent == Intent::edit)) {
    const auto hits = parse_event_lines(rep.text);
    const std::string title = seg_.slots.count(slot::title) ? seg_.slots.at(slot::title) : "";
    if (hits.size() == 1) {
      seg_.slots[slot::event_id] = hits.front().event_id;
      seg_.slots[slot::title] = hits.front().title;
      return dispatch_or_ask();
    }
    if (hits.empty()) {
      return decision("user", "I couldn't find any event titled '" + title +
                                  "'. Which event did you mean?");
    }
    std::string text = "I found " + std::to_string(hits.size()) + " events matching '" + title + "':";
    const std::string body = rep.text.substr(std::min(rep.text.find('\n'), rep.text.size()));
    text += body + "\nWhich one do you mean? Please reply with its ID.";
    return decision("user", text);
  }
  if (rep.status == AgentStatus::ok) return decision("FINISH", rep.text);
  return decision("user", rep.text);
}

std::string Interpreter::run() {
  if (t_.empty()) return decision("user", nlu_text::kGreeting);
  const std::size_t begin = segment_start();
  std::string last_sup = last_supervisor_before(t_, begin);
  for (std::size_t k = begin; k < t_.size(); ++k) {
    const Message& m = t_[k];
    if (m.role == "supervisor") {
      last_sup = m.content;
    } else if (m.role == "user") {
      absorb_user(m.content, last_sup, begin);
    }
  }
  const Message& last = t_.back();
  if (last.role == "user") return decide_for_user(last.content);
  if (last.role.rfind("agent:", 0) == 0) return decide_for_agent(t_.size() - 1);
  return decision("user", nlu_text::kClarify);
}

}  // namespace

std::string deterministic_interpret(const std::vector<Message>& transcript,
                                    const ReferenceClock& clock) {
  return Interpreter(transcript, clock).run();
}

// ---------------------------------------------------------------------------
// Remote chat-completion backend.

RemoteNluConfig RemoteNluConfig::from_env() {
  RemoteNluConfig c;
  auto get = [](const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
  };
  c.base_url = get("CALAGENT_NLU_BASE_URL");
  c.model = get("CALAGENT_NLU_MODEL");
  c.api_key = get("CALAGENT_NLU_API_KEY");
  if (c.base_url.empty() || c.model.empty()) {
    throw Error(ErrorCode::InvalidArgument,
                "remote NLU needs CALAGENT_NLU_BASE_URL and CALAGENT_NLU_MODEL");
  }
  return c;
}

nlohmann::json build_chat_request(const std::vector<Message>& transcript,
                                  const ReferenceClock& clock, const RemoteNluConfig& config) {
  nlohmann::json messages = nlohmann::json::array();
  messages.push_back({{"role", "system"}, {"content", render_prompt(PromptId::supervisor, clock)}});
  for (const auto& m : transcript) {
    if (m.role == "user") {
      messages.push_back({{"role", "user"}, {"content", m.content}});
    } else if (m.role == "supervisor") {
      messages.push_back({{"role", "assistant"}, {"content", m.content}});
    } else if (m.role.rfind("agent:", 0) == 0) {
      messages.push_back(
          {{"role", "user"}, {"content", "Response from " + m.role.substr(6) + ": " + m.content}});
    } else {
      messages.push_back({{"role", "user"}, {"content", m.content}});
    }
  }
  return {{"model", config.model}, {"temperature", 0}, {"messages", std::move(messages)}};
}

std::string remote_interpret(const std::vector<Message>& transcript, const ReferenceClock& clock,
                             const RemoteNluConfig& config) {
  const auto url = detail::split_url(config.base_url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(config.timeout);
  client.set_read_timeout(config.timeout);
  client.set_write_timeout(config.timeout);
  httplib::Headers headers;
  if (!config.api_key.empty()) headers.emplace("Authorization", "Bearer " + config.api_key);
  const std::string body = build_chat_request(transcript, clock, config).dump();
  auto res = client.Post(url.path + "/chat/completions", headers, body, "application/json");
  if (!res) {
    throw Error(ErrorCode::TransportFailure,
                "chat endpoint unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::EndpointError,
                "chat endpoint returned " + std::to_string(res->status) + ": " + res->body);
  }
  auto j = nlohmann::json::parse(res->body, nullptr, false);
  try {
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::EndpointError, "chat endpoint reply has no choices[0].message.content");
  }
}

}  // namespace calagent
