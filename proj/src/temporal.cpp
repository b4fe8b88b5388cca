#include "calagent/temporal.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>

#include "calagent/errors.hpp"

namespace calagent {

using namespace std::chrono;

std::string_view to_string(Grain g) noexcept {
  switch (g) {
    case Grain::minute: return "minute";
    case Grain::hour: return "hour";
    case Grain::day: return "day";
  }
  return "day";
}

DayPartWindow window_of(DayPart part) noexcept {
  switch (part) {
    case DayPart::morning: return {hours{8}, hours{12}};
    case DayPart::afternoon: return {hours{12}, hours{18}};
    case DayPart::evening: return {hours{18}, hours{22}};
  }
  return {hours{8}, hours{12}};
}

std::string format_clock(minutes since_midnight) {
  const int total = static_cast<int>(since_midnight.count()) % (24 * 60);
  const int h24 = total / 60;
  const int m = total % 60;
  const int h12 = h24 % 12 == 0 ? 12 : h24 % 12;
  char buf[16];
  std::snprintf(buf, sizeof buf, "%d:%02d %s", h12, m, h24 < 12 ? "AM" : "PM");
  return buf;
}

std::string format_iso_date(const year_month_day& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

namespace {

enum class Tok { word, number, clock, iso_date, iso_datetime, slash_date, ordinal, comma, dash, sep };

struct Token {
  Tok kind = Tok::sep;
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;
  int number = 0;
  int digits = 0;
  ClockTime clock{};
  year_month_day ymd{};
};

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return c >= 'a' && c <= 'z'; }

int read_int(const std::string& s, std::size_t& i, int max_digits = 9) {
  int v = 0;
  int n = 0;
  while (i < s.size() && is_digit(s[i]) && n < max_digits) {
    v = v * 10 + (s[i] - '0');
    ++i;
    ++n;
  }
  return v;
}

std::size_t count_digits(const std::string& s, std::size_t i) {
  std::size_t n = 0;
  while (i + n < s.size() && is_digit(s[i + n])) ++n;
  return n;
}

std::string lower_normalized(std::string_view in) {
  std::string s(in);
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  // "a.m." / "p.m." -> "am  " / "pm  " keeping byte offsets stable.
  for (std::size_t i = 0; i + 3 < s.size(); ++i) {
    if ((s[i] == 'a' || s[i] == 'p') && s[i + 1] == '.' && s[i + 2] == 'm' && s[i + 3] == '.') {
      s[i + 1] = 'm';
      s[i + 2] = ' ';
      s[i + 3] = ' ';
    }
  }
  return s;
}

/// Attaches a glued meridiem ("10am", "10:30pm", "3p") if present.
void glued_meridiem(const std::string& s, std::size_t& i, ClockTime& t) {
  std::size_t j = i;
  while (j < s.size() && is_alpha(s[j])) ++j;
  const std::string suffix = s.substr(i, j - i);
  if (suffix == "am" || suffix == "a") {
    t.meridiem = Meridiem::am;
    i = j;
  } else if (suffix == "pm" || suffix == "p") {
    t.meridiem = Meridiem::pm;
    i = j;
  }
}

std::vector<Token> tokenize(std::string_view original, const TimeZone& zone) {
  const std::string s = lower_normalized(original);
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    Token tok;
    tok.begin = i;
    if (is_digit(c)) {
      const std::size_t nd = count_digits(s, i);
      if (nd == 4 && i + 10 <= s.size() && s[i + 4] == '-' && count_digits(s, i + 5) == 2 &&
          s[i + 7] == '-' && count_digits(s, i + 8) == 2) {
        std::size_t j = i;
        const int y = read_int(s, j, 4);
        ++j;
        const int mo = read_int(s, j, 2);
        ++j;
        const int d = read_int(s, j, 2);
        tok.ymd = year{y} / month{static_cast<unsigned>(mo)} / day{static_cast<unsigned>(d)};
        tok.kind = Tok::iso_date;
        // Optional "T10:00[:00][.fff][Z|+hh:mm]".
        if (j + 6 <= s.size() && s[j] == 't' && count_digits(s, j + 1) == 2 && s[j + 3] == ':' &&
            count_digits(s, j + 4) == 2) {
          ++j;
          tok.clock.hour = read_int(s, j, 2);
          ++j;
          tok.clock.minute = read_int(s, j, 2);
          tok.clock.explicit_minutes = true;
          if (j < s.size() && s[j] == ':' && count_digits(s, j + 1) == 2) {
            j += 3;
            if (j < s.size() && s[j] == '.') {
              ++j;
              while (j < s.size() && is_digit(s[j])) ++j;
            }
          }
          tok.kind = Tok::iso_datetime;
          std::optional<minutes> offset;
          if (j < s.size() && s[j] == 'z') {
            offset = minutes{0};
            ++j;
          } else if (j + 6 <= s.size() && (s[j] == '+' || s[j] == '-') &&
                     count_digits(s, j + 1) == 2 && s[j + 3] == ':' && count_digits(s, j + 4) == 2) {
            const int sign = s[j] == '-' ? -1 : 1;
            ++j;
            const int oh = read_int(s, j, 2);
            ++j;
            const int om = read_int(s, j, 2);
            offset = minutes{sign * (oh * 60 + om)};
          }
          if (offset && tok.ymd.ok()) {
            // Absolute instant: re-express in the reference zone.
            const auto utc = sys_days{tok.ymd} + hours{tok.clock.hour} +
                             minutes{tok.clock.minute} - *offset;
            const LocalTime local = zone.to_local(time_point_cast<Millis>(utc));
            const auto ld = floor<days>(local);
            const auto tod = duration_cast<minutes>(local - ld);
            tok.ymd = year_month_day{sys_days{ld.time_since_epoch()}};
            tok.clock.hour = static_cast<int>(tod.count() / 60);
            tok.clock.minute = static_cast<int>(tod.count() % 60);
          }
        }
        tok.end = j;
      } else {
        std::size_t j = i;
        const int v = read_int(s, j);
        if (j < s.size() && s[j] == ':' && count_digits(s, j + 1) == 2) {
          ++j;
          tok.kind = Tok::clock;
          tok.clock.hour = v;
          tok.clock.minute = read_int(s, j, 2);
          tok.clock.explicit_minutes = true;
          if (j < s.size() && s[j] == ':' && count_digits(s, j + 1) == 2) j += 3;
          glued_meridiem(s, j, tok.clock);
        } else if (j < s.size() && s[j] == '/' && count_digits(s, j + 1) > 0) {
          tok.kind = Tok::slash_date;
          while (j < s.size() && (is_digit(s[j]) || s[j] == '/')) ++j;
        } else {
          tok.kind = Tok::number;
          tok.number = v;
          tok.digits = static_cast<int>(nd);
          std::size_t k = j;
          ClockTime t;
          t.hour = v;
          glued_meridiem(s, k, t);
          if (t.meridiem != Meridiem::none) {
            tok.kind = Tok::clock;
            tok.clock = t;
            j = k;
          } else if (j + 2 <= s.size()) {
            const std::string suf = s.substr(j, 2);
            const bool word_ends = j + 2 == s.size() || !is_alpha(s[j + 2]);
            if (word_ends && (suf == "st" || suf == "nd" || suf == "rd" || suf == "th")) {
              tok.kind = Tok::ordinal;
              j += 2;
            }
          }
        }
        tok.end = j;
      }
    } else if (is_alpha(c)) {
      std::size_t j = i;
      while (j < s.size() && (is_alpha(s[j]) || s[j] == '\'')) ++j;
      tok.kind = Tok::word;
      tok.end = j;
    } else if (c == ',') {
      tok.kind = Tok::comma;
      tok.end = i + 1;
    } else if (c == '-') {
      tok.kind = Tok::dash;
      tok.end = i + 1;
    } else if (static_cast<unsigned char>(c) == 0xE2 && i + 2 < s.size() &&
               static_cast<unsigned char>(s[i + 1]) == 0x80 &&
               (static_cast<unsigned char>(s[i + 2]) == 0x93 ||
                static_cast<unsigned char>(s[i + 2]) == 0x94)) {
      tok.kind = Tok::dash;  // en/em dash
      tok.end = i + 3;
    } else {
      std::size_t j = i + 1;
      while (j < s.size() && (static_cast<unsigned char>(s[j]) & 0xC0) == 0x80) ++j;
      tok.kind = Tok::sep;
      tok.end = j;
    }
    tok.text = s.substr(tok.begin, tok.end - tok.begin);
    i = std::max(tok.end, i + 1);
    out.push_back(std::move(tok));
  }
  return out;
}

std::optional<unsigned> month_number(const std::string& w) {
  static constexpr std::array<std::pair<const char*, unsigned>, 23> kMonths{{
      {"january", 1}, {"jan", 1},   {"february", 2}, {"feb", 2},      {"march", 3},
      {"mar", 3},     {"april", 4}, {"apr", 4},      {"may", 5},      {"june", 6},
      {"jun", 6},     {"july", 7},  {"jul", 7},      {"august", 8},   {"aug", 8},
      {"september", 9}, {"sep", 9}, {"sept", 9},     {"october", 10}, {"oct", 10},
      {"november", 11}, {"nov", 11}, {"december", 12},
  }};
  for (const auto& [name, m] : kMonths) {
    if (w == name) return m;
  }
  if (w == "dec") return 12u;
  return std::nullopt;
}

std::optional<weekday> weekday_named(const std::string& w) {
  static constexpr std::array<std::pair<const char*, unsigned>, 21> kDays{{
      {"sunday", 0},   {"sun", 0},     {"monday", 1},   {"mon", 1},     {"tuesday", 2},
      {"tue", 2},      {"tues", 2},    {"wednesday", 3}, {"wed", 3},    {"thursday", 4},
      {"thu", 4},      {"thur", 4},    {"thurs", 4},    {"friday", 5},  {"fri", 5},
      {"saturday", 6}, {"sat", 6},     {"mondays", 1},  {"fridays", 5}, {"weds", 3},
      {"tu", 2},
  }};
  for (const auto& [name, d] : kDays) {
    if (w == name) return weekday{d};
  }
  return std::nullopt;
}

std::optional<DayPart> day_part_named(const std::string& w) {
  if (w == "morning") return DayPart::morning;
  if (w == "afternoon") return DayPart::afternoon;
  if (w == "evening" || w == "night") return DayPart::evening;
  return std::nullopt;
}

bool is_filler(const Token& t) {
  if (t.kind == Tok::comma) return true;
  if (t.kind != Tok::word) return false;
  static constexpr std::array<const char*, 10> kFillers{
      "on", "at", "the", "of", "in", "from", "between", "by", "around", "for"};
  return std::any_of(kFillers.begin(), kFillers.end(), [&](const char* f) { return t.text == f; });
}

bool is_connector(const Token& t) {
  if (t.kind == Tok::dash) return true;
  if (t.kind != Tok::word) return false;
  return t.text == "to" || t.text == "until" || t.text == "till" || t.text == "through" ||
         t.text == "thru" || t.text == "and";
}

bool introduces_bare_time(const Token& t) {
  if (t.kind == Tok::dash) return true;
  if (t.kind != Tok::word) return false;
  return t.text == "at" || t.text == "by" || t.text == "around" || t.text == "from" ||
         t.text == "between" || t.text == "to" || t.text == "until" || t.text == "till" ||
         t.text == "and";
}

struct DateHit {
  year_month_day date;
  std::optional<year_month_day> range_end_exclusive;
  std::optional<DayPart> part;
  std::size_t next = 0;
};

struct TimeHit {
  ClockTime time;
  std::size_t next = 0;
};

class Parser {
 public:
  Parser(const std::vector<Token>& toks, std::size_t begin, std::size_t end, sys_days today)
      : toks_(toks), begin_(begin), end_(end), today_(today) {}

  /// On failure returns nullopt and sets fail_pos_ / reason_.
  std::optional<TemporalExpr> parse() {
    TemporalExpr expr;
    bool in_end = false;
    bool any = false;
    bool trailing_end_date = false;  // "from 2 PM to 4 PM tomorrow"
    std::size_t pos = begin_;
    while (pos < end_) {
      if (auto d = date_at(pos)) {
        if (in_end) {
          if (expr.end_date || d->range_end_exclusive) return fail(pos);
          expr.end_date = d->date;
          trailing_end_date = expr.end_time.has_value();
        } else {
          if (expr.date) return fail(pos);
          expr.date = d->date;
          expr.range_end_exclusive = d->range_end_exclusive;
        }
        if (d->part) {
          if (expr.day_part) return fail(pos);
          expr.day_part = d->part;
        }
        pos = d->next;
        any = true;
        continue;
      }
      if (!reason_.empty()) return fail(pos);
      const Token& t = toks_[pos];
      if (t.kind == Tok::iso_datetime) {
        if (!t.ymd.ok() || t.clock.hour > 23 || t.clock.minute > 59) return fail(pos);
        auto& date_slot = in_end ? expr.end_date : expr.date;
        auto& time_slot = in_end ? expr.end_time : expr.time;
        if (date_slot || time_slot) return fail(pos);
        date_slot = t.ymd;
        time_slot = t.clock;
        ++pos;
        any = true;
        continue;
      }
      if (auto tm = time_at(pos)) {
        auto& slot = in_end ? expr.end_time : expr.time;
        if (slot) return fail(pos);
        slot = tm->time;
        pos = tm->next;
        any = true;
        continue;
      }
      if (auto part = day_part_at(pos)) {
        if (expr.day_part) return fail(pos);
        expr.day_part = part->first;
        pos = part->second;
        any = true;
        continue;
      }
      if (is_connector(t)) {
        if (!any || in_end) return fail(pos);
        in_end = true;
        ++pos;
        continue;
      }
      if (is_filler(t)) {
        ++pos;
        continue;
      }
      return fail(pos);
    }
    if (!any) return fail(begin_);
    if (trailing_end_date && !expr.date && expr.time) {
      // A date after a time range qualifies the whole range.
      expr.date = expr.end_date;
      expr.end_date.reset();
    }
    if (in_end && !expr.end_date && !expr.end_time) return fail(end_ - 1);
    if (expr.end_time && !expr.time && !expr.end_date) return fail(begin_);

    // "from 2 to 3 PM": the start borrows the end's meridiem.
    if (expr.time && expr.end_time && expr.time->meridiem == Meridiem::none && expr.time->bare &&
        expr.end_time->meridiem != Meridiem::none) {
      expr.time->meridiem = expr.end_time->meridiem;
      expr.time->bare = false;
      if (expr.end_time->meridiem == Meridiem::pm && expr.time->hour != 12 &&
          expr.end_time->hour != 12 && expr.time->hour > expr.end_time->hour) {
        expr.time->meridiem = Meridiem::am;
      }
    }
    return expr;
  }

  std::size_t fail_pos() const { return fail_pos_; }
  const std::string& reason() const { return reason_; }

 private:
  std::nullopt_t fail(std::size_t pos) {
    fail_pos_ = std::min(pos, end_ > 0 ? end_ - 1 : 0);
    return std::nullopt;
  }

  const Token* at(std::size_t pos) const { return pos < end_ ? &toks_[pos] : nullptr; }
  bool word_at(std::size_t pos, const char* w) const {
    const Token* t = at(pos);
    return t && t->kind == Tok::word && t->text == w;
  }

  sys_days on_or_after(weekday wd) const { return today_ + (wd - weekday{today_}); }
  sys_days strictly_after(weekday wd) const {
    auto delta = wd - weekday{today_};
    if (delta == days{0}) delta = days{7};
    return today_ + delta;
  }

  year_month_day upcoming(month m, day d) const {
    const year_month_day t{today_};
    year_month_day cand{t.year(), m, d};
    if (!cand.ok() || sys_days{cand} < today_) cand = year_month_day{t.year() + years{1}, m, d};
    return cand;
  }

  /// month [day] [,] [year]  |  day [of] month [,] [year]
  std::optional<DateHit> month_date_at(std::size_t pos) const {
    const Token* t = at(pos);
    if (!t) return std::nullopt;
    auto day_value = [](const Token* x) -> std::optional<unsigned> {
      if (!x) return std::nullopt;
      if ((x->kind == Tok::number || x->kind == Tok::ordinal) && x->number >= 1 && x->number <= 31 &&
          x->digits <= 2) {
        return static_cast<unsigned>(x->number);
      }
      return std::nullopt;
    };
    auto year_after = [&](std::size_t p, year_month_day md,
                          std::size_t& next) -> std::optional<year_month_day> {
      std::size_t q = p;
      if (at(q) && at(q)->kind == Tok::comma) ++q;
      const Token* y = at(q);
      if (y && y->kind == Tok::number && y->digits == 4) {
        next = q + 1;
        return year_month_day{year{y->number}, md.month(), md.day()};
      }
      next = p;
      return std::nullopt;
    };

    std::optional<unsigned> m;
    std::optional<unsigned> d;
    std::size_t after = pos;
    if (t->kind == Tok::word) {
      m = month_number(t->text);
      if (!m) return std::nullopt;
      std::size_t q = pos + 1;
      if (word_at(q, "the")) ++q;
      d = day_value(at(q));
      if (!d) return std::nullopt;
      after = q + 1;
    } else if (t->kind == Tok::number || t->kind == Tok::ordinal) {
      d = day_value(t);
      if (!d) return std::nullopt;
      std::size_t q = pos + 1;
      if (word_at(q, "of")) ++q;
      const Token* mt = at(q);
      if (!mt || mt->kind != Tok::word) return std::nullopt;
      m = month_number(mt->text);
      if (!m) return std::nullopt;
      after = q + 1;
    } else {
      return std::nullopt;
    }
    const year_month_day md = upcoming(month{*m}, day{*d});
    std::size_t next = after;
    const year_month_day result = year_after(after, md, next).value_or(md);
    if (!result.ok()) return std::nullopt;
    return DateHit{result, std::nullopt, std::nullopt, next};
  }

  std::optional<DateHit> date_at(std::size_t pos) {
    const Token* t = at(pos);
    if (!t) return std::nullopt;
    if (t->kind == Tok::iso_date) {
      if (!t->ymd.ok()) return std::nullopt;
      return DateHit{t->ymd, std::nullopt, std::nullopt, pos + 1};
    }
    if (t->kind == Tok::slash_date) {
      reason_ = "ambiguous numeric date '" + t->text + "'; use YYYY-MM-DD or a month name";
      return std::nullopt;
    }
    if (auto md = month_date_at(pos)) return md;
    if (t->kind != Tok::word) return std::nullopt;

    const std::string& w = t->text;
    if (w == "today") return DateHit{year_month_day{today_}, std::nullopt, std::nullopt, pos + 1};
    if (w == "tonight") {
      return DateHit{year_month_day{today_}, std::nullopt, DayPart::evening, pos + 1};
    }
    if (w == "tomorrow") {
      return DateHit{year_month_day{today_ + days{1}}, std::nullopt, std::nullopt, pos + 1};
    }
    if (w == "yesterday") {
      return DateHit{year_month_day{today_ - days{1}}, std::nullopt, std::nullopt, pos + 1};
    }
    if (w == "day" && word_at(pos + 1, "after") && word_at(pos + 2, "tomorrow")) {
      return DateHit{year_month_day{today_ + days{2}}, std::nullopt, std::nullopt, pos + 3};
    }
    if (w == "in") {
      const Token* n = at(pos + 1);
      const Token* unit = at(pos + 2);
      if (n && n->kind == Tok::number && unit && unit->kind == Tok::word) {
        if (unit->text == "day" || unit->text == "days") {
          return DateHit{year_month_day{today_ + days{n->number}}, std::nullopt, std::nullopt,
                         pos + 3};
        }
        if (unit->text == "week" || unit->text == "weeks") {
          return DateHit{year_month_day{today_ + days{7 * n->number}}, std::nullopt,
                         std::nullopt, pos + 3};
        }
      }
      return std::nullopt;
    }

    enum class Mod { none, next, this_ } mod = Mod::none;
    std::size_t p = pos;
    if (w == "next") {
      mod = Mod::next;
      ++p;
    } else if (w == "this" || w == "coming" || w == "upcoming") {
      mod = Mod::this_;
      ++p;
    }
    const Token* head = at(p);
    if (!head || head->kind != Tok::word) return std::nullopt;

    if (auto wd = weekday_named(head->text)) {
      const sys_days d = mod == Mod::next ? strictly_after(*wd) : on_or_after(*wd);
      std::size_t next = p + 1;
      // "Friday, May 2": the explicit date wins.
      std::size_t q = next;
      if (at(q) && at(q)->kind == Tok::comma) ++q;
      if (auto md = month_date_at(q)) return md;
      return DateHit{year_month_day{d}, std::nullopt, std::nullopt, next};
    }
    if (head->text == "week" && mod != Mod::none) {
      const sys_days next_monday = strictly_after(Monday);
      if (mod == Mod::this_) {
        return DateHit{year_month_day{today_}, year_month_day{next_monday}, std::nullopt, p + 1};
      }
      return DateHit{year_month_day{next_monday}, year_month_day{next_monday + days{7}},
                     std::nullopt, p + 1};
    }
    if (head->text == "weekend") {
      sys_days sat = weekday{today_} == Sunday ? today_ - days{1} : on_or_after(Saturday);
      if (mod == Mod::next) sat += days{7};
      const sys_days begin = std::max(sat, today_);
      return DateHit{year_month_day{begin}, year_month_day{sat + days{2}}, std::nullopt, p + 1};
    }
    return std::nullopt;
  }

  std::optional<TimeHit> time_at(std::size_t pos) const {
    const Token* t = at(pos);
    if (!t) return std::nullopt;
    auto trailing_meridiem = [&](std::size_t p, ClockTime& c) {
      const Token* m = at(p);
      if (m && m->kind == Tok::word && (m->text == "am" || m->text == "pm")) {
        c.meridiem = m->text == "am" ? Meridiem::am : Meridiem::pm;
        return p + 1;
      }
      return p;
    };
    auto valid = [](const ClockTime& c) {
      if (c.minute < 0 || c.minute > 59) return false;
      if (c.meridiem != Meridiem::none) return c.hour >= 1 && c.hour <= 12;
      return c.hour >= 0 && c.hour <= 23;
    };

    if (t->kind == Tok::clock) {
      ClockTime c = t->clock;
      std::size_t next = pos + 1;
      if (c.meridiem == Meridiem::none) next = trailing_meridiem(next, c);
      if (!valid(c)) return std::nullopt;
      return TimeHit{c, next};
    }
    if (t->kind == Tok::number && t->digits <= 2) {
      ClockTime c;
      c.hour = t->number;
      std::size_t next = trailing_meridiem(pos + 1, c);
      if (c.meridiem != Meridiem::none) {
        if (!valid(c)) return std::nullopt;
        return TimeHit{c, next};
      }
      if (word_at(pos + 1, "o'clock") || word_at(pos + 1, "oclock")) {
        if (c.hour < 1 || c.hour > 12) return std::nullopt;
        c.bare = true;
        return TimeHit{c, pos + 2};
      }
      if (pos > begin_ && introduces_bare_time(toks_[pos - 1]) && c.hour <= 23) {
        c.bare = c.hour >= 1 && c.hour <= 12;
        return TimeHit{c, pos + 1};
      }
      return std::nullopt;
    }
    if (t->kind == Tok::word) {
      if (t->text == "noon" || t->text == "midday") {
        return TimeHit{ClockTime{12, 0, false, Meridiem::pm, false}, pos + 1};
      }
      if (t->text == "midnight") return TimeHit{ClockTime{12, 0, false, Meridiem::am, false}, pos + 1};
    }
    return std::nullopt;
  }

  std::optional<std::pair<DayPart, std::size_t>> day_part_at(std::size_t pos) const {
    std::size_t p = pos;
    if (word_at(p, "this")) ++p;
    const Token* t = at(p);
    if (!t || t->kind != Tok::word) return std::nullopt;
    if (auto part = day_part_named(t->text)) return std::make_pair(*part, p + 1);
    return std::nullopt;
  }

  const std::vector<Token>& toks_;
  std::size_t begin_;
  std::size_t end_;
  sys_days today_;
  std::size_t fail_pos_ = 0;
  std::string reason_;
};

sys_days local_today(const ReferenceClock& clock) {
  const LocalTime local = clock.zone().to_local(clock.now());
  return sys_days{floor<days>(local).time_since_epoch()};
}

minutes to_24h(const ClockTime& c) {
  int h = c.hour;
  if (c.meridiem == Meridiem::am && h == 12) h = 0;
  if (c.meridiem == Meridiem::pm && h != 12) h += 12;
  return minutes{h * 60 + c.minute};
}

LocalTime at_local(const year_month_day& d, minutes tod) {
  return LocalTime{duration_cast<Millis>(sys_days{d}.time_since_epoch() + tod)};
}

}  // namespace

TemporalExpr parse_temporal_expr(std::string_view text, const ReferenceClock& clock) {
  const auto toks = tokenize(text, clock.zone());
  if (toks.empty()) throw Error(ErrorCode::TemporalParseFailure, "empty temporal expression");
  // Trailing sentence punctuation is tolerated.
  std::size_t end = toks.size();
  while (end > 0 && toks[end - 1].kind == Tok::sep &&
         (toks[end - 1].text == "." || toks[end - 1].text == "?" || toks[end - 1].text == "!")) {
    --end;
  }
  Parser parser(toks, 0, end, local_today(clock));
  if (auto expr = parser.parse()) return *expr;
  const Token& bad = toks[std::min(parser.fail_pos(), toks.size() - 1)];
  std::string msg = parser.reason();
  if (msg.empty()) {
    msg = "unrecognized temporal expression near '" +
          std::string(text.substr(bad.begin, bad.end - bad.begin)) + "'";
  }
  msg += " (chars " + std::to_string(bad.begin) + "-" + std::to_string(bad.end) + ")";
  throw Error(ErrorCode::TemporalParseFailure, msg);
}

TemporalResolution resolve(const TemporalExpr& expr, const ReferenceClock& clock) {
  const TimeZone& zone = clock.zone();
  const Instant now = clock.now();
  const sys_days today = local_today(clock);
  const year_month_day base_date = expr.date.value_or(year_month_day{today});

  TemporalResolution out;
  out.zone = zone.name();

  auto finish = [&](LocalTime start, std::optional<LocalTime> end, Grain grain) {
    out.local_start = start;
    out.local_end = end;
    out.start = zone.to_instant(start);
    if (end) {
      out.end = zone.to_instant(*end);
      if (*out.end <= out.start) {
        throw Error(ErrorCode::TemporalParseFailure, "range end is not after its start");
      }
    }
    out.grain = grain;
    return out;
  };

  if (expr.time) {
    ClockTime t = *expr.time;
    if (t.bare && t.meridiem == Meridiem::none && expr.day_part) {
      t.meridiem = *expr.day_part == DayPart::morning ? Meridiem::am : Meridiem::pm;
      t.bare = false;
    }
    LocalTime start{};
    if (t.bare && t.meridiem == Meridiem::none) {
      // Next future occurrence among the am/pm readings.
      std::vector<LocalTime> candidates;
      const int h = t.hour % 12;
      const std::vector<year_month_day> dates =
          expr.date ? std::vector<year_month_day>{*expr.date}
                    : std::vector<year_month_day>{year_month_day{today},
                                                  year_month_day{today + days{1}}};
      for (const auto& d : dates) {
        candidates.push_back(at_local(d, minutes{h * 60 + t.minute}));
        candidates.push_back(at_local(d, minutes{(h + 12) * 60 + t.minute}));
      }
      start = candidates.front();
      for (const auto& c : candidates) {
        if (zone.to_instant(c) > now) {
          start = c;
          break;
        }
      }
    } else {
      start = at_local(base_date, to_24h(t));
      if (!expr.date && zone.to_instant(start) <= now) {
        start = at_local(year_month_day{today + days{1}}, to_24h(t));
      }
    }
    std::optional<LocalTime> end;
    if (expr.end_time || expr.end_date) {
      const sys_days start_day = sys_days{floor<days>(start).time_since_epoch()};
      const year_month_day end_day = expr.end_date.value_or(year_month_day{start_day});
      if (expr.end_time) {
        ClockTime e = *expr.end_time;
        if (e.bare && e.meridiem == Meridiem::none) {
          // Pick the reading that follows the start.
          const minutes am{(e.hour % 12) * 60 + e.minute};
          const auto start_tod = duration_cast<minutes>(start - floor<days>(start));
          e.meridiem = am > start_tod ? Meridiem::am : Meridiem::pm;
          if (e.hour == 12) e.meridiem = Meridiem::pm;
        }
        end = at_local(end_day, to_24h(e));
        if (!expr.end_date && *end <= start) end = *end + days{1};
      } else {
        end = at_local(year_month_day{sys_days{end_day} + days{1}}, minutes{0});
      }
    }
    return finish(start, end, t.explicit_minutes ? Grain::minute : Grain::hour);
  }

  if (expr.day_part) {
    const auto w = window_of(*expr.day_part);
    const year_month_day last = expr.end_date.value_or(base_date);
    return finish(at_local(base_date, w.begin), at_local(last, w.end), Grain::hour);
  }
  if (expr.range_end_exclusive) {
    return finish(at_local(base_date, minutes{0}), at_local(*expr.range_end_exclusive, minutes{0}),
                  Grain::day);
  }
  const year_month_day last = expr.end_date.value_or(base_date);
  return finish(at_local(base_date, minutes{0}),
                at_local(year_month_day{sys_days{last} + days{1}}, minutes{0}), Grain::day);
}

std::vector<TemporalSpan> find_temporal_spans(std::string_view text, const ReferenceClock& clock) {
  const auto toks = tokenize(text, clock.zone());
  const sys_days today = local_today(clock);
  std::vector<TemporalSpan> spans;
  std::size_t i = 0;
  while (i < toks.size()) {
    if (toks[i].kind == Tok::sep || is_connector(toks[i])) {
      ++i;
      continue;
    }
    std::size_t limit = i;
    while (limit < toks.size() && toks[limit].kind != Tok::sep) ++limit;
    std::optional<TemporalSpan> best;
    for (std::size_t j = limit; j > i; --j) {
      if (is_filler(toks[j - 1]) || is_connector(toks[j - 1])) continue;
      Parser parser(toks, i, j, today);
      if (auto expr = parser.parse()) {
        best = TemporalSpan{toks[i].begin, toks[j - 1].end, *expr};
        // Trim leading fillers from the reported span.
        std::size_t k = i;
        while (k < j && is_filler(toks[k])) ++k;
        best->begin = toks[k].begin;
        i = j;
        break;
      }
    }
    if (best) {
      spans.push_back(std::move(*best));
    } else {
      ++i;
    }
  }
  return spans;
}

}  // namespace calagent
