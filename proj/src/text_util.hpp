#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace calagent::detail {

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
         (static_cast<unsigned char>(c) & 0x80);
}

/// Whole-word containment on already-lowercased text.
inline bool has_word(std::string_view lower, std::string_view word) {
  std::size_t pos = 0;
  while ((pos = lower.find(word, pos)) != std::string_view::npos) {
    const bool left = pos == 0 || !is_word_char(lower[pos - 1]);
    const std::size_t after = pos + word.size();
    const bool right = after >= lower.size() || !is_word_char(lower[after]);
    if (left && right) return true;
    pos = after;
  }
  return false;
}

inline std::vector<std::string> words_of(std::string_view lower) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : lower) {
    if (is_word_char(c) || c == '\'') {
      cur.push_back(c);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

struct Quoted {
  std::size_t begin = 0;  // offset of the opening quote
  std::size_t end = 0;    // one past the closing quote
  std::string content;
};

/// Quoted phrases delimited by ' " or curly quotes. An apostrophe inside a
/// word ("what's") never opens a quote.
inline std::vector<Quoted> find_quoted(std::string_view s) {
  struct Mark {
    std::size_t pos;
    std::size_t len;
    int kind;  // 0 = single, 1 = double
  };
  auto mark_at = [&](std::size_t i) -> std::optional<Mark> {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    if (c == '\'') return Mark{i, 1, 0};
    if (c == '"') return Mark{i, 1, 1};
    if (c == 0xE2 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x80) {
      const unsigned char d = static_cast<unsigned char>(s[i + 2]);
      if (d == 0x98 || d == 0x99) return Mark{i, 3, 0};
      if (d == 0x9C || d == 0x9D) return Mark{i, 3, 1};
    }
    return std::nullopt;
  };
  std::vector<Quoted> out;
  std::size_t i = 0;
  while (i < s.size()) {
    auto open = mark_at(i);
    if (!open) {
      ++i;
      continue;
    }
    const bool left_ok = i == 0 || !is_word_char(s[i - 1]);
    const std::size_t content_begin = i + open->len;
    if (!left_ok || content_begin >= s.size() || s[content_begin] == ' ') {
      i += open->len;
      continue;
    }
    std::size_t j = content_begin;
    std::optional<Mark> close;
    while (j < s.size()) {
      auto m = mark_at(j);
      if (m && m->kind == open->kind) {
        const std::size_t after = j + m->len;
        const bool right_ok = after >= s.size() || !is_word_char(s[after]);
        if (right_ok) {
          close = m;
          break;
        }
      }
      ++j;
    }
    if (!close) {
      i += open->len;
      continue;
    }
    out.push_back({i, j + close->len, std::string(s.substr(content_begin, j - content_begin))});
    i = j + close->len;
  }
  return out;
}

inline std::string mask_ranges(std::string_view s, const std::vector<Quoted>& ranges) {
  std::string out(s);
  for (const auto& q : ranges) {
    for (std::size_t k = q.begin; k < q.end && k < out.size(); ++k) out[k] = ' ';
  }
  return out;
}

}  // namespace calagent::detail
