#include "calagent/prompts.hpp"

#include <absl/time/time.h>

namespace calagent {

namespace detail {
extern const std::string_view kPrompt_supervisor;
extern const std::string_view kPrompt_scheduler;
extern const std::string_view kPrompt_remover;
extern const std::string_view kPrompt_checker;
extern const std::string_view kPrompt_modifier;
}  // namespace detail

std::string_view prompt_template(PromptId id) noexcept {
  switch (id) {
    case PromptId::supervisor: return detail::kPrompt_supervisor;
    case PromptId::scheduler: return detail::kPrompt_scheduler;
    case PromptId::remover: return detail::kPrompt_remover;
    case PromptId::checker: return detail::kPrompt_checker;
    case PromptId::modifier: return detail::kPrompt_modifier;
  }
  return {};
}

namespace {

void replace_all(std::string& s, std::string_view from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

}  // namespace

std::string render_prompt(PromptId id, const ReferenceClock& clock) {
  const absl::Time now = absl::FromUnixMillis(clock.now().time_since_epoch().count());
  const absl::TimeZone& tz = clock.zone().native();
  std::string text(prompt_template(id));
  replace_all(text, "{current_date_time}",
              absl::FormatTime("%Y-%m-%d %H:%M", now, tz) + " (" + clock.zone().name() + ")");
  replace_all(text, "{today_date}", absl::FormatTime("%Y-%m-%d", now, tz));
  return text;
}

}  // namespace calagent
