#pragma once

#include <string>
#include <string_view>

#include "calagent/time.hpp"

namespace calagent {

enum class PromptId { supervisor, scheduler, remover, checker, modifier };

/// Raw template text with its {current_date_time} / {today_date} markers.
std::string_view prompt_template(PromptId id) noexcept;

/// Template with the date markers filled from `clock`:
/// {current_date_time} -> "2025-04-28 09:00 (America/New_York)", {today_date} -> "2025-04-28".
std::string render_prompt(PromptId id, const ReferenceClock& clock);

}  // namespace calagent
