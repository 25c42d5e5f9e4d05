#pragma once

#include <string>
#include <string_view>

namespace adagrpo {

struct RewardBreakdown {
  int format_component = 0;
  int accuracy_component = 0;
  double total = 0.0;
};

/// Lowercases, trims, strips trailing punctuation and drops trailing
/// fractional zeros from decimal numerals ("4.50" -> "4.5", "4.0" -> "4").
std::string normalize_answer(std::string_view text);

/// Throws std::invalid_argument when `gold` is empty.
int accuracy_reward(std::string_view predicted, std::string_view gold);

/// Accuracy counts only when the format is valid; `format_weight` adds a
/// bonus for valid structure. The mode prefix never enters the score.
RewardBreakdown total_reward(std::string_view raw_response, std::string_view gold,
                             double format_weight = 0.0);

}  // namespace adagrpo
