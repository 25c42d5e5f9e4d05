#include "adagrpo/reward.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <stdexcept>
#include <variant>

#include "adagrpo/format.hpp"

namespace adagrpo {

namespace {

bool is_trailing_punct(unsigned char c) {
  switch (c) {
    case '.':
    case ',':
    case ';':
    case ':':
    case '!':
    case '?':
      return true;
    default:
      return false;
  }
}

std::string canonical_numeral(std::string s) {
  static const std::regex kDecimal(R"([+-]?\d+\.\d+)");
  if (!std::regex_match(s, kDecimal)) return s;
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  return s;
}

}  // namespace

std::string normalize_answer(std::string_view text) {
  std::string s;
  s.reserve(text.size());
  for (unsigned char c : text) s.push_back(static_cast<char>(std::tolower(c)));

  auto not_space = [](unsigned char c) { return std::isspace(c) == 0; };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  while (!s.empty() && is_trailing_punct(static_cast<unsigned char>(s.back()))) {
    s.pop_back();
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  }
  return canonical_numeral(std::move(s));
}

int accuracy_reward(std::string_view predicted, std::string_view gold) {
  if (gold.empty()) throw std::invalid_argument("accuracy_reward: gold answer is empty");
  return normalize_answer(predicted) == normalize_answer(gold) ? 1 : 0;
}

RewardBreakdown total_reward(std::string_view raw_response, std::string_view gold,
                             double format_weight) {
  if (!(format_weight >= 0.0) || !std::isfinite(format_weight)) {
    throw std::invalid_argument("total_reward: format weight must be finite and non-negative");
  }
  RewardBreakdown out;
  const ParseResult parsed = parse_response(raw_response);
  if (const auto* resp = std::get_if<ParsedResponse>(&parsed)) {
    out.format_component = 1;
    out.accuracy_component = accuracy_reward(resp->answer, gold);
  }
  out.total = out.accuracy_component * out.format_component + format_weight * out.format_component;
  return out;
}

}  // namespace adagrpo
