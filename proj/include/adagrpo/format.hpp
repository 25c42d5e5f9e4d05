#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace adagrpo {

enum class ModeId { TXT = 0, GRD = 1 };

inline constexpr std::array<ModeId, 2> kModes{ModeId::TXT, ModeId::GRD};

std::string_view mode_prefix(ModeId mode);
std::optional<ModeId> mode_from_prefix(std::string_view literal);
std::string_view mode_name(ModeId mode);
ModeId other_mode(ModeId mode);
inline int mode_index(ModeId mode) { return static_cast<int>(mode); }

struct GroundingSpan {
  std::string label;
  std::array<long long, 4> box{};

  bool operator==(const GroundingSpan&) const = default;
};

struct ParsedResponse {
  ModeId mode = ModeId::TXT;
  std::string think;
  std::string answer;
  std::vector<GroundingSpan> grounding_spans;

  bool operator==(const ParsedResponse&) const = default;
};

enum class FormatError {
  MissingModePrefix,
  MissingThinkTags,
  MissingAnswerTags,
  TagsOutOfOrder,
};

std::string_view to_string(FormatError error);

using ParseResult = std::variant<ParsedResponse, FormatError>;

/// Extracts `label[x1,y1,x2,y2]` spans from a think segment. Spans with a
/// wrong arity, signs or stray characters inside the brackets are skipped.
std::vector<GroundingSpan> extract_grounding_spans(std::string_view think);

/// A response is well formed when neither segment contains a tag literal and
/// its spans are exactly those found in `think` (always none for TXT).
bool is_valid(const ParsedResponse& resp);

/// `<prefix> <think>THINK</think> <answer>ANSWER</answer>`, single spaces.
std::string serialize(const ParsedResponse& resp);

/// Accepts arbitrary whitespace between tags; segment text is kept verbatim.
/// The error names the first structural rule that the input violates.
ParseResult parse_response(std::string_view raw);

int format_reward(std::string_view raw);

}  // namespace adagrpo
