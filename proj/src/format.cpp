#include "adagrpo/format.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <stdexcept>

namespace adagrpo {

namespace {

constexpr std::string_view kTextPrefix = "<text>";
constexpr std::string_view kGroundPrefix = "<ground>";
constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

constexpr std::array<std::string_view, 6> kTagLiterals{
    kTextPrefix, kGroundPrefix, kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose};

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

bool contains_tag_literal(std::string_view s) {
  return std::any_of(kTagLiterals.begin(), kTagLiterals.end(),
                     [&](std::string_view tag) { return s.find(tag) != std::string_view::npos; });
}

}  // namespace

std::string_view mode_prefix(ModeId mode) {
  return mode == ModeId::TXT ? kTextPrefix : kGroundPrefix;
}

std::optional<ModeId> mode_from_prefix(std::string_view literal) {
  if (literal == kTextPrefix) return ModeId::TXT;
  if (literal == kGroundPrefix) return ModeId::GRD;
  return std::nullopt;
}

std::string_view mode_name(ModeId mode) { return mode == ModeId::TXT ? "TXT" : "GRD"; }

ModeId other_mode(ModeId mode) { return mode == ModeId::TXT ? ModeId::GRD : ModeId::TXT; }

std::string_view to_string(FormatError error) {
  switch (error) {
    case FormatError::MissingModePrefix:
      return "MissingModePrefix";
    case FormatError::MissingThinkTags:
      return "MissingThinkTags";
    case FormatError::MissingAnswerTags:
      return "MissingAnswerTags";
    case FormatError::TagsOutOfOrder:
      return "TagsOutOfOrder";
  }
  throw std::logic_error("unknown FormatError");
}

std::vector<GroundingSpan> extract_grounding_spans(std::string_view think) {
  static const std::regex kSpan(R"(([A-Za-z_][A-Za-z0-9_]*)\[(\d{1,9}),(\d{1,9}),(\d{1,9}),(\d{1,9})\])");
  std::vector<GroundingSpan> spans;
  const std::string text(think);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kSpan); it != std::sregex_iterator();
       ++it) {
    const auto& m = *it;
    GroundingSpan span;
    span.label = m[1].str();
    for (std::size_t k = 0; k < 4; ++k) span.box[k] = std::stoll(m[k + 2].str());
    spans.push_back(std::move(span));
  }
  return spans;
}

bool is_valid(const ParsedResponse& resp) {
  if (contains_tag_literal(resp.think) || contains_tag_literal(resp.answer)) return false;
  if (resp.mode == ModeId::TXT) return resp.grounding_spans.empty();
  return resp.grounding_spans == extract_grounding_spans(resp.think);
}

std::string serialize(const ParsedResponse& resp) {
  std::string out;
  out.reserve(resp.think.size() + resp.answer.size() + 48);
  out.append(mode_prefix(resp.mode));
  out.push_back(' ');
  out.append(kThinkOpen).append(resp.think).append(kThinkClose);
  out.push_back(' ');
  out.append(kAnswerOpen).append(resp.answer).append(kAnswerClose);
  return out;
}

ParseResult parse_response(std::string_view raw) {
  const auto start = raw.find_first_not_of(" \t\r\n\f\v");
  if (start == std::string_view::npos) return FormatError::MissingModePrefix;
  raw.remove_prefix(start);

  std::optional<ModeId> mode;
  for (ModeId m : kModes) {
    if (raw.starts_with(mode_prefix(m))) {
      mode = m;
      raw.remove_prefix(mode_prefix(m).size());
      break;
    }
  }
  if (!mode) return FormatError::MissingModePrefix;

  const auto think_open = raw.find(kThinkOpen);
  const auto think_close = raw.find(kThinkClose);
  if (think_open == std::string_view::npos || think_close == std::string_view::npos) {
    return FormatError::MissingThinkTags;
  }
  const auto answer_open = raw.find(kAnswerOpen);
  const auto answer_close = raw.find(kAnswerClose);
  if (answer_open == std::string_view::npos || answer_close == std::string_view::npos) {
    return FormatError::MissingAnswerTags;
  }

  const auto think_begin = think_open + kThinkOpen.size();
  const auto answer_begin = answer_open + kAnswerOpen.size();
  const auto answer_end = answer_close + kAnswerClose.size();
  if (!(think_begin <= think_close && think_close + kThinkClose.size() <= answer_open &&
        answer_begin <= answer_close)) {
    return FormatError::TagsOutOfOrder;
  }
  // Only whitespace may separate the structural pieces.
  if (!is_blank(raw.substr(0, think_open)) ||
      !is_blank(raw.substr(think_close + kThinkClose.size(),
                           answer_open - think_close - kThinkClose.size())) ||
      !is_blank(raw.substr(answer_end))) {
    return FormatError::TagsOutOfOrder;
  }

  ParsedResponse resp;
  resp.mode = *mode;
  resp.think = std::string(raw.substr(think_begin, think_close - think_begin));
  resp.answer = std::string(raw.substr(answer_begin, answer_close - answer_begin));
  if (contains_tag_literal(resp.think) || contains_tag_literal(resp.answer)) {
    return FormatError::TagsOutOfOrder;
  }
  if (resp.mode == ModeId::GRD) resp.grounding_spans = extract_grounding_spans(resp.think);
  return resp;
}

int format_reward(std::string_view raw) {
  return std::holds_alternative<ParsedResponse>(parse_response(raw)) ? 1 : 0;
}

}  // namespace adagrpo
