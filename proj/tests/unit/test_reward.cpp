#include <cctype>
#include <stdexcept>
#include <functional>
#include <string>

#include "doctest.h"

#include "adagrpo/format.hpp"
#include "adagrpo/reward.hpp"
#include "adagrpo/rng.hpp"

using namespace adagrpo;

namespace {

// Straightforward re-statement of the normalization rules, used as an
// oracle over every short string of a small alphabet.
std::string oracle_normalize(const std::string& in) {
  std::string s;
  for (char c : in) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  bool changed = true;
  while (changed) {
    changed = false;
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(0, 1), changed = true;
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back(), changed = true;
    if (!s.empty() && std::string(".,;:!?").find(s.back()) != std::string::npos) s.pop_back(), changed = true;
  }
  // Decimal numeral: optional sign, digits, '.', digits.
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  const std::size_t int_start = i;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i == int_start || i >= s.size() || s[i] != '.') return s;
  const std::size_t dot = i++;
  const std::size_t frac_start = i;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i != s.size() || i == frac_start) return s;
  std::size_t end = s.size();
  while (end > dot + 1 && s[end - 1] == '0') --end;
  if (end == dot + 1) end = dot;
  return s.substr(0, end);
}

const std::string kValidTxt = "<text> <think>t</think> <answer>4</answer>";

}  // namespace

TEST_CASE("accuracy_reward examples") {
  CHECK(accuracy_reward("4", "4") == 1);
  CHECK(accuracy_reward("4.0", "4") == 1);
  CHECK(accuracy_reward("B", "C") == 0);
}

TEST_CASE("answer normalization") {
  CHECK(normalize_answer("  Yes.  ") == "yes");
  CHECK(normalize_answer("4.50") == "4.5");
  CHECK(normalize_answer("-3.000") == "-3");
  CHECK(normalize_answer("4.") == "4");  // trailing period is punctuation
  CHECK(normalize_answer("10") == "10");  // integers keep their zeros
  CHECK(normalize_answer("1.0.0") == "1.0.0");
  CHECK(accuracy_reward("C!", "c") == 1);
  CHECK_THROWS_AS(accuracy_reward("4", ""), std::invalid_argument);
}

TEST_CASE("normalization matches the oracle on every string up to length 5") {
  const std::string alphabet = "0A.a -1";
  std::function<void(std::string&, int)> visit = [&](std::string& s, int depth) {
    CHECK(normalize_answer(s) == oracle_normalize(s));
    if (depth == 0) return;
    for (char c : alphabet) {
      s.push_back(c);
      visit(s, depth - 1);
      s.pop_back();
    }
  };
  std::string s;
  visit(s, 5);
}

TEST_CASE("total_reward examples") {
  const auto a = total_reward(kValidTxt, "4", 0.0);
  CHECK(a.format_component == 1);
  CHECK(a.accuracy_component == 1);
  CHECK(a.total == 1.0);

  const auto b = total_reward("garbled", "4", 0.0);
  CHECK(b.format_component == 0);
  CHECK(b.accuracy_component == 0);
  CHECK(b.total == 0.0);

  const auto c = total_reward("<ground> <think>t</think> <answer>5</answer>", "4", 0.1);
  CHECK(c.format_component == 1);
  CHECK(c.accuracy_component == 0);
  CHECK(c.total == doctest::Approx(0.1).epsilon(1e-15));

  CHECK_THROWS_AS(total_reward(kValidTxt, "4", -0.1), std::invalid_argument);
}

TEST_CASE("accuracy is gated on format") {
  // Right answer, broken structure: nothing.
  CHECK(total_reward("<text> <answer>4</answer>", "4", 0.3).total == 0.0);
  CHECK(total_reward("<think>t</think> <answer>4</answer>", "4", 0.0).accuracy_component == 0);
}

TEST_SUITE("invariants") {
  TEST_CASE("reward: total matches its components and stays in [0, 1 + w]") {
    const std::vector<std::string> responses{kValidTxt, "<ground> <think>x</think> <answer>3</answer>", "junk",
                                             "<text> <think>x</think>", "<ground> <think></think> <answer> 4. </answer>"};
    for (const auto& raw : responses) {
      for (double w : {0.0, 0.05, 0.5, 2.0}) {
        const auto r = total_reward(raw, "4", w);
        CHECK(r.total == r.accuracy_component * r.format_component + w * r.format_component);
        CHECK(r.total >= 0.0);
        CHECK(r.total <= 1.0 + w);
      }
    }
  }

  TEST_CASE("reward: swapping the mode prefix leaves the reward unchanged") {
    Rng rng = make_stream(3, "reward-neutrality");
    std::uniform_int_distribution<int> digit(0, 9);
    for (int i = 0; i < 300; ++i) {
      const std::string answer = std::to_string(digit(rng));
      const std::string gold = std::to_string(digit(rng));
      const ParsedResponse txt{ModeId::TXT, "reasoning " + std::to_string(i), answer, {}};
      ParsedResponse grd{ModeId::GRD, txt.think, answer, {}};
      const double w = 0.1 * (i % 4);
      const auto a = total_reward(serialize(txt), gold, w);
      const auto b = total_reward(serialize(grd), gold, w);
      CHECK(a.total == b.total);
      CHECK(a.accuracy_component == b.accuracy_component);
    }
  }

  TEST_CASE("reward: non-decreasing in the format weight for valid responses") {
    for (const std::string gold : {"4", "5"}) {
      double previous = -1.0;
      for (double w = 0.0; w <= 3.0; w += 0.25) {
        const double total = total_reward(kValidTxt, gold, w).total;
        CHECK(total >= previous);
        previous = total;
      }
    }
  }
}
