#include "rft/rewards.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace rft {

namespace {
bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_alnum(unsigned char c) { return std::isalnum(c) != 0; }
}  // namespace

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string case_fold(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string normalize(std::string_view s, NormalizationPolicy norm) {
  if (norm == NormalizationPolicy::ByteExact) return std::string(s);
  return case_fold(trim(s));
}

int format_reward(const ParsedResponse& parsed, const StrategySpec& strategy) {
  if (!strategy.format_reward_active) return 0;
  switch (strategy.kind) {
    case StrategyKind::Thinking: return parsed.shape == Shape::ThinkAnswer ? 1 : 0;
    case StrategyKind::ThinkAfterAnswer: return parsed.shape == Shape::AnswerReason ? 1 : 0;
    case StrategyKind::AdaptiveThinking:
      return parsed.shape == Shape::AnswerOnly || parsed.shape == Shape::ThinkAnswer ? 1 : 0;
    case StrategyKind::NoThinking: return 0;
  }
  return 0;
}

int accuracy_exact(std::string_view candidate, std::string_view truth, NormalizationPolicy norm) {
  return normalize(candidate, norm) == normalize(truth, norm) ? 1 : 0;
}

std::optional<std::string> choice_label(std::string_view candidate) {
  std::string s = trim(candidate);
  std::string_view v = s;
  const bool parenthesized = !v.empty() && v.front() == '(';
  if (parenthesized) v.remove_prefix(1);
  std::size_t run = 0;
  while (run < v.size() && is_alnum(static_cast<unsigned char>(v[run]))) ++run;
  if (run != 1) return std::nullopt;
  if (parenthesized && (v.size() < 2 || v[1] != ')')) return std::nullopt;
  return std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(v[0]))));
}

int accuracy_choice(std::string_view candidate, std::string_view correct_letter) {
  const auto label = choice_label(candidate);
  if (!label) return 0;
  return case_fold(*label) == case_fold(trim(correct_letter)) ? 1 : 0;
}

bool contains_case_insensitive(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return false;
  return case_fold(haystack).find(case_fold(needle)) != std::string::npos;
}

int accuracy_contains_with_fallback(std::string_view full_response, const ParsedResponse& parsed,
                                    std::string_view class_name) {
  if (class_name.empty()) throw std::invalid_argument("class name must be non-empty");
  if (parsed.answer_text) return contains_case_insensitive(*parsed.answer_text, class_name) ? 1 : 0;
  return contains_case_insensitive(full_response, class_name) ? 1 : 0;
}

int verify_answer(std::string_view answer, const TaskInstance& instance, NormalizationPolicy norm) {
  switch (instance.verifier_kind) {
    case VerifierKind::Exact: return accuracy_exact(answer, instance.truth, norm);
    case VerifierKind::Choice: return accuracy_choice(answer, instance.truth);
    case VerifierKind::Contains: return contains_case_insensitive(answer, instance.truth) ? 1 : 0;
  }
  return 0;
}

RewardBreakdown total_reward(std::string_view full_response, const StrategySpec& strategy,
                             const TaskInstance& instance, NormalizationPolicy norm) {
  if (!strategy.format_reward_active) {
    return total_reward(full_response, ParsedResponse{}, strategy, instance, norm);
  }
  return total_reward(full_response, parse_tags(full_response, strategy.grammar), strategy,
                      instance, norm);
}

RewardBreakdown total_reward(std::string_view full_response, const ParsedResponse& parsed,
                             const StrategySpec& strategy, const TaskInstance& instance,
                             NormalizationPolicy norm) {
  RewardBreakdown r;
  if (!strategy.format_reward_active) {
    // Tag-free strategy: the whole output must equal the truth.
    r.format_active = false;
    r.accuracy = accuracy_exact(full_response, instance.truth, norm);
    r.total = r.accuracy;
    return r;
  }
  r.format = format_reward(parsed, strategy);
  if (instance.verifier_kind == VerifierKind::Contains) {
    r.accuracy = accuracy_contains_with_fallback(full_response, parsed, instance.truth);
  } else if (parsed.answer_text) {
    r.accuracy = verify_answer(*parsed.answer_text, instance, norm);
  }
  r.total = r.format + r.accuracy;
  return r;
}

}  // namespace rft
