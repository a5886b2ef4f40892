#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "rft/grammar.hpp"
#include "rft/strategies.hpp"
#include "rft/tasks.hpp"

namespace rft {

enum class NormalizationPolicy {
  TrimCaseFold,  ///< trim outer whitespace, ASCII case-fold
  ByteExact,
};

struct RewardBreakdown {
  int format = 0;
  int accuracy = 0;
  double total = 0.0;
  bool format_active = true;

  friend bool operator==(const RewardBreakdown&, const RewardBreakdown&) = default;
};

std::string trim(std::string_view s);
std::string case_fold(std::string_view s);
std::string normalize(std::string_view s, NormalizationPolicy norm);

/// 1 iff the response shape is legal for the strategy. Always 0 for
/// strategies whose format reward is inactive.
int format_reward(const ParsedResponse& parsed, const StrategySpec& strategy);

int accuracy_exact(std::string_view candidate, std::string_view truth,
                   NormalizationPolicy norm = NormalizationPolicy::TrimCaseFold);

/// Leading choice label of an answer such as "B", "(A) 1" or "C. 7"; nullopt
/// if the answer does not start with a single-character label.
std::optional<std::string> choice_label(std::string_view candidate);

int accuracy_choice(std::string_view candidate, std::string_view correct_letter);

bool contains_case_insensitive(std::string_view haystack, std::string_view needle);

/// Class-name containment on the answer tag, falling back to the full
/// response when no answer tag was parsed.
int accuracy_contains_with_fallback(std::string_view full_response, const ParsedResponse& parsed,
                                    std::string_view class_name);

/// Verifier of the instance applied to an already extracted answer.
int verify_answer(std::string_view answer, const TaskInstance& instance,
                  NormalizationPolicy norm = NormalizationPolicy::TrimCaseFold);

RewardBreakdown total_reward(std::string_view full_response, const StrategySpec& strategy,
                             const TaskInstance& instance,
                             NormalizationPolicy norm = NormalizationPolicy::TrimCaseFold);

/// Same, reusing a parse of full_response under strategy.grammar.
RewardBreakdown total_reward(std::string_view full_response, const ParsedResponse& parsed,
                             const StrategySpec& strategy, const TaskInstance& instance,
                             NormalizationPolicy norm = NormalizationPolicy::TrimCaseFold);

}  // namespace rft
