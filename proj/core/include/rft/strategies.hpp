#pragma once

#include <array>
#include <string>
#include <string_view>

#include "rft/grammar.hpp"

namespace rft {

enum class StrategyKind { Thinking, NoThinking, ThinkAfterAnswer, AdaptiveThinking };

inline constexpr std::array<StrategyKind, 4> kAllStrategies = {
    StrategyKind::Thinking, StrategyKind::NoThinking, StrategyKind::ThinkAfterAnswer,
    StrategyKind::AdaptiveThinking};

/// CLI spelling: thinking | no-thinking | think-after-answer | adaptive.
std::string_view to_string(StrategyKind kind);
StrategyKind parse_strategy_kind(std::string_view name);

struct StrategySpec {
  StrategyKind kind;
  std::string prompt_template;
  TagGrammar grammar;
  bool format_reward_active;
};

StrategySpec make_strategy(StrategyKind kind);

inline constexpr std::string_view kQuestionPlaceholder = "{Question}";

std::string build_prompt(const StrategySpec& strategy, std::string_view question);

TagGrammar response_grammar(StrategyKind kind);
inline TagGrammar response_grammar(const StrategySpec& strategy) { return strategy.grammar; }

enum class ResponseForm { WithThinking, WithoutThinking, Malformed };

std::string_view to_string(ResponseForm form);

ResponseForm classify_response_form(const ParsedResponse& parsed);

}  // namespace rft
