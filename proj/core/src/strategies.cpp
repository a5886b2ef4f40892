#include "rft/strategies.hpp"

#include <stdexcept>

namespace rft {

namespace {

constexpr std::string_view kThinkingTemplate =
    "{Question} Please output the thinking process in <think> </think> and final answer in "
    "<answer> </answer> tags.";

constexpr std::string_view kNoThinkingTemplate = "{Question} Please directly output the answer.";

constexpr std::string_view kThinkAfterAnswerTemplate =
    "{Question} Please first output the answer in <answer> </answer> tags and then output a "
    "brief reasoning process in <reason> </reason> tags.";

constexpr std::string_view kAdaptiveTemplate =
    "{Question}. Please first identify whether this problem requires intermediate thinking or "
    "calculation. If the problem requires thinking or calculation, output the thinking and "
    "calculation process inside <think> </think> tags and the final answer inside <answer> "
    "</answer> tags. If no thinking or calculation is required, directly output the final "
    "answer inside <answer> </answer> tags. Your output should follow one of two cases: (1) "
    "'<answer> ... </answer>', (2) '<think> ... </think> <answer> ... </answer>'.";

}  // namespace

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::Thinking: return "thinking";
    case StrategyKind::NoThinking: return "no-thinking";
    case StrategyKind::ThinkAfterAnswer: return "think-after-answer";
    case StrategyKind::AdaptiveThinking: return "adaptive";
  }
  return "unknown";
}

StrategyKind parse_strategy_kind(std::string_view name) {
  for (auto kind : kAllStrategies) {
    if (to_string(kind) == name) return kind;
  }
  throw std::invalid_argument(
      "unknown strategy '" + std::string(name) +
      "' (expected thinking | no-thinking | think-after-answer | adaptive)");
}

TagGrammar response_grammar(StrategyKind kind) {
  TagGrammar g;
  switch (kind) {
    case StrategyKind::Thinking:
      g.required_segments = {think_tags(), answer_tags()};
      break;
    case StrategyKind::ThinkAfterAnswer:
      g.required_segments = {answer_tags(), reason_tags()};
      break;
    case StrategyKind::AdaptiveThinking:
      g.required_segments = {answer_tags()};
      g.alternatives = {think_tags(), answer_tags()};
      break;
    case StrategyKind::NoThinking:
      break;
  }
  return g;
}

StrategySpec make_strategy(StrategyKind kind) {
  std::string_view tmpl;
  switch (kind) {
    case StrategyKind::Thinking: tmpl = kThinkingTemplate; break;
    case StrategyKind::NoThinking: tmpl = kNoThinkingTemplate; break;
    case StrategyKind::ThinkAfterAnswer: tmpl = kThinkAfterAnswerTemplate; break;
    case StrategyKind::AdaptiveThinking: tmpl = kAdaptiveTemplate; break;
  }
  return StrategySpec{kind, std::string(tmpl), response_grammar(kind),
                      kind != StrategyKind::NoThinking};
}

std::string build_prompt(const StrategySpec& strategy, std::string_view question) {
  if (question.empty()) throw std::invalid_argument("build_prompt: empty question");
  const auto& tmpl = strategy.prompt_template;
  const auto pos = tmpl.find(kQuestionPlaceholder);
  if (pos == std::string::npos ||
      tmpl.find(kQuestionPlaceholder, pos + kQuestionPlaceholder.size()) != std::string::npos) {
    throw std::invalid_argument("prompt template must contain exactly one {Question}");
  }
  std::string out = tmpl.substr(0, pos);
  out += question;
  out += tmpl.substr(pos + kQuestionPlaceholder.size());
  return out;
}

std::string_view to_string(ResponseForm form) {
  switch (form) {
    case ResponseForm::WithThinking: return "with_thinking";
    case ResponseForm::WithoutThinking: return "without_thinking";
    case ResponseForm::Malformed: return "malformed";
  }
  return "unknown";
}

ResponseForm classify_response_form(const ParsedResponse& parsed) {
  switch (parsed.shape) {
    case Shape::ThinkAnswer: return ResponseForm::WithThinking;
    case Shape::AnswerOnly: return ResponseForm::WithoutThinking;
    default: return ResponseForm::Malformed;
  }
}

}  // namespace rft
