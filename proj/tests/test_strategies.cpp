#include <string>

#include "doctest.h"
#include "rft/grammar.hpp"
#include "rft/rewards.hpp"
#include "rft/rng.hpp"
#include "rft/strategies.hpp"

using namespace rft;

TEST_SUITE("strategies") {

TEST_CASE("prompt templates are verbatim") {
  CHECK(build_prompt(make_strategy(StrategyKind::Thinking), "Q") ==
        "Q Please output the thinking process in <think> </think> and final answer in <answer> "
        "</answer> tags.");
  CHECK(build_prompt(make_strategy(StrategyKind::NoThinking), "Q") ==
        "Q Please directly output the answer.");
  CHECK(build_prompt(make_strategy(StrategyKind::ThinkAfterAnswer), "Q") ==
        "Q Please first output the answer in <answer> </answer> tags and then output a brief "
        "reasoning process in <reason> </reason> tags.");
  CHECK(build_prompt(make_strategy(StrategyKind::AdaptiveThinking), "Q") ==
        "Q. Please first identify whether this problem requires intermediate thinking or "
        "calculation. If the problem requires thinking or calculation, output the thinking and "
        "calculation process inside <think> </think> tags and the final answer inside <answer> "
        "</answer> tags. If no thinking or calculation is required, directly output the final "
        "answer inside <answer> </answer> tags. Your output should follow one of two cases: (1) "
        "'<answer> ... </answer>', (2) '<think> ... </think> <answer> ... </answer>'.");
}

TEST_CASE("build_prompt substitutes once") {
  const auto s = make_strategy(StrategyKind::NoThinking);
  CHECK(build_prompt(s, "What is {x}?") == "What is {x}? Please directly output the answer.");
  CHECK_THROWS(build_prompt(s, ""));
  auto broken = s;
  broken.prompt_template = "{Question} {Question}";
  CHECK_THROWS(build_prompt(broken, "Q"));
  broken.prompt_template = "no placeholder";
  CHECK_THROWS(build_prompt(broken, "Q"));
}

TEST_CASE("strategy data invariants") {
  for (auto kind : kAllStrategies) {
    const auto s = make_strategy(kind);
    CHECK(s.kind == kind);
    CHECK(s.format_reward_active == (kind != StrategyKind::NoThinking));
    const auto first = s.prompt_template.find(kQuestionPlaceholder);
    REQUIRE(first != std::string::npos);
    CHECK(s.prompt_template.find(kQuestionPlaceholder, first + 1) == std::string::npos);
    CHECK(parse_strategy_kind(to_string(kind)) == kind);
    CHECK(s.grammar.alternatives.empty() == (kind != StrategyKind::AdaptiveThinking));
  }
  CHECK_THROWS(parse_strategy_kind("Thinking"));
  CHECK_THROWS(parse_strategy_kind(""));
}

TEST_CASE("response grammars") {
  const auto t = response_grammar(StrategyKind::Thinking);
  REQUIRE(t.required_segments.size() == 2);
  CHECK(t.required_segments[0] == TagPair{"<think>", "</think>"});
  CHECK(t.required_segments[1] == TagPair{"<answer>", "</answer>"});

  const auto a = response_grammar(StrategyKind::AdaptiveThinking);
  CHECK(a.shapes().size() == 2);
  CHECK(a.required_segments == std::vector<TagPair>{answer_tags()});
  CHECK(a.alternatives == std::vector<TagPair>{think_tags(), answer_tags()});

  const auto r = response_grammar(StrategyKind::ThinkAfterAnswer);
  CHECK(r.required_segments == std::vector<TagPair>{answer_tags(), reason_tags()});

  CHECK(response_grammar(StrategyKind::NoThinking).empty());
}

TEST_CASE("classify_response_form examples") {
  const auto g = response_grammar(StrategyKind::AdaptiveThinking);
  CHECK(classify_response_form(parse_tags("<think>…</think> <answer>B</answer>", g)) ==
        ResponseForm::WithThinking);
  CHECK(classify_response_form(parse_tags("<answer> large </answer>", g)) ==
        ResponseForm::WithoutThinking);
  CHECK(classify_response_form(parse_tags("B", g)) == ResponseForm::Malformed);
}

TEST_CASE("legal adaptive responses are never classified malformed") {
  Rng rng(21);
  const auto s = make_strategy(StrategyKind::AdaptiveThinking);
  const std::vector<std::string> pieces = {"<think>", "</think>", "<answer>", "</answer>", " ", "x"};
  std::size_t legal = 0;
  for (int trial = 0; trial < 20000; ++trial) {
    std::string text;
    const auto n = rng.below(7);
    for (std::size_t i = 0; i < n; ++i) text += pieces[rng.below(pieces.size())];
    const auto parsed = parse_tags(text, s.grammar);
    const auto form = classify_response_form(parsed);
    if (format_reward(parsed, s) == 1) {
      ++legal;
      CHECK(form != ResponseForm::Malformed);
    } else {
      CHECK(form == ResponseForm::Malformed);
    }
  }
  CHECK(legal > 0);
}

}  // TEST_SUITE
