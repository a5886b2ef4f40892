#pragma once

// Loader for fixtures/example_responses.jsonl: real model responses with
// hand-assigned scores.

#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "rft/analysis.hpp"
#include "rft/strategies.hpp"
#include "rft/tasks.hpp"

namespace fixture {

struct ExampleResponse {
  std::string id;
  rft::StrategyKind strategy;
  std::string full_response;
  rft::TaskInstance instance;
  int expected_format = 0;
  int expected_accuracy = 0;
  std::optional<rft::Verdict> expected_verdict;
  std::optional<rft::ResponseForm> expected_form;
};

inline std::optional<rft::ResponseForm> parse_form(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  const auto name = j.get<std::string>();
  for (auto f : {rft::ResponseForm::WithThinking, rft::ResponseForm::WithoutThinking,
                 rft::ResponseForm::Malformed}) {
    if (rft::to_string(f) == name) return f;
  }
  throw std::runtime_error("fixture: unknown form " + name);
}

inline std::vector<ExampleResponse> load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("fixture: cannot read " + path.string());
  std::vector<ExampleResponse> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    ExampleResponse r;
    r.id = j.at("id").get<std::string>();
    r.strategy = rft::parse_strategy_kind(j.at("strategy").get<std::string>());
    r.full_response = j.at("full_response").get<std::string>();
    r.instance.template_id = "fixture/" + r.id;
    r.instance.question = r.id;
    r.instance.truth = j.at("truth").get<std::string>();
    r.instance.verifier_kind = rft::parse_verifier_kind(j.at("verifier_kind").get<std::string>());
    if (!j.at("choices").is_null()) {
      r.instance.choice_list = j.at("choices").get<std::vector<std::string>>();
    }
    r.expected_format = j.at("expected_format").get<int>();
    r.expected_accuracy = j.at("expected_accuracy").get<int>();
    if (!j.at("expected_verdict").is_null()) {
      r.expected_verdict = rft::parse_verdict(j.at("expected_verdict").get<std::string>());
    }
    r.expected_form = parse_form(j.at("expected_form"));
    out.push_back(std::move(r));
  }
  return out;
}

inline std::filesystem::path default_path() {
  return std::filesystem::path(RFT_FIXTURE_DIR) / "example_responses.jsonl";
}

}  // namespace fixture
