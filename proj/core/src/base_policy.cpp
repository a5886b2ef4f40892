#include "rft/base_policy.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace rft {

namespace {

/// Preferred successor and its offset from the common boost.
using Preferences = std::map<TokenId, std::vector<std::pair<TokenId, double>>>;

std::vector<std::pair<TokenId, double>> plain(std::span<const TokenId> ids) {
  std::vector<std::pair<TokenId, double>> out;
  for (TokenId t : ids) out.emplace_back(t, 0.0);
  return out;
}

/// Preferred successors keyed by the last emitted token (kBeginMarker at start).
Preferences skeleton(const Vocabulary& vocab, StrategyKind kind, double close_offset) {
  std::vector<TokenId> answers;
  std::vector<TokenId> fillers;
  for (TokenId t = 0; t < static_cast<TokenId>(vocab.size()); ++t) {
    if (vocab.kind(t) == TokenKind::Answer) answers.push_back(t);
    if (vocab.kind(t) == TokenKind::Filler) fillers.push_back(t);
  }
  auto id = [&](std::string_view tok) { return vocab.id(tok); };
  const TokenId eos = vocab.eos();
  Preferences prefs;
  auto one = [](TokenId t) { return std::vector<std::pair<TokenId, double>>{{t, 0.0}}; };
  auto answer_segment = [&](TokenId after_close) {
    prefs[id(tokens::kAnswerOpen)] = plain(answers);
    for (TokenId a : answers) prefs[a] = one(id(tokens::kAnswerClose));
    prefs[id(tokens::kAnswerClose)] = one(after_close);
  };
  auto filler_segment = [&](std::string_view open, std::string_view close) {
    prefs[id(open)] = plain(fillers);
    auto inside = plain(fillers);
    inside.emplace_back(id(close), close_offset);
    for (TokenId f : fillers) prefs[f] = inside;
  };
  switch (kind) {
    case StrategyKind::Thinking:
      prefs[kBeginMarker] = one(id(tokens::kThinkOpen));
      filler_segment(tokens::kThinkOpen, tokens::kThinkClose);
      prefs[id(tokens::kThinkClose)] = one(id(tokens::kAnswerOpen));
      answer_segment(eos);
      break;
    case StrategyKind::AdaptiveThinking:
      prefs[kBeginMarker] = {{id(tokens::kThinkOpen), 0.0}, {id(tokens::kAnswerOpen), 0.0}};
      filler_segment(tokens::kThinkOpen, tokens::kThinkClose);
      prefs[id(tokens::kThinkClose)] = one(id(tokens::kAnswerOpen));
      answer_segment(eos);
      break;
    case StrategyKind::ThinkAfterAnswer:
      prefs[kBeginMarker] = one(id(tokens::kAnswerOpen));
      answer_segment(id(tokens::kReasonOpen));
      filler_segment(tokens::kReasonOpen, tokens::kReasonClose);
      prefs[id(tokens::kReasonClose)] = one(eos);
      break;
    case StrategyKind::NoThinking:
      prefs[kBeginMarker] = plain(answers);
      for (TokenId a : answers) prefs[a] = one(eos);
      break;
  }
  return prefs;
}

/// All left-padded histories of length `order` ending in `last`.
void histories(int order, TokenId last, std::size_t vocab_size,
               std::vector<std::vector<TokenId>>& out) {
  if (order == 0) return;
  std::vector<std::vector<TokenId>> partial = {{}};
  // Positions before the last one: either a begin run or real tokens.
  for (int pos = 0; pos < order - 1; ++pos) {
    std::vector<std::vector<TokenId>> next;
    for (const auto& h : partial) {
      const bool all_begin = std::all_of(h.begin(), h.end(), [](TokenId t) { return t == kBeginMarker; });
      if (all_begin) {
        auto b = h;
        b.push_back(kBeginMarker);
        next.push_back(std::move(b));
      }
      for (TokenId t = 0; t < static_cast<TokenId>(vocab_size); ++t) {
        auto c = h;
        c.push_back(t);
        next.push_back(std::move(c));
      }
    }
    partial = std::move(next);
  }
  for (auto& h : partial) {
    const bool all_begin = std::all_of(h.begin(), h.end(), [](TokenId t) { return t == kBeginMarker; });
    if (last == kBeginMarker && !all_begin) continue;
    h.push_back(last);
    out.push_back(std::move(h));
  }
}

}  // namespace

void PriorConfig::validate() const {
  if (!(strength >= 0.0) || !std::isfinite(strength)) {
    throw std::invalid_argument("prior_strength must be finite and non-negative");
  }
  if (segment_length != 0.0 && !(segment_length > 1.0 && std::isfinite(segment_length))) {
    throw std::invalid_argument("prior_segment_length must be 0 or greater than 1");
  }
}

ParameterTable instruction_prior(const Vocabulary& vocab, const StrategySpec& strategy,
                                 std::span<const TaskInstance> corpus, int order,
                                 double strength) {
  return instruction_prior(vocab, strategy, corpus, order, PriorConfig{strength, 0.0});
}

ParameterTable instruction_prior(const Vocabulary& vocab, const StrategySpec& strategy,
                                 std::span<const TaskInstance> corpus, int order,
                                 const PriorConfig& prior) {
  prior.validate();
  ParameterTable params(vocab, order);
  const double strength = prior.strength;
  if (strength == 0.0 || order == 0) return params;
  // Closing a segment with probability 1/L among the boosted tokens gives L
  // fillers on average.
  double close_offset = 0.0;
  if (prior.segment_length > 0.0) {
    const double p = 1.0 / prior.segment_length;
    close_offset = std::log(static_cast<double>(tokens::fillers().size()) * p / (1.0 - p));
  }
  std::set<std::string> templates;
  for (const auto& inst : corpus) templates.insert(inst.template_id);
  const auto prefs = skeleton(vocab, strategy.kind, close_offset);
  for (const auto& tmpl : templates) {
    for (const auto& [last, preferred] : prefs) {
      std::vector<std::vector<TokenId>> hs;
      histories(order, last, vocab.size(), hs);
      for (const auto& h : hs) {
        auto& row = params.mutable_logits(ContextKey{tmpl, h});
        for (const auto& [t, offset] : preferred) {
          row[static_cast<std::size_t>(t)] += strength + offset;
        }
      }
    }
  }
  return params;
}

}  // namespace rft
