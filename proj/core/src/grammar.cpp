#include "rft/grammar.hpp"

#include <stdexcept>

#include "rft/vocabulary.hpp"

namespace rft {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

std::optional<std::vector<std::string>> match_shape(std::string_view text,
                                                    const std::vector<TagPair>& segments,
                                                    bool allow_outer_text) {
  for (const auto& seg : segments) {
    if (count_occurrences(text, seg.open) != 1 || count_occurrences(text, seg.close) != 1) {
      return std::nullopt;
    }
  }
  std::vector<std::string> inner;
  std::size_t pos = 0;
  auto gap_ok = [&](std::size_t from, std::size_t to) {
    if (allow_outer_text) return true;
    for (std::size_t i = from; i < to; ++i) {
      if (!is_space(text[i])) return false;
    }
    return true;
  };
  for (const auto& seg : segments) {
    const auto open = text.find(seg.open, pos);
    if (open == std::string_view::npos || !gap_ok(pos, open)) return std::nullopt;
    const auto body = open + seg.open.size();
    const auto close = text.find(seg.close, body);
    if (close == std::string_view::npos) return std::nullopt;
    inner.emplace_back(text.substr(body, close - body));
    pos = close + seg.close.size();
  }
  if (!gap_ok(pos, text.size())) return std::nullopt;
  return inner;
}

Shape shape_of(const std::vector<TagPair>& segments) {
  if (segments == std::vector<TagPair>{think_tags(), answer_tags()}) return Shape::ThinkAnswer;
  if (segments == std::vector<TagPair>{answer_tags()}) return Shape::AnswerOnly;
  if (segments == std::vector<TagPair>{answer_tags(), reason_tags()}) return Shape::AnswerReason;
  throw std::invalid_argument("grammar: unsupported segment sequence");
}

}  // namespace

std::vector<std::vector<TagPair>> TagGrammar::shapes() const {
  std::vector<std::vector<TagPair>> out;
  if (!required_segments.empty()) out.push_back(required_segments);
  if (!alternatives.empty()) out.push_back(alternatives);
  return out;
}

TagPair think_tags() {
  return {std::string(tokens::kThinkOpen), std::string(tokens::kThinkClose)};
}
TagPair answer_tags() {
  return {std::string(tokens::kAnswerOpen), std::string(tokens::kAnswerClose)};
}
TagPair reason_tags() {
  return {std::string(tokens::kReasonOpen), std::string(tokens::kReasonClose)};
}

std::string_view to_string(Shape shape) {
  switch (shape) {
    case Shape::ThinkAnswer: return "think_answer";
    case Shape::AnswerOnly: return "answer_only";
    case Shape::AnswerReason: return "answer_reason";
    case Shape::Malformed: return "malformed";
  }
  return "unknown";
}

ParsedResponse parse_tags(std::string_view text, const TagGrammar& grammar) {
  ParsedResponse parsed;
  if (grammar.empty()) {
    parsed.shape = Shape::AnswerOnly;
    parsed.answer_text = std::string(text);
    return parsed;
  }
  for (const auto& segments : grammar.shapes()) {
    auto inner = match_shape(text, segments, grammar.allow_outer_text);
    if (!inner) continue;
    parsed.shape = shape_of(segments);
    for (std::size_t i = 0; i < segments.size(); ++i) {
      const auto& open = segments[i].open;
      if (open == tokens::kThinkOpen) parsed.think_text = (*inner)[i];
      else if (open == tokens::kAnswerOpen) parsed.answer_text = (*inner)[i];
      else if (open == tokens::kReasonOpen) parsed.reason_text = (*inner)[i];
    }
    return parsed;
  }
  return parsed;
}

std::string render(const ParsedResponse& parsed, const TagGrammar& grammar) {
  if (parsed.shape == Shape::Malformed) {
    throw std::invalid_argument("render: malformed responses have no segments");
  }
  if (grammar.empty()) return parsed.answer_text.value_or("");
  for (const auto& segments : grammar.shapes()) {
    if (shape_of(segments) != parsed.shape) continue;
    std::string out;
    for (const auto& seg : segments) {
      const std::optional<std::string>* inner = nullptr;
      if (seg.open == tokens::kThinkOpen) inner = &parsed.think_text;
      else if (seg.open == tokens::kAnswerOpen) inner = &parsed.answer_text;
      else inner = &parsed.reason_text;
      if (!out.empty()) out += ' ';
      out += seg.open + inner->value_or("") + seg.close;
    }
    return out;
  }
  throw std::invalid_argument("render: shape not produced by this grammar");
}

}  // namespace rft
