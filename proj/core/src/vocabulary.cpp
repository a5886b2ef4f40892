#include "rft/vocabulary.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace rft {

namespace tokens {
namespace {
constexpr std::array<std::string_view, 6> kTags = {
    kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose, kReasonOpen, kReasonClose};
constexpr std::array<std::string_view, 3> kFillers = {"so", "we", "see"};
}  // namespace

std::span<const std::string_view> tags() { return kTags; }
std::span<const std::string_view> fillers() { return kFillers; }
}  // namespace tokens

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::string_view eos_token)
    : tokens_(std::move(tokens)) {
  if (tokens_.empty()) throw std::invalid_argument("vocabulary: empty token list");
  bool seen_eos = false;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto& t = tokens_[i];
    if (t.empty()) throw std::invalid_argument("vocabulary: empty token");
    if (std::any_of(t.begin(), t.end(), [](unsigned char c) { return c <= ' '; })) {
      throw std::invalid_argument("vocabulary: token contains whitespace: '" + t + "'");
    }
    if (!index_.emplace(t, static_cast<TokenId>(i)).second) {
      throw std::invalid_argument("vocabulary: duplicate token '" + t + "'");
    }
    if (t == eos_token) {
      seen_eos = true;
      eos_ = static_cast<TokenId>(i);
    }
  }
  if (!seen_eos) throw std::invalid_argument("vocabulary: missing end-of-sequence token");
}

Vocabulary Vocabulary::standard(std::span<const std::string> answer_tokens) {
  std::vector<std::string> all;
  for (auto t : tokens::tags()) all.emplace_back(t);
  all.emplace_back(tokens::kEos);
  for (auto t : tokens::fillers()) all.emplace_back(t);
  for (const auto& a : answer_tokens) {
    if (std::find(all.begin(), all.end(), a) == all.end()) all.push_back(a);
  }
  return Vocabulary(std::move(all), tokens::kEos);
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("vocabulary: token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id(std::string_view token) const {
  if (auto found = find(token)) return *found;
  throw std::out_of_range("vocabulary: unknown token '" + std::string(token) + "'");
}

TokenKind Vocabulary::kind(TokenId id) const {
  if (id == kBeginMarker) return TokenKind::Begin;
  if (id == eos_) return TokenKind::Eos;
  const auto& t = token(id);
  auto tags = tokens::tags();
  if (std::find(tags.begin(), tags.end(), t) != tags.end()) return TokenKind::Tag;
  auto fill = tokens::fillers();
  if (std::find(fill.begin(), fill.end(), t) != fill.end()) return TokenKind::Filler;
  return TokenKind::Answer;
}

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::Begin: return "begin";
    case TokenKind::Tag: return "tag";
    case TokenKind::Eos: return "eos";
    case TokenKind::Filler: return "filler";
    case TokenKind::Answer: return "answer";
  }
  return "unknown";
}

}  // namespace rft
