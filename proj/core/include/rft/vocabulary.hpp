#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rft {

using TokenId = std::int32_t;

/// Pads contexts shorter than the configured order.
inline constexpr TokenId kBeginMarker = -1;

namespace tokens {
inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";
inline constexpr std::string_view kReasonOpen = "<reason>";
inline constexpr std::string_view kReasonClose = "</reason>";
inline constexpr std::string_view kEos = "<eos>";

/// Tag tokens in vocabulary order.
std::span<const std::string_view> tags();
/// Content-free tokens used inside think/reason segments.
std::span<const std::string_view> fillers();
}  // namespace tokens

enum class TokenKind { Begin, Tag, Eos, Filler, Answer };

/// Ordered set of distinct whitespace-free token strings with one EOS token.
class Vocabulary {
 public:
  Vocabulary(std::vector<std::string> tokens, std::string_view eos_token);

  /// Tags, EOS and fillers followed by the given answer tokens (deduplicated,
  /// order preserved).
  static Vocabulary standard(std::span<const std::string> answer_tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  std::optional<TokenId> find(std::string_view token) const;
  /// Throws std::out_of_range for unknown tokens.
  TokenId id(std::string_view token) const;
  TokenId eos() const { return eos_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  TokenKind kind(TokenId id) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.eos_ == b.eos_ && a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId eos_ = 0;
};

std::string_view to_string(TokenKind kind);

}  // namespace rft
