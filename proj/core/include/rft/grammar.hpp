#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rft {

struct TagPair {
  std::string open;
  std::string close;

  friend bool operator==(const TagPair&, const TagPair&) = default;
};

/// Legal response shapes as ordered tag segments.
///
/// `required_segments` is the primary shape; `alternatives` holds the second
/// legal shape for adaptive responses and is empty otherwise. A grammar with
/// no segments at all treats the whole output as the answer.
struct TagGrammar {
  std::vector<TagPair> required_segments;
  std::vector<TagPair> alternatives;
  /// Accept arbitrary text between and around segments instead of whitespace only.
  bool allow_outer_text = false;

  bool empty() const { return required_segments.empty() && alternatives.empty(); }
  /// Non-empty shapes in matching order.
  std::vector<std::vector<TagPair>> shapes() const;

  friend bool operator==(const TagGrammar&, const TagGrammar&) = default;
};

TagPair think_tags();
TagPair answer_tags();
TagPair reason_tags();

enum class Shape { ThinkAnswer, AnswerOnly, AnswerReason, Malformed };

std::string_view to_string(Shape shape);

struct ParsedResponse {
  std::optional<std::string> think_text;
  std::optional<std::string> answer_text;
  std::optional<std::string> reason_text;
  Shape shape = Shape::Malformed;

  friend bool operator==(const ParsedResponse&, const ParsedResponse&) = default;
};

/// Matches `text` against each shape of the grammar in turn.
///
/// A shape matches when its segments appear in order, every tag of the shape
/// occurs exactly once, and only whitespace separates segments (unless the
/// grammar allows outer text). Leading and trailing whitespace is ignored and
/// inner text is returned verbatim.
ParsedResponse parse_tags(std::string_view text, const TagGrammar& grammar);

/// Inverse of parse_tags for well-formed responses: segments joined by one space.
std::string render(const ParsedResponse& parsed, const TagGrammar& grammar);

}  // namespace rft
