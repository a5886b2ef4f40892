#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rft/tasks.hpp"
#include "rft/vocabulary.hpp"

namespace rft {

class Rng;

/// Conditioning key of the tabular policy: the task template plus the last
/// `order` emitted tokens, left-padded with kBeginMarker.
struct ContextKey {
  std::string template_id;
  std::vector<TokenId> recent;

  friend auto operator<=>(const ContextKey&, const ContextKey&) = default;
  friend bool operator==(const ContextKey&, const ContextKey&) = default;
};

ContextKey make_context(std::string_view template_id, std::span<const TokenId> prefix,
                        int order);

using LogitMap = std::map<ContextKey, std::vector<double>>;

/// Sparse accumulator over logits, keyed like ParameterTable.
class SparseGradient {
 public:
  explicit SparseGradient(std::size_t width) : width_(width) {}

  std::size_t width() const { return width_; }
  const LogitMap& entries() const { return entries_; }

  std::vector<double>& at(const ContextKey& ctx);
  /// Zero for contexts never touched.
  double value(const ContextKey& ctx, std::size_t index) const;

  void add_scaled(const SparseGradient& other, double scale);
  void scale(double factor);
  double max_abs() const;

 private:
  std::size_t width_;
  LogitMap entries_;
};

/// Logits of a context-conditioned categorical sequence policy.
///
/// Contexts never written resolve to the all-zero logit vector (uniform
/// distribution). Copies are deep, so a copy serves as an immutable snapshot.
class ParameterTable {
 public:
  ParameterTable(Vocabulary vocab, int context_order);

  const Vocabulary& vocabulary() const { return vocab_; }
  int context_order() const { return order_; }
  std::size_t width() const { return vocab_.size(); }

  std::span<const double> logits(const ContextKey& ctx) const;
  /// Materializes the context at zero if absent.
  std::vector<double>& mutable_logits(const ContextKey& ctx);
  const LogitMap& entries() const { return table_; }

  /// this += step * gradient
  void ascend(const SparseGradient& gradient, double step);

 private:
  Vocabulary vocab_;
  int order_;
  LogitMap table_;
  std::vector<double> zeros_;
};

struct Response {
  std::vector<TokenId> tokens;
  std::vector<double> per_token_logp;
  double total_logp = 0.0;

  friend bool operator==(const Response&, const Response&) = default;
};

/// Numerically stable softmax of the context's logits.
std::vector<double> token_distribution(const ParameterTable& params, const ContextKey& ctx);

/// Log-softmax; shared by sampling and scoring so both agree bit-for-bit.
std::vector<double> token_log_distribution(const ParameterTable& params, const ContextKey& ctx);

/// Ancestral sample at temperature 1, stopping at EOS or max_len tokens.
Response sample_response(const ParameterTable& params, const TaskInstance& instance,
                         std::size_t max_len, Rng& rng);

/// Argmax decoding (lowest token id wins ties).
Response greedy_response(const ParameterTable& params, const TaskInstance& instance,
                         std::size_t max_len);

double sequence_log_prob(const ParameterTable& params, const TaskInstance& instance,
                         std::span<const TokenId> tokens);

/// d log pi(tokens) / d logits: one-hot(chosen) - softmax at each visited context.
SparseGradient log_prob_gradient(const ParameterTable& params, const TaskInstance& instance,
                                 std::span<const TokenId> tokens);

/// Space-joined token strings with EOS dropped.
std::string render_text(const Vocabulary& vocab, std::span<const TokenId> tokens);

/// Text format: `# rft-params v1`, `# order k`, `# vocab` header lines, then one
/// `template_id TAB token ids TAB logits` line per context with %.17g logits.
void write_parameters(std::ostream& out, const ParameterTable& params);
ParameterTable read_parameters(std::istream& in);
void save_parameters(const std::filesystem::path& path, const ParameterTable& params);
ParameterTable load_parameters(const std::filesystem::path& path);

}  // namespace rft
