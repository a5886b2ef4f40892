#pragma once

#include <span>

#include "rft/policy.hpp"
#include "rft/strategies.hpp"
#include "rft/tasks.hpp"

namespace rft {

/// Starting table that stands in for an instruction-tuned base model.
///
/// For every template in `corpus`, the logits of tokens that continue the
/// strategy's requested output skeleton (tag order, filler inside think or
/// reason segments, an answer token inside the answer segment, EOS after the
/// last closing tag) are raised by `strength`; everything else stays at zero.
/// The prior knows the format but not the answers: all answer tokens are
/// raised equally. strength = 0 gives the plain uniform cold start. Contexts
/// are keyed by the most recent token only, so the prior is written for every
/// left-padded history of length `order`.
ParameterTable instruction_prior(const Vocabulary& vocab, const StrategySpec& strategy,
                                 std::span<const TaskInstance> corpus, int order,
                                 double strength);

struct PriorConfig {
  double strength = 4.0;
  /// Mean number of fillers in a think or reason segment; 0 boosts the
  /// closing tag like any filler.
  double segment_length = 0.0;

  void validate() const;
};

/// As above, with the closing-tag logit set so segments average
/// `segment_length` fillers.
ParameterTable instruction_prior(const Vocabulary& vocab, const StrategySpec& strategy,
                                 std::span<const TaskInstance> corpus, int order,
                                 const PriorConfig& prior);

}  // namespace rft
