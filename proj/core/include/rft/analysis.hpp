#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rft/grammar.hpp"
#include "rft/grpo.hpp"
#include "rft/policy.hpp"
#include "rft/tasks.hpp"

namespace rft {

// --- think/answer consistency ---------------------------------------------

enum class Verdict { Consistent, Inconsistent, NoneInThink };

std::string_view to_string(Verdict verdict);
Verdict parse_verdict(std::string_view name);

struct ConsistencyRecord {
  std::string response_id;
  std::optional<std::string> think_answer;
  std::optional<std::string> tag_answer;
  Verdict verdict = Verdict::NoneInThink;
  std::optional<int> think_correct;
  std::optional<int> tag_correct;
};

/// Rule-based answer extraction from thinking text, last mention wins:
///  - choice:   last standalone option letter ("(A)", "is D.")
///  - contains: last choice-list member (or the truth) occurring as a
///              case-insensitive substring; longer names win ties
///  - exact:    last numeric literal
std::optional<std::string> extract_think_answer(std::string_view think_text,
                                                const TaskInstance& instance);

/// Canonical form used to compare two answers under the instance's verifier.
std::string canonical_answer(std::string_view answer, const TaskInstance& instance);

/// Requires parsed.answer_text.
ConsistencyRecord detect_inconsistency(const ParsedResponse& parsed, const TaskInstance& instance,
                                       std::string response_id = {});

struct InconsistencyReport {
  std::size_t total = 0;
  std::size_t inconsistent = 0;
  std::size_t none_in_think = 0;
  std::size_t inconsistent_think_correct = 0;
  std::size_t inconsistent_tag_correct = 0;
  std::size_t tag_scored = 0;
  std::size_t tag_correct = 0;

  double proportion_inconsistent = 0.0;
  std::optional<double> acc_think_on_inconsistent;
  std::optional<double> acc_tag_on_inconsistent;
  std::optional<double> overall_tag_accuracy;
};

InconsistencyReport inconsistency_report(std::span<const ConsistencyRecord> records);

// --- training dynamics -----------------------------------------------------

/// Trace fields addressable by name, e.g. "mean_accuracy_reward".
std::span<const std::string_view> trace_fields();
/// Throws std::invalid_argument for unknown fields or unrecorded values.
double trace_value(const TraceRecord& record, std::string_view field);

/// Earliest step whose trailing `window`-record mean of `field` reaches
/// `threshold`; nullopt if it never does.
std::optional<std::size_t> steps_to_threshold(const TrainingTrace& trace, std::string_view field,
                                              double threshold, std::size_t window);

/// Mean of `field` over the first and last `fraction` of the records.
struct PhaseMeans {
  double first = 0.0;
  double last = 0.0;
};
PhaseMeans phase_means(const TrainingTrace& trace, std::string_view field, double fraction);

// --- parameter drift -------------------------------------------------------

enum class DriftGrouping {
  TemplateFamily,  ///< prefix of the template id before '/'
  PositionBucket,  ///< number of real (non-begin) tokens in the context, 0..k
  LastTokenKind,   ///< begin / tag / eos / filler / answer
};

std::string_view to_string(DriftGrouping grouping);
std::span<const DriftGrouping> all_groupings();

struct DriftReport {
  DriftGrouping grouping;
  std::map<std::string, double> groups;
  /// Whole-table L1 norm, computed independently of the grouping.
  double total = 0.0;
};

/// Per-group L1 norm of after - before; contexts missing from one table
/// count as zero logits.
DriftReport param_drift(const ParameterTable& before, const ParameterTable& after,
                        DriftGrouping grouping);

double whole_table_l1(const ParameterTable& before, const ParameterTable& after);

}  // namespace rft
