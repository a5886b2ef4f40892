#include "rft/analysis.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "rft/rewards.hpp"

namespace rft {

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Consistent: return "consistent";
    case Verdict::Inconsistent: return "inconsistent";
    case Verdict::NoneInThink: return "none";
  }
  return "unknown";
}

Verdict parse_verdict(std::string_view name) {
  if (name == "consistent") return Verdict::Consistent;
  if (name == "inconsistent") return Verdict::Inconsistent;
  if (name == "none") return Verdict::NoneInThink;
  throw std::invalid_argument("unknown verdict '" + std::string(name) + "'");
}

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

std::optional<std::string> last_choice_letter(std::string_view text, const TaskInstance& instance) {
  std::string valid;
  if (instance.choice_list) {
    for (const auto& c : *instance.choice_list) {
      if (c.size() == 1) valid += c;
    }
  }
  if (valid.empty()) {
    for (char c = 'A'; c <= 'Z'; ++c) valid += c;
  }
  std::optional<std::string> found;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (valid.find(c) == std::string::npos) continue;
    const bool left_ok = i == 0 || !is_alnum(text[i - 1]);
    const bool right_ok = i + 1 == text.size() || !is_alnum(text[i + 1]);
    if (left_ok && right_ok) found = std::string(1, c);
  }
  return found;
}

std::optional<std::string> last_member(std::string_view text, const TaskInstance& instance) {
  std::vector<std::string> candidates;
  if (instance.choice_list) candidates = *instance.choice_list;
  if (std::find(candidates.begin(), candidates.end(), instance.truth) == candidates.end()) {
    candidates.push_back(instance.truth);
  }
  const std::string folded = case_fold(text);
  // Ranked by where the mention ends, so "polka-dotted" beats the "dotted"
  // inside it.
  std::optional<std::string> best;
  std::size_t best_end = 0;
  for (const auto& cand : candidates) {
    if (cand.empty()) continue;
    const auto pos = folded.rfind(case_fold(cand));
    if (pos == std::string::npos) continue;
    const auto end = pos + cand.size();
    if (!best || end > best_end || (end == best_end && cand.size() > best->size())) {
      best = cand;
      best_end = end;
    }
  }
  return best;
}

std::optional<std::string> last_number(std::string_view text) {
  std::optional<std::string> found;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_digit(text[i])) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (start > 0 && text[start - 1] == '-' && (start < 2 || !is_alnum(text[start - 2]))) --start;
    while (i < text.size() && is_digit(text[i])) ++i;
    if (i + 1 < text.size() && text[i] == '.' && is_digit(text[i + 1])) {
      ++i;
      while (i < text.size() && is_digit(text[i])) ++i;
    }
    found = std::string(text.substr(start, i - start));
  }
  return found;
}

}  // namespace

std::optional<std::string> extract_think_answer(std::string_view think_text,
                                                const TaskInstance& instance) {
  switch (instance.verifier_kind) {
    case VerifierKind::Choice: return last_choice_letter(think_text, instance);
    case VerifierKind::Contains: return last_member(think_text, instance);
    case VerifierKind::Exact: return last_number(think_text);
  }
  return std::nullopt;
}

std::string canonical_answer(std::string_view answer, const TaskInstance& instance) {
  if (instance.verifier_kind == VerifierKind::Choice) {
    if (auto label = choice_label(answer)) return *label;
  }
  return normalize(answer, NormalizationPolicy::TrimCaseFold);
}

ConsistencyRecord detect_inconsistency(const ParsedResponse& parsed, const TaskInstance& instance,
                                       std::string response_id) {
  if (!parsed.answer_text) {
    throw std::invalid_argument("detect_inconsistency: response has no answer tag");
  }
  ConsistencyRecord rec;
  rec.response_id = std::move(response_id);
  rec.tag_answer = canonical_answer(*parsed.answer_text, instance);
  rec.tag_correct = verify_answer(*parsed.answer_text, instance);
  if (parsed.think_text) rec.think_answer = extract_think_answer(*parsed.think_text, instance);
  if (!rec.think_answer) {
    rec.verdict = Verdict::NoneInThink;
    return rec;
  }
  rec.think_correct = verify_answer(*rec.think_answer, instance);
  rec.verdict = canonical_answer(*rec.think_answer, instance) == *rec.tag_answer
                    ? Verdict::Consistent
                    : Verdict::Inconsistent;
  return rec;
}

InconsistencyReport inconsistency_report(std::span<const ConsistencyRecord> records) {
  if (records.empty()) throw std::invalid_argument("inconsistency_report: empty corpus");
  InconsistencyReport rep;
  rep.total = records.size();
  for (const auto& r : records) {
    if (r.verdict == Verdict::NoneInThink) ++rep.none_in_think;
    if (r.tag_correct) {
      ++rep.tag_scored;
      rep.tag_correct += static_cast<std::size_t>(*r.tag_correct);
    }
    if (r.verdict != Verdict::Inconsistent) continue;
    ++rep.inconsistent;
    rep.inconsistent_think_correct += static_cast<std::size_t>(r.think_correct.value_or(0));
    rep.inconsistent_tag_correct += static_cast<std::size_t>(r.tag_correct.value_or(0));
  }
  rep.proportion_inconsistent =
      static_cast<double>(rep.inconsistent) / static_cast<double>(rep.total);
  if (rep.inconsistent > 0) {
    const double n = static_cast<double>(rep.inconsistent);
    rep.acc_think_on_inconsistent = static_cast<double>(rep.inconsistent_think_correct) / n;
    rep.acc_tag_on_inconsistent = static_cast<double>(rep.inconsistent_tag_correct) / n;
  }
  if (rep.tag_scored > 0) {
    rep.overall_tag_accuracy =
        static_cast<double>(rep.tag_correct) / static_cast<double>(rep.tag_scored);
  }
  return rep;
}

// --- training dynamics -----------------------------------------------------

std::span<const std::string_view> trace_fields() {
  static constexpr std::array<std::string_view, 6> fields = {
      "mean_reward",          "mean_accuracy_reward", "format_pass_rate",
      "mean_response_length", "mean_kl",              "objective_value"};
  return fields;
}

double trace_value(const TraceRecord& record, std::string_view field) {
  if (field == "mean_reward") return record.mean_reward;
  if (field == "mean_accuracy_reward") return record.mean_accuracy_reward;
  if (field == "mean_response_length") return record.mean_response_length;
  if (field == "mean_kl") return record.mean_kl;
  if (field == "objective_value") return record.objective_value;
  if (field == "format_pass_rate") {
    if (!record.format_pass_rate) {
      throw std::invalid_argument("format_pass_rate is not recorded for this strategy");
    }
    return *record.format_pass_rate;
  }
  throw std::invalid_argument("unknown trace field '" + std::string(field) + "'");
}

std::optional<std::size_t> steps_to_threshold(const TrainingTrace& trace, std::string_view field,
                                              double threshold, std::size_t window) {
  if (window < 1) throw std::invalid_argument("window must be at least 1");
  if (std::find(trace_fields().begin(), trace_fields().end(), field) == trace_fields().end()) {
    throw std::invalid_argument("unknown trace field '" + std::string(field) + "'");
  }
  const auto& recs = trace.records;
  for (std::size_t end = window; end <= recs.size(); ++end) {
    double sum = 0.0;
    for (std::size_t i = end - window; i < end; ++i) sum += trace_value(recs[i], field);
    if (sum / static_cast<double>(window) >= threshold) return recs[end - 1].step;
  }
  return std::nullopt;
}

PhaseMeans phase_means(const TrainingTrace& trace, std::string_view field, double fraction) {
  const auto& recs = trace.records;
  if (recs.empty()) throw std::invalid_argument("phase_means: empty trace");
  const auto n = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(recs.size()))));
  PhaseMeans m;
  for (std::size_t i = 0; i < n; ++i) {
    m.first += trace_value(recs[i], field);
    m.last += trace_value(recs[recs.size() - n + i], field);
  }
  m.first /= static_cast<double>(n);
  m.last /= static_cast<double>(n);
  return m;
}

// --- parameter drift -------------------------------------------------------

std::string_view to_string(DriftGrouping grouping) {
  switch (grouping) {
    case DriftGrouping::TemplateFamily: return "template_family";
    case DriftGrouping::PositionBucket: return "position_bucket";
    case DriftGrouping::LastTokenKind: return "last_token_kind";
  }
  return "unknown";
}

std::span<const DriftGrouping> all_groupings() {
  static constexpr std::array<DriftGrouping, 3> groupings = {
      DriftGrouping::TemplateFamily, DriftGrouping::PositionBucket, DriftGrouping::LastTokenKind};
  return groupings;
}

namespace {

void check_compatible(const ParameterTable& before, const ParameterTable& after) {
  if (!(before.vocabulary() == after.vocabulary())) {
    throw std::invalid_argument("param_drift: vocabulary mismatch");
  }
  if (before.context_order() != after.context_order()) {
    throw std::invalid_argument("param_drift: context order mismatch");
  }
}

std::string group_key(const ContextKey& ctx, const Vocabulary& vocab, DriftGrouping grouping) {
  switch (grouping) {
    case DriftGrouping::TemplateFamily: return template_family(ctx.template_id);
    case DriftGrouping::PositionBucket: {
      const auto real = std::count_if(ctx.recent.begin(), ctx.recent.end(),
                                      [](TokenId t) { return t != kBeginMarker; });
      return "pos" + std::to_string(real) +
             (static_cast<std::size_t>(real) == ctx.recent.size() ? "+" : "");
    }
    case DriftGrouping::LastTokenKind:
      return std::string(
          to_string(ctx.recent.empty() ? TokenKind::Begin : vocab.kind(ctx.recent.back())));
  }
  return {};
}

double row_l1(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += std::abs(a[j] - b[j]);
  return s;
}

}  // namespace

DriftReport param_drift(const ParameterTable& before, const ParameterTable& after,
                        DriftGrouping grouping) {
  check_compatible(before, after);
  DriftReport rep{grouping, {}, whole_table_l1(before, after)};
  auto visit = [&](const ContextKey& ctx) {
    rep.groups[group_key(ctx, before.vocabulary(), grouping)] +=
        row_l1(before.logits(ctx), after.logits(ctx));
  };
  for (const auto& [ctx, row] : before.entries()) visit(ctx);
  for (const auto& [ctx, row] : after.entries()) {
    if (!before.entries().contains(ctx)) visit(ctx);
  }
  return rep;
}

double whole_table_l1(const ParameterTable& before, const ParameterTable& after) {
  check_compatible(before, after);
  // Sorted merge over both tables; absent rows are zero.
  const std::vector<double> zeros(before.width(), 0.0);
  auto a = before.entries().begin();
  auto b = after.entries().begin();
  const auto a_end = before.entries().end();
  const auto b_end = after.entries().end();
  double total = 0.0;
  while (a != a_end || b != b_end) {
    if (b == b_end || (a != a_end && a->first < b->first)) {
      total += row_l1(a->second, zeros);
      ++a;
    } else if (a == a_end || b->first < a->first) {
      total += row_l1(zeros, b->second);
      ++b;
    } else {
      total += row_l1(a->second, b->second);
      ++a;
      ++b;
    }
  }
  return total;
}

}  // namespace rft
