#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rft/policy.hpp"
#include "rft/rewards.hpp"
#include "rft/strategies.hpp"
#include "rft/tasks.hpp"

namespace rft {

class Rng;

/// Raised when an objective or gradient term stops being finite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GrpoConfig {
  std::size_t group_size = 4;
  double clip_epsilon = 0.2;
  double kl_beta = 0.04;
  double learning_rate = 0.1;
  std::size_t steps_per_snapshot = 1;
  std::size_t grad_accum_steps = 2;
  std::size_t max_steps = 500;
  double advantage_std_floor = 1e-8;
  std::size_t max_response_len = 24;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// G responses to one question with everything the objective needs.
struct RolloutGroup {
  TaskInstance instance;
  std::vector<Response> responses;
  std::vector<double> rewards;
  std::vector<double> old_logps;
  std::vector<double> ref_logps;
  std::vector<double> advantages;

  std::size_t size() const { return responses.size(); }
  void check() const;
};

struct TraceRecord {
  std::size_t step = 0;
  double mean_reward = 0.0;
  double mean_accuracy_reward = 0.0;
  /// Absent for strategies without a format reward.
  std::optional<double> format_pass_rate;
  double mean_response_length = 0.0;
  double mean_kl = 0.0;
  double objective_value = 0.0;
  double wall_ms = 0.0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct TrainingTrace {
  std::vector<TraceRecord> records;
};

/// (r - mean) / population std, or all zeros when std <= std_floor.
std::vector<double> normalize_advantages(std::span<const double> rewards, double std_floor);

/// k3 estimator exp(d) - d - 1 with d = ref_logp - cur_logp.
double kl_k3(double cur_logp, double ref_logp);

double clipped_surrogate(double ratio, double advantage, double epsilon);

/// (1/G) sum_i [clipped_surrogate(ratio_i, A_i, eps) - beta * kl_k3(cur_i, ref_i)]
/// with the sequence-level ratio exp(cur_i - old_i).
double grpo_objective(const RolloutGroup& group, const ParameterTable& params,
                      const GrpoConfig& cfg);

/// Gradient of grpo_objective. A clipped term that is strictly smaller than
/// the unclipped one contributes nothing; ties take the unclipped branch.
SparseGradient grpo_gradient(const RolloutGroup& group, const ParameterTable& params,
                             const GrpoConfig& cfg);

/// Samples G responses from `old_policy`, scores them under `strategy`, and
/// fills log-probabilities and advantages.
RolloutGroup collect_group(const TaskInstance& instance, const StrategySpec& strategy,
                           const ParameterTable& old_policy, const ParameterTable& ref_policy,
                           const GrpoConfig& cfg, Rng& rng,
                           std::vector<RewardBreakdown>* breakdowns = nullptr);

struct TrainOptions {
  /// Measure wall time per step. Off by default so traces stay reproducible.
  bool record_wall_time = false;
  /// Called after every step, e.g. to stream the trace to disk.
  std::function<void(const TraceRecord&)> on_step;
};

struct TrainResult {
  ParameterTable params;
  TrainingTrace trace;
};

/// GRPO from `initial` (also the frozen reference policy). Each step draws
/// grad_accum_steps questions uniformly from `tasks`, averages their group
/// gradients, and takes one ascent step.
TrainResult train(std::span<const TaskInstance> tasks, const StrategySpec& strategy,
                  const GrpoConfig& cfg, Rng& rng, ParameterTable initial,
                  const TrainOptions& options = {});

/// Cold start from the uniform table over vocabulary_for(tasks), order 1.
TrainResult train(std::span<const TaskInstance> tasks, const StrategySpec& strategy,
                  const GrpoConfig& cfg, Rng& rng);

}  // namespace rft
