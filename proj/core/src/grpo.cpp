#include "rft/grpo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "rft/rng.hpp"

namespace rft {

void GrpoConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
  if (group_size < 2) fail("group_size must be at least 2");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) fail("clip_epsilon must be in (0, 1)");
  if (!(kl_beta >= 0.0) || !std::isfinite(kl_beta)) fail("kl_beta must be >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be > 0");
  if (steps_per_snapshot < 1) fail("steps_per_snapshot must be at least 1");
  if (grad_accum_steps < 1) fail("grad_accum_steps must be at least 1");
  if (!(advantage_std_floor > 0.0)) fail("advantage_std_floor must be > 0");
  if (max_response_len < 1) fail("max_response_len must be at least 1");
}

void RolloutGroup::check() const {
  const auto g = responses.size();
  if (g < 2 || rewards.size() != g || old_logps.size() != g || ref_logps.size() != g ||
      advantages.size() != g) {
    throw std::invalid_argument("rollout group: lists must all have length G >= 2");
  }
}

std::vector<double> normalize_advantages(std::span<const double> rewards, double std_floor) {
  if (rewards.size() < 2) throw std::invalid_argument("advantage normalization needs G >= 2");
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> adv(rewards.size(), 0.0);
  if (!(sd > std_floor)) return adv;
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

double kl_k3(double cur_logp, double ref_logp) {
  const double d = ref_logp - cur_logp;
  // expm1 keeps the estimator non-negative and exact near d = 0.
  return std::expm1(d) - d;
}

double clipped_surrogate(double ratio, double advantage, double epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

namespace {

struct Term {
  double cur_logp;
  double ratio;
  double value;
  /// d value / d cur_logp
  double slope;
};

Term evaluate_term(const RolloutGroup& group, std::size_t i, const ParameterTable& params,
                   const GrpoConfig& cfg) {
  Term t{};
  t.cur_logp = sequence_log_prob(params, group.instance, group.responses[i].tokens);
  t.ratio = std::exp(t.cur_logp - group.old_logps[i]);
  const double adv = group.advantages[i];
  const double unclipped = t.ratio * adv;
  const double clipped =
      std::clamp(t.ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon) * adv;
  const double d = group.ref_logps[i] - t.cur_logp;
  t.value = std::min(unclipped, clipped) - cfg.kl_beta * kl_k3(t.cur_logp, group.ref_logps[i]);
  t.slope = (unclipped <= clipped ? unclipped : 0.0) + cfg.kl_beta * std::expm1(d);
  if (!std::isfinite(t.value) || !std::isfinite(t.slope)) {
    throw NumericError("non-finite GRPO term at response index " + std::to_string(i) +
                       " (cur_logp=" + std::to_string(t.cur_logp) +
                       ", ratio=" + std::to_string(t.ratio) + ")");
  }
  return t;
}

}  // namespace

double grpo_objective(const RolloutGroup& group, const ParameterTable& params,
                      const GrpoConfig& cfg) {
  group.check();
  double total = 0.0;
  for (std::size_t i = 0; i < group.size(); ++i) total += evaluate_term(group, i, params, cfg).value;
  return total / static_cast<double>(group.size());
}

SparseGradient grpo_gradient(const RolloutGroup& group, const ParameterTable& params,
                             const GrpoConfig& cfg) {
  group.check();
  SparseGradient grad(params.width());
  const double inv_g = 1.0 / static_cast<double>(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto term = evaluate_term(group, i, params, cfg);
    if (term.slope == 0.0) continue;
    grad.add_scaled(log_prob_gradient(params, group.instance, group.responses[i].tokens),
                    term.slope * inv_g);
  }
  return grad;
}

RolloutGroup collect_group(const TaskInstance& instance, const StrategySpec& strategy,
                           const ParameterTable& old_policy, const ParameterTable& ref_policy,
                           const GrpoConfig& cfg, Rng& rng,
                           std::vector<RewardBreakdown>* breakdowns) {
  RolloutGroup group;
  group.instance = instance;
  if (breakdowns) breakdowns->clear();
  for (std::size_t i = 0; i < cfg.group_size; ++i) {
    auto response = sample_response(old_policy, instance, cfg.max_response_len, rng);
    const auto text = render_text(old_policy.vocabulary(), response.tokens);
    const auto reward = total_reward(text, strategy, instance);
    if (breakdowns) breakdowns->push_back(reward);
    group.rewards.push_back(reward.total);
    group.old_logps.push_back(response.total_logp);
    group.ref_logps.push_back(sequence_log_prob(ref_policy, instance, response.tokens));
    group.responses.push_back(std::move(response));
  }
  group.advantages = normalize_advantages(group.rewards, cfg.advantage_std_floor);
  return group;
}

TrainResult train(std::span<const TaskInstance> tasks, const StrategySpec& strategy,
                  const GrpoConfig& cfg, Rng& rng, ParameterTable initial,
                  const TrainOptions& options) {
  cfg.validate();
  if (tasks.empty()) throw std::invalid_argument("train: task stream is empty");
  const ParameterTable ref = initial;
  TrainResult result{std::move(initial), {}};
  ParameterTable& params = result.params;
  ParameterTable old = params;
  const TokenId eos = params.vocabulary().eos();

  for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
    const auto started = std::chrono::steady_clock::now();
    if ((step - 1) % cfg.steps_per_snapshot == 0) old = params;

    SparseGradient grad(params.width());
    TraceRecord rec;
    rec.step = step;
    double format_sum = 0.0;
    std::size_t n_responses = 0;
    std::vector<RewardBreakdown> breakdowns;
    try {
      for (std::size_t a = 0; a < cfg.grad_accum_steps; ++a) {
        const auto& instance = tasks[rng.below(tasks.size())];
        const auto group = collect_group(instance, strategy, old, ref, cfg, rng, &breakdowns);
        rec.objective_value += grpo_objective(group, params, cfg);
        grad.add_scaled(grpo_gradient(group, params, cfg),
                        1.0 / static_cast<double>(cfg.grad_accum_steps));
        for (std::size_t i = 0; i < group.size(); ++i) {
          const auto& tokens = group.responses[i].tokens;
          const double cur = sequence_log_prob(params, instance, tokens);
          rec.mean_reward += breakdowns[i].total;
          rec.mean_accuracy_reward += breakdowns[i].accuracy;
          format_sum += breakdowns[i].format;
          rec.mean_response_length += static_cast<double>(
              tokens.size() - (!tokens.empty() && tokens.back() == eos ? 1 : 0));
          rec.mean_kl += kl_k3(cur, group.ref_logps[i]);
          ++n_responses;
        }
      }
      params.ascend(grad, cfg.learning_rate);
    } catch (const NumericError& e) {
      throw NumericError("step " + std::to_string(step) + ": " + e.what());
    } catch (const std::exception& e) {
      throw std::runtime_error("step " + std::to_string(step) + ": " + e.what());
    }

    const double n = static_cast<double>(n_responses);
    rec.objective_value /= static_cast<double>(cfg.grad_accum_steps);
    rec.mean_reward /= n;
    rec.mean_accuracy_reward /= n;
    rec.mean_response_length /= n;
    rec.mean_kl /= n;
    if (strategy.format_reward_active) rec.format_pass_rate = format_sum / n;
    if (options.record_wall_time) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                              started)
                        .count();
    }
    result.trace.records.push_back(rec);
    if (options.on_step) options.on_step(rec);
  }
  return result;
}

TrainResult train(std::span<const TaskInstance> tasks, const StrategySpec& strategy,
                  const GrpoConfig& cfg, Rng& rng) {
  return train(tasks, strategy, cfg, rng, ParameterTable(vocabulary_for(tasks), 1));
}

}  // namespace rft
