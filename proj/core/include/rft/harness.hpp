#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rft/analysis.hpp"
#include "rft/base_policy.hpp"
#include "rft/grpo.hpp"
#include "rft/policy.hpp"
#include "rft/records.hpp"
#include "rft/strategies.hpp"
#include "rft/tasks.hpp"

namespace rft {

class Rng;

/// Invalid configuration; field() names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message);
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class TaskFamily { Classification, Arithmetic, MultiChoice };

/// cls | arith | mc
std::string_view to_string(TaskFamily family);
TaskFamily parse_task_family(std::string_view name);

/// Key-value experiment description. Every field has a key of the same name
/// in the config file (see config_keys()).
struct ExperimentConfig {
  std::vector<StrategyKind> strategies{kAllStrategies.begin(), kAllStrategies.end()};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::filesystem::path output_dir = "runs/default";

  TaskFamily task = TaskFamily::Classification;
  std::size_t train_size = 256;
  std::size_t eval_size = 100;
  double label_noise = 0.0;
  int arith_lo = 0;
  int arith_hi = 9;
  std::size_t mc_options = 4;
  GeneratorConfig generator;

  GrpoConfig grpo;
  int context_order = 1;
  PriorConfig prior;

  std::string threshold_field = "mean_accuracy_reward";
  double threshold = 0.9;
  std::size_t threshold_window = 20;
  double phase_fraction = 0.1;

  std::size_t jobs = 1;
  bool record_wall_time = false;

  /// Sets one field from its textual value; throws ConfigError.
  void set(std::string_view key, std::string_view value);
  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

/// All recognised keys, in echo order.
std::span<const std::string_view> config_keys();

/// Parses "key = value" lines; '#' starts a comment. Throws ConfigError.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});
/// Full "key = value" dump that parse_config reads back to the same config.
std::string config_echo(const ExperimentConfig& cfg);

/// Train and eval corpora for one seed. Identical across strategies.
std::vector<TaskInstance> generate_tasks(const ExperimentConfig& cfg, std::size_t n, Rng& rng);

struct FormFractions {
  double with_thinking = 0.0;
  double without_thinking = 0.0;
  double malformed = 0.0;

  double sum() const { return with_thinking + without_thinking + malformed; }
  ResponseForm dominant() const;
  double dominant_fraction() const;
};

struct EvalReport {
  std::vector<EvalItem> items;
  double accuracy = 0.0;
  std::optional<double> format_rate;
  double mean_length = 0.0;
  FormFractions forms;
  std::optional<InconsistencyReport> consistency;
};

/// Greedy decoding of every instance. Throws on an empty corpus or when the
/// corpus needs tokens outside params' vocabulary.
EvalReport evaluate(const ParameterTable& params, std::span<const TaskInstance> corpus,
                    const StrategySpec& strategy, std::size_t max_len);

/// Re-derives the aggregate numbers from stored items.
EvalReport summarize_eval(std::vector<EvalItem> items, bool format_active);

enum class CellStatus { Ok, NumericFailure, Failed };
std::string_view to_string(CellStatus status);

struct CellResult {
  StrategyKind strategy = StrategyKind::Thinking;
  std::uint64_t seed = 0;
  CellStatus status = CellStatus::Ok;
  std::string error;
  std::size_t steps_completed = 0;
  std::optional<std::size_t> steps_to_threshold;
  double initial_accuracy = 0.0;
  double final_accuracy = 0.0;
  double final_mean_length = 0.0;
  double train_length_first = 0.0;
  double train_length_last = 0.0;
  FormFractions forms;
  std::optional<double> proportion_inconsistent;
  double drift_total = 0.0;
  std::optional<double> wall_ms;
};

std::filesystem::path cell_dir(const std::filesystem::path& root, StrategyKind strategy,
                               std::uint64_t seed);

/// Trains and evaluates one (strategy, seed) cell, writing its artifacts under
/// cell_dir(cfg.output_dir, ...). Failures are reported in the result.
CellResult run_cell(const ExperimentConfig& cfg, StrategyKind strategy, std::uint64_t seed);

std::string cell_summary_json(const CellResult& cell);
CellResult cell_from_summary_json(std::string_view text);

struct ComparisonRow {
  StrategyKind strategy = StrategyKind::Thinking;
  std::size_t seeds = 0;
  std::size_t failed = 0;
  /// Median over seeds with "never reached" ranked above every step count;
  /// absent when that median is itself "never".
  std::optional<double> median_steps_to_threshold;
  std::size_t reached = 0;
  double median_initial_accuracy = 0.0;
  double median_final_accuracy = 0.0;
  double median_final_length = 0.0;
  double median_train_length_first = 0.0;
  double median_train_length_last = 0.0;
  std::size_t length_drops = 0;  ///< seeds whose last-phase length < first-phase
  FormFractions median_forms;
  ResponseForm dominant_form = ResponseForm::Malformed;
  std::size_t dominant_over_90 = 0;
};

std::vector<ComparisonRow> compare_cells(std::span<const CellResult> cells);
std::string comparison_text(std::span<const ComparisonRow> rows, const ExperimentConfig& cfg);
std::string comparison_csv(std::span<const ComparisonRow> rows);
std::string comparison_jsonl(std::span<const ComparisonRow> rows);
void write_comparison(const std::filesystem::path& dir, std::span<const ComparisonRow> rows,
                      const ExperimentConfig& cfg);

struct RunResult {
  std::vector<CellResult> cells;
  std::vector<ComparisonRow> comparison;
  /// 0 ok, 3 if any cell hit a numeric error, 1 for other failures.
  int exit_code = 0;
};

/// Runs every (strategy, seed) cell, up to cfg.jobs at a time, then writes the
/// config echo and comparison table into cfg.output_dir.
RunResult run(const ExperimentConfig& cfg);

/// Reads the cell summaries of an existing run directory.
std::vector<CellResult> load_cells(const std::filesystem::path& dir, const ExperimentConfig& cfg);

/// Missing or unreadable artifacts of a run directory; empty when complete.
std::vector<std::string> validate_run(const std::filesystem::path& dir);

struct Metric {
  std::string name;
  std::optional<double> value;
};

struct AnalysisOptions {
  std::string field = "mean_accuracy_reward";
  double threshold = 0.9;
  std::size_t window = 20;
  double phase_fraction = 0.1;
};

std::vector<Metric> analyze_trace(const TrainingTrace& trace, const AnalysisOptions& options);
std::vector<Metric> analyze_eval(std::span<const EvalItem> items);
std::vector<Metric> analyze_drift(const ParameterTable& before, const ParameterTable& after);

/// Flat "metric,value" CSV; absent values are left empty.
std::string metrics_csv(std::span<const Metric> metrics);
std::string metrics_jsonl(std::span<const Metric> metrics);

}  // namespace rft
