// rft: command-line front end for the GRPO experiment harness.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rft/harness.hpp"
#include "rft/rng.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

// Flags shared by the experiment subcommands; empty means "keep the config".
struct Overrides {
  std::string config;
  std::string out;
  std::vector<std::string> strategies;
  std::vector<std::uint64_t> seeds;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> group_size;
  std::optional<double> beta;
  std::optional<double> epsilon;
  std::optional<double> lr;
  std::optional<std::size_t> jobs;
  std::vector<std::string> settings;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "key = value config file");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--strategy", o.strategies,
                  "thinking | no-thinking | think-after-answer | adaptive (repeatable)")
      ->delimiter(',');
  cmd->add_option("--seed", o.seeds, "seed (repeatable)")->delimiter(',');
  cmd->add_option("--steps", o.steps, "GRPO steps");
  cmd->add_option("--group-size", o.group_size, "responses per question (G)");
  cmd->add_option("--beta", o.beta, "KL coefficient");
  cmd->add_option("--epsilon", o.epsilon, "clip range");
  cmd->add_option("--lr", o.lr, "learning rate");
  cmd->add_option("--jobs", o.jobs, "cells run in parallel");
  cmd->add_option("--set", o.settings, "extra key=value override (repeatable)");
}

rft::ExperimentConfig build_config(const Overrides& o) {
  rft::ExperimentConfig cfg;
  if (!o.config.empty()) cfg = rft::load_config(o.config);
  auto set = [&](std::string_view key, const std::string& value) { cfg.set(key, value); };
  for (const auto& kv : o.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw rft::ConfigError(kv, "expected key=value");
    set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (!o.strategies.empty()) {
    std::string joined;
    for (const auto& s : o.strategies) joined += (joined.empty() ? "" : ",") + s;
    set("strategies", joined);
  }
  if (!o.seeds.empty()) {
    cfg.seeds = o.seeds;
  }
  if (o.steps) cfg.grpo.max_steps = *o.steps;
  if (o.group_size) cfg.grpo.group_size = *o.group_size;
  if (o.beta) cfg.grpo.kl_beta = *o.beta;
  if (o.epsilon) cfg.grpo.clip_epsilon = *o.epsilon;
  if (o.lr) cfg.grpo.learning_rate = *o.lr;
  if (o.jobs) cfg.jobs = *o.jobs;
  cfg.validate();
  return cfg;
}

int cmd_train(const Overrides& o) {
  const auto cfg = build_config(o);
  const auto result = rft::run(cfg);
  for (const auto& c : result.cells) {
    std::cerr << rft::to_string(c.strategy) << " seed " << c.seed << ": "
              << rft::to_string(c.status);
    if (!c.error.empty()) std::cerr << " (" << c.error << ")";
    std::cerr << '\n';
  }
  std::cout << rft::comparison_text(result.comparison, cfg);
  return result.exit_code;
}

int cmd_compare(const std::string& dir) {
  const auto cfg = rft::load_config(fs::path(dir) / "config.txt");
  const auto cells = rft::load_cells(dir, cfg);
  const auto rows = rft::compare_cells(cells);
  rft::write_comparison(dir, rows, cfg);
  std::cout << rft::comparison_text(rows, cfg);
  return kExitOk;
}

int cmd_eval(const std::string& params_path, const std::string& corpus_path,
             const std::string& strategy_name, std::size_t max_len, const std::string& out) {
  const auto strategy = rft::make_strategy(rft::parse_strategy_kind(strategy_name));
  const auto params = rft::load_parameters(params_path);
  const auto corpus = rft::load_corpus(corpus_path);
  const auto report = rft::evaluate(params, corpus, strategy, max_len);
  if (!out.empty()) rft::save_eval(out, report.items);
  std::cout << rft::metrics_csv(rft::analyze_eval(report.items));
  return kExitOk;
}

struct AnalyzeArgs {
  std::string trace, eval, before, after, out;
  rft::AnalysisOptions options;
};

int cmd_analyze(const AnalyzeArgs& a) {
  std::vector<rft::Metric> metrics;
  auto append = [&](std::vector<rft::Metric> more) {
    for (auto& m : more) metrics.push_back(std::move(m));
  };
  if (!a.trace.empty()) append(rft::analyze_trace(rft::load_trace(a.trace), a.options));
  if (!a.eval.empty()) append(rft::analyze_eval(rft::load_eval(a.eval)));
  if (!a.before.empty() || !a.after.empty()) {
    if (a.before.empty() || a.after.empty()) {
      throw rft::ConfigError("--before/--after", "drift needs both tables");
    }
    append(rft::analyze_drift(rft::load_parameters(a.before), rft::load_parameters(a.after)));
  }
  if (metrics.empty()) throw rft::ConfigError("analyze", "nothing to analyze");
  const std::string csv = rft::metrics_csv(metrics);
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    rft::write_text_file(fs::path(a.out) / "analysis.csv", csv);
    rft::write_text_file(fs::path(a.out) / "analysis.jsonl", rft::metrics_jsonl(metrics));
  }
  std::cout << csv;
  return kExitOk;
}

int cmd_gen_tasks(const Overrides& o, std::size_t n, const std::string& file) {
  const auto cfg = build_config(o);
  const std::uint64_t seed = cfg.seeds.front();
  rft::Rng rng(seed);
  const auto tasks = rft::generate_tasks(cfg, n, rng);
  if (file.empty() || file == "-") {
    rft::write_corpus(std::cout, tasks);
  } else {
    rft::save_corpus(file, tasks);
  }
  return kExitOk;
}

int cmd_validate(const std::string& dir) {
  const auto problems = rft::validate_run(dir);
  for (const auto& p : problems) std::cout << p << '\n';
  if (problems.empty()) std::cout << "ok: " << dir << '\n';
  return problems.empty() ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rule-based reinforcement fine-tuning (GRPO) on synthetic tasks"};
  app.require_subcommand(1);

  Overrides train_o;
  auto* train = app.add_subcommand("train", "train every (strategy, seed) cell and compare");
  add_overrides(train, train_o);

  std::string compare_dir;
  auto* compare = app.add_subcommand("compare", "rebuild the comparison table of a run");
  compare->add_option("--out,dir", compare_dir, "run directory")->required();

  std::string params_path, corpus_path, strategy_name = "thinking", eval_out;
  std::size_t max_len = rft::GrpoConfig{}.max_response_len;
  auto* eval = app.add_subcommand("eval", "greedy evaluation of a parameter table");
  eval->add_option("--params", params_path, "parameter table (.tsv)")->required();
  eval->add_option("--corpus", corpus_path, "task corpus (.jsonl)")->required();
  eval->add_option("--strategy", strategy_name, "response strategy");
  eval->add_option("--max-len", max_len, "maximum response length");
  eval->add_option("--out", eval_out, "write per-item records (.jsonl)");

  AnalyzeArgs analyze_args;
  auto* analyze = app.add_subcommand("analyze", "metrics from trace, eval and parameter files");
  analyze->add_option("--trace", analyze_args.trace, "trace.jsonl");
  analyze->add_option("--eval", analyze_args.eval, "eval.jsonl");
  analyze->add_option("--before", analyze_args.before, "initial parameter table");
  analyze->add_option("--after", analyze_args.after, "trained parameter table");
  analyze->add_option("--field", analyze_args.options.field, "trace field for steps-to-threshold");
  analyze->add_option("--threshold", analyze_args.options.threshold, "threshold");
  analyze->add_option("--window", analyze_args.options.window, "trailing window");
  analyze->add_option("--phase", analyze_args.options.phase_fraction, "phase fraction");
  analyze->add_option("--out", analyze_args.out, "write analysis.csv/.jsonl here");

  Overrides gen_o;
  std::size_t gen_n = 100;
  std::string gen_file;
  auto* gen = app.add_subcommand("gen-tasks", "write a synthetic task corpus");
  add_overrides(gen, gen_o);
  gen->add_option("-n,--count", gen_n, "number of instances");
  gen->add_option("--file", gen_file, "output .jsonl (default stdout)");

  std::string validate_dir;
  auto* validate = app.add_subcommand("validate-run", "check that a run directory is complete");
  validate->add_option("--out,dir", validate_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train) return cmd_train(train_o);
    if (*compare) return cmd_compare(compare_dir);
    if (*eval) return cmd_eval(params_path, corpus_path, strategy_name, max_len, eval_out);
    if (*analyze) return cmd_analyze(analyze_args);
    if (*gen) return cmd_gen_tasks(gen_o, gen_n, gen_file);
    if (*validate) return cmd_validate(validate_dir);
  } catch (const rft::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const rft::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
