#include "rft/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "rft/rng.hpp"

namespace rft {

using nlohmann::json;

ConfigError::ConfigError(std::string field, const std::string& message)
    : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

std::string_view to_string(TaskFamily family) {
  switch (family) {
    case TaskFamily::Classification: return "cls";
    case TaskFamily::Arithmetic: return "arith";
    case TaskFamily::MultiChoice: return "mc";
  }
  return "unknown";
}

TaskFamily parse_task_family(std::string_view name) {
  if (name == "cls") return TaskFamily::Classification;
  if (name == "arith") return TaskFamily::Arithmetic;
  if (name == "mc") return TaskFamily::MultiChoice;
  throw std::invalid_argument("unknown task family '" + std::string(name) + "'");
}

// --- config ----------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string_view strip(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  value = strip(value);
  T out{};
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size() || value.empty()) {
    throw ConfigError(std::string(key), "cannot parse '" + std::string(value) + "'");
  }
  return out;
}

std::size_t parse_count(std::string_view key, std::string_view value) {
  if (strip(value).starts_with('-')) throw ConfigError(std::string(key), "must not be negative");
  return parse_number<std::size_t>(key, value);
}

bool parse_bool(std::string_view key, std::string_view value) {
  value = strip(value);
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(std::string(key), "expected true or false, got '" + std::string(value) + "'");
}

std::vector<std::string_view> split_list(std::string_view value) {
  std::vector<std::string_view> parts;
  while (true) {
    const auto comma = value.find(',');
    const auto part = strip(value.substr(0, comma));
    if (!part.empty()) parts.push_back(part);
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  return parts;
}

template <typename F>
auto wrap(std::string_view key, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string(key), e.what());
  }
}

constexpr std::string_view kKeys[] = {
    "strategies",         "seeds",
    "output_dir",         "task",
    "train_size",         "eval_size",
    "label_noise",        "arith_lo",
    "arith_hi",           "mc_options",
    "n_classes",          "choice_fraction",
    "min_all_threshold",  "max_choices",
    "group_size",         "clip_epsilon",
    "kl_beta",            "learning_rate",
    "steps_per_snapshot", "grad_accum_steps",
    "max_steps",          "advantage_std_floor",
    "max_response_len",   "context_order",
    "prior_strength",     "prior_segment_length",
    "threshold_field",
    "threshold",          "threshold_window",
    "phase_fraction",     "jobs",
    "record_wall_time",
};

}  // namespace

std::span<const std::string_view> config_keys() { return kKeys; }

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  const std::string k(key);
  value = strip(value);
  if (key == "strategies") {
    strategies.clear();
    for (auto part : split_list(value)) {
      strategies.push_back(wrap(key, [&] { return parse_strategy_kind(part); }));
    }
  } else if (key == "seeds") {
    seeds.clear();
    for (auto part : split_list(value)) seeds.push_back(parse_number<std::uint64_t>(key, part));
  } else if (key == "output_dir") {
    output_dir = std::string(value);
  } else if (key == "task") {
    task = wrap(key, [&] { return parse_task_family(value); });
  } else if (key == "train_size") {
    train_size = parse_count(key, value);
  } else if (key == "eval_size") {
    eval_size = parse_count(key, value);
  } else if (key == "label_noise") {
    label_noise = parse_number<double>(key, value);
  } else if (key == "arith_lo") {
    arith_lo = parse_number<int>(key, value);
  } else if (key == "arith_hi") {
    arith_hi = parse_number<int>(key, value);
  } else if (key == "mc_options") {
    mc_options = parse_count(key, value);
  } else if (key == "n_classes") {
    generator.n_classes = parse_count(key, value);
  } else if (key == "choice_fraction") {
    generator.choice_fraction = parse_number<double>(key, value);
  } else if (key == "min_all_threshold") {
    generator.min_all_threshold = parse_count(key, value);
  } else if (key == "max_choices") {
    generator.max_choices = parse_count(key, value);
  } else if (key == "group_size") {
    grpo.group_size = parse_count(key, value);
  } else if (key == "clip_epsilon") {
    grpo.clip_epsilon = parse_number<double>(key, value);
  } else if (key == "kl_beta") {
    grpo.kl_beta = parse_number<double>(key, value);
  } else if (key == "learning_rate") {
    grpo.learning_rate = parse_number<double>(key, value);
  } else if (key == "steps_per_snapshot") {
    grpo.steps_per_snapshot = parse_count(key, value);
  } else if (key == "grad_accum_steps") {
    grpo.grad_accum_steps = parse_count(key, value);
  } else if (key == "max_steps") {
    grpo.max_steps = parse_count(key, value);
  } else if (key == "advantage_std_floor") {
    grpo.advantage_std_floor = parse_number<double>(key, value);
  } else if (key == "max_response_len") {
    grpo.max_response_len = parse_count(key, value);
  } else if (key == "context_order") {
    context_order = parse_number<int>(key, value);
  } else if (key == "prior_strength") {
    prior.strength = parse_number<double>(key, value);
  } else if (key == "prior_segment_length") {
    prior.segment_length = parse_number<double>(key, value);
  } else if (key == "threshold_field") {
    threshold_field = std::string(value);
  } else if (key == "threshold") {
    threshold = parse_number<double>(key, value);
  } else if (key == "threshold_window") {
    threshold_window = parse_count(key, value);
  } else if (key == "phase_fraction") {
    phase_fraction = parse_number<double>(key, value);
  } else if (key == "jobs") {
    jobs = parse_count(key, value);
  } else if (key == "record_wall_time") {
    record_wall_time = parse_bool(key, value);
  } else {
    throw ConfigError(k, "unknown key");
  }
}

void ExperimentConfig::validate() const {
  if (strategies.empty()) throw ConfigError("strategies", "must list at least one strategy");
  if (std::set<StrategyKind>(strategies.begin(), strategies.end()).size() != strategies.size()) {
    throw ConfigError("strategies", "must be distinct");
  }
  if (seeds.empty()) throw ConfigError("seeds", "must list at least one seed");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seeds", "must be distinct");
  }
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
  if (train_size < 1) throw ConfigError("train_size", "must be at least 1");
  if (eval_size < 1) throw ConfigError("eval_size", "must be at least 1");
  if (!(label_noise >= 0.0 && label_noise <= 1.0)) {
    throw ConfigError("label_noise", "must lie in [0, 1]");
  }
  if (arith_lo < 0 || arith_hi < arith_lo) {
    throw ConfigError("arith_hi", "need 0 <= arith_lo <= arith_hi");
  }
  if (mc_options < 2 || mc_options > 26) throw ConfigError("mc_options", "must lie in [2, 26]");
  auto forward = [](auto&& check) {
    try {
      check();
    } catch (const std::invalid_argument& e) {
      const std::string msg = e.what();
      // Messages start with the field name.
      throw ConfigError(msg.substr(0, msg.find(' ')), msg.substr(msg.find(' ') + 1));
    }
  };
  forward([&] { generator.validate(); });
  forward([&] { grpo.validate(); });
  if (context_order < 0 || context_order > 3) {
    throw ConfigError("context_order", "must lie in [0, 3]");
  }
  forward([&] { prior.validate(); });
  if (std::find(trace_fields().begin(), trace_fields().end(), threshold_field) ==
      trace_fields().end()) {
    throw ConfigError("threshold_field", "unknown trace field '" + threshold_field + "'");
  }
  if (!std::isfinite(threshold)) throw ConfigError("threshold", "must be finite");
  if (threshold_window < 1) throw ConfigError("threshold_window", "must be at least 1");
  if (!(phase_fraction > 0.0 && phase_fraction <= 0.5)) {
    throw ConfigError("phase_fraction", "must lie in (0, 0.5]");
  }
  if (jobs < 1) throw ConfigError("jobs", "must be at least 1");
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = strip(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no), "expected 'key = value'");
    }
    base.set(strip(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw ConfigError("config", e.what());
  }
  return parse_config(text, std::move(base));
}

std::string config_echo(const ExperimentConfig& cfg) {
  std::ostringstream out;
  auto line = [&](std::string_view key, const std::string& value) {
    out << key << " = " << value << '\n';
  };
  std::string strategies;
  for (auto s : cfg.strategies) strategies += (strategies.empty() ? "" : ",") + std::string(to_string(s));
  std::string seeds;
  for (auto s : cfg.seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
  line("strategies", strategies);
  line("seeds", seeds);
  line("output_dir", cfg.output_dir.string());
  line("task", std::string(to_string(cfg.task)));
  line("train_size", std::to_string(cfg.train_size));
  line("eval_size", std::to_string(cfg.eval_size));
  line("label_noise", fmt(cfg.label_noise));
  line("arith_lo", std::to_string(cfg.arith_lo));
  line("arith_hi", std::to_string(cfg.arith_hi));
  line("mc_options", std::to_string(cfg.mc_options));
  line("n_classes", std::to_string(cfg.generator.n_classes));
  line("choice_fraction", fmt(cfg.generator.choice_fraction));
  line("min_all_threshold", std::to_string(cfg.generator.min_all_threshold));
  line("max_choices", std::to_string(cfg.generator.max_choices));
  line("group_size", std::to_string(cfg.grpo.group_size));
  line("clip_epsilon", fmt(cfg.grpo.clip_epsilon));
  line("kl_beta", fmt(cfg.grpo.kl_beta));
  line("learning_rate", fmt(cfg.grpo.learning_rate));
  line("steps_per_snapshot", std::to_string(cfg.grpo.steps_per_snapshot));
  line("grad_accum_steps", std::to_string(cfg.grpo.grad_accum_steps));
  line("max_steps", std::to_string(cfg.grpo.max_steps));
  line("advantage_std_floor", fmt(cfg.grpo.advantage_std_floor));
  line("max_response_len", std::to_string(cfg.grpo.max_response_len));
  line("context_order", std::to_string(cfg.context_order));
  line("prior_strength", fmt(cfg.prior.strength));
  line("prior_segment_length", fmt(cfg.prior.segment_length));
  line("threshold_field", cfg.threshold_field);
  line("threshold", fmt(cfg.threshold));
  line("threshold_window", std::to_string(cfg.threshold_window));
  line("phase_fraction", fmt(cfg.phase_fraction));
  line("jobs", std::to_string(cfg.jobs));
  line("record_wall_time", cfg.record_wall_time ? "true" : "false");
  return out.str();
}

std::vector<TaskInstance> generate_tasks(const ExperimentConfig& cfg, std::size_t n, Rng& rng) {
  switch (cfg.task) {
    case TaskFamily::Classification:
      return gen_classification(cfg.generator, n, cfg.label_noise, rng);
    case TaskFamily::Arithmetic:
      return gen_arithmetic(cfg.generator, {cfg.arith_lo, cfg.arith_hi}, n, rng);
    case TaskFamily::MultiChoice: {
      const auto base = gen_classification(cfg.generator, n, cfg.label_noise, rng);
      return gen_multichoice(base, cfg.mc_options, rng);
    }
  }
  return {};
}

// --- evaluation ------------------------------------------------------------

ResponseForm FormFractions::dominant() const {
  if (with_thinking >= without_thinking && with_thinking >= malformed) {
    return ResponseForm::WithThinking;
  }
  return without_thinking >= malformed ? ResponseForm::WithoutThinking : ResponseForm::Malformed;
}

double FormFractions::dominant_fraction() const {
  return std::max({with_thinking, without_thinking, malformed});
}

EvalReport evaluate(const ParameterTable& params, std::span<const TaskInstance> corpus,
                    const StrategySpec& strategy, std::size_t max_len) {
  if (corpus.empty()) throw std::invalid_argument("evaluate: empty corpus");
  const Vocabulary& vocab = params.vocabulary();
  const Vocabulary needed = vocabulary_for(corpus);
  for (const auto& tok : needed.tokens()) {
    if (!vocab.find(tok)) {
      throw std::invalid_argument("evaluate: corpus token '" + tok +
                                  "' is not in the parameter vocabulary");
    }
  }
  std::vector<EvalItem> items;
  items.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& inst = corpus[i];
    const Response resp = greedy_response(params, inst, max_len);
    EvalItem item;
    item.index = i;
    item.instance = inst;
    item.response = render_text(vocab, resp.tokens);
    item.length = static_cast<std::size_t>(
        std::count_if(resp.tokens.begin(), resp.tokens.end(),
                      [&](TokenId t) { return t != vocab.eos(); }));
    const ParsedResponse parsed = parse_tags(item.response, strategy.grammar);
    item.shape = parsed.shape;
    item.form = classify_response_form(parsed);
    item.reward = total_reward(item.response, parsed, strategy, inst);
    if (parsed.answer_text) {
      item.consistency = detect_inconsistency(parsed, inst, "eval-" + std::to_string(i));
    }
    items.push_back(std::move(item));
  }
  return summarize_eval(std::move(items), strategy.format_reward_active);
}

EvalReport summarize_eval(std::vector<EvalItem> items, bool format_active) {
  if (items.empty()) throw std::invalid_argument("summarize_eval: no items");
  EvalReport rep;
  const double n = static_cast<double>(items.size());
  double acc = 0.0, fmt_sum = 0.0, len = 0.0;
  std::vector<ConsistencyRecord> records;
  for (const auto& item : items) {
    acc += item.reward.accuracy;
    fmt_sum += item.reward.format;
    len += static_cast<double>(item.length);
    switch (item.form) {
      case ResponseForm::WithThinking: rep.forms.with_thinking += 1.0; break;
      case ResponseForm::WithoutThinking: rep.forms.without_thinking += 1.0; break;
      case ResponseForm::Malformed: rep.forms.malformed += 1.0; break;
    }
    if (item.consistency) records.push_back(*item.consistency);
  }
  rep.accuracy = acc / n;
  if (format_active) rep.format_rate = fmt_sum / n;
  rep.mean_length = len / n;
  rep.forms.with_thinking /= n;
  rep.forms.without_thinking /= n;
  rep.forms.malformed /= n;
  if (!records.empty()) rep.consistency = inconsistency_report(records);
  rep.items = std::move(items);
  return rep;
}

// --- cells -----------------------------------------------------------------

std::string_view to_string(CellStatus status) {
  switch (status) {
    case CellStatus::Ok: return "ok";
    case CellStatus::NumericFailure: return "numeric_failure";
    case CellStatus::Failed: return "failed";
  }
  return "unknown";
}

namespace {

CellStatus parse_cell_status(std::string_view name) {
  for (auto s : {CellStatus::Ok, CellStatus::NumericFailure, CellStatus::Failed}) {
    if (to_string(s) == name) return s;
  }
  throw std::invalid_argument("unknown cell status '" + std::string(name) + "'");
}

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

json forms_json(const FormFractions& f) {
  return {{"with_thinking", f.with_thinking},
          {"without_thinking", f.without_thinking},
          {"malformed", f.malformed}};
}

FormFractions forms_from(const json& j) {
  return {j.at("with_thinking").get<double>(), j.at("without_thinking").get<double>(),
          j.at("malformed").get<double>()};
}

std::string drift_csv(const ParameterTable& before, const ParameterTable& after) {
  std::ostringstream out;
  out << "grouping,group,l1\n";
  for (auto g : all_groupings()) {
    const auto rep = param_drift(before, after, g);
    for (const auto& [name, l1] : rep.groups) out << to_string(g) << ',' << name << ',' << fmt(l1) << '\n';
  }
  out << "whole_table,all," << fmt(whole_table_l1(before, after)) << '\n';
  return out.str();
}

}  // namespace

std::filesystem::path cell_dir(const std::filesystem::path& root, StrategyKind strategy,
                               std::uint64_t seed) {
  return root / std::string(to_string(strategy)) / ("seed-" + std::to_string(seed));
}

CellResult run_cell(const ExperimentConfig& cfg, StrategyKind strategy, std::uint64_t seed) {
  namespace fs = std::filesystem;
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();

  CellResult cell;
  cell.strategy = strategy;
  cell.seed = seed;
  const fs::path dir = cell_dir(cfg.output_dir, strategy, seed);

  auto finish = [&] {
    if (cfg.record_wall_time) {
      cell.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    }
    write_text_file(dir / "summary.json", cell_summary_json(cell));
    return cell;
  };

  try {
    fs::create_directories(dir);
    // Task streams depend on the seed only, so every strategy sees the same data.
    const Rng root(seed);
    Rng task_rng = root.fork(1);
    Rng eval_rng = root.fork(2);
    Rng train_rng = root.fork(3);
    const auto train_tasks = generate_tasks(cfg, cfg.train_size, task_rng);
    const auto eval_tasks = generate_tasks(cfg, cfg.eval_size, eval_rng);
    save_corpus(dir / "train_tasks.jsonl", train_tasks);
    save_corpus(dir / "eval_tasks.jsonl", eval_tasks);

    std::vector<TaskInstance> all = train_tasks;
    all.insert(all.end(), eval_tasks.begin(), eval_tasks.end());
    const Vocabulary vocab = vocabulary_for(all);
    const StrategySpec spec = make_strategy(strategy);
    ParameterTable initial =
        instruction_prior(vocab, spec, all, cfg.context_order, cfg.prior);
    save_parameters(dir / "params_initial.tsv", initial);

    const EvalReport before = evaluate(initial, eval_tasks, spec, cfg.grpo.max_response_len);
    save_eval(dir / "eval_initial.jsonl", before.items);
    cell.initial_accuracy = before.accuracy;

    TraceWriter writer(dir / "trace.jsonl");
    TrainingTrace partial;
    TrainOptions options;
    options.record_wall_time = cfg.record_wall_time;
    options.on_step = [&](const TraceRecord& rec) {
      writer.append(rec);
      partial.records.push_back(rec);
    };
    std::optional<TrainResult> trained;
    try {
      trained = train(train_tasks, spec, cfg.grpo, train_rng, initial, options);
    } catch (const NumericError& e) {
      cell.status = CellStatus::NumericFailure;
      cell.error = e.what();
      cell.steps_completed = partial.records.size();
      return finish();
    }
    const TrainingTrace& trace = trained->trace;
    cell.steps_completed = trace.records.size();
    if (!trace.records.empty()) {
      cell.steps_to_threshold =
          steps_to_threshold(trace, cfg.threshold_field, cfg.threshold, cfg.threshold_window);
      const auto phases = phase_means(trace, "mean_response_length", cfg.phase_fraction);
      cell.train_length_first = phases.first;
      cell.train_length_last = phases.last;
    }

    const ParameterTable& final_params = trained->params;
    save_parameters(dir / "params_final.tsv", final_params);
    const EvalReport after =
        evaluate(final_params, eval_tasks, spec, cfg.grpo.max_response_len);
    save_eval(dir / "eval.jsonl", after.items);
    cell.final_accuracy = after.accuracy;
    cell.final_mean_length = after.mean_length;
    cell.forms = after.forms;
    if (after.consistency) cell.proportion_inconsistent = after.consistency->proportion_inconsistent;

    write_text_file(dir / "drift.csv", drift_csv(initial, final_params));
    cell.drift_total = whole_table_l1(initial, final_params);

    AnalysisOptions aopt{cfg.threshold_field, cfg.threshold, cfg.threshold_window,
                         cfg.phase_fraction};
    std::vector<Metric> metrics = trace.records.empty() ? std::vector<Metric>{}
                                                        : analyze_trace(trace, aopt);
    for (auto& m : analyze_eval(after.items)) metrics.push_back(std::move(m));
    for (auto& m : analyze_drift(initial, final_params)) metrics.push_back(std::move(m));
    write_text_file(dir / "metrics.csv", metrics_csv(metrics));
  } catch (const NumericError& e) {
    cell.status = CellStatus::NumericFailure;
    cell.error = e.what();
  } catch (const std::exception& e) {
    cell.status = CellStatus::Failed;
    cell.error = e.what();
  }
  return finish();
}

std::string cell_summary_json(const CellResult& c) {
  json j = {{"strategy", std::string(to_string(c.strategy))},
            {"seed", c.seed},
            {"status", std::string(to_string(c.status))},
            {"error", c.error},
            {"steps_completed", c.steps_completed},
            {"steps_to_threshold", opt(c.steps_to_threshold)},
            {"initial_accuracy", c.initial_accuracy},
            {"final_accuracy", c.final_accuracy},
            {"final_mean_length", c.final_mean_length},
            {"train_length_first", c.train_length_first},
            {"train_length_last", c.train_length_last},
            {"forms", forms_json(c.forms)},
            {"proportion_inconsistent", opt(c.proportion_inconsistent)},
            {"drift_total", c.drift_total}};
  if (c.wall_ms) j["wall_ms"] = *c.wall_ms;
  return j.dump(2) + "\n";
}

CellResult cell_from_summary_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    CellResult c;
    c.strategy = parse_strategy_kind(j.at("strategy").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.status = parse_cell_status(j.at("status").get<std::string>());
    c.error = j.value("error", "");
    c.steps_completed = j.at("steps_completed").get<std::size_t>();
    c.steps_to_threshold = opt_from<std::size_t>(j, "steps_to_threshold");
    c.initial_accuracy = j.at("initial_accuracy").get<double>();
    c.final_accuracy = j.at("final_accuracy").get<double>();
    c.final_mean_length = j.at("final_mean_length").get<double>();
    c.train_length_first = j.at("train_length_first").get<double>();
    c.train_length_last = j.at("train_length_last").get<double>();
    c.forms = forms_from(j.at("forms"));
    c.proportion_inconsistent = opt_from<double>(j, "proportion_inconsistent");
    c.drift_total = j.at("drift_total").get<double>();
    c.wall_ms = opt_from<double>(j, "wall_ms");
    return c;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("bad cell summary: ") + e.what());
  }
}

// --- comparison ------------------------------------------------------------

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string opt_fmt(const std::optional<double>& v, const char* absent) {
  return v ? fmt(*v) : std::string(absent);
}

}  // namespace

std::vector<ComparisonRow> compare_cells(std::span<const CellResult> cells) {
  std::vector<StrategyKind> order;
  for (const auto& c : cells) {
    if (std::find(order.begin(), order.end(), c.strategy) == order.end()) {
      order.push_back(c.strategy);
    }
  }
  std::vector<ComparisonRow> rows;
  for (auto kind : order) {
    ComparisonRow row;
    row.strategy = kind;
    std::vector<double> steps, init_acc, final_acc, final_len, len_first, len_last, with_t,
        without_t, malformed;
    std::map<ResponseForm, std::size_t> dominant_votes;
    for (const auto& c : cells) {
      if (c.strategy != kind) continue;
      ++row.seeds;
      if (c.status != CellStatus::Ok) {
        ++row.failed;
        continue;
      }
      steps.push_back(c.steps_to_threshold ? static_cast<double>(*c.steps_to_threshold)
                                           : std::numeric_limits<double>::infinity());
      if (c.steps_to_threshold) ++row.reached;
      init_acc.push_back(c.initial_accuracy);
      final_acc.push_back(c.final_accuracy);
      final_len.push_back(c.final_mean_length);
      len_first.push_back(c.train_length_first);
      len_last.push_back(c.train_length_last);
      if (c.train_length_last < c.train_length_first) ++row.length_drops;
      with_t.push_back(c.forms.with_thinking);
      without_t.push_back(c.forms.without_thinking);
      malformed.push_back(c.forms.malformed);
      ++dominant_votes[c.forms.dominant()];
      if (c.forms.dominant_fraction() > 0.9) ++row.dominant_over_90;
    }
    if (!steps.empty()) {
      const double m = median(steps);
      if (std::isfinite(m)) row.median_steps_to_threshold = m;
    }
    row.median_initial_accuracy = median(init_acc);
    row.median_final_accuracy = median(final_acc);
    row.median_final_length = median(final_len);
    row.median_train_length_first = median(len_first);
    row.median_train_length_last = median(len_last);
    row.median_forms = {median(with_t), median(without_t), median(malformed)};
    std::size_t best = 0;
    for (const auto& [form, votes] : dominant_votes) {
      if (votes > best) {
        best = votes;
        row.dominant_form = form;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

std::string comparison_text(std::span<const ComparisonRow> rows, const ExperimentConfig& cfg) {
  std::ostringstream out;
  char buf[512];
  out << "task " << to_string(cfg.task) << ", " << cfg.seeds.size() << " seeds, "
      << cfg.grpo.max_steps << " steps; steps-to-threshold: " << cfg.threshold_field
      << " >= " << fmt(cfg.threshold) << " over " << cfg.threshold_window
      << " steps (median, absent counts as never)\n\n";
  std::snprintf(buf, sizeof buf, "%-20s %5s %9s %7s %8s %8s %9s %9s %9s %6s  %s\n", "strategy",
                "seeds", "steps", "reached", "acc0", "acc", "eval_len", "len_first", "len_last",
                "drops", "forms (think/no-think/malformed, dominant >0.9)");
  out << buf;
  for (const auto& r : rows) {
    const std::string steps = opt_fmt(r.median_steps_to_threshold, "never");
    std::string forms = "-";
    if (r.strategy == StrategyKind::AdaptiveThinking) {
      std::snprintf(buf, sizeof buf, "%.2f/%.2f/%.2f, %s in %zu/%zu", r.median_forms.with_thinking,
                    r.median_forms.without_thinking, r.median_forms.malformed,
                    std::string(to_string(r.dominant_form)).c_str(), r.dominant_over_90,
                    r.seeds - r.failed);
      forms = buf;
    }
    std::snprintf(buf, sizeof buf, "%-20s %5zu %9s %7zu %8.3f %8.3f %9.2f %9.2f %9.2f %6zu  %s\n",
                  std::string(to_string(r.strategy)).c_str(), r.seeds, steps.c_str(), r.reached,
                  r.median_initial_accuracy, r.median_final_accuracy, r.median_final_length,
                  r.median_train_length_first, r.median_train_length_last, r.length_drops,
                  forms.c_str());
    out << buf;
    if (r.failed > 0) out << "  (" << r.failed << " failed cells excluded)\n";
  }
  return out.str();
}

std::string comparison_csv(std::span<const ComparisonRow> rows) {
  std::ostringstream out;
  out << "strategy,seeds,failed,median_steps_to_threshold,reached,median_initial_accuracy,"
         "median_final_accuracy,median_final_length,median_train_length_first,"
         "median_train_length_last,length_drops,with_thinking,without_thinking,malformed,"
         "dominant_form,dominant_over_90\n";
  for (const auto& r : rows) {
    out << to_string(r.strategy) << ',' << r.seeds << ',' << r.failed << ','
        << opt_fmt(r.median_steps_to_threshold, "") << ',' << r.reached << ','
        << fmt(r.median_initial_accuracy) << ',' << fmt(r.median_final_accuracy) << ','
        << fmt(r.median_final_length) << ',' << fmt(r.median_train_length_first) << ','
        << fmt(r.median_train_length_last) << ',' << r.length_drops << ','
        << fmt(r.median_forms.with_thinking) << ',' << fmt(r.median_forms.without_thinking)
        << ',' << fmt(r.median_forms.malformed) << ',' << to_string(r.dominant_form) << ','
        << r.dominant_over_90 << '\n';
  }
  return out.str();
}

std::string comparison_jsonl(std::span<const ComparisonRow> rows) {
  std::ostringstream out;
  for (const auto& r : rows) {
    const json j = {{"strategy", std::string(to_string(r.strategy))},
                    {"seeds", r.seeds},
                    {"failed", r.failed},
                    {"median_steps_to_threshold", opt(r.median_steps_to_threshold)},
                    {"reached", r.reached},
                    {"median_initial_accuracy", r.median_initial_accuracy},
                    {"median_final_accuracy", r.median_final_accuracy},
                    {"median_final_length", r.median_final_length},
                    {"median_train_length_first", r.median_train_length_first},
                    {"median_train_length_last", r.median_train_length_last},
                    {"length_drops", r.length_drops},
                    {"forms", forms_json(r.median_forms)},
                    {"dominant_form", std::string(to_string(r.dominant_form))},
                    {"dominant_over_90", r.dominant_over_90}};
    out << j.dump() << '\n';
  }
  return out.str();
}

void write_comparison(const std::filesystem::path& dir, std::span<const ComparisonRow> rows,
                      const ExperimentConfig& cfg) {
  write_text_file(dir / "comparison.txt", comparison_text(rows, cfg));
  write_text_file(dir / "comparison.csv", comparison_csv(rows));
  write_text_file(dir / "comparison.jsonl", comparison_jsonl(rows));
}

// --- run -------------------------------------------------------------------

RunResult run(const ExperimentConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.output_dir);
  write_text_file(cfg.output_dir / "config.txt", config_echo(cfg));

  std::vector<std::pair<StrategyKind, std::uint64_t>> jobs;
  for (auto s : cfg.strategies) {
    for (auto seed : cfg.seeds) jobs.emplace_back(s, seed);
  }
  RunResult result;
  result.cells.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      result.cells[i] = run_cell(cfg, jobs[i].first, jobs[i].second);
    }
  };
  const std::size_t n_threads = std::min(cfg.jobs, jobs.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  result.comparison = compare_cells(result.cells);
  write_comparison(cfg.output_dir, result.comparison, cfg);
  for (const auto& c : result.cells) {
    if (c.status == CellStatus::NumericFailure) result.exit_code = 3;
    if (c.status == CellStatus::Failed && result.exit_code == 0) result.exit_code = 1;
  }
  return result;
}

std::vector<CellResult> load_cells(const std::filesystem::path& dir, const ExperimentConfig& cfg) {
  std::vector<CellResult> cells;
  for (auto s : cfg.strategies) {
    for (auto seed : cfg.seeds) {
      cells.push_back(
          cell_from_summary_json(read_text_file(cell_dir(dir, s, seed) / "summary.json")));
    }
  }
  return cells;
}

std::vector<std::string> validate_run(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> problems;
  if (!fs::is_regular_file(dir / "config.txt")) {
    problems.push_back("missing config.txt");
    return problems;
  }
  ExperimentConfig cfg;
  try {
    cfg = load_config(dir / "config.txt");
    cfg.validate();
  } catch (const std::exception& e) {
    problems.push_back(std::string("config.txt: ") + e.what());
    return problems;
  }
  for (const char* name : {"comparison.txt", "comparison.csv", "comparison.jsonl"}) {
    if (!fs::is_regular_file(dir / name)) problems.push_back(std::string("missing ") + name);
  }
  auto check = [&](const fs::path& path, auto&& reader) {
    if (!fs::is_regular_file(path)) {
      problems.push_back("missing " + fs::relative(path, dir).string());
      return;
    }
    try {
      reader(path);
    } catch (const std::exception& e) {
      problems.push_back(fs::relative(path, dir).string() + ": " + e.what());
    }
  };
  for (auto s : cfg.strategies) {
    for (auto seed : cfg.seeds) {
      const fs::path cd = cell_dir(dir, s, seed);
      CellStatus status = CellStatus::Failed;
      check(cd / "summary.json", [&](const fs::path& p) {
        status = cell_from_summary_json(read_text_file(p)).status;
      });
      check(cd / "train_tasks.jsonl", [](const fs::path& p) { load_corpus(p); });
      check(cd / "eval_tasks.jsonl", [](const fs::path& p) { load_corpus(p); });
      check(cd / "params_initial.tsv", [](const fs::path& p) { load_parameters(p); });
      check(cd / "trace.jsonl", [](const fs::path& p) { load_trace(p); });
      if (status != CellStatus::Ok) continue;
      check(cd / "params_final.tsv", [](const fs::path& p) { load_parameters(p); });
      check(cd / "eval_initial.jsonl", [](const fs::path& p) { load_eval(p); });
      check(cd / "eval.jsonl", [](const fs::path& p) { load_eval(p); });
      check(cd / "drift.csv", [](const fs::path& p) { read_text_file(p); });
      check(cd / "metrics.csv", [](const fs::path& p) { read_text_file(p); });
    }
  }
  return problems;
}

// --- analysis metrics ------------------------------------------------------

std::vector<Metric> analyze_trace(const TrainingTrace& trace, const AnalysisOptions& options) {
  if (trace.records.empty()) throw std::invalid_argument("analyze_trace: empty trace");
  std::vector<Metric> m;
  m.push_back({"steps", static_cast<double>(trace.records.size())});
  const auto reached =
      steps_to_threshold(trace, options.field, options.threshold, options.window);
  m.push_back({"steps_to_threshold",
               reached ? std::optional<double>(static_cast<double>(*reached)) : std::nullopt});
  const bool has_format = std::all_of(trace.records.begin(), trace.records.end(),
                                      [](const TraceRecord& r) { return r.format_pass_rate; });
  for (auto field : trace_fields()) {
    if (field == "format_pass_rate" && !has_format) continue;
    const auto phases = phase_means(trace, field, options.phase_fraction);
    m.push_back({std::string(field) + ".first", phases.first});
    m.push_back({std::string(field) + ".last", phases.last});
  }
  return m;
}

std::vector<Metric> analyze_eval(std::span<const EvalItem> items) {
  const bool format_active = !items.empty() && items.front().reward.format_active;
  const EvalReport rep = summarize_eval({items.begin(), items.end()}, format_active);
  std::vector<Metric> m;
  m.push_back({"eval.n", static_cast<double>(rep.items.size())});
  m.push_back({"eval.accuracy", rep.accuracy});
  m.push_back({"eval.format_rate", rep.format_rate});
  m.push_back({"eval.mean_length", rep.mean_length});
  m.push_back({"eval.form.with_thinking", rep.forms.with_thinking});
  m.push_back({"eval.form.without_thinking", rep.forms.without_thinking});
  m.push_back({"eval.form.malformed", rep.forms.malformed});
  if (rep.consistency) {
    const auto& c = *rep.consistency;
    m.push_back({"consistency.records", static_cast<double>(c.total)});
    m.push_back({"consistency.inconsistent", static_cast<double>(c.inconsistent)});
    m.push_back({"consistency.none_in_think", static_cast<double>(c.none_in_think)});
    m.push_back({"consistency.proportion_inconsistent", c.proportion_inconsistent});
    m.push_back({"consistency.acc_think_on_inconsistent", c.acc_think_on_inconsistent});
    m.push_back({"consistency.acc_tag_on_inconsistent", c.acc_tag_on_inconsistent});
    m.push_back({"consistency.overall_tag_accuracy", c.overall_tag_accuracy});
  }
  return m;
}

std::vector<Metric> analyze_drift(const ParameterTable& before, const ParameterTable& after) {
  std::vector<Metric> m;
  for (auto g : all_groupings()) {
    for (const auto& [name, l1] : param_drift(before, after, g).groups) {
      m.push_back({"drift." + std::string(to_string(g)) + "." + name, l1});
    }
  }
  m.push_back({"drift.total", whole_table_l1(before, after)});
  return m;
}

std::string metrics_csv(std::span<const Metric> metrics) {
  std::ostringstream out;
  out << "metric,value\n";
  for (const auto& m : metrics) out << m.name << ',' << opt_fmt(m.value, "") << '\n';
  return out.str();
}

std::string metrics_jsonl(std::span<const Metric> metrics) {
  std::ostringstream out;
  for (const auto& m : metrics) {
    out << json{{"metric", m.name}, {"value", opt(m.value)}}.dump() << '\n';
  }
  return out.str();
}

}  // namespace rft
