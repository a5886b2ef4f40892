#include "rft/records.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace rft {

using nlohmann::json;

namespace {

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

json parse_line(std::string_view line, std::string_view what) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string(what) + ": bad JSON line: " + e.what());
  }
}

std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(line);
  }
  return lines;
}

json instance_json(const TaskInstance& t) {
  return {{"template_id", t.template_id},
          {"question", t.question},
          {"truth", t.truth},
          {"choices", optional_json(t.choice_list)},
          {"verifier_kind", std::string(to_string(t.verifier_kind))},
          {"difficulty", t.difficulty}};
}

TaskInstance instance_from(const json& j) {
  TaskInstance t;
  t.template_id = j.at("template_id").get<std::string>();
  t.question = j.at("question").get<std::string>();
  t.truth = j.at("truth").get<std::string>();
  t.choice_list = optional_from<std::vector<std::string>>(j, "choices");
  t.verifier_kind = parse_verifier_kind(j.at("verifier_kind").get<std::string>());
  t.difficulty = j.value("difficulty", 0);
  return t;
}

json consistency_json(const ConsistencyRecord& r) {
  return {{"response_id", r.response_id},
          {"think_answer", optional_json(r.think_answer)},
          {"tag_answer", optional_json(r.tag_answer)},
          {"verdict", std::string(to_string(r.verdict))},
          {"think_correct", optional_json(r.think_correct)},
          {"tag_correct", optional_json(r.tag_correct)}};
}

ConsistencyRecord consistency_from(const json& j) {
  ConsistencyRecord r;
  r.response_id = j.at("response_id").get<std::string>();
  r.think_answer = optional_from<std::string>(j, "think_answer");
  r.tag_answer = optional_from<std::string>(j, "tag_answer");
  r.verdict = parse_verdict(j.at("verdict").get<std::string>());
  r.think_correct = optional_from<int>(j, "think_correct");
  r.tag_correct = optional_from<int>(j, "tag_correct");
  return r;
}

}  // namespace

std::string to_json_line(const TraceRecord& r) {
  const json j = {{"step", r.step},
                  {"mean_reward", r.mean_reward},
                  {"mean_accuracy_reward", r.mean_accuracy_reward},
                  {"format_pass_rate", optional_json(r.format_pass_rate)},
                  {"mean_response_length", r.mean_response_length},
                  {"mean_kl", r.mean_kl},
                  {"objective_value", r.objective_value},
                  {"wall_ms", r.wall_ms}};
  return j.dump();
}

TraceRecord trace_record_from_json(std::string_view line) {
  const json j = parse_line(line, "trace");
  TraceRecord r;
  r.step = j.at("step").get<std::size_t>();
  r.mean_reward = j.at("mean_reward").get<double>();
  r.mean_accuracy_reward = j.at("mean_accuracy_reward").get<double>();
  r.format_pass_rate = optional_from<double>(j, "format_pass_rate");
  r.mean_response_length = j.at("mean_response_length").get<double>();
  r.mean_kl = j.at("mean_kl").get<double>();
  r.objective_value = j.at("objective_value").get<double>();
  r.wall_ms = j.value("wall_ms", 0.0);
  return r;
}

void write_trace(std::ostream& out, const TrainingTrace& trace) {
  for (const auto& r : trace.records) out << to_json_line(r) << '\n';
}

TrainingTrace read_trace(std::istream& in) {
  TrainingTrace trace;
  for (const auto& line : read_lines(in)) trace.records.push_back(trace_record_from_json(line));
  return trace;
}

TrainingTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace " + path.string());
  return read_trace(in);
}

TraceWriter::TraceWriter(const std::filesystem::path& path) : out_(path, std::ios::trunc) {
  if (!out_) throw std::runtime_error("cannot write trace " + path.string());
}

void TraceWriter::append(const TraceRecord& record) {
  out_ << to_json_line(record) << '\n';
  out_.flush();
}

std::string to_json_line(const EvalItem& item) {
  json j = {{"index", item.index},
            {"instance", instance_json(item.instance)},
            {"response", item.response},
            {"length", item.length},
            {"shape", std::string(to_string(item.shape))},
            {"form", std::string(to_string(item.form))},
            {"format", item.reward.format},
            {"accuracy", item.reward.accuracy},
            {"total", item.reward.total},
            {"format_active", item.reward.format_active},
            {"consistency", nullptr}};
  if (item.consistency) j["consistency"] = consistency_json(*item.consistency);
  return j.dump();
}

EvalItem eval_item_from_json(std::string_view line) {
  const json j = parse_line(line, "eval");
  EvalItem item;
  item.index = j.at("index").get<std::size_t>();
  item.instance = instance_from(j.at("instance"));
  item.response = j.at("response").get<std::string>();
  item.length = j.at("length").get<std::size_t>();
  item.shape = parse_shape(j.at("shape").get<std::string>());
  item.form = parse_response_form(j.at("form").get<std::string>());
  item.reward.format = j.at("format").get<int>();
  item.reward.accuracy = j.at("accuracy").get<int>();
  item.reward.total = j.at("total").get<double>();
  item.reward.format_active = j.at("format_active").get<bool>();
  if (j.contains("consistency") && !j.at("consistency").is_null()) {
    item.consistency = consistency_from(j.at("consistency"));
  }
  return item;
}

void save_eval(const std::filesystem::path& path, std::span<const EvalItem> items) {
  std::ostringstream out;
  for (const auto& item : items) out << to_json_line(item) << '\n';
  write_text_file(path, out.str());
}

std::vector<EvalItem> load_eval(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open eval file " + path.string());
  std::vector<EvalItem> items;
  for (const auto& line : read_lines(in)) items.push_back(eval_item_from_json(line));
  return items;
}

Shape parse_shape(std::string_view name) {
  for (Shape s : {Shape::ThinkAnswer, Shape::AnswerOnly, Shape::AnswerReason, Shape::Malformed}) {
    if (to_string(s) == name) return s;
  }
  throw std::invalid_argument("unknown shape '" + std::string(name) + "'");
}

ResponseForm parse_response_form(std::string_view name) {
  for (ResponseForm f :
       {ResponseForm::WithThinking, ResponseForm::WithoutThinking, ResponseForm::Malformed}) {
    if (to_string(f) == name) return f;
  }
  throw std::invalid_argument("unknown response form '" + std::string(name) + "'");
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace rft
