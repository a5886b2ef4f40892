#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rft/analysis.hpp"
#include "rft/grammar.hpp"
#include "rft/grpo.hpp"
#include "rft/rewards.hpp"
#include "rft/strategies.hpp"
#include "rft/tasks.hpp"

namespace rft {

// JSON-lines encodings of the artifacts the harness writes.

std::string to_json_line(const TraceRecord& record);
TraceRecord trace_record_from_json(std::string_view line);

void write_trace(std::ostream& out, const TrainingTrace& trace);
TrainingTrace read_trace(std::istream& in);
TrainingTrace load_trace(const std::filesystem::path& path);

/// Appends one record per line and flushes after each, so an interrupted run
/// leaves a readable prefix.
class TraceWriter {
 public:
  explicit TraceWriter(const std::filesystem::path& path);
  void append(const TraceRecord& record);

 private:
  std::ofstream out_;
};

/// One greedily decoded evaluation response.
struct EvalItem {
  std::size_t index = 0;
  TaskInstance instance;
  std::string response;
  std::size_t length = 0;  ///< tokens, EOS excluded
  Shape shape = Shape::Malformed;
  ResponseForm form = ResponseForm::Malformed;
  RewardBreakdown reward;
  std::optional<ConsistencyRecord> consistency;
};

std::string to_json_line(const EvalItem& item);
EvalItem eval_item_from_json(std::string_view line);

void save_eval(const std::filesystem::path& path, std::span<const EvalItem> items);
std::vector<EvalItem> load_eval(const std::filesystem::path& path);

Shape parse_shape(std::string_view name);
ResponseForm parse_response_form(std::string_view name);

/// Writes `text` to `path`, replacing any existing file.
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace rft
