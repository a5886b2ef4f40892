#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rft/vocabulary.hpp"

namespace rft {

class Rng;

enum class VerifierKind { Exact, Choice, Contains };

std::string_view to_string(VerifierKind kind);
VerifierKind parse_verifier_kind(std::string_view name);

/// One synthetic question with its ground truth and verifier.
///
/// template_id is the policy's conditioning key: instances that share it look
/// identical to the policy. The part before the first '/' names the template
/// family (cls, arith, mc).
struct TaskInstance {
  std::string template_id;
  std::string question;
  std::string truth;
  std::optional<std::vector<std::string>> choice_list;
  VerifierKind verifier_kind = VerifierKind::Exact;
  int difficulty = 0;

  friend bool operator==(const TaskInstance&, const TaskInstance&) = default;
};

std::string template_family(std::string_view template_id);

struct GeneratorConfig {
  std::size_t n_classes = 4;
  double choice_fraction = 0.4;
  std::size_t min_all_threshold = 30;
  std::size_t max_choices = 100;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Choice list for one question: round(fraction * |labels|) labels including
/// the truth, widened to all labels below min_all_threshold and capped at
/// max_choices, in shuffled order.
std::vector<std::string> build_choice_list(std::span<const std::string> all_labels,
                                           const std::string& truth,
                                           const GeneratorConfig& cfg, Rng& rng);

/// Size rule behind build_choice_list, exposed for tests and reporting.
std::size_t choice_list_size(std::size_t n_labels, const GeneratorConfig& cfg);

/// Built-in single-token class names (texture words with no name contained
/// in another).
std::span<const std::string> class_label_pool();
std::vector<std::string> class_labels(std::size_t n_classes);
std::string feature_token(std::size_t class_index);
/// Inverse of feature_token; nullopt for anything else.
std::optional<std::size_t> feature_class(std::string_view feature);

std::vector<TaskInstance> gen_classification(const GeneratorConfig& cfg, std::size_t n_instances,
                                             double noise, Rng& rng);

struct DigitRange {
  int lo = 0;
  int hi = 9;
};

std::vector<TaskInstance> gen_arithmetic(const GeneratorConfig& cfg, DigitRange digits,
                                         std::size_t n_instances, Rng& rng);

std::vector<TaskInstance> gen_multichoice(std::span<const TaskInstance> base,
                                          std::size_t n_options, Rng& rng);

/// Standard vocabulary covering every truth and choice in the corpus.
Vocabulary vocabulary_for(std::span<const TaskInstance> corpus);

void write_corpus(std::ostream& out, std::span<const TaskInstance> corpus);
std::vector<TaskInstance> read_corpus(std::istream& in);
void save_corpus(const std::filesystem::path& path, std::span<const TaskInstance> corpus);
std::vector<TaskInstance> load_corpus(const std::filesystem::path& path);

}  // namespace rft
