#include "rft/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "rft/rng.hpp"

namespace rft {

using nlohmann::json;

std::string_view to_string(VerifierKind kind) {
  switch (kind) {
    case VerifierKind::Exact: return "exact";
    case VerifierKind::Choice: return "choice";
    case VerifierKind::Contains: return "contains";
  }
  return "unknown";
}

VerifierKind parse_verifier_kind(std::string_view name) {
  if (name == "exact") return VerifierKind::Exact;
  if (name == "choice") return VerifierKind::Choice;
  if (name == "contains") return VerifierKind::Contains;
  throw std::invalid_argument("unknown verifier kind '" + std::string(name) + "'");
}

std::string template_family(std::string_view template_id) {
  return std::string(template_id.substr(0, template_id.find('/')));
}

void GeneratorConfig::validate() const {
  if (!(choice_fraction > 0.0 && choice_fraction <= 1.0)) {
    throw std::invalid_argument("choice_fraction must be in (0, 1]");
  }
  if (min_all_threshold > max_choices) {
    throw std::invalid_argument("min_all_threshold must not exceed max_choices");
  }
  if (n_classes < 2 || n_classes > class_label_pool().size()) {
    throw std::invalid_argument("n_classes must be in [2, " +
                                std::to_string(class_label_pool().size()) + "]");
  }
}

std::size_t choice_list_size(std::size_t n_labels, const GeneratorConfig& cfg) {
  const auto target = static_cast<std::size_t>(
      std::llround(cfg.choice_fraction * static_cast<double>(n_labels)));
  if (target < cfg.min_all_threshold) return n_labels;
  if (target > cfg.max_choices) return cfg.max_choices;
  return std::max<std::size_t>(target, 1);
}

std::vector<std::string> build_choice_list(std::span<const std::string> all_labels,
                                           const std::string& truth,
                                           const GeneratorConfig& cfg, Rng& rng) {
  if (all_labels.empty()) throw std::invalid_argument("build_choice_list: empty label set");
  if (std::find(all_labels.begin(), all_labels.end(), truth) == all_labels.end()) {
    throw std::invalid_argument("build_choice_list: truth '" + truth + "' not among labels");
  }
  const std::size_t size = choice_list_size(all_labels.size(), cfg);
  std::vector<std::string> others;
  others.reserve(all_labels.size());
  for (const auto& label : all_labels) {
    if (label != truth) others.push_back(label);
  }
  // Partial Fisher-Yates: the first size-1 entries are a uniform sample.
  const std::size_t need = std::min(size - 1, others.size());
  for (std::size_t i = 0; i < need; ++i) {
    std::swap(others[i], others[i + rng.below(others.size() - i)]);
  }
  std::vector<std::string> out{truth};
  out.insert(out.end(), others.begin(), others.begin() + static_cast<std::ptrdiff_t>(need));
  rng.shuffle(std::span<std::string>(out));
  return out;
}

std::span<const std::string> class_label_pool() {
  static const std::vector<std::string> pool = {
      "grooved",   "woven",       "veined",     "potholed",  "swirly",    "marbled",
      "pleated",   "scaly",       "bumpy",      "frilly",    "gauzy",     "matted",
      "meshed",    "flecked",     "sprinkled",  "wrinkled",  "freckled",  "porous",
      "stained",   "chequered",   "fibrous",    "striped",   "studded",   "lacelike",
      "knitted",   "cobwebbed",   "waffled",    "grid",      "bubbly",    "paisley",
      "spiralled", "interlaced",  "blotchy",    "pitted",    "zigzagged", "crystalline",
      "cracked",   "honeycombed", "perforated", "banded",    "braided",   "crosshatched",
      "smeared",   "stratified",  "lined",      "dotted"};
  return pool;
}

std::vector<std::string> class_labels(std::size_t n_classes) {
  auto pool = class_label_pool();
  if (n_classes > pool.size()) throw std::invalid_argument("too many classes requested");
  return {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_classes)};
}

std::string feature_token(std::size_t class_index) {
  std::string digits = std::to_string(class_index);
  if (digits.size() < 2) digits.insert(0, 2 - digits.size(), '0');
  return "f" + digits;
}

std::optional<std::size_t> feature_class(std::string_view feature) {
  if (feature.size() < 2 || feature[0] != 'f') return std::nullopt;
  std::size_t value = 0;
  for (char c : feature.substr(1)) {
    if (c < '0' || c > '9') return std::nullopt;
    value = value * 10 + static_cast<std::size_t>(c - '0');
  }
  return value;
}

std::vector<TaskInstance> gen_classification(const GeneratorConfig& cfg, std::size_t n_instances,
                                             double noise, Rng& rng) {
  cfg.validate();
  if (!(noise >= 0.0 && noise < 0.5)) throw std::invalid_argument("noise must be in [0, 0.5)");
  const auto labels = class_labels(cfg.n_classes);
  std::vector<TaskInstance> out;
  out.reserve(n_instances);
  for (std::size_t i = 0; i < n_instances; ++i) {
    const std::size_t cls = rng.below(labels.size());
    std::size_t shown = cls;
    if (rng.bernoulli(noise)) {
      shown = rng.below(labels.size() - 1);
      if (shown >= cls) ++shown;
    }
    const auto feature = feature_token(shown);
    auto choices = build_choice_list(labels, labels[cls], cfg, rng);
    std::string question = "What type of object is in the photo? [" + feature +
                           "] Please choose one from list [";
    for (std::size_t c = 0; c < choices.size(); ++c) {
      question += (c ? ", " : " ") + choices[c];
    }
    question += "].";
    out.push_back(TaskInstance{"cls/" + feature, std::move(question), labels[cls],
                               std::move(choices), VerifierKind::Contains, 0});
  }
  return out;
}

std::vector<TaskInstance> gen_arithmetic(const GeneratorConfig& cfg, DigitRange digits,
                                         std::size_t n_instances, Rng& rng) {
  (void)cfg;
  if (digits.hi < digits.lo) throw std::invalid_argument("digit range is empty");
  const auto span = static_cast<std::size_t>(digits.hi - digits.lo + 1);
  std::vector<TaskInstance> out;
  out.reserve(n_instances);
  for (std::size_t i = 0; i < n_instances; ++i) {
    const int a = digits.lo + static_cast<int>(rng.below(span));
    const int b = digits.lo + static_cast<int>(rng.below(span));
    const bool add = rng.below(2) == 0;
    const int result = add ? a + b : a - b;
    const std::string expr = std::to_string(a) + (add ? " + " : " - ") + std::to_string(b);
    std::string compact = std::to_string(a) + (add ? "+" : "-") + std::to_string(b);
    out.push_back(TaskInstance{"arith/" + compact, expr + " = ?", std::to_string(result),
                               std::nullopt, VerifierKind::Exact,
                               std::abs(a) >= 10 || std::abs(b) >= 10 ? 1 : 0});
  }
  return out;
}

std::vector<TaskInstance> gen_multichoice(std::span<const TaskInstance> base,
                                          std::size_t n_options, Rng& rng) {
  if (n_options < 2) throw std::invalid_argument("n_options must be at least 2");
  if (n_options > 26) throw std::invalid_argument("n_options must be at most 26");
  std::set<std::string> answer_pool;
  for (const auto& inst : base) {
    answer_pool.insert(inst.truth);
    if (inst.choice_list) answer_pool.insert(inst.choice_list->begin(), inst.choice_list->end());
  }
  std::vector<TaskInstance> out;
  out.reserve(base.size());
  for (const auto& inst : base) {
    std::vector<std::string> candidates;
    const auto& source = inst.choice_list ? std::set<std::string>(inst.choice_list->begin(),
                                                                  inst.choice_list->end())
                                          : answer_pool;
    for (const auto& a : source) {
      if (a != inst.truth) candidates.push_back(a);
    }
    // Numeric truths can always be padded with nearby integers.
    for (int delta = 1; candidates.size() < n_options - 1 && delta < 1000; ++delta) {
      try {
        const long v = std::stol(inst.truth);
        for (long c : {v + delta, v - delta}) {
          const auto s = std::to_string(c);
          if (std::find(candidates.begin(), candidates.end(), s) == candidates.end()) {
            candidates.push_back(s);
          }
        }
      } catch (const std::exception&) {
        break;
      }
    }
    if (candidates.size() < n_options - 1) {
      throw std::invalid_argument("not enough distractors for '" + inst.truth + "'");
    }
    for (std::size_t i = 0; i + 1 < n_options; ++i) {
      std::swap(candidates[i], candidates[i + rng.below(candidates.size() - i)]);
    }
    std::vector<std::string> options{inst.truth};
    options.insert(options.end(), candidates.begin(),
                   candidates.begin() + static_cast<std::ptrdiff_t>(n_options - 1));
    rng.shuffle(std::span<std::string>(options));

    std::vector<std::string> letters;
    std::string question = inst.question + " Choices:";
    std::string signature;
    std::string truth_letter;
    for (std::size_t o = 0; o < options.size(); ++o) {
      const std::string letter(1, static_cast<char>('A' + o));
      letters.push_back(letter);
      question += " (" + letter + ") " + options[o];
      signature += (o ? "," : "") + options[o];
      if (options[o] == inst.truth) truth_letter = letter;
    }
    out.push_back(TaskInstance{"mc/" + inst.template_id + "/" + signature, std::move(question),
                               truth_letter, std::move(letters), VerifierKind::Choice,
                               inst.difficulty});
  }
  return out;
}

Vocabulary vocabulary_for(std::span<const TaskInstance> corpus) {
  std::set<std::string> answers;
  for (const auto& inst : corpus) {
    answers.insert(inst.truth);
    if (inst.choice_list) answers.insert(inst.choice_list->begin(), inst.choice_list->end());
  }
  std::vector<std::string> ordered(answers.begin(), answers.end());
  return Vocabulary::standard(ordered);
}

void write_corpus(std::ostream& out, std::span<const TaskInstance> corpus) {
  for (const auto& inst : corpus) {
    json j;
    j["template_id"] = inst.template_id;
    j["question"] = inst.question;
    j["truth"] = inst.truth;
    j["choices"] = inst.choice_list ? json(*inst.choice_list) : json(nullptr);
    j["verifier_kind"] = to_string(inst.verifier_kind);
    j["difficulty"] = inst.difficulty;
    out << j.dump() << '\n';
  }
}

std::vector<TaskInstance> read_corpus(std::istream& in) {
  std::vector<TaskInstance> corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      TaskInstance inst;
      inst.template_id = j.at("template_id").get<std::string>();
      inst.question = j.at("question").get<std::string>();
      inst.truth = j.at("truth").get<std::string>();
      if (j.contains("choices") && !j.at("choices").is_null()) {
        inst.choice_list = j.at("choices").get<std::vector<std::string>>();
      }
      inst.verifier_kind = parse_verifier_kind(j.at("verifier_kind").get<std::string>());
      inst.difficulty = j.value("difficulty", 0);
      corpus.push_back(std::move(inst));
    } catch (const std::exception& e) {
      throw std::runtime_error("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

void save_corpus(const std::filesystem::path& path, std::span<const TaskInstance> corpus) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_corpus(out, corpus);
}

std::vector<TaskInstance> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_corpus(in);
}

}  // namespace rft
