#include "rft/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rft/rng.hpp"

namespace rft {

ContextKey make_context(std::string_view template_id, std::span<const TokenId> prefix,
                        int order) {
  ContextKey ctx{std::string(template_id), std::vector<TokenId>(static_cast<std::size_t>(order),
                                                                kBeginMarker)};
  const std::size_t k = static_cast<std::size_t>(order);
  const std::size_t take = std::min(k, prefix.size());
  std::copy(prefix.end() - static_cast<std::ptrdiff_t>(take), prefix.end(),
            ctx.recent.end() - static_cast<std::ptrdiff_t>(take));
  return ctx;
}

// --- SparseGradient --------------------------------------------------------

std::vector<double>& SparseGradient::at(const ContextKey& ctx) {
  auto it = entries_.find(ctx);
  if (it == entries_.end()) it = entries_.emplace(ctx, std::vector<double>(width_, 0.0)).first;
  return it->second;
}

double SparseGradient::value(const ContextKey& ctx, std::size_t index) const {
  auto it = entries_.find(ctx);
  return it == entries_.end() ? 0.0 : it->second.at(index);
}

void SparseGradient::add_scaled(const SparseGradient& other, double scale) {
  if (other.width_ != width_) throw std::invalid_argument("gradient width mismatch");
  for (const auto& [ctx, g] : other.entries_) {
    auto& dst = at(ctx);
    for (std::size_t j = 0; j < width_; ++j) dst[j] += scale * g[j];
  }
}

void SparseGradient::scale(double factor) {
  for (auto& [ctx, g] : entries_) {
    for (double& v : g) v *= factor;
  }
}

double SparseGradient::max_abs() const {
  double m = 0.0;
  for (const auto& [ctx, g] : entries_) {
    for (double v : g) m = std::max(m, std::abs(v));
  }
  return m;
}

// --- ParameterTable --------------------------------------------------------

ParameterTable::ParameterTable(Vocabulary vocab, int context_order)
    : vocab_(std::move(vocab)), order_(context_order), zeros_(vocab_.size(), 0.0) {
  if (order_ < 0 || order_ > 3) {
    throw std::invalid_argument("context_order must be in [0, 3], got " + std::to_string(order_));
  }
}

std::span<const double> ParameterTable::logits(const ContextKey& ctx) const {
  auto it = table_.find(ctx);
  if (it == table_.end()) return zeros_;
  return it->second;
}

std::vector<double>& ParameterTable::mutable_logits(const ContextKey& ctx) {
  if (ctx.recent.size() != static_cast<std::size_t>(order_)) {
    throw std::invalid_argument("context length does not match context order");
  }
  auto it = table_.find(ctx);
  if (it == table_.end()) it = table_.emplace(ctx, zeros_).first;
  return it->second;
}

void ParameterTable::ascend(const SparseGradient& gradient, double step) {
  if (gradient.width() != width()) throw std::invalid_argument("gradient width mismatch");
  for (const auto& [ctx, g] : gradient.entries()) {
    auto& row = mutable_logits(ctx);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += step * g[j];
  }
}

// --- distributions ---------------------------------------------------------

std::vector<double> token_distribution(const ParameterTable& params, const ContextKey& ctx) {
  auto logits = params.logits(ctx);
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    p[j] = std::exp(logits[j] - mx);
    z += p[j];
  }
  for (double& v : p) v /= z;
  return p;
}

std::vector<double> token_log_distribution(const ParameterTable& params, const ContextKey& ctx) {
  auto logits = params.logits(ctx);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double x : logits) z += std::exp(x - mx);
  const double log_z = std::log(z);
  std::vector<double> lp(logits.size());
  for (std::size_t j = 0; j < lp.size(); ++j) lp[j] = (logits[j] - mx) - log_z;
  return lp;
}

namespace {

template <typename Pick>
Response decode(const ParameterTable& params, const TaskInstance& instance, std::size_t max_len,
                Pick&& pick) {
  if (max_len == 0) throw std::invalid_argument("max_len must be at least 1");
  Response r;
  const TokenId eos = params.vocabulary().eos();
  const int k = params.context_order();
  while (r.tokens.size() < max_len) {
    const auto ctx = make_context(instance.template_id, r.tokens, k);
    const auto logp = token_log_distribution(params, ctx);
    const TokenId tok = pick(params, ctx, logp);
    r.tokens.push_back(tok);
    r.per_token_logp.push_back(logp[static_cast<std::size_t>(tok)]);
    r.total_logp += logp[static_cast<std::size_t>(tok)];
    if (tok == eos) break;
  }
  return r;
}

}  // namespace

Response sample_response(const ParameterTable& params, const TaskInstance& instance,
                         std::size_t max_len, Rng& rng) {
  return decode(params, instance, max_len,
                [&rng](const ParameterTable& p, const ContextKey& ctx, const std::vector<double>&) {
                  const auto probs = token_distribution(p, ctx);
                  const double u = rng.uniform();
                  double cum = 0.0;
                  std::size_t last_nonzero = 0;
                  for (std::size_t j = 0; j < probs.size(); ++j) {
                    if (probs[j] <= 0.0) continue;
                    last_nonzero = j;
                    cum += probs[j];
                    if (u < cum) return static_cast<TokenId>(j);
                  }
                  return static_cast<TokenId>(last_nonzero);
                });
}

Response greedy_response(const ParameterTable& params, const TaskInstance& instance,
                         std::size_t max_len) {
  return decode(params, instance, max_len,
                [](const ParameterTable&, const ContextKey&, const std::vector<double>& logp) {
                  return static_cast<TokenId>(std::max_element(logp.begin(), logp.end()) -
                                              logp.begin());
                });
}

double sequence_log_prob(const ParameterTable& params, const TaskInstance& instance,
                         std::span<const TokenId> tokens) {
  double total = 0.0;
  const int k = params.context_order();
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto ctx = make_context(instance.template_id, tokens.first(t), k);
    const auto logp = token_log_distribution(params, ctx);
    total += logp.at(static_cast<std::size_t>(tokens[t]));
  }
  return total;
}

SparseGradient log_prob_gradient(const ParameterTable& params, const TaskInstance& instance,
                                 std::span<const TokenId> tokens) {
  SparseGradient grad(params.width());
  const int k = params.context_order();
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto ctx = make_context(instance.template_id, tokens.first(t), k);
    const auto p = token_distribution(params, ctx);
    auto& g = grad.at(ctx);
    for (std::size_t j = 0; j < p.size(); ++j) g[j] -= p[j];
    g.at(static_cast<std::size_t>(tokens[t])) += 1.0;
  }
  return grad;
}

std::string render_text(const Vocabulary& vocab, std::span<const TokenId> tokens) {
  std::string out;
  for (TokenId t : tokens) {
    if (t == vocab.eos()) continue;
    if (!out.empty()) out += ' ';
    out += vocab.token(t);
  }
  return out;
}

// --- serialization ---------------------------------------------------------

void write_parameters(std::ostream& out, const ParameterTable& params) {
  out << "# rft-params v1\n";
  out << "# order " << params.context_order() << "\n";
  out << "# vocab";
  for (const auto& t : params.vocabulary().tokens()) out << '\t' << t;
  out << "\n# eos " << params.vocabulary().token(params.vocabulary().eos()) << "\n";
  char buf[40];
  for (const auto& [ctx, logits] : params.entries()) {
    out << ctx.template_id << '\t';
    for (std::size_t i = 0; i < ctx.recent.size(); ++i) {
      if (i) out << ' ';
      out << ctx.recent[i];
    }
    out << '\t';
    for (std::size_t j = 0; j < logits.size(); ++j) {
      if (j) out << ' ';
      std::snprintf(buf, sizeof buf, "%.17g", logits[j]);
      out << buf;
    }
    out << '\n';
  }
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(std::move(cur));
  return parts;
}

}  // namespace

ParameterTable read_parameters(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "# rft-params v1") {
    throw std::runtime_error("parameters: missing '# rft-params v1' header");
  }
  int order = -1;
  std::vector<std::string> vocab_tokens;
  std::string eos;
  std::vector<std::string> body;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# order ", 0) == 0) {
      order = std::stoi(line.substr(8));
    } else if (line.rfind("# vocab", 0) == 0) {
      auto parts = split(line, '\t');
      vocab_tokens.assign(parts.begin() + 1, parts.end());
    } else if (line.rfind("# eos ", 0) == 0) {
      eos = line.substr(6);
    } else if (line[0] == '#') {
      continue;
    } else {
      body.push_back(line);
    }
  }
  if (order < 0 || vocab_tokens.empty() || eos.empty()) {
    throw std::runtime_error("parameters: incomplete header");
  }
  ParameterTable params(Vocabulary(std::move(vocab_tokens), eos), order);
  for (const auto& row : body) {
    auto fields = split(row, '\t');
    if (fields.size() != 3) throw std::runtime_error("parameters: malformed record: " + row);
    ContextKey ctx{fields[0], {}};
    std::istringstream ids(fields[1]);
    for (TokenId id; ids >> id;) ctx.recent.push_back(id);
    auto& logits = params.mutable_logits(ctx);
    std::istringstream values(fields[2]);
    std::size_t j = 0;
    for (std::string v; values >> v; ++j) {
      if (j >= logits.size()) throw std::runtime_error("parameters: too many logits: " + row);
      logits[j] = std::strtod(v.c_str(), nullptr);
      if (!std::isfinite(logits[j])) throw std::runtime_error("parameters: non-finite logit");
    }
    if (j != logits.size()) throw std::runtime_error("parameters: too few logits: " + row);
  }
  return params;
}

void save_parameters(const std::filesystem::path& path, const ParameterTable& params) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_parameters(out, params);
}

ParameterTable load_parameters(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_parameters(in);
}

}  // namespace rft
