#pragma once

// Test-side reference implementations. Nothing here calls into the library's
// probability, objective or gradient code; only table storage is shared.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

#include "rft/grpo.hpp"
#include "rft/policy.hpp"
#include "rft/rng.hpp"

namespace oracle {

using rft::ContextKey;
using rft::ParameterTable;
using rft::TokenId;

inline ContextKey context(const std::string& tmpl, const std::vector<TokenId>& prefix, int k) {
  ContextKey key{tmpl, std::vector<TokenId>(static_cast<std::size_t>(k), rft::kBeginMarker)};
  const std::size_t n = prefix.size();
  for (int i = 0; i < k; ++i) {
    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(n) - k + i;
    if (src >= 0) key.recent[static_cast<std::size_t>(i)] = prefix[static_cast<std::size_t>(src)];
  }
  return key;
}

inline std::vector<double> softmax(std::span<const double> z) {
  long double m = -INFINITY;
  for (double v : z) m = std::max<long double>(m, v);
  long double s = 0;
  for (double v : z) s += std::exp(static_cast<long double>(v) - m);
  std::vector<double> p(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = static_cast<double>(std::exp(static_cast<long double>(z[i]) - m) / s);
  }
  return p;
}

inline double log_prob(const ParameterTable& t, const std::string& tmpl,
                       const std::vector<TokenId>& seq) {
  long double total = 0;
  std::vector<TokenId> prefix;
  for (TokenId tok : seq) {
    const auto z = t.logits(context(tmpl, prefix, t.context_order()));
    long double m = -INFINITY;
    for (double v : z) m = std::max<long double>(m, v);
    long double s = 0;
    for (double v : z) s += std::exp(static_cast<long double>(v) - m);
    total += static_cast<long double>(z[static_cast<std::size_t>(tok)]) - m - std::log(s);
    prefix.push_back(tok);
  }
  return static_cast<double>(total);
}

/// Every sequence that stops at EOS or at max_len tokens.
inline std::vector<std::vector<TokenId>> enumerate(std::size_t vocab, TokenId eos,
                                                   std::size_t max_len) {
  std::vector<std::vector<TokenId>> out;
  std::function<void(std::vector<TokenId>&)> rec = [&](std::vector<TokenId>& s) {
    if (!s.empty() && (s.back() == eos || s.size() == max_len)) {
      out.push_back(s);
      return;
    }
    for (TokenId t = 0; t < static_cast<TokenId>(vocab); ++t) {
      s.push_back(t);
      rec(s);
      s.pop_back();
    }
  };
  std::vector<TokenId> s;
  rec(s);
  return out;
}

inline double k3(double cur, double ref) {
  const double r = std::exp(ref - cur);
  return r - std::log(r) - 1.0;
}

inline std::vector<double> advantages(const std::vector<double>& r, double floor) {
  const double n = static_cast<double>(r.size());
  const double mean = std::accumulate(r.begin(), r.end(), 0.0) / n;
  double var = 0.0;
  for (double v : r) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> a(r.size(), 0.0);
  if (sd > floor) {
    for (std::size_t i = 0; i < r.size(); ++i) a[i] = (r[i] - mean) / sd;
  }
  return a;
}

/// Objective written straight from the formula.
inline double objective(const rft::RolloutGroup& g, const ParameterTable& t,
                        const rft::GrpoConfig& cfg) {
  double sum = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double cur = log_prob(t, g.instance.template_id, g.responses[i].tokens);
    const double ratio = std::exp(cur - g.old_logps[i]);
    const double lo = 1.0 - cfg.clip_epsilon, hi = 1.0 + cfg.clip_epsilon;
    const double clipped = std::min(std::max(ratio, lo), hi);
    const double surrogate = std::min(ratio * g.advantages[i], clipped * g.advantages[i]);
    sum += surrogate - cfg.kl_beta * k3(cur, g.ref_logps[i]);
  }
  return sum / static_cast<double>(g.size());
}

/// d log pi(seq) / d logits as a dense map over the visited contexts.
inline std::map<ContextKey, std::vector<double>> log_prob_grad(const ParameterTable& t,
                                                               const std::string& tmpl,
                                                               const std::vector<TokenId>& seq) {
  std::map<ContextKey, std::vector<double>> g;
  std::vector<TokenId> prefix;
  for (TokenId tok : seq) {
    const auto ctx = context(tmpl, prefix, t.context_order());
    const auto p = softmax(t.logits(ctx));
    auto& row = g[ctx];
    row.resize(p.size(), 0.0);
    for (std::size_t j = 0; j < p.size(); ++j) row[j] -= p[j];
    row[static_cast<std::size_t>(tok)] += 1.0;
    prefix.push_back(tok);
  }
  return g;
}

/// Largest entry-wise difference between a sparse and a dense gradient.
inline double max_diff(const rft::SparseGradient& a, const std::map<ContextKey, std::vector<double>>& b) {
  double worst = 0.0;
  for (const auto& [ctx, row] : a.entries()) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double other = b.contains(ctx) ? b.at(ctx)[j] : 0.0;
      worst = std::max(worst, std::abs(row[j] - other));
    }
  }
  for (const auto& [ctx, row] : b) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      worst = std::max(worst, std::abs(row[j] - a.value(ctx, j)));
    }
  }
  return worst;
}

inline void accumulate(std::map<ContextKey, std::vector<double>>& into,
                const std::map<ContextKey, std::vector<double>>& g, double scale) {
  for (const auto& [ctx, row] : g) {
    auto& out = into[ctx];
    out.resize(row.size(), 0.0);
    for (std::size_t j = 0; j < row.size(); ++j) out[j] += scale * row[j];
  }
}

/// Central difference of f with respect to one logit.
inline double central_difference(ParameterTable& t, const ContextKey& ctx, std::size_t j,
                                 double h, const std::function<double()>& f) {
  auto& row = t.mutable_logits(ctx);
  const double x = row[j];
  row[j] = x + h;
  const double up = f();
  t.mutable_logits(ctx)[j] = x - h;
  const double down = f();
  t.mutable_logits(ctx)[j] = x;
  return (up - down) / (2.0 * h);
}

/// Fills every context reachable within max_len tokens with uniform(-scale, scale) logits.
inline void randomize(ParameterTable& t, const std::string& tmpl, std::size_t max_len,
                      double scale, rft::Rng& rng) {
  const auto& vocab = t.vocabulary();
  for (const auto& seq : enumerate(vocab.size(), vocab.eos(), max_len)) {
    std::vector<TokenId> prefix;
    for (TokenId tok : seq) {
      auto& row = t.mutable_logits(context(tmpl, prefix, t.context_order()));
      for (auto& v : row) {
        if (v == 0.0) v = scale * (2.0 * rng.uniform() - 1.0);
      }
      prefix.push_back(tok);
    }
  }
}

struct GrpoInstance {
  rft::TaskInstance task;
  ParameterTable cur;
  ParameterTable old;
  ParameterTable ref;
  rft::RolloutGroup group;
  rft::GrpoConfig cfg;
};

inline rft::Vocabulary small_vocab(std::size_t n) {
  std::vector<std::string> toks;
  for (std::size_t i = 0; i + 1 < n; ++i) toks.push_back("t" + std::to_string(i));
  toks.push_back("<eos>");
  return rft::Vocabulary(toks, "<eos>");
}

inline ParameterTable perturbed(const ParameterTable& base, double scale, rft::Rng& rng) {
  ParameterTable t = base;
  for (const auto& [ctx, row] : base.entries()) {
    auto& out = t.mutable_logits(ctx);
    for (std::size_t j = 0; j < row.size(); ++j) out[j] = row[j] + scale * (2.0 * rng.uniform() - 1.0);
  }
  return t;
}

/// Random small GRPO problem: vocab <= 8, G = 4, rewards in {0, 1, 2}.
/// cur and ref are independent perturbations of old.
inline GrpoInstance random_grpo_instance(rft::Rng& rng, double cur_scale, double ref_scale) {
  const std::size_t v = 3 + rng.below(6);
  const int order = static_cast<int>(rng.below(3));
  const std::size_t max_len = 2 + rng.below(2);
  rft::TaskInstance task;
  task.template_id = "t";
  task.question = "q";
  task.truth = "t0";
  ParameterTable old(small_vocab(v), order);
  randomize(old, "t", max_len, 1.5, rng);
  GrpoInstance in{task, perturbed(old, cur_scale, rng), old, perturbed(old, ref_scale, rng), {}, {}};
  in.cfg.group_size = 4;
  in.cfg.max_response_len = max_len;
  in.cfg.kl_beta = 0.04 + 0.5 * rng.uniform();
  in.group.instance = task;
  for (std::size_t i = 0; i < in.cfg.group_size; ++i) {
    auto r = rft::sample_response(old, task, max_len, rng);
    in.group.old_logps.push_back(log_prob(old, "t", r.tokens));
    in.group.ref_logps.push_back(log_prob(in.ref, "t", r.tokens));
    in.group.rewards.push_back(static_cast<double>(rng.below(3)));
    in.group.responses.push_back(std::move(r));
  }
  in.group.advantages = advantages(in.group.rewards, in.cfg.advantage_std_floor);
  return in;
}

/// Smallest distance of any ratio from the clip boundaries 1 - eps and 1 + eps.
inline double kink_distance(const GrpoInstance& in) {
  double d = INFINITY;
  for (std::size_t i = 0; i < in.group.size(); ++i) {
    const double ratio = std::exp(log_prob(in.cur, "t", in.group.responses[i].tokens) -
                                  in.group.old_logps[i]);
    d = std::min({d, std::abs(ratio - (1.0 - in.cfg.clip_epsilon)),
                  std::abs(ratio - (1.0 + in.cfg.clip_epsilon))});
  }
  return d;
}

/// Max relative error of analytic vs central-difference gradient over every
/// stored logit; the denominator is floored at 1e-4.
inline double gradient_check(GrpoInstance& in, double h = 1e-5) {
  const auto g = rft::grpo_gradient(in.group, in.cur, in.cfg);
  double worst = 0.0;
  std::vector<ContextKey> keys;
  for (const auto& [ctx, row] : in.cur.entries()) keys.push_back(ctx);
  for (const auto& ctx : keys) {
    for (std::size_t j = 0; j < in.cur.width(); ++j) {
      const double fd = central_difference(
          in.cur, ctx, j, h, [&] { return rft::grpo_objective(in.group, in.cur, in.cfg); });
      const double an = g.value(ctx, j);
      worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-4}));
    }
  }
  return worst;
}

}  // namespace oracle
