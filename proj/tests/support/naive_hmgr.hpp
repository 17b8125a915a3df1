#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "mgcs/encoder/params.hpp"
#include "mgcs/model/synthetic.hpp"

namespace mgcs::testing {

// Straight recursion from the definitions, sharing no code with the library.
struct NaiveHmgr {
  const SyntheticFunction& f;
  const EncoderParams& p;

  std::vector<std::size_t> tokens_in(std::size_t n) const {
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t < f.offsets.size(); ++t)
      if (f.snippets[n].bytes.contains(f.offsets[t])) out.push_back(t);
    return out;
  }

  Vector mean_tokens(const std::vector<std::size_t>& ts) const {
    Vector m(p.d, 0.0);
    for (std::size_t t : ts)
      for (std::size_t k = 0; k < p.d; ++k) m[k] += p.embedding(f.tokens[t])[k];
    for (auto& v : m) v /= static_cast<double>(ts.size());
    return m;
  }

  Vector ln(const Vector& x) const {
    double mu = 0, var = 0;
    for (double v : x) mu += v;
    mu /= static_cast<double>(x.size());
    for (double v : x) var += (v - mu) * (v - mu);
    var /= static_cast<double>(x.size());
    Vector out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k)
      out[k] = p.layernorm_gain[k] * (x[k] - mu) / std::sqrt(var + 1e-5) + p.layernorm_bias[k];
    return out;
  }

  std::optional<Vector> rep(std::size_t n) const {
    const auto all = tokens_in(n);
    if (all.empty()) return std::nullopt;
    if (f.snippets[n].granularity == Granularity::Statement) return mean_tokens(all);
    std::vector<Vector> kids;
    std::vector<std::size_t> direct;
    for (std::size_t t : all) {
      bool inside = false;
      for (std::size_t c : f.hierarchy.node(n).children) inside |= f.snippets[c].bytes.contains(f.offsets[t]);
      if (!inside) direct.push_back(t);
    }
    for (std::size_t c : f.hierarchy.node(n).children)
      if (auto v = rep(c)) kids.push_back(*v);
    Vector pre = mean_tokens(direct.empty() ? all : direct);
    if (!kids.empty()) {
      Vector m(p.d, 0.0);
      for (const auto& k : kids)
        for (std::size_t i = 0; i < p.d; ++i) m[i] += k[i] / static_cast<double>(kids.size());
      for (std::size_t i = 0; i < p.d; ++i)
        for (std::size_t j = 0; j < p.d; ++j) pre[i] += p.hmgr_W[i * p.d + j] * m[j];
    }
    return ln(pre);
  }
};

}  // namespace mgcs::testing
