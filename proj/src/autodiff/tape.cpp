#include "mgcs/autodiff/tape.hpp"

#include <algorithm>

#include "mgcs/common/error.hpp"
#include "mgcs/simd/kernels.hpp"

namespace mgcs::ad {

Gradients::Gradients(std::size_t dim) : d(dim) { clear(); }

void Gradients::clear() {
  embedding_rows.clear();
  hmgr_W.assign(d * d, 0.0);
  layernorm_gain.assign(d, 0.0);
  layernorm_bias.assign(d, 0.0);
}

Tape::Tape(const EncoderParams& params) : params_(params) {}

Var Tape::push(Op op, std::size_t dim, std::span<const Var> inputs) {
  Node n;
  n.op = op;
  n.offset = static_cast<std::uint32_t>(values_.size());
  n.dim = static_cast<std::uint32_t>(dim);
  n.in_offset = static_cast<std::uint32_t>(inputs_.size());
  n.in_count = static_cast<std::uint32_t>(inputs.size());
  n.aux_offset = static_cast<std::uint32_t>(aux_.size());
  for (Var v : inputs) {
    if (!v.valid() || v.id >= nodes_.size()) throw Error(ErrorCode::FormatError, "tape input out of range");
    inputs_.push_back(v.id);
  }
  values_.resize(values_.size() + dim, 0.0);
  nodes_.push_back(n);
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw Error(ErrorCode::FormatError, "tape variable out of range");
  return nodes_[v.id];
}

std::span<const double> Tape::value(Var v) const {
  const Node& n = node(v);
  return {val(n), n.dim};
}

double Tape::scalar(Var v) const {
  const Node& n = node(v);
  if (n.dim != 1) throw Error(ErrorCode::DimensionMismatch, "expected a scalar tape value");
  return *val(n);
}

Vector Tape::copy(Var v) const {
  auto s = value(v);
  return {s.begin(), s.end()};
}

std::span<const double> Tape::adjoint(Var v) const {
  const Node& n = node(v);
  if (adjoints_.size() < values_.size()) throw Error(ErrorCode::FormatError, "backward has not run");
  return {adjoints_.data() + n.offset, n.dim};
}

Var Tape::constant(std::span<const double> value) {
  const Vector copy(value.begin(), value.end());  // `value` may alias values_
  Var v = push(Op::Constant, copy.size(), {});
  std::ranges::copy(copy, val(nodes_.back()));
  return v;
}

Var Tape::embedding(TokenId token) {
  if (token >= params_.vocab_size)
    throw Error(ErrorCode::DimensionMismatch, "token id " + std::to_string(token) + " outside the vocabulary");
  Var v = push(Op::Embedding, params_.d, {});
  nodes_.back().token = token;
  std::ranges::copy(params_.embedding(token), val(nodes_.back()));
  return v;
}

Var Tape::mean(std::span<const Var> xs) {
  if (xs.empty()) throw Error(ErrorCode::DimensionMismatch, "mean of no vectors");
  const std::size_t dim = node(xs[0]).dim;
  for (Var x : xs)
    if (node(x).dim != dim) throw Error(ErrorCode::DimensionMismatch, "mean over vectors of different size");
  Var out = push(Op::Mean, dim, xs);
  std::vector<std::span<const double>> rows;
  rows.reserve(xs.size());
  for (Var x : xs) rows.push_back(value(x));
  ops::mean_rows(rows, {val(nodes_.back()), dim});
  return out;
}

Var Tape::add(Var a, Var b) {
  const std::size_t dim = node(a).dim;
  if (node(b).dim != dim) throw Error(ErrorCode::DimensionMismatch, "add over vectors of different size");
  const Var in[] = {a, b};
  Var out = push(Op::Add, dim, in);
  const double* pa = val(node(a));
  const double* pb = val(node(b));
  double* po = val(nodes_.back());
  for (std::size_t i = 0; i < dim; ++i) po[i] = pa[i] + pb[i];
  return out;
}

Var Tape::project(Var x) {
  if (node(x).dim != params_.d) throw Error(ErrorCode::DimensionMismatch, "projection input must have size d");
  const Var in[] = {x};
  Var out = push(Op::Project, params_.d, in);
  ops::matvec(params_.hmgr_W, value(x), {val(nodes_.back()), params_.d});
  return out;
}

Var Tape::layer_norm(Var x) {
  if (node(x).dim != params_.d) throw Error(ErrorCode::DimensionMismatch, "layer norm input must have size d");
  const Var in[] = {x};
  Var out = push(Op::LayerNorm, params_.d, in);
  ops::LayerNormCache cache;
  ops::layer_norm(value(x), params_.layernorm_gain, params_.layernorm_bias, kLayerNormEps,
                  {val(nodes_.back()), params_.d}, &cache);
  aux_.insert(aux_.end(), cache.xhat.begin(), cache.xhat.end());
  aux_.push_back(cache.inv_std);
  return out;
}

Var Tape::dot(Var a, Var b) {
  if (node(a).dim != node(b).dim) throw Error(ErrorCode::DimensionMismatch, "dot over vectors of different size");
  const Var in[] = {a, b};
  Var out = push(Op::Dot, 1, in);
  *val(nodes_.back()) = simd::dot(value(a), value(b));
  return out;
}

Var Tape::info_nce(Var pos, std::span<const Var> negs, double tau) {
  if (!(tau > 0.0)) throw Error(ErrorCode::ConfigError, "temperature must be positive");
  std::vector<Var> in{pos};
  in.insert(in.end(), negs.begin(), negs.end());
  std::vector<double> neg_values;
  neg_values.reserve(negs.size());
  for (Var n : negs) neg_values.push_back(scalar(n));
  const double pos_value = scalar(pos);
  Var out = push(Op::InfoNce, 1, in);
  nodes_.back().tau = tau;
  std::vector<double> probs;
  *val(nodes_.back()) = ops::info_nce(pos_value, neg_values, tau, &probs);
  aux_.insert(aux_.end(), probs.begin(), probs.end());
  return out;
}

Var Tape::weighted_sum(std::span<const Var> xs, std::span<const double> weights) {
  if (xs.size() != weights.size()) throw Error(ErrorCode::DimensionMismatch, "weights do not match inputs");
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) total += weights[i] * scalar(xs[i]);
  Var out = push(Op::WeightedSum, 1, xs);
  *val(nodes_.back()) = total;
  aux_.insert(aux_.end(), weights.begin(), weights.end());
  return out;
}

void Tape::backward(Var root, Gradients* grads) {
  if (node(root).dim != 1) throw Error(ErrorCode::DimensionMismatch, "backward needs a scalar root");
  if (grads && grads->d != params_.d) throw Error(ErrorCode::DimensionMismatch, "gradient buffer has wrong d");
  adjoints_.assign(values_.size(), 0.0);
  adjoints_[node(root).offset] = 1.0;
  const std::size_t d = params_.d;

  for (std::size_t idx = root.id + 1; idx-- > 0;) {
    const Node& n = nodes_[idx];
    const double* g = adjoints_.data() + n.offset;
    if (std::all_of(g, g + n.dim, [](double x) { return x == 0.0; })) continue;
    const std::uint32_t* in = inputs_.data() + n.in_offset;
    auto adj = [&](std::uint32_t id) { return adjoints_.data() + nodes_[id].offset; };

    switch (n.op) {
      case Op::Constant:
        break;
      case Op::Embedding:
        if (grads) {
          auto& row = grads->embedding_rows[n.token];
          if (row.empty()) row.assign(d, 0.0);
          simd::axpy(1.0, {g, d}, row);
        }
        break;
      case Op::Mean: {
        const double w = 1.0 / static_cast<double>(n.in_count);
        for (std::uint32_t k = 0; k < n.in_count; ++k) simd::kernels().axpy(w, g, adj(in[k]), n.dim);
        break;
      }
      case Op::Add:
        simd::kernels().axpy(1.0, g, adj(in[0]), n.dim);
        simd::kernels().axpy(1.0, g, adj(in[1]), n.dim);
        break;
      case Op::Project: {
        const double* x = val(nodes_[in[0]]);
        double* dx = adj(in[0]);
        for (std::size_t i = 0; i < d; ++i) {
          if (g[i] == 0.0) continue;
          simd::kernels().axpy(g[i], params_.hmgr_W.data() + i * d, dx, d);
          if (grads) simd::kernels().axpy(g[i], x, grads->hmgr_W.data() + i * d, d);
        }
        break;
      }
      case Op::LayerNorm: {
        const double* xhat = aux_.data() + n.aux_offset;
        const double inv_std = aux_[n.aux_offset + d];
        const double* gain = params_.layernorm_gain.data();
        // dxhat = g * gain; dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
        std::vector<double> dxhat(d);
        for (std::size_t i = 0; i < d; ++i) dxhat[i] = g[i] * gain[i];
        const double m1 = simd::sum(dxhat) / static_cast<double>(d);
        const double m2 = simd::kernels().dot(dxhat.data(), xhat, d) / static_cast<double>(d);
        double* dx = adj(in[0]);
        for (std::size_t i = 0; i < d; ++i) dx[i] += inv_std * (dxhat[i] - m1 - xhat[i] * m2);
        if (grads) {
          for (std::size_t i = 0; i < d; ++i) {
            grads->layernorm_gain[i] += g[i] * xhat[i];
            grads->layernorm_bias[i] += g[i];
          }
        }
        break;
      }
      case Op::Dot: {
        const std::size_t m = nodes_[in[0]].dim;
        simd::kernels().axpy(g[0], val(nodes_[in[1]]), adj(in[0]), m);
        simd::kernels().axpy(g[0], val(nodes_[in[0]]), adj(in[1]), m);
        break;
      }
      case Op::InfoNce: {
        const double* probs = aux_.data() + n.aux_offset;
        adj(in[0])[0] += g[0] * (probs[0] - 1.0) / n.tau;
        for (std::uint32_t k = 1; k < n.in_count; ++k) adj(in[k])[0] += g[0] * probs[k] / n.tau;
        break;
      }
      case Op::WeightedSum: {
        const double* w = aux_.data() + n.aux_offset;
        for (std::uint32_t k = 0; k < n.in_count; ++k) adj(in[k])[0] += g[0] * w[k];
        break;
      }
    }
  }
}

}  // namespace mgcs::ad
