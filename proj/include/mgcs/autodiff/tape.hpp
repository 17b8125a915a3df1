#pragma once

// Minimal reverse-mode tape over d-vectors and scalars, with exactly the ops
// the encoder, HMGR and the contrastive loss need. Forward values come from
// mgcs::ops, so a tape evaluation matches the plain path bit for bit.

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "mgcs/encoder/ops.hpp"
#include "mgcs/encoder/params.hpp"

namespace mgcs::ad {

struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const noexcept { return id != UINT32_MAX; }
  friend bool operator==(Var, Var) = default;
};

/// Parameter gradients. Embedding rows are sparse and ordered, so applying
/// them is deterministic.
struct Gradients {
  std::size_t d = 0;
  std::map<TokenId, Vector> embedding_rows;
  Vector hmgr_W;
  Vector layernorm_gain;
  Vector layernorm_bias;

  explicit Gradients(std::size_t dim = 0);
  void clear();
};

class Tape {
 public:
  explicit Tape(const EncoderParams& params);

  const EncoderParams& params() const noexcept { return params_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var constant(std::span<const double> value);
  Var embedding(TokenId token);
  Var mean(std::span<const Var> xs);
  Var add(Var a, Var b);
  /// hmgr_W . x
  Var project(Var x);
  /// gain * normalize(x) + bias
  Var layer_norm(Var x);
  /// Scalar a . b
  Var dot(Var a, Var b);
  /// InfoNCE over scalar scores.
  Var info_nce(Var pos, std::span<const Var> negs, double tau);
  /// Scalar sum_i weights[i] * xs[i].
  Var weighted_sum(std::span<const Var> xs, std::span<const double> weights);

  /// Views stay valid until the next op is recorded.
  std::span<const double> value(Var v) const;
  double scalar(Var v) const;
  Vector copy(Var v) const;

  /// Seeds d(root) = 1 for a scalar root and accumulates parameter gradients
  /// into `grads` (may be null). Adjoints of every node stay readable.
  void backward(Var root, Gradients* grads);
  std::span<const double> adjoint(Var v) const;

 private:
  enum class Op : std::uint8_t { Constant, Embedding, Mean, Add, Project, LayerNorm, Dot, InfoNce, WeightedSum };

  struct Node {
    Op op = Op::Constant;
    std::uint32_t offset = 0;  // into values_
    std::uint32_t dim = 0;
    std::uint32_t in_offset = 0;  // into inputs_
    std::uint32_t in_count = 0;
    std::uint32_t aux_offset = 0;  // into aux_
    TokenId token = 0;
    double tau = 0.0;
  };

  Var push(Op op, std::size_t dim, std::span<const Var> inputs);
  const Node& node(Var v) const;
  double* val(const Node& n) { return values_.data() + n.offset; }
  const double* val(const Node& n) const { return values_.data() + n.offset; }

  const EncoderParams& params_;
  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<double> adjoints_;
  std::vector<double> aux_;
  std::vector<std::uint32_t> inputs_;
};

}  // namespace mgcs::ad
