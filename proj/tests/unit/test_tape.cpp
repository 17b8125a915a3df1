#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "mgcs/autodiff/tape.hpp"
#include "mgcs/common/rng.hpp"
#include "mgcs/encoder/ops.hpp"

namespace {

using mgcs::EncoderParams;
using mgcs::ad::Tape;
using mgcs::ad::Var;

EncoderParams random_params(std::size_t d, std::uint64_t seed) {
  auto p = EncoderParams::initialize(d, seed, 0.5, 16);
  mgcs::Rng rng(seed + 1);
  for (auto& w : p.hmgr_W) w = rng.uniform(-0.5, 0.5);
  for (auto& g : p.layernorm_gain) g = rng.uniform(0.5, 1.5);
  for (auto& b : p.layernorm_bias) b = rng.uniform(-0.2, 0.2);
  return p;
}

// Scalar function of the parameters built with every tape op.
Var build(Tape& t) {
  const Var e1 = t.embedding(1), e2 = t.embedding(2), e3 = t.embedding(3);
  const Var xs[] = {e1, e2};
  const Var m = t.mean(xs);
  const Var node = t.layer_norm(t.add(e3, t.project(m)));
  const Var q = t.embedding(4);
  const Var pos = t.dot(q, node);
  const Var n1 = t.dot(q, e1), n2 = t.dot(q, m);
  const Var negs[] = {n1, n2};
  const Var l1 = t.info_nce(pos, negs, 0.3);
  const Var parts[] = {l1, pos};
  const double w[] = {1.0, 0.25};
  return t.weighted_sum(parts, w);
}

double eval(const EncoderParams& p) {
  Tape t(p);
  return t.scalar(build(t));
}

double fd(EncoderParams& p, double& slot) {
  const double h = 1e-5, keep = slot;
  slot = keep + h;
  const double up = eval(p);
  slot = keep - h;
  const double down = eval(p);
  slot = keep;
  return (up - down) / (2 * h);
}

TEST(Tape, GradientsMatchFiniteDifferences) {
  auto p = random_params(5, 3);
  Tape t(p);
  const Var root = build(t);
  mgcs::ad::Gradients g(p.d);
  t.backward(root, &g);

  for (mgcs::TokenId tok : {1u, 2u, 3u, 4u}) {
    ASSERT_TRUE(g.embedding_rows.contains(tok));
    for (std::size_t k = 0; k < p.d; ++k)
      EXPECT_NEAR(g.embedding_rows[tok][k], fd(p, p.embedding(tok)[k]), 1e-7) << "token " << tok;
  }
  EXPECT_FALSE(g.embedding_rows.contains(5));
  for (std::size_t i = 0; i < p.hmgr_W.size(); ++i) EXPECT_NEAR(g.hmgr_W[i], fd(p, p.hmgr_W[i]), 1e-7);
  for (std::size_t i = 0; i < p.d; ++i) {
    EXPECT_NEAR(g.layernorm_gain[i], fd(p, p.layernorm_gain[i]), 1e-7);
    EXPECT_NEAR(g.layernorm_bias[i], fd(p, p.layernorm_bias[i]), 1e-7);
  }
}

TEST(Tape, ForwardValuesMatchPlainOps) {
  const auto p = random_params(4, 8);
  Tape t(p);
  const Var a = t.embedding(6), b = t.embedding(7);
  const Var s = t.add(a, t.project(b));
  const Var ln = t.layer_norm(s);

  std::vector<double> proj(4), sum(4), out(4);
  mgcs::ops::matvec(p.hmgr_W, p.embedding(7), proj);
  for (int k = 0; k < 4; ++k) sum[k] = p.embedding(6)[k] + proj[k];
  mgcs::ops::layer_norm(sum, p.layernorm_gain, p.layernorm_bias, mgcs::kLayerNormEps, out);
  const auto v = t.value(ln);
  for (int k = 0; k < 4; ++k) EXPECT_EQ(v[k], out[k]);
}

TEST(Tape, ConstantsCopyAliasedInput) {
  const auto p = random_params(3, 1);
  Tape t(p);
  const Var e = t.embedding(2);
  Var c = t.constant(t.value(e));
  for (int i = 0; i < 50; ++i) c = t.constant(t.value(c));
  const auto v = t.value(c);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(v[k], p.embedding(2)[k]);
}

TEST(Tape, ConstantsReceiveNoParameterGradient) {
  const auto p = random_params(3, 2);
  Tape t(p);
  const std::vector<double> cv{1, 2, 3};
  const Var c = t.constant(cv);
  const Var root = t.dot(c, t.embedding(1));
  mgcs::ad::Gradients g(3);
  t.backward(root, &g);
  ASSERT_EQ(g.embedding_rows.size(), 1u);
  EXPECT_EQ(g.embedding_rows[1], cv);
  const auto adj = t.adjoint(c);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(adj[k], p.embedding(1)[k]);
}

TEST(Tape, SharedSubexpressionAccumulates) {
  const auto p = random_params(2, 4);
  Tape t(p);
  const Var e = t.embedding(3);
  const Var root = t.dot(e, e);
  mgcs::ad::Gradients g(2);
  t.backward(root, &g);
  for (int k = 0; k < 2; ++k) EXPECT_DOUBLE_EQ(g.embedding_rows[3][k], 2 * p.embedding(3)[k]);
}

}  // namespace
