#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "mgcs/common/error.hpp"
#include "mgcs/common/rng.hpp"
#include "mgcs/encoder/encoder.hpp"
#include "mgcs/encoder/ops.hpp"
#include "mgcs/model/hmgr.hpp"
#include "mgcs/model/synthetic.hpp"
#include "mgcs/model/trainer.hpp"
#include "naive_hmgr.hpp"

namespace {

using mgcs::EncoderParams;
using mgcs::Granularity;
using mgcs::Vector;
namespace hmgr = mgcs::hmgr;

EncoderParams random_params(std::size_t d, mgcs::Rng& rng, bool zero_w = false) {
  auto p = EncoderParams::initialize(d, rng.next(), 0.5, 64);
  if (!zero_w)
    for (auto& w : p.hmgr_W) w = rng.uniform(-0.5, 0.5);
  for (auto& g : p.layernorm_gain) g = rng.uniform(0.5, 1.5);
  for (auto& b : p.layernorm_bias) b = rng.uniform(-0.2, 0.2);
  return p;
}

mgcs::EmbeddingMatrix embed(const mgcs::SyntheticFunction& f, const EncoderParams& p) {
  mgcs::TokenSeq seq;
  seq.tokens = f.tokens;
  seq.offsets = f.offsets;
  return mgcs::encode_tokens(seq, p);
}

using Naive = mgcs::testing::NaiveHmgr;

TEST(Hmgr, MatchesNaiveRecursionOnRandomHierarchies) {
  mgcs::Rng rng(2024);
  mgcs::RandomTreeOptions opts;
  opts.max_depth = 4;
  opts.max_nodes = 20;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = mgcs::random_function(rng, opts, "t" + std::to_string(trial));
    ASSERT_LE(f.snippets.size(), 20u);
    const auto p = random_params(6, rng);
    const auto emb = embed(f, p);
    const Naive naive{f, p};
    for (std::size_t i = 0; i < f.snippets.size(); ++i) {
      const auto want = naive.rep(i);
      ASSERT_TRUE(want.has_value());
      const auto got = hmgr::represent_snippet(i, f.snippets, f.hierarchy, emb, f.offsets, p, hmgr::Mode::Hierarchical);
      for (std::size_t k = 0; k < p.d; ++k) worst = std::max(worst, std::abs(got.vector[k] - (*want)[k]));
    }
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(Hmgr, RepresentFunctionAgreesWithPerSnippetCalls) {
  mgcs::Rng rng(5);
  const auto f = mgcs::random_function(rng, {}, "x");
  const auto p = random_params(4, rng);
  const auto emb = embed(f, p);
  const auto all = hmgr::represent_function(f.snippets, f.hierarchy, emb, f.offsets, p, hmgr::Mode::Hierarchical);
  for (std::size_t i = 0; i < f.snippets.size(); ++i) {
    const auto one = hmgr::represent_snippet(i, f.snippets, f.hierarchy, emb, f.offsets, p, hmgr::Mode::Hierarchical);
    ASSERT_TRUE(all[i]);
    EXPECT_EQ(all[i]->vector, one.vector);
    EXPECT_EQ(all[i]->snippet_id, f.snippets[i].snippet_id);
  }
}

TEST(Hmgr, ZeroWLeavesLayerNormOfDirectTokens) {
  mgcs::Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = mgcs::random_function(rng, {}, "w0");
    const auto p = random_params(5, rng, /*zero_w=*/true);
    const auto emb = embed(f, p);
    const auto ranges = hmgr::token_ranges(f.snippets, f.offsets);
    for (std::size_t n = 0; n < f.snippets.size(); ++n) {
      if (f.snippets[n].granularity == Granularity::Statement) continue;
      std::vector<std::span<const double>> rows;
      for (std::size_t t = ranges[n].begin; t < ranges[n].end; ++t) {
        bool inside = false;
        for (std::size_t c : f.hierarchy.node(n).children) inside |= t >= ranges[c].begin && t < ranges[c].end;
        if (!inside) rows.push_back(emb.row(t + 1));
      }
      if (rows.empty())
        for (std::size_t t = ranges[n].begin; t < ranges[n].end; ++t) rows.push_back(emb.row(t + 1));
      Vector pooled(p.d), want(p.d);
      mgcs::ops::mean_rows(rows, pooled);
      mgcs::ops::layer_norm(pooled, p.layernorm_gain, p.layernorm_bias, mgcs::kLayerNormEps, want);
      const auto got = hmgr::represent_snippet(n, f.snippets, f.hierarchy, emb, f.offsets, p, hmgr::Mode::Hierarchical);
      EXPECT_EQ(got.vector, want);
    }
  }
}

TEST(Hmgr, StatementPoolingExamples) {
  auto p = EncoderParams::initialize(2, 1, 0.05, 8);
  p.embedding(1)[0] = 0, p.embedding(1)[1] = 2;
  p.embedding(2)[0] = 2, p.embedding(2)[1] = 0;
  mgcs::TokenSeq seq;
  seq.tokens = {1, 2};
  seq.offsets = {{0, 1}, {2, 3}};
  const auto emb = mgcs::encode_tokens(seq, p);
  EXPECT_EQ(hmgr::pool_statement(emb, {0, 3}, seq.offsets), (Vector{1, 1}));
  EXPECT_EQ(hmgr::pool_statement(emb, {2, 3}, seq.offsets), (Vector{2, 0}));
  EXPECT_THROW(hmgr::pool_statement(emb, {4, 9}, seq.offsets), mgcs::Error);
}

TEST(Hmgr, AggregateExamples) {
  auto p = EncoderParams::initialize(2, 1, 0.05, 8);
  const Vector root{3, 1};
  const auto out = hmgr::aggregate_node(root, {}, p);
  EXPECT_NEAR(out[0], 1.0, 1e-5);
  EXPECT_NEAR(out[1], -1.0, 1e-5);

  p.hmgr_W = {0.3, -1.0, 2.0, 0.5};
  const std::vector<Vector> none;
  EXPECT_EQ(hmgr::aggregate_node(root, none, p), out);
  const std::vector<Vector> kids{{1, 0}, {0, 1}};
  // W . mean = W . [0.5, 0.5] = [-0.35, 1.25]
  Vector want(2);
  const Vector pre{3 - 0.35, 1 + 1.25};
  mgcs::ops::layer_norm(pre, p.layernorm_gain, p.layernorm_bias, mgcs::kLayerNormEps, want);
  const auto got = hmgr::aggregate_node(root, kids, p);
  EXPECT_NEAR(got[0], want[0], 1e-12);
  EXPECT_NEAR(got[1], want[1], 1e-12);
}

// function [0,6) holds exactly one statement [0,6): no direct tokens, so the
// root falls back to the whole span and equals the statement vector.
TEST(Hmgr, SingleStatementFunction) {
  mgcs::Rng rng(3);
  auto p = random_params(3, rng);
  std::vector<mgcs::Snippet> snippets(2);
  snippets[0] = {"f::F0", "f", Granularity::Function, {0, 6}, {1, 1}, std::nullopt};
  snippets[1] = {"f::S0", "f", Granularity::Statement, {0, 6}, {1, 1}, "f::F0"};
  const auto h = mgcs::HierarchyIndex::build(snippets);
  mgcs::TokenSeq seq;
  seq.tokens = {4, 9, 11};
  seq.offsets = {{0, 1}, {2, 3}, {4, 5}};
  const auto emb = mgcs::encode_tokens(seq, p);
  const auto stmt = hmgr::represent_snippet(1, snippets, h, emb, seq.offsets, p, hmgr::Mode::Hierarchical).vector;
  const auto fn = hmgr::represent_snippet(0, snippets, h, emb, seq.offsets, p, hmgr::Mode::Hierarchical).vector;
  Vector proj(3), pre(3), want(3);
  mgcs::ops::matvec(p.hmgr_W, stmt, proj);
  for (int k = 0; k < 3; ++k) pre[k] = stmt[k] + proj[k];
  mgcs::ops::layer_norm(pre, p.layernorm_gain, p.layernorm_bias, mgcs::kLayerNormEps, want);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(fn[k], want[k], 1e-12);
}

TEST(Hmgr, MeanPoolModeChangesBlocksButNotStatements) {
  mgcs::Rng rng(17);
  mgcs::RandomTreeOptions opts;
  opts.force_nested_blocks = true;
  const auto f = mgcs::random_function(rng, opts, "m");
  const auto p = random_params(4, rng);
  const auto emb = embed(f, p);
  const auto h = hmgr::represent_function(f.snippets, f.hierarchy, emb, f.offsets, p, hmgr::Mode::Hierarchical);
  const auto m = hmgr::represent_function(f.snippets, f.hierarchy, emb, f.offsets, p, hmgr::Mode::MeanPool);
  const auto ranges = hmgr::token_ranges(f.snippets, f.offsets);
  for (std::size_t i = 0; i < f.snippets.size(); ++i) {
    if (f.snippets[i].granularity == Granularity::Statement) {
      EXPECT_EQ(h[i]->vector, m[i]->vector);
    } else {
      EXPECT_NE(h[i]->vector, m[i]->vector);
      std::vector<std::span<const double>> rows;
      for (std::size_t t = ranges[i].begin; t < ranges[i].end; ++t) rows.push_back(emb.row(t + 1));
      Vector mean(p.d);
      mgcs::ops::mean_rows(rows, mean);
      EXPECT_EQ(m[i]->vector, mean);
    }
  }
}

TEST(Hmgr, WithBlockAggregatesItsWriteStatement) {
  const auto reg = mgcs::GrammarRegistry::builtin();
  auto fns = mgcs::collect_functions(mgcs::test::fixture_path("write_data"), reg);
  ASSERT_EQ(fns.size(), 1u);
  const auto a = mgcs::analyze_function(fns[0], reg.for_language("python"));
  mgcs::Rng rng(1);
  auto p = EncoderParams::initialize(8, 4);
  for (auto& w : p.hmgr_W) w = rng.uniform(-0.3, 0.3);
  const auto seq = mgcs::train::function_tokens(a, p.tokenizer(), mgcs::kMaxCodeTokens);
  const auto emb = mgcs::encode_tokens(seq, p);
  const auto with_idx = *a.hierarchy.find(mgcs::test::snippet_by_id(a, "::B2").snippet_id);
  const auto& node = a.hierarchy.node(with_idx);
  ASSERT_EQ(node.children.size(), 1u);
  EXPECT_EQ(mgcs::test::text_of(a, a.snippets[node.children[0]]), "f.write(data)");

  const auto stmt = hmgr::pool_statement(emb, a.snippets[node.children[0]].bytes, seq.offsets);
  const auto ranges = hmgr::token_ranges(a.snippets, seq.offsets);
  std::vector<std::span<const double>> direct;
  for (std::size_t t = ranges[with_idx].begin; t < ranges[with_idx].end; ++t)
    if (t < ranges[node.children[0]].begin || t >= ranges[node.children[0]].end) direct.push_back(emb.row(t + 1));
  Vector root(p.d);
  mgcs::ops::mean_rows(direct, root);
  const std::vector<Vector> kids{stmt};
  const auto got = hmgr::represent_snippet(with_idx, a.snippets, a.hierarchy, emb, seq.offsets, p,
                                           hmgr::Mode::Hierarchical);
  const auto want = hmgr::aggregate_node(root, kids, p);
  for (std::size_t k = 0; k < p.d; ++k) EXPECT_NEAR(got.vector[k], want[k], 1e-12);
}

TEST(Hmgr, StatementTruncatedAwayIsEmpty) {
  std::string src = "def f(x):\n    y = [";
  for (int i = 0; i < 200; ++i) src += "x" + std::to_string(i) + ", ";
  src += "x]\n    return 0\n";
  const auto reg = mgcs::GrammarRegistry::builtin();
  const auto a = mgcs::analyze_function(mgcs::test::python_function(src), reg.for_language("python"));
  const auto p = EncoderParams::initialize(4, 1);
  const auto seq = mgcs::train::function_tokens(a, p.tokenizer(), mgcs::kMaxCodeTokens);
  ASSERT_EQ(seq.size(), mgcs::kMaxCodeTokens);
  const auto& ret = mgcs::test::snippet_by_id(a, "::S1");
  ASSERT_EQ(mgcs::test::text_of(a, ret), "return 0");
  EXPECT_GE(ret.bytes.start, seq.offsets.back().end);

  const auto emb = mgcs::encode_tokens(seq, p);
  const auto idx = *a.hierarchy.find(ret.snippet_id);
  try {
    hmgr::represent_snippet(idx, a.snippets, a.hierarchy, emb, seq.offsets, p, hmgr::Mode::Hierarchical);
    FAIL() << "expected EmptyStatement";
  } catch (const mgcs::Error& e) {
    EXPECT_EQ(e.code(), mgcs::ErrorCode::EmptyStatement);
  }
  const auto all = hmgr::represent_function(a.snippets, a.hierarchy, emb, seq.offsets, p, hmgr::Mode::Hierarchical);
  EXPECT_FALSE(all[idx].has_value());
  EXPECT_TRUE(all[0].has_value());
}

}  // namespace
