#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "mgcs/common/error.hpp"
#include "mgcs/encoder/encoder.hpp"
#include "mgcs/model/hmgr.hpp"
#include "mgcs/model/indexer.hpp"
#include "mgcs/model/trainer.hpp"

namespace {

using mgcs::EncoderParams;
using mgcs::Granularity;
using mgcs::Vector;
namespace test = mgcs::test;
namespace hmgr = mgcs::hmgr;

mgcs::FunctionAnalysis write_data_fixture() {
  const auto reg = mgcs::GrammarRegistry::builtin();
  const auto fns = mgcs::collect_functions(test::fixture_path("write_data"), reg);
  return mgcs::analyze_function(fns[0], reg.for_language("python"));
}

EncoderParams identity_w(std::size_t d, std::uint64_t seed) {
  auto p = EncoderParams::initialize(d, seed, 0.5);
  for (std::size_t i = 0; i < d; ++i) p.hmgr_W[i * d + i] = 1.0;
  return p;
}

// Function vector rebuilt from the definitions, with any snippet's vector
// optionally replaced, so score gradients can be taken by finite differences.
struct Rebuild {
  const mgcs::FunctionAnalysis& a;
  const EncoderParams& p;
  mgcs::TokenSeq seq;
  mgcs::EmbeddingMatrix emb;
  std::vector<hmgr::TokenRange> ranges;

  Rebuild(const mgcs::FunctionAnalysis& fa, const EncoderParams& params) : a(fa), p(params) {
    seq = mgcs::train::function_tokens(a, p.tokenizer(), mgcs::kMaxCodeTokens);
    emb = mgcs::encode_tokens(seq, p);
    ranges = hmgr::token_ranges(a.snippets, seq.offsets);
  }

  Vector mean_tokens(const std::vector<std::size_t>& toks) const {
    Vector m(p.d, 0.0);
    for (auto t : toks)
      for (std::size_t k = 0; k < p.d; ++k) m[k] += emb.row(t + 1)[k] / static_cast<double>(toks.size());
    return m;
  }

  Vector node(std::size_t n, const std::map<std::size_t, Vector>& over) const {
    if (auto it = over.find(n); it != over.end()) return it->second;
    std::vector<std::size_t> all, direct;
    for (std::size_t t = ranges[n].begin; t < ranges[n].end; ++t) all.push_back(t);
    if (a.snippets[n].granularity == Granularity::Statement) return mean_tokens(all);
    std::vector<Vector> kids;
    for (auto c : a.hierarchy.node(n).children) kids.push_back(node(c, over));
    for (auto t : all) {
      bool covered = false;
      for (auto c : a.hierarchy.node(n).children) covered |= ranges[c].begin <= t && t < ranges[c].end;
      if (!covered) direct.push_back(t);
    }
    return hmgr::aggregate_node(mean_tokens(direct.empty() ? all : direct), kids, p);
  }

  double score(const Vector& q, const std::map<std::size_t, Vector>& over) const {
    const auto f = node(a.hierarchy.root(), over);
    double s = 0.0;
    for (std::size_t k = 0; k < p.d; ++k) s += q[k] * f[k];
    return s;
  }
};

TEST(Attribution, ContributionsSumToOne) {
  const auto a = write_data_fixture();
  const auto p = identity_w(8, 3);
  const auto out = mgcs::offline::attribute_snippets("write the data to the file", a, p, hmgr::Mode::Hierarchical);
  ASSERT_EQ(out.size(), a.snippets.size() - 1);
  double total = 0.0;
  for (const auto& r : out) {
    EXPECT_NE(r.granularity, Granularity::Function);
    EXPECT_GE(r.contribution, 0.0);
    total += r.contribution;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Attribution, GradientNormsMatchFiniteDifferences) {
  const auto a = write_data_fixture();
  const auto p = identity_w(8, 5);
  const std::string query = "check if the file path exists";
  const auto out = mgcs::offline::attribute_snippets(query, a, p, hmgr::Mode::Hierarchical);
  const Rebuild rb(a, p);
  const Vector q = mgcs::encode_query(query, p);
  const double h = 1e-5;
  for (const auto& r : out) {
    const auto i = *a.hierarchy.find(r.snippet_id);
    const Vector v = rb.node(i, {});
    double sq = 0.0;
    for (std::size_t k = 0; k < p.d; ++k) {
      Vector plus = v, minus = v;
      plus[k] += h;
      minus[k] -= h;
      const double g = (rb.score(q, {{i, plus}}) - rb.score(q, {{i, minus}})) / (2 * h);
      sq += g * g;
    }
    const double fd = std::sqrt(sq);
    EXPECT_NEAR(r.gradient_norm, fd, 1e-3 * std::max(1.0, fd)) << r.snippet_id;
    double vn = 0.0;
    for (double x : v) vn += x * x;
    EXPECT_GT(r.gradient_norm, 0.0) << r.snippet_id;
    EXPECT_GT(std::sqrt(vn), 0.0);
  }
}

TEST(Attribution, SingleStatementTakesEverything) {
  const auto a = mgcs::analyze_function(test::python_function("def f(x):\n    return x + 1\n"),
                                        mgcs::GrammarRegistry::builtin().for_language("python"));
  const auto out =
      mgcs::offline::attribute_snippets("add one", a, identity_w(8, 1), hmgr::Mode::Hierarchical);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_DOUBLE_EQ(out[0].contribution, 1.0);
}

TEST(Attribution, ZeroProjectionFallsBackToUniform) {
  const auto a = write_data_fixture();
  const auto p = EncoderParams::initialize(8, 9, 0.5);  // W = 0: children cannot reach the function vector
  const auto out = mgcs::offline::attribute_snippets("write data", a, p, hmgr::Mode::Hierarchical);
  for (const auto& r : out) {
    EXPECT_EQ(r.gradient_norm, 0.0);
    EXPECT_DOUBLE_EQ(r.contribution, 1.0 / static_cast<double>(out.size()));
  }
}

TEST(Attribution, UnknownFunctionIsReported) {
  std::vector<mgcs::FunctionAnalysis> fns{write_data_fixture()};
  try {
    mgcs::offline::attribute_snippets("q", "nope.py:1:g", fns, identity_w(4, 1), hmgr::Mode::Hierarchical);
    FAIL();
  } catch (const mgcs::Error& e) {
    EXPECT_EQ(e.code(), mgcs::ErrorCode::FunctionMissing);
  }
}

}  // namespace
