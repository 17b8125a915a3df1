#include <filesystem>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "mgcs/common/error.hpp"
#include "mgcs/common/rng.hpp"
#include "mgcs/model/indexer.hpp"
#include "mgcs/search/index.hpp"

namespace {

using mgcs::EncoderParams;
using mgcs::Granularity;
using namespace mgcs::search;
namespace test = mgcs::test;

mgcs::ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const mgcs::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no mgcs::Error thrown";
  return mgcs::ErrorCode::FormatError;
}

EntryInfo info(std::string id, Granularity g) {
  EntryInfo e;
  e.snippet_id = std::move(id);
  e.function_id = "f";
  e.granularity = g;
  return e;
}

// Index from the ranking oracle: three blocks in two dimensions.
struct Ranking : ::testing::Test {
  EncoderParams params = EncoderParams::initialize(2, 1);
  CorpusIndex index{2, mgcs::fingerprint(params)};

  void SetUp() override {
    for (const auto& [id, v] : test::oracles()["ranking_input"]["entries"].items())
      index.add(info(id, Granularity::Block), v.get<std::vector<double>>());
  }
};

TEST_F(Ranking, RanksMatchOracle) {
  const Searcher s(index, params);
  std::vector<std::size_t> ranks;
  for (const auto& q : test::oracles()["ranking_input"]["queries"])
    ranks.push_back(s.rank_of(q["q"].get<std::vector<double>>(), *index.find(q["gold"].get<std::string>())));
  EXPECT_EQ(ranks, test::oracles()["ranking"]["ranks"].get<std::vector<std::size_t>>());
  EXPECT_NEAR(mrr(ranks), test::oracles()["ranking"]["mrr"].get<double>(), 1e-12);
}

TEST_F(Ranking, TopKOrderingAndTies) {
  const Searcher s(index, params);
  const std::vector<double> all_tie{1.0, 1.0};
  const auto hits = s.search_vector(all_tie, 10);
  ASSERT_EQ(hits.size(), 3u);  // k clamps to the index size
  EXPECT_EQ(hits[0].snippet_id, "e0");
  EXPECT_EQ(hits[1].snippet_id, "e1");
  EXPECT_EQ(hits[2].snippet_id, "e2");
  const std::vector<double> q{0.2, 0.9};
  const auto top = s.search_vector(q, 2);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0].snippet_id, "e1");
  EXPECT_DOUBLE_EQ(top[0].score, 0.9);
  EXPECT_EQ(top[1].snippet_id, "e2");
  EXPECT_EQ(code_of([&] { s.search_vector(q, 0); }), mgcs::ErrorCode::ConfigError);
}

TEST_F(Ranking, GranularityFilter) {
  index.add(info("s0", Granularity::Statement), std::vector<double>{9.0, 9.0});
  const Searcher s(index, params);
  const std::vector<double> q{1.0, 0.0};
  EXPECT_EQ(s.search_vector(q, 1)[0].snippet_id, "s0");
  EXPECT_EQ(s.search_vector(q, 1, Granularity::Block)[0].snippet_id, "e0");
  EXPECT_TRUE(s.search_vector(q, 5, Granularity::Function).empty());
  // The statement does not push blocks down in their own ranking.
  EXPECT_EQ(s.rank_of(q, *index.find("e0")), 1u);
}

TEST_F(Ranking, MismatchedCheckpointIsRejected) {
  const auto other = EncoderParams::initialize(2, 2);
  EXPECT_EQ(code_of([&] { Searcher s(index, other); }), mgcs::ErrorCode::CheckpointMismatch);
}

TEST_F(Ranking, AddChecksShapeAndIds) {
  EXPECT_EQ(code_of([&] { index.add(info("x", Granularity::Block), std::vector<double>{1.0}); }),
            mgcs::ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([&] { index.add(info("e0", Granularity::Block), std::vector<double>{1.0, 2.0}); }),
            mgcs::ErrorCode::FormatError);
}

TEST(Mrr, ValuesAndErrors) {
  const std::vector<std::size_t> ranks{1, 2, 4};
  EXPECT_NEAR(mrr(ranks), (1.0 + 0.5 + 0.25) / 3.0, 1e-15);
  EXPECT_EQ(code_of([] { mrr(std::vector<std::size_t>{}); }), mgcs::ErrorCode::EmptyCandidates);
  EXPECT_EQ(code_of([] { mrr(std::vector<std::size_t>{1, 0}); }), mgcs::ErrorCode::FormatError);
  EXPECT_NEAR(random_mrr(100), test::oracles()["random_mrr_100"].get<double>(), 1e-12);
  EXPECT_DOUBLE_EQ(random_mrr(1), 1.0);
}

TEST(Mrr, BoundedAndMonotone) {
  mgcs::Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> ranks(1 + rng.below(10));
    for (auto& r : ranks) r = 1 + rng.below(50);
    const double before = mrr(ranks);
    EXPECT_GT(before, 0.0);
    EXPECT_LE(before, 1.0);
    auto& r = ranks[rng.below(ranks.size())];
    if (r > 1) --r;
    EXPECT_GE(mrr(ranks), before);
  }
  EXPECT_EQ(mrr(std::vector<std::size_t>(4, 1)), 1.0);
}

struct Built : ::testing::Test {
  mgcs::FunctionAnalysis fn = mgcs::analyze_function(
      test::python_function("def f(x):\n    for i in x:\n        print(i)\n    return x\n", "m.py:1:f"),
      mgcs::GrammarRegistry::builtin().for_language("python"));
  EncoderParams params = EncoderParams::initialize(16, 7);
};

TEST_F(Built, OneEntryPerSnippet) {
  std::vector<mgcs::FunctionAnalysis> fns{fn};
  mgcs::offline::BuildStats stats;
  const auto idx = mgcs::offline::build_index(fns, params, mgcs::hmgr::Mode::Hierarchical, 1, &stats);
  ASSERT_EQ(idx.size(), 4u);
  EXPECT_EQ(stats.entries, 4u);
  EXPECT_EQ(idx.entry(0).granularity, Granularity::Function);
  EXPECT_EQ(idx.entry(1).granularity, Granularity::Block);
  EXPECT_EQ(idx.entry(2).granularity, Granularity::Statement);
  EXPECT_EQ(idx.entry(3).granularity, Granularity::Statement);
  EXPECT_EQ(idx.fingerprint(), mgcs::fingerprint(params));

  const auto again = mgcs::offline::build_index(fns, params, mgcs::hmgr::Mode::Hierarchical, 4);
  EXPECT_EQ(again.serialize(), idx.serialize());
}

TEST_F(Built, MeanPoolRebuildOnlyMovesBlocksAndFunctions) {
  std::vector<mgcs::FunctionAnalysis> fns{fn};
  for (auto& w : params.hmgr_W) w = 0.1;
  const auto h = mgcs::offline::build_index(fns, params, mgcs::hmgr::Mode::Hierarchical);
  const auto m = mgcs::offline::build_index(fns, params, mgcs::hmgr::Mode::MeanPool);
  ASSERT_EQ(h.size(), m.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const std::vector<double> a(h.vector(i).begin(), h.vector(i).end()), b(m.vector(i).begin(), m.vector(i).end());
    if (h.entry(i).granularity == Granularity::Statement)
      EXPECT_EQ(a, b) << h.entry(i).snippet_id;
    else
      EXPECT_NE(a, b) << h.entry(i).snippet_id;
  }
}

TEST_F(Built, SerializeRoundTrip) {
  std::vector<mgcs::FunctionAnalysis> fns{fn};
  const auto idx = mgcs::offline::build_index(fns, params, mgcs::hmgr::Mode::Hierarchical);
  const auto bytes = idx.serialize();
  EXPECT_EQ(bytes.substr(0, 8), "MGCSIDX1");
  const auto back = CorpusIndex::deserialize(bytes);
  EXPECT_EQ(back, idx);
  EXPECT_EQ(code_of([&] { CorpusIndex::deserialize(bytes.substr(0, bytes.size() - 3)); }),
            mgcs::ErrorCode::FormatError);

  const auto path = std::filesystem::temp_directory_path() / "mgcs_search_test.idx";
  idx.save(path);
  EXPECT_EQ(CorpusIndex::load(path), idx);
  std::filesystem::remove(path);
}

TEST_F(Built, SearchFindsTheLoopForItsOwnWords) {
  std::vector<mgcs::FunctionAnalysis> fns{fn};
  const auto idx = mgcs::offline::build_index(fns, params, mgcs::hmgr::Mode::Hierarchical);
  const Searcher s(idx, params);
  const auto hits = s.search("print i", 1, Granularity::Statement);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].snippet_id, "m.py:1:f::S0");
  const auto q = s.encode("print i");
  EXPECT_EQ(q.size(), 16u);
}

TEST_F(Built, EvaluateAndEvalsetIo) {
  std::vector<mgcs::FunctionAnalysis> fns{fn};
  const auto idx = mgcs::offline::build_index(fns, params, mgcs::hmgr::Mode::Hierarchical);
  const Searcher s(idx, params);
  std::vector<EvalItem> items{{"print i", "m.py:1:f::S0", Granularity::Statement},
                              {"loop over x", "m.py:1:f::B0", Granularity::Block},
                              {"the function", "m.py:1:f::F0", Granularity::Function}};
  const auto report = evaluate_mrr(items, s);
  EXPECT_EQ(report.n, 3u);
  EXPECT_EQ(report.ranks[0], 1u);
  EXPECT_EQ(report.ranks[1], 1u);  // only block in the index
  EXPECT_DOUBLE_EQ(report.per_granularity[1], 1.0);
  EXPECT_EQ(report.count[2], 1u);

  const auto path = std::filesystem::temp_directory_path() / "mgcs_evalset.jsonl";
  write_evalset(path, items);
  const auto back = read_evalset(path);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[1].gold_snippet_id, "m.py:1:f::B0");
  EXPECT_EQ(back[1].granularity, Granularity::Block);
  std::filesystem::remove(path);

  items.push_back({"gone", "m.py:1:f::S9", Granularity::Statement});
  EXPECT_EQ(code_of([&] { evaluate_mrr(items, s); }), mgcs::ErrorCode::GoldMissing);
  CorpusIndex empty(16, mgcs::fingerprint(params));
  const Searcher es(empty, params);
  EXPECT_EQ(code_of([&] { es.search("x", 1); }), mgcs::ErrorCode::EmptyIndex);
}

TEST(MakeEvalset, GoldIsInnermostCandidate) {
  const auto reg = mgcs::GrammarRegistry::builtin();
  const auto fns = mgcs::collect_functions(test::fixture_path("write_data"), reg);
  const auto records = mgcs::extract_corpus(fns, reg, {}).records;
  const auto items = mgcs::offline::make_evalset(records);
  ASSERT_EQ(items.size(), records.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    EXPECT_EQ(items[i].gold_snippet_id, records[i].candidate_spans.front().snippet_id);
    EXPECT_EQ(items[i].query_text, records[i].comment_text);
  }
}

}  // namespace
