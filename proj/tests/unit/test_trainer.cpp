#include <algorithm>
#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "mgcs/common/error.hpp"
#include "mgcs/model/indexer.hpp"
#include "mgcs/model/synthetic.hpp"
#include "mgcs/model/trainer.hpp"
#include "planted.hpp"

namespace {

using namespace mgcs::train;
using mgcs::Granularity;
using mgcs::Vector;
namespace test = mgcs::test;

std::vector<double> to_vec(const nlohmann::json& j) { return j.get<std::vector<double>>(); }

TEST(Loss, CombineWeights) {
  TrainConfig cfg;
  EXPECT_DOUBLE_EQ(combine_losses(1.0, 0.5, 0.5, cfg), 1.0 + 0.5 + 0.6 * 0.5);
  cfg.alpha = 2.0;
  cfg.beta = 0.0;
  EXPECT_DOUBLE_EQ(combine_losses(1.0, 0.5, 9.0, cfg), 2.0);
}

TEST(Loss, MaxSimPicksBestAndSmallestIndexOnTies) {
  const Vector q{1.0, 0.0};
  const std::vector<Vector> c{{0.2, 5.0}, {0.9, 0.0}, {0.4, 0.0}};
  const auto r = maxsim(q, c);
  EXPECT_EQ(r.index, 1u);
  EXPECT_DOUBLE_EQ(r.score, 0.9);
  const std::vector<Vector> tie{{0.5, 1.0}, {0.5, -1.0}};
  EXPECT_EQ(maxsim(q, tie).index, 0u);
  EXPECT_THROW(maxsim(q, std::vector<Vector>{}), mgcs::Error);
  EXPECT_THROW(score(q, Vector{1.0}), mgcs::Error);
}

TEST(Loss, InfoNceValues) {
  const std::vector<double> negs{0.0, 0.0};
  EXPECT_NEAR(infonce(1.0, negs, 1.0), test::oracles()["infonce_pos1_negs00_tau1"].get<double>(), 1e-12);
  EXPECT_NEAR(infonce(2.0, {}, 0.5), 0.0, 1e-15);
  EXPECT_THROW(infonce(1.0, negs, 0.0), mgcs::Error);
}

std::vector<TrainingExample> oracle_batch() {
  std::vector<TrainingExample> out;
  for (const auto& e : test::oracles()["block_batch_input"]["examples"]) {
    TrainingExample ex;
    ex.granularity = Granularity::Block;
    ex.query = to_vec(e["query"]);
    for (const auto& c : e["candidates"]) ex.candidates.push_back(to_vec(c));
    ex.candidate_ids = e["ids"].get<std::vector<std::string>>();
    for (const auto& n : e["in_function"]) ex.in_function_negatives.push_back(to_vec(n));
    out.push_back(std::move(ex));
  }
  return out;
}

TEST(Loss, BlockBatchMatchesOracle) {
  TrainConfig cfg;
  cfg.tau = 0.1;
  cfg.alpha = 1.0;
  const auto batch = oracle_batch();
  const auto v = batch_loss(batch, cfg);
  const auto& o = test::oracles()["block_batch"];
  EXPECT_NEAR(v.L_b, o["L_b"].get<double>(), 1e-12);
  EXPECT_NEAR(v.total, o["total"].get<double>(), 1e-12);
  EXPECT_EQ(v.L_f, 0.0);
  EXPECT_EQ(v.count[1], 2u);

  cfg.flags.disable_maxsim = true;
  const auto nm = batch_loss(batch, cfg);
  EXPECT_NEAR(nm.L_b, test::oracles()["block_batch_no_maxsim"]["L_b"].get<double>(), 1e-12);
}

TEST(Loss, TapeBatchAgreesWithPlainBatch) {
  TrainConfig cfg;
  cfg.tau = 0.1;
  const auto batch = oracle_batch();
  mgcs::EncoderParams params = mgcs::EncoderParams::initialize(3, 1);
  for (bool no_maxsim : {false, true}) {
    cfg.flags.disable_maxsim = no_maxsim;
    mgcs::ad::Tape tape(params);
    std::vector<ExampleVars> vars;
    for (const auto& ex : batch) {
      ExampleVars v;
      v.granularity = ex.granularity;
      v.query = tape.constant(ex.query);
      for (const auto& c : ex.candidates) v.candidates.push_back(tape.constant(c));
      for (const auto& id : ex.candidate_ids) v.candidate_ids.push_back(id);
      for (const auto& n : ex.in_function_negatives) v.in_function_negatives.push_back(tape.constant(n));
      vars.push_back(std::move(v));
    }
    const auto t = batch_loss(tape, vars, cfg);
    const auto& key = no_maxsim ? "block_batch_no_maxsim" : "block_batch";
    EXPECT_EQ(t.positive, test::oracles()[key]["positives"].get<std::vector<std::size_t>>());
    EXPECT_NEAR(t.values.total, batch_loss(batch, cfg).total, 1e-14);
  }
}

TEST(Loss, OwnCandidatesAreNotNegatives) {
  // Two examples sharing a candidate id: neither sees it as a negative.
  TrainConfig cfg;
  cfg.tau = 1.0;
  std::vector<TrainingExample> b(2);
  for (auto& ex : b) {
    ex.granularity = Granularity::Statement;
    ex.query = {1.0, 0.0};
    ex.candidates = {{0.3, 0.1}};
    ex.candidate_ids = {"f::S0"};
  }
  EXPECT_NEAR(batch_loss(b, cfg).L_s, 0.0, 1e-15);
  b[1].candidate_ids = {"g::S0"};
  EXPECT_NEAR(batch_loss(b, cfg).L_s, std::log(2.0), 1e-12);
}

TEST(Loss, FunctionOnlyBatchTotalIsFunctionLoss) {
  TrainConfig cfg;
  std::vector<TrainingExample> b(3);
  for (std::size_t i = 0; i < b.size(); ++i) {
    b[i].granularity = Granularity::Function;
    b[i].query = {0.1 * i, 0.2, -0.1};
    b[i].candidates = {{0.3, -0.2 * i, 0.1}};
  }
  const auto v = batch_loss(b, cfg);
  EXPECT_GT(v.L_f, 0.0);
  EXPECT_EQ(v.L_b, 0.0);
  EXPECT_EQ(v.L_s, 0.0);
  EXPECT_DOUBLE_EQ(v.total, v.L_f);
  EXPECT_THROW(batch_loss(std::span<const TrainingExample>{}, cfg), mgcs::Error);
}

TEST(Loss, DisabledGranularitiesContributeNothing) {
  TrainConfig cfg;
  cfg.flags.disable_block_loss = true;
  cfg.flags.disable_statement_loss = true;
  auto b = oracle_batch();
  b[1].granularity = Granularity::Statement;
  EXPECT_THROW(batch_loss(b, cfg), mgcs::Error);  // nothing left to train on
  TrainingExample f;
  f.granularity = Granularity::Function;
  f.query = {0.1, 0.2, 0.3};
  f.candidates = {{0.3, 0.2, 0.1}};
  b.push_back(f);
  const auto v = batch_loss(b, cfg);
  EXPECT_EQ(v.L_b, 0.0);
  EXPECT_EQ(v.L_s, 0.0);
  EXPECT_EQ(v.total, v.L_f);
  EXPECT_FALSE(cfg.enabled(Granularity::Block));
  EXPECT_TRUE(cfg.enabled(Granularity::Function));
}

TEST(Negatives, ExcludesAnchorAndNestedSnippets) {
  const auto reg = mgcs::GrammarRegistry::builtin();
  const auto fns = mgcs::collect_functions(test::fixture_path("write_data"), reg);
  const auto a = mgcs::analyze_function(fns[0], reg.for_language("python"));
  const auto b1 = *a.hierarchy.find(fns[0].id + "::B1");
  mgcs::Rng rng(1);
  const auto negs = select_in_function_negatives(b1, a.snippets, a.hierarchy, 3, rng);
  // Blocks are B0 (outer if), B1 (head), B2 (with in head), B3 (with in else): only B3 is disjoint.
  ASSERT_EQ(negs.size(), 1u);
  EXPECT_EQ(a.snippets[negs[0]].snippet_id, fns[0].id + "::B3");
  EXPECT_TRUE(select_in_function_negatives(0, a.snippets, a.hierarchy, 3, rng).empty());

  const auto s0 = *a.hierarchy.find(fns[0].id + "::S0");
  std::vector<char> eligible(a.snippets.size(), 1);
  eligible[*a.hierarchy.find(fns[0].id + "::S1")] = 0;
  for (auto n : select_in_function_negatives(s0, a.snippets, a.hierarchy, 10, rng, eligible)) {
    EXPECT_EQ(a.snippets[n].granularity, Granularity::Statement);
    EXPECT_NE(a.snippets[n].snippet_id, fns[0].id + "::S1");
    EXPECT_NE(n, s0);
  }
}

TEST(Negatives, PropertyOverRandomTrees) {
  mgcs::Rng rng(77);
  mgcs::RandomTreeOptions opts;
  opts.max_nodes = 24;
  for (int trial = 0; trial < 500; ++trial) {
    const auto f = mgcs::random_function(rng, opts, "p" + std::to_string(trial));
    const auto anchor = static_cast<std::size_t>(rng.below(f.snippets.size()));
    const auto negs = select_in_function_negatives(anchor, f.snippets, f.hierarchy, 3, rng);
    std::size_t pool = 0;
    for (std::size_t i = 0; i < f.snippets.size(); ++i)
      pool += f.snippets[i].granularity == f.snippets[anchor].granularity && !f.hierarchy.nested(i, anchor);
    if (f.snippets[anchor].granularity == Granularity::Function) pool = 0;
    EXPECT_EQ(negs.size(), std::min<std::size_t>(3, pool));
    std::set<std::size_t> seen(negs.begin(), negs.end());
    EXPECT_EQ(seen.size(), negs.size());
    for (auto n : negs) {
      EXPECT_EQ(f.snippets[n].granularity, f.snippets[anchor].granularity);
      EXPECT_FALSE(f.hierarchy.nested(n, anchor));
    }
  }
}

TEST(Gradients, CentralDifferencesAgree) {
  TrainConfig cfg;
  const auto r = check_gradients(cfg, 8, 11, 20);
  EXPECT_EQ(r.instances, 20u);
  EXPECT_LT(r.max_relative_error, 1e-4);
  EXPECT_GE(r.aggregation_levels, 2u);
  EXPECT_GT(r.maxsim_choices, 0u);
}

TEST(Config, JsonRoundTripAndValidation) {
  TrainConfig cfg;
  cfg.alpha = 0.5;
  cfg.flags.disable_maxsim = true;
  const auto back = TrainConfig::from_json(nlohmann::json::parse(cfg.to_json().dump()));
  EXPECT_EQ(back.to_json(), cfg.to_json());
  EXPECT_THROW(TrainConfig::from_json(nlohmann::json{{"alpah", 1.0}}), mgcs::Error);
  const auto partial = TrainConfig::from_json(nlohmann::json{{"epochs", 3}}, cfg);
  EXPECT_EQ(partial.epochs, 3u);
  EXPECT_EQ(partial.alpha, 0.5);

  for (auto mutate : std::vector<std::function<void(TrainConfig&)>>{
           [](TrainConfig& c) { c.tau = 0.0; }, [](TrainConfig& c) { c.batch_size = 0; },
           [](TrainConfig& c) { c.d = 0; }, [](TrainConfig& c) { c.holdout_fraction = 1.0; },
           [](TrainConfig& c) { c.learning_rate = -1.0; }}) {
    TrainConfig bad;
    mutate(bad);
    EXPECT_THROW(bad.validate(), mgcs::Error);
  }
  EXPECT_NO_THROW(TrainConfig{}.validate());
}

struct SmallCorpus : ::testing::Test {
  static void SetUpTestSuite() {
    dir = std::filesystem::temp_directory_path() / "mgcs_trainer_test";
    std::filesystem::remove_all(dir);
    mgcs::testing::PlantedOptions po;
    po.functions = 40;
    mgcs::testing::write_planted(dir, po);
    const auto reg = mgcs::GrammarRegistry::builtin();
    const auto fns = mgcs::collect_functions(dir, reg);
    records = mgcs::extract_corpus(fns, reg, {}).records;
  }
  static void TearDownTestSuite() { std::filesystem::remove_all(dir); }

  static TrainingData data(const TrainConfig& cfg) {
    const auto reg = mgcs::GrammarRegistry::builtin();
    return prepare_training_data(records, mgcs::analyze_corpus_functions(records, reg), mgcs::kDefaultTokenizerSeed,
                                 cfg);
  }

  static inline std::filesystem::path dir;
  static inline std::vector<mgcs::CorpusRecord> records;
};

// Full-size planted corpus, as used by the acceptance run.
struct PlantedCorpus : SmallCorpus {
  static void SetUpTestSuite() {
    dir = std::filesystem::temp_directory_path() / "mgcs_trainer_planted";
    std::filesystem::remove_all(dir);
    mgcs::testing::write_planted(dir);
    const auto reg = mgcs::GrammarRegistry::builtin();
    records = mgcs::extract_corpus(mgcs::collect_functions(dir, reg), reg, {}).records;
  }
};

TEST_F(SmallCorpus, SeededRunsAreBitIdentical) {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.d = 16;
  cfg.seed = 4;
  const auto d = data(cfg);
  const auto a = train(d, cfg), b = train(d, cfg);
  ASSERT_EQ(a.metrics.size(), 4u);
  for (std::size_t i = 0; i < a.metrics.size(); ++i) EXPECT_EQ(a.metrics[i].to_json(), b.metrics[i].to_json());
  EXPECT_EQ(mgcs::fingerprint(a.params), mgcs::fingerprint(b.params));
  EXPECT_EQ(a.split.held_out, b.split.held_out);
}

TEST_F(SmallCorpus, TrainingLowersTheLoss) {
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.d = 32;
  const auto r = train(data(cfg), cfg);
  EXPECT_EQ(r.metrics.front().epoch, 0u);
  EXPECT_LT(r.metrics[r.best_epoch].total, r.metrics.front().total);
}

TEST_F(PlantedCorpus, TrainedCommentFindsItsOwnStatement) {
  TrainConfig cfg;
  const auto d = data(cfg);
  const auto r = train(d, cfg);
  const auto index = mgcs::offline::build_index(d.analyses, r.params, cfg.mode());
  const mgcs::search::Searcher searcher(index, r.params);
  std::size_t checked = 0, top1 = 0;
  for (auto i : r.split.train) {
    const auto& pair = d.pairs[i];
    if (pair.granularity != Granularity::Statement) continue;
    const auto rec = std::ranges::find(records, pair.pair_id, &mgcs::CorpusRecord::pair_id);
    ASSERT_NE(rec, records.end());
    const auto gold = rec->candidate_spans.front().snippet_id;
    const auto hits = searcher.search(rec->comment_text, 1, Granularity::Statement);
    top1 += hits.at(0).snippet_id == gold;
    ++checked;
  }
  EXPECT_GT(checked, 50u);
  // Snippets drawing the same concepts can tie up; 364 of 365 ranked first on the baseline run.
  EXPECT_GE(static_cast<double>(top1), 0.98 * static_cast<double>(checked)) << top1 << " of " << checked;
}

TEST_F(SmallCorpus, HoldoutCoversEveryGranularity) {
  TrainConfig cfg;
  const auto d = data(cfg);
  const auto split = split_holdout(d, 0.1, 3);
  EXPECT_EQ(split.train.size() + split.held_out.size(), d.pairs.size());
  bool seen[3] = {false, false, false};
  for (auto i : split.held_out) seen[static_cast<int>(d.pairs[i].granularity)] = true;
  EXPECT_TRUE(seen[0] && seen[1] && seen[2]);
}

}  // namespace
