#include <gtest/gtest.h>

#include "helpers.hpp"
#include "mgcs/common/error.hpp"
#include "mgcs/filter/filter.hpp"

namespace {

using namespace mgcs::filter;
namespace test = mgcs::test;

TEST(RegexFilter, RuleFixtures) {
  EXPECT_EQ(regex_filter("see https://example.com/docs for details").reason, Rule::Url);
  EXPECT_EQ(regex_filter("mirrors www.example.org layout exactly").reason, Rule::Url);
  EXPECT_EQ(regex_filter("TODO: handle timeout").reason, Rule::SpecialTerm);
  EXPECT_EQ(regex_filter("fixme later when the api settles").reason, Rule::SpecialTerm);
  EXPECT_EQ(regex_filter("pylint: disable=unused-argument").reason, Rule::AutoReview);
  EXPECT_EQ(regex_filter("fix it").reason, Rule::TooShort);
  const auto keep = regex_filter("check if the file path exists");
  EXPECT_TRUE(keep.keep);
  EXPECT_FALSE(keep.reason);
}

TEST(RegexFilter, FirstMatchingRuleWins) {
  EXPECT_EQ(regex_filter("TODO http://x.io").reason, Rule::Url);
  EXPECT_EQ(regex_filter("TODO").reason, Rule::SpecialTerm);
  EXPECT_EQ(regex_filter("noqa").reason, Rule::AutoReview);
}

TEST(RegexFilter, TermsOnlyMatchAsPrefix) {
  EXPECT_TRUE(regex_filter("explain why this is not a TODO item").keep);
  EXPECT_TRUE(regex_filter("Linted output goes to the log").keep);  // word boundary after "lint"
}

TEST(RegexFilter, ConfigurableTermsAndLength) {
  RegexConfig cfg;
  cfg.special_terms = {"WIP"};
  cfg.min_tokens = 2;
  EXPECT_EQ(regex_filter("WIP parser", cfg).reason, Rule::SpecialTerm);
  EXPECT_TRUE(regex_filter("TODO parser", cfg).keep);
  EXPECT_TRUE(regex_filter("fix it", cfg).keep);
  cfg.special_terms.clear();
  EXPECT_TRUE(regex_filter("WIP parser", cfg).keep);
}

TEST(Tfidf, TwoDocumentIdf) {
  std::vector<std::vector<std::string>> docs{{"a", "b", "b"}, {"b", "c"}};
  const auto m = TfidfModel::build(docs);
  EXPECT_EQ(m.n_docs(), 2u);
  EXPECT_EQ(m.df("b"), 2u);
  EXPECT_DOUBLE_EQ(m.idf("a"), std::log(2.0 / 2.0) + 1.0);
  EXPECT_DOUBLE_EQ(m.idf("b"), std::log(2.0 / 3.0) + 1.0);
  EXPECT_EQ(m.idf("zzz"), 0.0);
  const std::vector<std::string> bag{"b", "b", "a", "zzz"};
  const auto v = m.vectorize(bag);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_DOUBLE_EQ(v.at("b"), 0.5 * m.idf("b"));
  EXPECT_DOUBLE_EQ(v.at("a"), 0.25 * m.idf("a"));
}

TEST(Tfidf, SingleDocumentAndEmptyCorpus) {
  std::vector<std::vector<std::string>> docs{{"x"}};
  const auto m = TfidfModel::build(docs);
  EXPECT_DOUBLE_EQ(m.idf("x"), std::log(0.5) + 1.0);
  EXPECT_THROW(TfidfModel::build(std::span<const std::vector<std::string>>{}), mgcs::Error);
}

TEST(Tfidf, CosineScaleInvarianceAndZero) {
  SparseVector a{{"x", 1.0}, {"y", 2.0}}, b{{"x", 3.0}, {"z", 1.0}};
  SparseVector a10{{"x", 10.0}, {"y", 20.0}};
  EXPECT_NEAR(cosine(a, b), cosine(a10, b), 1e-15);
  EXPECT_EQ(cosine(a, {}), 0.0);
  EXPECT_NEAR(cosine(a, a), 1.0, 1e-15);
}

TEST(Tfidf, JsonRoundTrip) {
  std::vector<std::vector<std::string>> docs{{"a", "b"}, {"b", "c"}, {"d"}};
  const auto m = TfidfModel::build(docs);
  const auto back = TfidfModel::from_json(m.to_json());
  EXPECT_EQ(back.to_json(), m.to_json());
  EXPECT_EQ(back.idf("b"), m.idf("b"));
}

TEST(Tfidf, TermsSplitIdentifiersAndSkipMasks) {
  const std::string s = "keys = remote.list_keys(store)  # fetch";
  EXPECT_EQ(terms_of(s), (std::vector<std::string>{"keys", "remote", "list", "keys", "store", "fetch"}));
  const std::vector<mgcs::ByteSpan> mask{{s.find('#'), s.size()}};
  EXPECT_EQ(terms_of(s, mask).size(), 5u);
}

// Three-function corpus where the comment matches the surrounding function
// better than the commented statement.
struct Reliance : ::testing::Test {
  const std::string head = "def sync_store(store, remote):\n    ";
  const std::string snippet = "keys = remote.list_keys(store)\n";
  const std::string tail = "    for key in keys:\n        store.put(key, remote.fetch(key))\n    return store\n";
  const std::string f1 = "def fetch_page(client, url):\n    page = client.get(url)\n    return page.text\n";
  const std::string f2 = "def count_keys(table):\n    return len(table.keys())\n";

  TfidfModel model;
  mgcs::CorpusRecord record;

  void SetUp() override {
    const std::string f0 = head + snippet + tail;
    std::vector<std::vector<std::string>> docs{terms_of(f0), terms_of(f1), terms_of(f2)};
    model = TfidfModel::build(docs);
    record.pair_id = "r";
    record.function_id = "s.py:1:sync_store";
    record.language = "python";
    record.comment_text = "list remote, fetch each key, put";
    record.comment_kind = mgcs::CommentKind::Inline;
    record.granularity = mgcs::Granularity::Statement;
    record.function_source = f0;
    mgcs::CandidateSpan c;
    c.snippet_id = record.function_id + "::S0";
    c.bytes = {head.size(), head.size() + snippet.size() - 1};
    c.lines = {2, 2};
    record.candidate_spans.push_back(c);
  }
};

TEST_F(Reliance, IdfMatchesOracle) {
  const auto& o = test::oracles()["reliance"];
  EXPECT_NEAR(model.idf("store"), o["idf_store"].get<double>(), 1e-12);
  EXPECT_NEAR(model.idf("keys"), o["idf_keys"].get<double>(), 1e-12);
}

TEST_F(Reliance, ScoresMatchOracle) {
  const auto& o = test::oracles()["reliance"];
  const auto s = reliance_scores(record, {}, model);
  EXPECT_NEAR(s.snippet, o["snippet_cosine"].get<double>(), 1e-12);
  EXPECT_NEAR(s.rest, o["rest_cosine"].get<double>(), 1e-12);
}

TEST_F(Reliance, MarginDecides) {
  const auto dropped = reliance_filter(record, {}, model, 0.0);
  EXPECT_FALSE(dropped.keep);
  EXPECT_EQ(dropped.reason, Rule::Reliance);
  EXPECT_TRUE(reliance_filter(record, {}, model, 0.2).keep);
}

TEST(FilterCorpus, WriteDataKeepsEverythingAndIsIdempotent) {
  const auto reg = mgcs::GrammarRegistry::builtin();
  auto fns = mgcs::collect_functions(test::fixture_path("write_data"), reg);
  const auto records = mgcs::extract_corpus(fns, reg, {}).records;
  const auto analyses = mgcs::analyze_corpus_functions(records, reg);
  const auto model = build_tfidf(analyses);
  FilterConfig cfg;
  const auto once = filter_corpus(records, analyses, model, cfg);
  EXPECT_EQ(once.report.input, 3u);
  EXPECT_EQ(once.report.kept + once.report.dropped_pair_ids.size(), once.report.input);
  std::size_t by_rule = 0;
  for (const auto& [rule, n] : once.report.dropped_by_rule) by_rule += n;
  EXPECT_EQ(by_rule, once.report.dropped_pair_ids.size());

  const auto twice = filter_corpus(once.records, analyses, model, cfg);
  ASSERT_EQ(twice.records.size(), once.records.size());
  for (std::size_t i = 0; i < once.records.size(); ++i) EXPECT_EQ(twice.records[i].pair_id, once.records[i].pair_id);
  EXPECT_EQ(twice.report.kept, twice.report.input);
}

TEST(FilterCorpus, ReportCountsRegexDrops) {
  const auto reg = mgcs::GrammarRegistry::builtin();
  auto fns = mgcs::collect_functions(test::fixture_path("write_data"), reg);
  auto records = mgcs::extract_corpus(fns, reg, {}).records;
  const auto analyses = mgcs::analyze_corpus_functions(records, reg);
  records[1].comment_text = "TODO: date";
  FilterConfig cfg;
  cfg.reliance = false;
  const auto res = filter_corpus(records, analyses, build_tfidf(analyses), cfg);
  EXPECT_EQ(res.report.kept, 2u);
  EXPECT_EQ(res.report.dropped_by_rule.at("special-term"), 1u);
  EXPECT_EQ(res.report.dropped_pair_ids, std::vector<std::string>{records[1].pair_id});
  const auto j = res.report.to_json();
  EXPECT_EQ(j["input"], 3);
}

}  // namespace
