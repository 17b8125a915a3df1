#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "mgcs/common/error.hpp"
#include "mgcs/corpus/jsonl.hpp"
#include "mgcs/extract/extract.hpp"

namespace {

using mgcs::CommentKind;
using mgcs::Granularity;
namespace test = mgcs::test;

const mgcs::GrammarRegistry& registry() {
  static const auto reg = mgcs::GrammarRegistry::builtin();
  return reg;
}

mgcs::FunctionAnalysis analyze_py(const std::string& src) {
  return mgcs::analyze_function(test::python_function(src), registry().for_language("python"));
}

struct WriteData : ::testing::Test {
  void SetUp() override {
    auto fns = mgcs::collect_functions(test::fixture_path("write_data"), registry());
    ASSERT_EQ(fns.size(), 1u);
    fn = fns[0];
    a = mgcs::analyze_function(fn, registry().for_language("python"));
    pairs = mgcs::align_comments(a.comments, a.snippets, a.hierarchy, 4);
  }
  const mgcs::AlignmentPair* pair_of(CommentKind k) const {
    for (const auto& p : pairs)
      if (p.comment.kind == k) return &p;
    return nullptr;
  }
  std::string text(const std::string& id) const { return test::text_of(a, a.snippets[*a.hierarchy.find(id)]); }

  mgcs::SourceFunction fn;
  mgcs::FunctionAnalysis a;
  std::vector<mgcs::AlignmentPair> pairs;
};

TEST_F(WriteData, FunctionIdentityAndSource) {
  EXPECT_EQ(fn.id, "write_data.py:5:write_data_to_file");
  EXPECT_EQ(fn.language, "python");
  EXPECT_TRUE(fn.source_text.starts_with("def write_data_to_file(file_path, data):\n"));
}

TEST_F(WriteData, SegmentsIntoStatementsAndBlocks) {
  bool iso = false, if_block = false;
  for (const auto& s : a.snippets) {
    const auto t = test::text_of(a, s);
    if (s.granularity == Granularity::Statement) {
      EXPECT_EQ(s.lines.start_line, s.lines.end_line) << t;
      iso |= t == "date = date.isoformat()";
    }
    if (s.granularity == Granularity::Block) if_block |= t.starts_with("if");
  }
  EXPECT_TRUE(iso);
  EXPECT_TRUE(if_block);
  EXPECT_EQ(a.snippets[0].granularity, Granularity::Function);
  EXPECT_EQ(a.snippets[0].snippet_id, fn.id + "::F0");
}

TEST_F(WriteData, ClassifiesTheThreeComments) {
  ASSERT_EQ(a.comments.size(), 3u);
  EXPECT_EQ(a.comments[0].kind, CommentKind::Docstring);
  EXPECT_EQ(a.comments[0].text, "Write data to file, stamping it with the current date.");
  EXPECT_EQ(a.comments[1].kind, CommentKind::Trailing);
  EXPECT_EQ(a.comments[1].text, "Get ISO format date");
  EXPECT_EQ(a.comments[2].kind, CommentKind::Inline);
  EXPECT_EQ(a.comments[2].text, "check if the file path exists");
}

TEST_F(WriteData, TrailingPairPointsAtTheIsoformatStatement) {
  const auto* p = pair_of(CommentKind::Trailing);
  ASSERT_NE(p, nullptr);
  EXPECT_EQ(p->granularity, Granularity::Statement);
  ASSERT_EQ(p->candidates.size(), 1u);
  EXPECT_EQ(text(p->candidates[0]), "date = date.isoformat()");
}

TEST_F(WriteData, InlinePairHasTheNestedIfChain) {
  const auto* p = pair_of(CommentKind::Inline);
  ASSERT_NE(p, nullptr);
  EXPECT_EQ(p->granularity, Granularity::Block);
  ASSERT_EQ(p->candidates.size(), 2u);
  const auto inner = text(p->candidates[0]), outer = text(p->candidates[1]);
  EXPECT_TRUE(inner.starts_with("if os.path.exists(file_path):"));
  EXPECT_EQ(inner.find("else"), std::string::npos);
  EXPECT_TRUE(outer.starts_with("if os.path.exists(file_path):"));
  EXPECT_NE(outer.find("else:"), std::string::npos);
  const auto i = *a.hierarchy.find(p->candidates[0]), o = *a.hierarchy.find(p->candidates[1]);
  EXPECT_TRUE(a.hierarchy.is_ancestor(o, i));
}

TEST_F(WriteData, DocstringPairIsTheFunction) {
  const auto* p = pair_of(CommentKind::Docstring);
  ASSERT_NE(p, nullptr);
  EXPECT_EQ(p->granularity, Granularity::Function);
  EXPECT_EQ(p->candidates, std::vector<std::string>{a.snippets[0].snippet_id});
}

TEST_F(WriteData, CommentBytesAreMasked) {
  ASSERT_EQ(a.comment_spans.size(), 3u);
  for (const auto& m : a.comment_spans) {
    const auto t = a.function.source_text.substr(m.start, m.size());
    EXPECT_TRUE(t.starts_with("#") || t.starts_with("\"\"\"")) << t;
  }
}

TEST(Segment, SingleReturnFunction) {
  const auto a = analyze_py("def f():\n    return 0\n");
  ASSERT_EQ(a.snippets.size(), 2u);
  EXPECT_EQ(a.snippets[1].granularity, Granularity::Statement);
  EXPECT_EQ(a.snippets[1].parent_id, a.snippets[0].snippet_id);
}

TEST(Segment, WithBlockOwnsItsWrite) {
  const auto a = analyze_py("def f(p, data):\n    with open(p) as f:\n        f.write(data)\n");
  const auto& write = test::snippet_by_id(a, "::S0");
  ASSERT_EQ(test::text_of(a, write), "f.write(data)");
  const auto& with = a.snippets[*a.hierarchy.find(*write.parent_id)];
  EXPECT_EQ(with.granularity, Granularity::Block);
  EXPECT_TRUE(test::text_of(a, with).starts_with("with open(p)"));
  EXPECT_EQ(with.parent_id, a.snippets[0].snippet_id);
}

TEST(Segment, MultiLineStatementIsNotASnippet) {
  const auto a = analyze_py("def f(a):\n    x = g(a,\n          a)\n    return x\n");
  for (const auto& s : a.snippets)
    if (s.granularity == Granularity::Statement) EXPECT_EQ(s.lines.start_line, s.lines.end_line);
  EXPECT_EQ(a.snippets.size(), 2u);
}

TEST(Segment, SyntaxErrorIsParseError) {
  try {
    analyze_py("def f(:\n    return\n");
    FAIL();
  } catch (const mgcs::Error& e) {
    EXPECT_EQ(e.code(), mgcs::ErrorCode::ParseError);
  }
}

TEST(Segment, Deterministic) {
  const std::string src = "def f(x):\n    # loop over x\n    for i in x:\n        print(i)  # show it\n    return x\n";
  const auto a = analyze_py(src), b = analyze_py(src);
  ASSERT_EQ(a.snippets.size(), b.snippets.size());
  for (std::size_t i = 0; i < a.snippets.size(); ++i) {
    EXPECT_EQ(a.snippets[i].snippet_id, b.snippets[i].snippet_id);
    EXPECT_EQ(a.snippets[i].bytes, b.snippets[i].bytes);
  }
  const auto pa = mgcs::align_comments(a.comments, a.snippets, a.hierarchy, 4);
  const auto pb = mgcs::align_comments(b.comments, b.snippets, b.hierarchy, 4);
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].candidates, pb[i].candidates);
}

TEST(Align, InlineBeforePlainAssignmentIsUnaligned) {
  const auto a = analyze_py("def f(x):\n    # double it\n    y = x * 2\n    return y\n");
  ASSERT_EQ(a.comments.size(), 1u);
  EXPECT_EQ(a.comments[0].kind, CommentKind::Inline);
  mgcs::AlignStats stats;
  const auto pairs = mgcs::align_comments(a.comments, a.snippets, a.hierarchy, 4, &stats);
  EXPECT_TRUE(pairs.empty());
  EXPECT_EQ(stats.unaligned[static_cast<int>(CommentKind::Inline)], 1u);
}

TEST(Align, ConsecutiveInlineLinesMerge) {
  const auto a = analyze_py("def f(x):\n    # walk the list\n    # and print items\n    for i in x:\n        print(i)\n");
  ASSERT_EQ(a.comments.size(), 1u);
  EXPECT_EQ(a.comments[0].text, "walk the list and print items");
}

TEST(Align, CandidateChainIsCapped) {
  std::string src = "def f(x):\n    # deep\n";
  std::string indent = "    ";
  for (int i = 0; i < 6; ++i) {
    src += indent + "for v" + std::to_string(i) + " in x:\n";
    indent += "    ";
  }
  src += indent + "print(x)\n";
  const auto a = analyze_py(src);
  const auto pairs = mgcs::align_comments(a.comments, a.snippets, a.hierarchy, 4);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].candidates.size(), 1u);  // only the outer loop opens on the next line
}

TEST(Extract, JavaScriptFixture) {
  auto fns = mgcs::collect_functions(test::fixture_path("js"), registry());
  ASSERT_EQ(fns.size(), 2u);
  EXPECT_EQ(fns[0].id, "cart.js:4:cartTotal");
  const auto res = mgcs::extract_corpus(fns, registry(), {});
  EXPECT_EQ(res.stats.functions, 2u);
  EXPECT_EQ(res.stats.pairs, 4u);
  std::map<std::string, std::size_t> kinds;
  for (const auto& r : res.records) ++kinds[std::string(mgcs::to_string(r.comment_kind))];
  EXPECT_EQ(kinds["docstring"], 1u);
  EXPECT_EQ(kinds["inline"], 2u);
  EXPECT_EQ(kinds["trailing"], 1u);
  for (const auto& r : res.records) {
    if (r.comment_kind != CommentKind::Docstring) continue;
    EXPECT_EQ(r.comment_text, "Compute the total price of every item in the cart.");
  }
}

TEST(Extract, CorpusJsonlRoundTrip) {
  auto fns = mgcs::collect_functions(test::fixture_path("write_data"), registry());
  const auto res = mgcs::extract_corpus(fns, registry(), {});
  ASSERT_EQ(res.records.size(), 3u);
  std::stringstream ss;
  mgcs::write_corpus(ss, res.records);
  const std::string first = ss.str();
  const auto back = mgcs::read_corpus(ss);
  std::stringstream again;
  mgcs::write_corpus(again, back);
  EXPECT_EQ(again.str(), first);
  const auto j = nlohmann::json::parse(first.substr(0, first.find('\n')));
  for (const char* key : {"pair_id", "function_id", "language", "comment_text", "comment_kind", "granularity",
                          "candidate_spans", "function_source"})
    EXPECT_TRUE(j.contains(key)) << key;
}

TEST(Extract, ReanalysisDetectsTamperedSpans) {
  auto fns = mgcs::collect_functions(test::fixture_path("write_data"), registry());
  auto records = mgcs::extract_corpus(fns, registry(), {}).records;
  EXPECT_EQ(mgcs::analyze_corpus_functions(records, registry()).size(), 1u);
  records[1].candidate_spans[0].bytes.end += 1;
  EXPECT_THROW(mgcs::analyze_corpus_functions(records, registry()), mgcs::Error);
}

TEST(Extract, UnsupportedLanguageIsSkipped) {
  mgcs::SourceFunction f = test::python_function("fn main() {}\n", "x.rs:1:main");
  f.language = "rust";
  const auto res = mgcs::extract_corpus(std::span(&f, 1), registry(), {});
  EXPECT_EQ(res.stats.skipped_functions, 1u);
  EXPECT_THROW(registry().for_language("rust"), mgcs::Error);
}

TEST(Grammar, LoadsFromJsonAndRejectsUnknownParsers) {
  const auto g = mgcs::GrammarConfig::from_json(R"({
    "language": "python", "extensions": [".pyx"], "functions": ["function_definition"],
    "comments": ["comment"], "docstring": {"position": "body_first", "kinds": ["string"]},
    "nodes": {"for_statement": "block", "return_statement": "statement"}})");
  EXPECT_TRUE(g.is_block("for_statement"));
  EXPECT_FALSE(g.is_block("if_statement"));
  auto reg = mgcs::GrammarRegistry::builtin();
  reg.add(g);
  ASSERT_NE(reg.for_extension(".pyx"), nullptr);
  // With `if` no longer a block, the fixture loses its block pair.
  const auto a = mgcs::analyze_function(
      test::python_function("def f(x):\n    # test x\n    if x:\n        return 1\n    return 0\n"), g);
  EXPECT_TRUE(mgcs::align_comments(a.comments, a.snippets, a.hierarchy, 4).empty());

  const auto cobol = mgcs::GrammarConfig::from_json(R"({"language": "cobol", "functions": ["x"], "nodes": {}})");
  EXPECT_THROW(reg.add(cobol), mgcs::Error);
  EXPECT_THROW(mgcs::GrammarConfig::from_json(R"({"language": "python", "nodes": {}})"), mgcs::Error);
  EXPECT_THROW(mgcs::GrammarConfig::from_json("{not json"), mgcs::Error);
}

TEST(Hierarchy, RejectsBrokenParentLinks) {
  std::vector<mgcs::Snippet> s(2);
  s[0] = {"F0", "f", Granularity::Function, {0, 10}, {1, 2}, std::nullopt};
  s[1] = {"S0", "f", Granularity::Statement, {2, 5}, {1, 1}, "nope"};
  EXPECT_THROW(mgcs::HierarchyIndex::build(s), mgcs::Error);
  s[1].parent_id = "F0";
  s[1].bytes = {5, 12};
  EXPECT_THROW(mgcs::HierarchyIndex::build(s), mgcs::Error);
  s[1].bytes = {5, 9};
  const auto h = mgcs::HierarchyIndex::build(s);
  EXPECT_TRUE(h.is_ancestor(0, 1));
  EXPECT_FALSE(h.is_ancestor(1, 0));
  EXPECT_EQ(h.bottom_up(), (std::vector<std::size_t>{1, 0}));
}

}  // namespace
