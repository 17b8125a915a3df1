#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "mgcs/encoder/tokenizer.hpp"

namespace {

using mgcs::split_pieces;

std::vector<std::string> texts(std::string_view s) {
  std::vector<std::string> out;
  for (const auto& p : split_pieces(s)) out.push_back(p.text);
  return out;
}

TEST(Tokenizer, DottedAccessIsThreePieces) {
  EXPECT_EQ(texts("date.isoformat"), (std::vector<std::string>{"date", ".", "isoformat"}));
  EXPECT_EQ(mgcs::Tokenizer().tokenize("date.isoformat", 320).size(), 3u);
}

TEST(Tokenizer, CamelCaseSplits) {
  EXPECT_EQ(texts("writeDataToFile"), (std::vector<std::string>{"write", "data", "to", "file"}));
}

TEST(Tokenizer, SnakeCaseAndAcronyms) {
  EXPECT_EQ(texts("file_path"), (std::vector<std::string>{"file", "path"}));
  EXPECT_EQ(texts("HTTPServer"), (std::vector<std::string>{"http", "server"}));
  EXPECT_EQ(texts("__init__"), (std::vector<std::string>{"init"}));
  EXPECT_EQ(texts("parseJSONBody2"), (std::vector<std::string>{"parse", "json", "body2"}));
}

TEST(Tokenizer, PunctuationIsOnePiecePerByte) {
  EXPECT_EQ(texts("a+=b;"), (std::vector<std::string>{"a", "+", "=", "b", ";"}));
  EXPECT_TRUE(texts("   \n\t ").empty());
}

TEST(Tokenizer, OffsetsPointAtSourceBytes) {
  const std::string s = "  fooBar(x)";
  const auto pieces = split_pieces(s);
  ASSERT_EQ(pieces.size(), 5u);
  EXPECT_EQ(pieces[0].span, (mgcs::ByteSpan{2, 5}));
  EXPECT_EQ(pieces[1].span, (mgcs::ByteSpan{5, 8}));
  EXPECT_EQ(s.substr(pieces[1].span.start, pieces[1].span.size()), "Bar");
  EXPECT_EQ(pieces[4].span, (mgcs::ByteSpan{10, 11}));
}

TEST(Tokenizer, HashMatchesIndependentOracle) {
  for (const auto& [piece, id] : mgcs::test::oracles()["token_hashes"].items())
    EXPECT_EQ(mgcs::hash_piece(piece, mgcs::kDefaultTokenizerSeed), id.get<mgcs::TokenId>()) << piece;
}

TEST(Tokenizer, HashStaysInVocabularyAndDependsOnSeed) {
  int differ = 0;
  for (int i = 0; i < 200; ++i) {
    const std::string w = "w" + std::to_string(i);
    EXPECT_LT(mgcs::hash_piece(w, 1), mgcs::kVocabSize);
    differ += mgcs::hash_piece(w, 1) != mgcs::hash_piece(w, 2);
  }
  EXPECT_GT(differ, 190);
}

TEST(Tokenizer, TruncatesToLimitKeepingPrefix) {
  std::string text;
  for (int i = 0; i < 500; ++i) text += "tok" + std::to_string(i) + " ";
  const mgcs::Tokenizer tok;
  const auto full = tok.tokenize(text, 10000);
  const auto cut = tok.tokenize(text, mgcs::kMaxCodeTokens);
  ASSERT_EQ(full.size(), 500u);
  ASSERT_EQ(cut.size(), 320u);
  for (std::size_t i = 0; i < cut.size(); ++i) {
    EXPECT_EQ(cut.tokens[i], full.tokens[i]);
    EXPECT_EQ(cut.offsets[i], full.offsets[i]);
  }
}

TEST(Tokenizer, MaskedPiecesDropBeforeTruncation) {
  const std::string text = "alpha # beta gamma\ndelta";
  const std::vector<mgcs::ByteSpan> mask{{6, 18}};
  const mgcs::Tokenizer tok;
  const auto seq = tok.tokenize_masked(text, mask, 2);
  ASSERT_EQ(seq.size(), 2u);
  EXPECT_EQ(seq.tokens[0], mgcs::hash_piece("alpha", tok.seed()));
  EXPECT_EQ(seq.tokens[1], mgcs::hash_piece("delta", tok.seed()));
}

TEST(Tokenizer, Deterministic) {
  const mgcs::Tokenizer a(5), b(5);
  const auto x = a.tokenize("def f(x): return x * 2", 320);
  const auto y = b.tokenize("def f(x): return x * 2", 320);
  EXPECT_EQ(x.tokens, y.tokens);
  EXPECT_EQ(a.count("x = y + 1"), 5u);
}

}  // namespace
