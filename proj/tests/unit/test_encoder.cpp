#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "mgcs/common/error.hpp"
#include "mgcs/encoder/encoder.hpp"
#include "mgcs/encoder/ops.hpp"
#include "mgcs/encoder/params.hpp"

namespace {

using mgcs::EncoderParams;

EncoderParams tiny(std::size_t d = 2, std::size_t vocab = 8) {
  auto p = EncoderParams::initialize(d, 3, 0.05, vocab);
  return p;
}

TEST(Params, InitializationFollowsTheContract) {
  const auto p = EncoderParams::initialize(16, 42);
  EXPECT_EQ(p.vocab_size, mgcs::kVocabSize);
  EXPECT_EQ(p.embedding_table.size(), p.vocab_size * 16);
  for (double w : p.hmgr_W) EXPECT_EQ(w, 0.0);
  for (double g : p.layernorm_gain) EXPECT_EQ(g, 1.0);
  for (double b : p.layernorm_bias) EXPECT_EQ(b, 0.0);
  double lo = 1, hi = -1;
  for (double e : p.embedding_table) lo = std::min(lo, e), hi = std::max(hi, e);
  EXPECT_GE(lo, -0.05);
  EXPECT_LT(hi, 0.05);
  EXPECT_LT(lo, -0.049);
  EXPECT_GT(hi, 0.049);
  EXPECT_NO_THROW(p.validate());
}

TEST(Params, SeededInitializationIsReproducible) {
  EXPECT_EQ(EncoderParams::initialize(8, 1, 0.05, 64), EncoderParams::initialize(8, 1, 0.05, 64));
  EXPECT_NE(EncoderParams::initialize(8, 1, 0.05, 64), EncoderParams::initialize(8, 2, 0.05, 64));
}

TEST(Params, CheckpointRoundTripsBitExactly) {
  auto p = EncoderParams::initialize(6, 9, 0.05, 32);
  p.hmgr_W[7] = -0.125;
  p.layernorm_gain[2] = 1.5;
  const auto bytes = mgcs::serialize_checkpoint(p);
  EXPECT_EQ(bytes.substr(0, 8), "MGCSCKPT");
  const auto q = mgcs::deserialize_checkpoint(bytes);
  EXPECT_EQ(p, q);
  EXPECT_EQ(mgcs::serialize_checkpoint(q), bytes);
  EXPECT_EQ(mgcs::fingerprint(p), mgcs::fingerprint_bytes(bytes));
  EXPECT_EQ(mgcs::fingerprint(p).size(), 16u);

  const auto path = std::filesystem::temp_directory_path() / "mgcs_params_roundtrip.bin";
  mgcs::save_checkpoint(path, p);
  EXPECT_EQ(mgcs::load_checkpoint(path), p);
  std::filesystem::remove(path);
}

TEST(Params, FingerprintChangesWithAnyParameter) {
  auto p = tiny();
  const auto before = mgcs::fingerprint(p);
  p.layernorm_bias[0] = 1e-9;
  EXPECT_NE(mgcs::fingerprint(p), before);
}

TEST(Params, CorruptCheckpointsAreRejected) {
  const auto bytes = mgcs::serialize_checkpoint(tiny());
  EXPECT_THROW(mgcs::deserialize_checkpoint("NOTACKPT"), mgcs::Error);
  EXPECT_THROW(mgcs::deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), mgcs::Error);
  EXPECT_THROW(mgcs::deserialize_checkpoint(bytes + "x"), mgcs::Error);
  auto bad_version = bytes;
  bad_version[8] = 9;
  EXPECT_THROW(mgcs::deserialize_checkpoint(bad_version), mgcs::Error);
  EXPECT_THROW(mgcs::load_checkpoint("/nonexistent/ckpt.bin"), mgcs::Error);
}

TEST(Params, ValidateCatchesBadShapesAndValues) {
  auto p = tiny();
  p.hmgr_W.pop_back();
  EXPECT_THROW(p.validate(), mgcs::Error);
  auto q = tiny();
  q.embedding_table[0] = std::nan("");
  EXPECT_THROW(q.validate(), mgcs::Error);
}

TEST(Encoder, EmptySequenceHasOnlyTheZeroRow) {
  const auto p = tiny();
  const auto m = mgcs::encode_tokens({}, p);
  EXPECT_EQ(m.rows, 1u);
  EXPECT_EQ(m.token_count(), 0u);
  for (double v : m.row(0)) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, OneTokenFillsBothRows) {
  const auto p = tiny();
  mgcs::TokenSeq seq;
  seq.tokens = {5};
  seq.offsets = {{0, 1}};
  const auto m = mgcs::encode_tokens(seq, p);
  ASSERT_EQ(m.rows, 2u);
  for (std::size_t k = 0; k < p.d; ++k) {
    EXPECT_EQ(m.row(0)[k], p.embedding(5)[k]);
    EXPECT_EQ(m.row(1)[k], p.embedding(5)[k]);
  }
}

TEST(Encoder, QueryIsTheMeanOfItsTokens) {
  auto p = tiny();
  mgcs::TokenSeq seq;
  seq.tokens = {1, 2};
  seq.offsets = {{0, 1}, {2, 3}};
  p.embedding(1)[0] = 1, p.embedding(1)[1] = 3;
  p.embedding(2)[0] = 3, p.embedding(2)[1] = 5;
  const auto q = mgcs::encode_query_tokens(seq, p);
  EXPECT_EQ(q, (mgcs::Vector{2, 4}));

  mgcs::TokenSeq one;
  one.tokens = {2};
  one.offsets = {{0, 1}};
  EXPECT_EQ(mgcs::encode_query_tokens(one, p), (mgcs::Vector{3, 5}));
  EXPECT_EQ(mgcs::encode_query("", p), (mgcs::Vector{0, 0}));
}

TEST(Encoder, OutOfVocabularyTokenThrows) {
  const auto p = tiny(2, 8);
  mgcs::TokenSeq seq;
  seq.tokens = {8};
  seq.offsets = {{0, 1}};
  EXPECT_THROW(mgcs::encode_tokens(seq, p), mgcs::Error);
}

TEST(Ops, LayerNormMatchesOracle) {
  const auto& want = mgcs::test::oracles()["layer_norm_3_1"];
  const std::vector<double> x{3, 1}, gain{1, 1}, bias{0, 0};
  std::vector<double> out(2);
  mgcs::ops::layer_norm(x, gain, bias, mgcs::kLayerNormEps, out);
  EXPECT_NEAR(out[0], want[0].get<double>(), 1e-15);
  EXPECT_NEAR(out[1], want[1].get<double>(), 1e-15);
  EXPECT_NEAR(out[0], 1.0, 1e-5);
  EXPECT_NEAR(out[1], -1.0, 1e-5);
}

TEST(Ops, InfoNceOracleValues) {
  const auto& o = mgcs::test::oracles();
  const std::vector<double> zeros{0.0, 0.0};
  EXPECT_NEAR(mgcs::ops::info_nce(1.0, zeros, 1.0), o["infonce_pos1_negs00_tau1"].get<double>(), 1e-12);
  const std::vector<double> same{0.37};
  EXPECT_NEAR(mgcs::ops::info_nce(0.37, same, 0.05), std::log(2.0), 1e-12);
}

TEST(Ops, InfoNceStaysFiniteForLargeScores) {
  const std::vector<double> negs{900.0, -900.0};
  std::vector<double> probs;
  const double l = mgcs::ops::info_nce(1000.0, negs, 0.05, &probs);
  EXPECT_TRUE(std::isfinite(l));
  EXPECT_NEAR(l, 0.0, 1e-12);
  ASSERT_EQ(probs.size(), 3u);
  EXPECT_NEAR(probs[0] + probs[1] + probs[2], 1.0, 1e-12);
}

TEST(Ops, MeanAndMatvec) {
  const std::vector<double> a{0, 2}, b{2, 0};
  const std::span<const double> rows[] = {a, b};
  std::vector<double> out(2);
  mgcs::ops::mean_rows(rows, out);
  EXPECT_EQ(out, (std::vector<double>{1, 1}));
  const std::vector<double> W{1, 2, 3, 4}, x{1, 1};
  mgcs::ops::matvec(W, x, out);
  EXPECT_EQ(out, (std::vector<double>{3, 7}));
}

}  // namespace
