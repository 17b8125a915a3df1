#include "mgcs/encoder/encoder.hpp"

#include <algorithm>

#include "mgcs/common/error.hpp"
#include "mgcs/encoder/ops.hpp"

namespace mgcs {
namespace {

std::vector<std::span<const double>> token_rows(const TokenSeq& seq, const EncoderParams& params) {
  std::vector<std::span<const double>> rows;
  rows.reserve(seq.size());
  for (TokenId t : seq.tokens) {
    if (t >= params.vocab_size)
      throw Error(ErrorCode::DimensionMismatch, "token id " + std::to_string(t) + " outside the vocabulary");
    rows.push_back(params.embedding(t));
  }
  return rows;
}

}  // namespace

EmbeddingMatrix encode_tokens(const TokenSeq& seq, const EncoderParams& params) {
  const auto rows = token_rows(seq, params);
  EmbeddingMatrix m;
  m.d = params.d;
  m.rows = rows.size() + 1;
  m.data.assign(m.rows * m.d, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) std::ranges::copy(rows[i], m.row(i + 1).begin());
  if (!rows.empty()) ops::mean_rows(rows, m.row(0));
  return m;
}

Vector encode_query_tokens(const TokenSeq& seq, const EncoderParams& params) {
  const auto rows = token_rows(seq, params);
  Vector v(params.d, 0.0);
  if (!rows.empty()) ops::mean_rows(rows, v);
  return v;
}

Vector encode_query(std::string_view text, const EncoderParams& params, std::size_t limit) {
  return encode_query_tokens(params.tokenizer().tokenize(text, limit), params);
}

}  // namespace mgcs
