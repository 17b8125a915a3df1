#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "mgcs/common/types.hpp"
#include "mgcs/encoder/params.hpp"
#include "mgcs/encoder/tokenizer.hpp"

namespace mgcs {

/// Row 0 is the sequence slot (mean of the token rows, zero when empty);
/// row i + 1 is token i.
struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t d = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t i) const { return {data.data() + i * d, d}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * d, d}; }
  std::size_t token_count() const noexcept { return rows == 0 ? 0 : rows - 1; }
};

/// Throws DimensionMismatch when a token id is outside the vocabulary.
EmbeddingMatrix encode_tokens(const TokenSeq& seq, const EncoderParams& params);

/// Mean of the query's token embeddings; zero vector for an empty query.
Vector encode_query(std::string_view text, const EncoderParams& params, std::size_t limit = kMaxQueryTokens);
Vector encode_query_tokens(const TokenSeq& seq, const EncoderParams& params);

}  // namespace mgcs
