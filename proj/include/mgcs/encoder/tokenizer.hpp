#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mgcs/common/types.hpp"

namespace mgcs {

using TokenId = std::uint32_t;

inline constexpr std::size_t kVocabSize = std::size_t{1} << 16;
inline constexpr std::size_t kMaxCodeTokens = 320;
inline constexpr std::size_t kMaxQueryTokens = 128;
inline constexpr std::uint64_t kDefaultTokenizerSeed = 0x9e3779b97f4a7c15ULL;

struct TokenSeq {
  std::vector<TokenId> tokens;
  std::vector<ByteSpan> offsets;  // ascending, non-overlapping

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
};

struct Piece {
  std::string text;  // lowercased
  ByteSpan span;
};

/// Splits on whitespace, emits each punctuation byte on its own, and cuts
/// identifiers at underscores and case boundaries (fooBar, HTTPServer).
std::vector<Piece> split_pieces(std::string_view text);

/// Hashing-trick vocabulary: seeded FNV-1a folded into [0, kVocabSize).
TokenId hash_piece(std::string_view piece, std::uint64_t seed);

class Tokenizer {
 public:
  explicit Tokenizer(std::uint64_t seed = kDefaultTokenizerSeed) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  /// First `limit` pieces of `text`.
  TokenSeq tokenize(std::string_view text, std::size_t limit) const;

  /// As tokenize, but pieces overlapping a masked span are dropped before
  /// truncation. Masks must be sorted by start.
  TokenSeq tokenize_masked(std::string_view text, std::span<const ByteSpan> masked, std::size_t limit) const;

  std::size_t count(std::string_view text) const { return split_pieces(text).size(); }

 private:
  std::uint64_t seed_;
};

}  // namespace mgcs
