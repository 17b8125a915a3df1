#include "mgcs/encoder/tokenizer.hpp"

#include <cctype>

namespace mgcs {
namespace {

bool is_word(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }
bool is_upper(unsigned char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(unsigned char c) { return c >= 'a' && c <= 'z'; }

void split_identifier(std::string_view text, std::size_t begin, std::size_t end, std::vector<Piece>& out) {
  auto flush = [&](std::size_t from, std::size_t to) {
    if (from >= to) return;
    Piece p;
    p.span = {from, to};
    p.text.reserve(to - from);
    for (std::size_t i = from; i < to; ++i)
      p.text.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
    out.push_back(std::move(p));
  };
  std::size_t start = begin;
  for (std::size_t i = begin; i < end; ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == '_') {
      flush(start, i);
      start = i + 1;
      continue;
    }
    if (i == start) continue;
    const auto prev = static_cast<unsigned char>(text[i - 1]);
    const bool next_lower = i + 1 < end && is_lower(static_cast<unsigned char>(text[i + 1]));
    if ((is_lower(prev) && is_upper(c)) || (is_upper(prev) && is_upper(c) && next_lower)) {
      flush(start, i);
      start = i;
    }
  }
  flush(start, end);
}

}  // namespace

std::vector<Piece> split_pieces(std::string_view text) {
  std::vector<Piece> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
    } else if (is_word(c)) {
      std::size_t j = i;
      while (j < text.size() && is_word(static_cast<unsigned char>(text[j]))) ++j;
      split_identifier(text, i, j, out);
      i = j;
    } else {
      out.push_back({std::string(1, static_cast<char>(c)), {i, i + 1}});
      ++i;
    }
  }
  return out;
}

TokenId hash_piece(std::string_view piece, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char c : piece) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  h ^= h >> 32;
  h ^= h >> 16;
  return static_cast<TokenId>(h & (kVocabSize - 1));
}

TokenSeq Tokenizer::tokenize(std::string_view text, std::size_t limit) const {
  return tokenize_masked(text, {}, limit);
}

TokenSeq Tokenizer::tokenize_masked(std::string_view text, std::span<const ByteSpan> masked,
                                    std::size_t limit) const {
  TokenSeq seq;
  std::size_t m = 0;
  for (const Piece& p : split_pieces(text)) {
    if (seq.size() >= limit) break;
    while (m < masked.size() && masked[m].end <= p.span.start) ++m;
    if (m < masked.size() && masked[m].start < p.span.end) continue;
    seq.tokens.push_back(hash_piece(p.text, seed_));
    seq.offsets.push_back(p.span);
  }
  return seq;
}

}  // namespace mgcs
