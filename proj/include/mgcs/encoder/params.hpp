#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mgcs/encoder/tokenizer.hpp"

namespace mgcs {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;
inline constexpr double kLayerNormEps = 1e-5;

/// Trainable state. Matrices are row-major.
struct EncoderParams {
  std::size_t d = 0;
  std::size_t vocab_size = kVocabSize;
  std::uint64_t tokenizer_seed = kDefaultTokenizerSeed;
  std::vector<double> embedding_table;  // vocab_size x d
  std::vector<double> hmgr_W;           // d x d
  std::vector<double> layernorm_gain;   // d
  std::vector<double> layernorm_bias;   // d

  /// Embeddings ~ U(-init_scale, init_scale) from `seed`; W = 0, gain = 1, bias = 0.
  static EncoderParams initialize(std::size_t d, std::uint64_t seed, double init_scale = 0.05,
                                  std::size_t vocab_size = kVocabSize);

  std::span<const double> embedding(TokenId t) const { return {embedding_table.data() + std::size_t{t} * d, d}; }
  std::span<double> embedding(TokenId t) { return {embedding_table.data() + std::size_t{t} * d, d}; }

  Tokenizer tokenizer() const { return Tokenizer(tokenizer_seed); }

  /// Throws DimensionMismatch on inconsistent shapes, FormatError on non-finite values.
  void validate() const;

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

/// Binary container: "MGCSCKPT", u32 format_version, u32 d, u32 vocab_size,
/// u64 tokenizer_seed, then f64 arrays (table, W, gain, bias). Little endian.
std::string serialize_checkpoint(const EncoderParams& params);
EncoderParams deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params);
EncoderParams load_checkpoint(const std::filesystem::path& path);

/// 16 hex digits of FNV-1a over the serialized checkpoint.
std::string fingerprint(const EncoderParams& params);
std::string fingerprint_bytes(std::string_view bytes);

}  // namespace mgcs
