#include "mgcs/encoder/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "mgcs/common/error.hpp"
#include "mgcs/common/rng.hpp"
#include "mgcs/corpus/jsonl.hpp"

namespace mgcs {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'M', 'G', 'C', 'S', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_array(std::string& out, const std::vector<double>& v) {
  out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::vector<double> get_array(std::size_t n) {
    if (n > (bytes_.size() - pos_) / sizeof(double)) throw Error(ErrorCode::FormatError, "truncated checkpoint");
    std::vector<double> v(n);
    std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::FormatError, "truncated checkpoint");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

EncoderParams EncoderParams::initialize(std::size_t d, std::uint64_t seed, double init_scale,
                                        std::size_t vocab_size) {
  if (d == 0) throw Error(ErrorCode::ConfigError, "embedding dimension must be positive");
  EncoderParams p;
  p.d = d;
  p.vocab_size = vocab_size;
  p.embedding_table.resize(vocab_size * d);
  Rng rng(seed);
  for (double& x : p.embedding_table) x = rng.uniform(-init_scale, init_scale);
  p.hmgr_W.assign(d * d, 0.0);
  p.layernorm_gain.assign(d, 1.0);
  p.layernorm_bias.assign(d, 0.0);
  return p;
}

void EncoderParams::validate() const {
  if (d == 0 || embedding_table.size() != vocab_size * d || hmgr_W.size() != d * d || layernorm_gain.size() != d ||
      layernorm_bias.size() != d)
    throw Error(ErrorCode::DimensionMismatch, "encoder parameter shapes disagree with d=" + std::to_string(d));
  for (const auto* v : {&embedding_table, &hmgr_W, &layernorm_gain, &layernorm_bias})
    for (double x : *v)
      if (!std::isfinite(x)) throw Error(ErrorCode::FormatError, "non-finite encoder parameter");
}

std::string serialize_checkpoint(const EncoderParams& params) {
  params.validate();
  std::string out;
  out.reserve(32 + (params.embedding_table.size() + params.hmgr_W.size() + 2 * params.d) * sizeof(double));
  out.append(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.d));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.vocab_size));
  put<std::uint64_t>(out, params.tokenizer_seed);
  put_array(out, params.embedding_table);
  put_array(out, params.hmgr_W);
  put_array(out, params.layernorm_gain);
  put_array(out, params.layernorm_bias);
  return out;
}

EncoderParams deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw Error(ErrorCode::FormatError, "not a checkpoint file");
  Reader r(bytes.substr(sizeof(kMagic)));
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointFormatVersion)
    throw Error(ErrorCode::FormatError, "unsupported checkpoint version " + std::to_string(version));
  EncoderParams p;
  p.d = r.get<std::uint32_t>();
  p.vocab_size = r.get<std::uint32_t>();
  p.tokenizer_seed = r.get<std::uint64_t>();
  if (p.d == 0 || p.vocab_size == 0) throw Error(ErrorCode::FormatError, "empty checkpoint dimensions");
  p.embedding_table = r.get_array(p.vocab_size * p.d);
  p.hmgr_W = r.get_array(p.d * p.d);
  p.layernorm_gain = r.get_array(p.d);
  p.layernorm_bias = r.get_array(p.d);
  if (!r.done()) throw Error(ErrorCode::FormatError, "trailing bytes in checkpoint");
  p.validate();
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params) {
  write_file(path, serialize_checkpoint(params));
}

EncoderParams load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file(path)); }

std::string fingerprint_bytes(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
  return out;
}

std::string fingerprint(const EncoderParams& params) { return fingerprint_bytes(serialize_checkpoint(params)); }

}  // namespace mgcs
