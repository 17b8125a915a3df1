#pragma once

// Online side of retrieval: the index container, query scoring and MRR.
// Nothing here parses source or runs HMGR; queries are encoded with the
// encoder's mean pooling only.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "mgcs/common/types.hpp"
#include "mgcs/encoder/params.hpp"

namespace mgcs::search {

inline constexpr std::uint32_t kIndexFormatVersion = 1;

struct EntryInfo {
  std::string snippet_id;
  std::string function_id;
  Granularity granularity = Granularity::Statement;
  ByteSpan bytes;  // display span inside the function source
  LineSpan lines;

  friend bool operator==(const EntryInfo&, const EntryInfo&) = default;
};

/// Snippet vectors stored row-major so a query is one batched scan.
class CorpusIndex {
 public:
  CorpusIndex() = default;
  CorpusIndex(std::size_t d, std::string fingerprint);

  /// Throws DimensionMismatch, FormatError on duplicate ids.
  void add(EntryInfo info, std::span<const double> vector);

  std::size_t d() const noexcept { return d_; }
  const std::string& fingerprint() const noexcept { return fingerprint_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const EntryInfo& entry(std::size_t i) const { return entries_.at(i); }
  std::span<const double> vector(std::size_t i) const { return {matrix_.data() + i * d_, d_}; }
  std::span<const double> matrix() const noexcept { return matrix_; }
  std::optional<std::size_t> find(std::string_view snippet_id) const;

  /// Binary container: "MGCSIDX1", u32 version, u32 d, u64 count, fingerprint,
  /// then per entry the ids, granularity, spans and d doubles.
  std::string serialize() const;
  static CorpusIndex deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static CorpusIndex load(const std::filesystem::path& path);

  friend bool operator==(const CorpusIndex&, const CorpusIndex&) = default;

 private:
  std::size_t d_ = 0;
  std::string fingerprint_;
  std::vector<EntryInfo> entries_;
  std::vector<double> matrix_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

struct Hit {
  std::string snippet_id;
  double score = 0.0;
  std::size_t entry = 0;
};

/// Binds a checkpoint to an index, checking the fingerprint once.
class Searcher {
 public:
  /// Throws CheckpointMismatch when the index was built from other parameters.
  Searcher(const CorpusIndex& index, const EncoderParams& params);

  Vector encode(std::string_view query) const;

  /// Top-k by score descending, then snippet id ascending. Throws EmptyIndex,
  /// ConfigError for k == 0.
  std::vector<Hit> search(std::string_view query, std::size_t k,
                          std::optional<Granularity> filter = std::nullopt) const;
  std::vector<Hit> search_vector(std::span<const double> q, std::size_t k,
                                 std::optional<Granularity> filter = std::nullopt) const;

  /// 1-based rank of `entry` among entries of its own granularity.
  std::size_t rank_of(std::span<const double> q, std::size_t entry) const;

  const CorpusIndex& index() const noexcept { return index_; }

 private:
  const CorpusIndex& index_;
  const EncoderParams& params_;
};

struct EvalItem {
  std::string query_text;
  std::string gold_snippet_id;
  Granularity granularity = Granularity::Statement;
};

std::vector<EvalItem> read_evalset(const std::filesystem::path& path);
void write_evalset(const std::filesystem::path& path, std::span<const EvalItem> items);

struct MrrReport {
  double mrr = 0.0;
  std::size_t n = 0;
  double per_granularity[kGranularityCount] = {0, 0, 0};
  std::size_t count[kGranularityCount] = {0, 0, 0};
  std::vector<std::size_t> ranks;

  nlohmann::ordered_json to_json() const;
};

/// (1/N) sum 1/rank_i. Throws EmptyCandidates for no ranks, FormatError for a zero rank.
double mrr(std::span<const std::size_t> ranks);

/// Ranks each gold snippet within its granularity. Throws GoldMissing, EmptyIndex.
MrrReport evaluate_mrr(std::span<const EvalItem> evalset, const Searcher& searcher);

/// Expected MRR of a uniformly random ranking over n items: H_n / n.
double random_mrr(std::size_t n);

}  // namespace mgcs::search
