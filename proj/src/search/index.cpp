#include "mgcs/search/index.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "mgcs/common/error.hpp"
#include "mgcs/corpus/jsonl.hpp"
#include "mgcs/encoder/encoder.hpp"
#include "mgcs/simd/kernels.hpp"

namespace mgcs::search {
namespace {

static_assert(std::endian::native == std::endian::little, "index I/O assumes a little-endian host");

constexpr char kMagic[8] = {'M', 'G', 'C', 'S', 'I', 'D', 'X', '1'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_string(std::string& out, std::string_view s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view b) : b_(b) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(b_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::span<const char> take(std::size_t n) {
    need(n);
    std::span<const char> s(b_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw Error(ErrorCode::FormatError, "truncated index file");
  }
  std::string_view b_;
  std::size_t pos_ = 0;
};

}  // namespace

CorpusIndex::CorpusIndex(std::size_t d, std::string fingerprint) : d_(d), fingerprint_(std::move(fingerprint)) {}

void CorpusIndex::add(EntryInfo info, std::span<const double> vector) {
  if (vector.size() != d_)
    throw Error(ErrorCode::DimensionMismatch,
                "vector of size " + std::to_string(vector.size()) + " in an index of d=" + std::to_string(d_));
  if (!by_id_.emplace(info.snippet_id, entries_.size()).second)
    throw Error(ErrorCode::FormatError, "duplicate index entry " + info.snippet_id);
  entries_.push_back(std::move(info));
  matrix_.insert(matrix_.end(), vector.begin(), vector.end());
}

std::optional<std::size_t> CorpusIndex::find(std::string_view snippet_id) const {
  auto it = by_id_.find(std::string(snippet_id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::string CorpusIndex::serialize() const {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kIndexFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d_));
  put<std::uint64_t>(out, entries_.size());
  put_string(out, fingerprint_);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    put_string(out, e.snippet_id);
    put_string(out, e.function_id);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(e.granularity));
    put<std::uint64_t>(out, e.bytes.start);
    put<std::uint64_t>(out, e.bytes.end);
    put<std::uint64_t>(out, e.lines.start_line);
    put<std::uint64_t>(out, e.lines.end_line);
    out.append(reinterpret_cast<const char*>(matrix_.data() + i * d_), d_ * sizeof(double));
  }
  return out;
}

CorpusIndex CorpusIndex::deserialize(std::string_view bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw Error(ErrorCode::FormatError, "not an index file");
  Reader r(bytes.substr(sizeof(kMagic)));
  const auto version = r.get<std::uint32_t>();
  if (version != kIndexFormatVersion)
    throw Error(ErrorCode::FormatError, "unsupported index version " + std::to_string(version));
  const auto d = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  CorpusIndex index(d, r.get_string());
  std::vector<double> v(d);
  for (std::uint64_t i = 0; i < count; ++i) {
    EntryInfo e;
    e.snippet_id = r.get_string();
    e.function_id = r.get_string();
    const auto g = r.get<std::uint8_t>();
    if (g >= kGranularityCount) throw Error(ErrorCode::FormatError, "bad granularity in index");
    e.granularity = static_cast<Granularity>(g);
    e.bytes.start = r.get<std::uint64_t>();
    e.bytes.end = r.get<std::uint64_t>();
    e.lines.start_line = r.get<std::uint64_t>();
    e.lines.end_line = r.get<std::uint64_t>();
    const auto raw = r.take(std::size_t{d} * sizeof(double));
    std::memcpy(v.data(), raw.data(), raw.size());
    index.add(std::move(e), v);
  }
  if (!r.done()) throw Error(ErrorCode::FormatError, "trailing bytes in index file");
  return index;
}

void CorpusIndex::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

CorpusIndex CorpusIndex::load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

Searcher::Searcher(const CorpusIndex& index, const EncoderParams& params) : index_(index), params_(params) {
  if (params.d != index.d())
    throw Error(ErrorCode::CheckpointMismatch, "index d=" + std::to_string(index.d()) +
                                                   " but checkpoint d=" + std::to_string(params.d));
  const std::string fp = fingerprint(params);
  if (fp != index.fingerprint())
    throw Error(ErrorCode::CheckpointMismatch,
                "index was built from checkpoint " + index.fingerprint() + ", not " + fp);
}

Vector Searcher::encode(std::string_view query) const { return encode_query(query, params_); }

std::vector<Hit> Searcher::search(std::string_view query, std::size_t k, std::optional<Granularity> filter) const {
  return search_vector(encode(query), k, filter);
}

std::vector<Hit> Searcher::search_vector(std::span<const double> q, std::size_t k,
                                         std::optional<Granularity> filter) const {
  if (k == 0) throw Error(ErrorCode::ConfigError, "k must be at least 1");
  if (index_.empty()) throw Error(ErrorCode::EmptyIndex, "index has no entries");
  if (q.size() != index_.d()) throw Error(ErrorCode::DimensionMismatch, "query size differs from index d");
  std::vector<double> scores(index_.size());
  simd::kernels().dot_rows(q.data(), index_.matrix().data(), index_.size(), index_.d(), scores.data());

  std::vector<Hit> hits;
  for (std::size_t i = 0; i < index_.size(); ++i) {
    if (filter && index_.entry(i).granularity != *filter) continue;
    hits.push_back({index_.entry(i).snippet_id, scores[i], i});
  }
  const auto better = [](const Hit& a, const Hit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.snippet_id < b.snippet_id;
  };
  const std::size_t n = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(), better);
  hits.resize(n);
  return hits;
}

std::size_t Searcher::rank_of(std::span<const double> q, std::size_t entry) const {
  const EntryInfo& gold = index_.entry(entry);
  std::vector<double> scores(index_.size());
  simd::kernels().dot_rows(q.data(), index_.matrix().data(), index_.size(), index_.d(), scores.data());
  const double s = scores[entry];
  std::size_t rank = 1;
  for (std::size_t i = 0; i < index_.size(); ++i) {
    if (i == entry || index_.entry(i).granularity != gold.granularity) continue;
    if (scores[i] > s || (scores[i] == s && index_.entry(i).snippet_id < gold.snippet_id)) ++rank;
  }
  return rank;
}

std::vector<EvalItem> read_evalset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<EvalItem> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      EvalItem it;
      it.query_text = j.at("query_text").get<std::string>();
      it.gold_snippet_id = j.at("gold_snippet_id").get<std::string>();
      auto g = parse_granularity(j.at("granularity").get<std::string>());
      if (!g) throw Error(ErrorCode::FormatError, "bad granularity");
      it.granularity = *g;
      items.push_back(std::move(it));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::FormatError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return items;
}

void write_evalset(const std::filesystem::path& path, std::span<const EvalItem> items) {
  std::string out;
  for (const auto& it : items) {
    nlohmann::ordered_json j;
    j["query_text"] = it.query_text;
    j["gold_snippet_id"] = it.gold_snippet_id;
    j["granularity"] = to_string(it.granularity);
    out += j.dump();
    out.push_back('\n');
  }
  write_file(path, out);
}

nlohmann::ordered_json MrrReport::to_json() const {
  nlohmann::ordered_json j;
  j["mrr"] = mrr;
  j["n"] = n;
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (std::size_t g = 0; g < kGranularityCount; ++g) {
    if (count[g] == 0) continue;
    per[std::string(to_string(static_cast<Granularity>(g)))] = {{"mrr", per_granularity[g]}, {"n", count[g]}};
  }
  j["per_granularity"] = std::move(per);
  return j;
}

double mrr(std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw Error(ErrorCode::EmptyCandidates, "MRR over no queries");
  double total = 0.0;
  for (std::size_t r : ranks) {
    if (r == 0) throw Error(ErrorCode::FormatError, "ranks are 1-based");
    total += 1.0 / static_cast<double>(r);
  }
  return total / static_cast<double>(ranks.size());
}

MrrReport evaluate_mrr(std::span<const EvalItem> evalset, const Searcher& searcher) {
  if (evalset.empty()) throw Error(ErrorCode::EmptyCandidates, "empty evaluation set");
  if (searcher.index().empty()) throw Error(ErrorCode::EmptyIndex, "index has no entries");
  MrrReport report;
  std::vector<std::size_t> by_g[kGranularityCount];
  for (const auto& item : evalset) {
    auto entry = searcher.index().find(item.gold_snippet_id);
    if (!entry) throw Error(ErrorCode::GoldMissing, "gold snippet " + item.gold_snippet_id + " is not indexed");
    const std::size_t rank = searcher.rank_of(searcher.encode(item.query_text), *entry);
    report.ranks.push_back(rank);
    by_g[static_cast<std::size_t>(searcher.index().entry(*entry).granularity)].push_back(rank);
  }
  report.n = report.ranks.size();
  report.mrr = mrr(report.ranks);
  for (std::size_t g = 0; g < kGranularityCount; ++g) {
    report.count[g] = by_g[g].size();
    if (!by_g[g].empty()) report.per_granularity[g] = mrr(by_g[g]);
  }
  return report;
}

double random_mrr(std::size_t n) {
  if (n == 0) return 0.0;
  double h = 0.0;
  for (std::size_t r = n; r >= 1; --r) h += 1.0 / static_cast<double>(r);
  return h / static_cast<double>(n);
}

}  // namespace mgcs::search
