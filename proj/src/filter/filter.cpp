#include "mgcs/filter/filter.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

#include "mgcs/common/error.hpp"
#include "mgcs/common/parallel.hpp"

namespace mgcs::filter {
namespace {

std::string escape_regex(std::string_view s) {
  static constexpr std::string_view kSpecial = R"(\^$.|?*+()[]{})";
  std::string out;
  for (char c : s) {
    if (kSpecial.find(c) != std::string_view::npos) out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

/// ^\s*(?:t1|t2...) with a word boundary after terms ending in a word char.
std::optional<std::regex> prefix_pattern(const std::vector<std::string>& terms) {
  if (terms.empty()) return std::nullopt;
  std::string alt;
  for (const auto& t : terms) {
    if (t.empty()) continue;
    if (!alt.empty()) alt.push_back('|');
    alt += escape_regex(t);
    if (is_word_char(t.back())) alt += "\\b";
  }
  if (alt.empty()) return std::nullopt;
  return std::regex("^\\s*(?:" + alt + ")", std::regex::ECMAScript | std::regex::icase);
}

bool is_term(const Piece& p) {
  return std::ranges::any_of(p.text, [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; });
}

bool overlaps(const ByteSpan& piece, std::span<const ByteSpan> masked) {
  return std::ranges::any_of(masked, [&](const ByteSpan& m) { return m.start < piece.end && piece.start < m.end; });
}

/// Terms of `pieces` inside `window`, outside `masked` and outside `hole`.
std::vector<std::string> collect(const std::vector<Piece>& pieces, ByteSpan window, std::span<const ByteSpan> masked,
                                 std::optional<ByteSpan> hole) {
  std::vector<std::string> out;
  for (const auto& p : pieces) {
    if (!is_term(p) || !window.contains(p.span) || overlaps(p.span, masked)) continue;
    if (hole && hole->start < p.span.end && p.span.start < hole->end) continue;
    out.push_back(p.text);
  }
  return out;
}

}  // namespace

std::string_view to_string(Rule rule) noexcept {
  switch (rule) {
    case Rule::Url: return "url";
    case Rule::SpecialTerm: return "special-term";
    case Rule::AutoReview: return "auto-review";
    case Rule::TooShort: return "too-short";
    case Rule::Reliance: return "reliance";
  }
  return "unknown";
}

RegexFilter::RegexFilter(RegexConfig config)
    : config_(std::move(config)),
      url_(R"((?:https?|ftp)://\S+|\bwww\.\S+)", std::regex::ECMAScript | std::regex::icase),
      special_(prefix_pattern(config_.special_terms)),
      review_(prefix_pattern(config_.auto_review_terms)) {}

Decision RegexFilter::check(std::string_view text) const {
  const std::string s(text);
  if (std::regex_search(s, url_)) return Decision::drop(Rule::Url);
  if (special_ && std::regex_search(s, *special_)) return Decision::drop(Rule::SpecialTerm);
  if (review_ && std::regex_search(s, *review_)) return Decision::drop(Rule::AutoReview);
  if (split_pieces(s).size() < config_.min_tokens) return Decision::drop(Rule::TooShort);
  return Decision::keep_it();
}

Decision regex_filter(std::string_view comment_text, const RegexConfig& config) {
  return RegexFilter(config).check(comment_text);
}

std::vector<std::string> terms_of(std::string_view text, std::span<const ByteSpan> masked) {
  return collect(split_pieces(text), {0, text.size()}, masked, std::nullopt);
}

TfidfModel TfidfModel::build(std::span<const std::vector<std::string>> documents) {
  if (documents.empty()) throw Error(ErrorCode::EmptyCorpus, "no documents for TF-IDF");
  TfidfModel m;
  m.n_docs_ = documents.size();
  for (const auto& doc : documents) {
    std::vector<std::string> uniq(doc);
    std::ranges::sort(uniq);
    const auto [first, last] = std::ranges::unique(uniq);
    uniq.erase(first, last);
    for (auto& t : uniq) ++m.df_[t];
  }
  return m;
}

std::size_t TfidfModel::df(const std::string& term) const {
  auto it = df_.find(term);
  return it == df_.end() ? 0 : it->second;
}

double TfidfModel::idf(const std::string& term) const {
  const std::size_t f = df(term);
  if (f == 0) return 0.0;
  return std::log(static_cast<double>(n_docs_) / (1.0 + static_cast<double>(f))) + 1.0;
}

SparseVector TfidfModel::vectorize(std::span<const std::string> terms) const {
  SparseVector v;
  if (terms.empty()) return v;
  std::map<std::string, std::size_t> counts;
  for (const auto& t : terms) ++counts[t];
  const double len = static_cast<double>(terms.size());
  for (const auto& [t, c] : counts) {
    const double w = idf(t);
    if (w != 0.0) v.emplace(t, static_cast<double>(c) / len * w);
  }
  return v;
}

nlohmann::json TfidfModel::to_json() const {
  nlohmann::json j;
  j["n_docs"] = n_docs_;
  j["df"] = df_;
  return j;
}

TfidfModel TfidfModel::from_json(const nlohmann::json& j) {
  try {
    TfidfModel m;
    m.n_docs_ = j.at("n_docs").get<std::size_t>();
    m.df_ = j.at("df").get<std::map<std::string, std::size_t>>();
    if (m.n_docs_ == 0) throw Error(ErrorCode::EmptyCorpus, "TF-IDF model has no documents");
    for (const auto& [t, f] : m.df_)
      if (f == 0 || f > m.n_docs_) throw Error(ErrorCode::FormatError, "bad document frequency for '" + t + "'");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("bad TF-IDF model: ") + e.what());
  }
}

double cosine(const SparseVector& a, const SparseVector& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [t, w] : a) {
    na += w * w;
    if (auto it = b.find(t); it != b.end()) dot += w * it->second;
  }
  for (const auto& [t, w] : b) nb += w * w;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

TfidfModel build_tfidf(std::span<const FunctionAnalysis> functions) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(functions.size());
  for (const auto& f : functions) docs.push_back(terms_of(f.function.source_text, f.comment_spans));
  return TfidfModel::build(docs);
}

RelianceScores reliance_scores(const CorpusRecord& record, std::span<const ByteSpan> masked,
                               const TfidfModel& model) {
  RelianceScores s;
  const auto& src = record.function_source;
  const auto pieces = split_pieces(src);
  const auto comment = model.vectorize(terms_of(record.comment_text));
  for (const auto& c : record.candidate_spans)
    s.snippet = std::max(s.snippet, cosine(comment, model.vectorize(collect(pieces, c.bytes, masked, std::nullopt))));
  if (!record.candidate_spans.empty()) {
    const ByteSpan outer = record.candidate_spans.back().bytes;
    s.rest = cosine(comment, model.vectorize(collect(pieces, {0, src.size()}, masked, outer)));
  }
  return s;
}

Decision reliance_filter(const CorpusRecord& record, std::span<const ByteSpan> masked, const TfidfModel& model,
                         double margin) {
  const auto s = reliance_scores(record, masked, model);
  return s.snippet + margin < s.rest ? Decision::drop(Rule::Reliance) : Decision::keep_it();
}

nlohmann::ordered_json FilterReport::to_json() const {
  nlohmann::ordered_json j;
  j["input"] = input;
  j["kept"] = kept;
  j["dropped_by_rule"] = nlohmann::ordered_json::object();
  for (const auto& [rule, n] : dropped_by_rule) j["dropped_by_rule"][rule] = n;
  j["dropped_pair_ids"] = dropped_pair_ids;
  return j;
}

FilterResult filter_corpus(std::span<const CorpusRecord> records, std::span<const FunctionAnalysis> functions,
                           const TfidfModel& model, const FilterConfig& config) {
  std::unordered_map<std::string_view, const FunctionAnalysis*> by_id;
  for (const auto& f : functions) by_id.emplace(f.function.id, &f);

  const RegexFilter regex(config.regex);
  std::vector<Decision> decisions(records.size());
  parallel_for(records.size(), config.jobs, [&](std::size_t i) {
    const auto& r = records[i];
    Decision d = regex.check(r.comment_text);
    if (d.keep && config.reliance) {
      auto it = by_id.find(r.function_id);
      if (it == by_id.end()) throw Error(ErrorCode::FunctionMissing, "no analysis for " + r.function_id);
      d = reliance_filter(r, it->second->comment_spans, model, config.margin);
    }
    decisions[i] = d;
  });

  FilterResult out;
  out.report.input = records.size();
  for (Rule r : {Rule::Url, Rule::SpecialTerm, Rule::AutoReview, Rule::TooShort, Rule::Reliance})
    out.report.dropped_by_rule[std::string(to_string(r))] = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (decisions[i].keep) {
      out.records.push_back(records[i]);
      continue;
    }
    ++out.report.dropped_by_rule[std::string(to_string(*decisions[i].reason))];
    out.report.dropped_pair_ids.push_back(records[i].pair_id);
  }
  out.report.kept = out.records.size();
  return out;
}

}  // namespace mgcs::filter
