#pragma once

#include <map>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mgcs/corpus/types.hpp"
#include "mgcs/encoder/tokenizer.hpp"
#include "mgcs/extract/segmenter.hpp"

namespace mgcs::filter {

enum class Rule { Url, SpecialTerm, AutoReview, TooShort, Reliance };

std::string_view to_string(Rule rule) noexcept;

struct Decision {
  bool keep = true;
  std::optional<Rule> reason;

  static Decision keep_it() { return {}; }
  static Decision drop(Rule r) { return {false, r}; }
};

struct RegexConfig {
  std::vector<std::string> special_terms{"TODO", "FIXME", "XXX", "HACK", "NOTE:"};
  std::vector<std::string> auto_review_terms{"lint", "linter", "noqa", "pylint", "eslint", "checkstyle"};
  std::size_t min_tokens = 4;
};

/// The four comment-text rules, checked in order url, special-term,
/// auto-review, too-short.
class RegexFilter {
 public:
  explicit RegexFilter(RegexConfig config = {});

  Decision check(std::string_view comment_text) const;
  const RegexConfig& config() const noexcept { return config_; }

 private:
  RegexConfig config_;
  std::regex url_;
  std::optional<std::regex> special_;
  std::optional<std::regex> review_;
};

Decision regex_filter(std::string_view comment_text, const RegexConfig& config = {});

/// Sparse TF-IDF vector keyed by term; ordered so sums are deterministic.
using SparseVector = std::map<std::string, double>;

/// Lowercased alphanumeric identifier pieces of `text`, skipping bytes
/// inside `masked` (sorted by start).
std::vector<std::string> terms_of(std::string_view text, std::span<const ByteSpan> masked = {});

class TfidfModel {
 public:
  TfidfModel() = default;

  /// Throws EmptyCorpus for no documents.
  static TfidfModel build(std::span<const std::vector<std::string>> documents);

  std::size_t n_docs() const noexcept { return n_docs_; }
  std::size_t df(const std::string& term) const;
  /// ln(n / (1 + df)) + 1 for seen terms; 0 for unseen ones.
  double idf(const std::string& term) const;

  /// tf = count / bag size; unseen terms are left out.
  SparseVector vectorize(std::span<const std::string> terms) const;

  nlohmann::json to_json() const;
  static TfidfModel from_json(const nlohmann::json& j);

 private:
  std::size_t n_docs_ = 0;
  std::map<std::string, std::size_t> df_;
};

/// 0 when either side is the zero vector.
double cosine(const SparseVector& a, const SparseVector& b);

/// One document per distinct function: its code terms with comments masked.
TfidfModel build_tfidf(std::span<const FunctionAnalysis> functions);

struct RelianceScores {
  double snippet = 0.0;  // max over candidates
  double rest = 0.0;     // function with the outermost candidate excised
};

RelianceScores reliance_scores(const CorpusRecord& record, std::span<const ByteSpan> masked,
                               const TfidfModel& model);

/// Drops iff snippet + margin < rest.
Decision reliance_filter(const CorpusRecord& record, std::span<const ByteSpan> masked, const TfidfModel& model,
                         double margin);

struct FilterConfig {
  RegexConfig regex;
  double margin = 0.0;
  bool reliance = true;
  unsigned jobs = 0;
};

struct FilterReport {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::map<std::string, std::size_t> dropped_by_rule;
  std::vector<std::string> dropped_pair_ids;

  nlohmann::ordered_json to_json() const;
};

struct FilterResult {
  std::vector<CorpusRecord> records;
  FilterReport report;
};

/// `functions` must cover every function id in `records` (as produced by
/// analyze_corpus_functions). Output keeps input order.
FilterResult filter_corpus(std::span<const CorpusRecord> records, std::span<const FunctionAnalysis> functions,
                           const TfidfModel& model, const FilterConfig& config);

}  // namespace mgcs::filter
