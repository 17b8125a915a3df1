#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mgcs/corpus/types.hpp"
#include "mgcs/extract/grammar.hpp"
#include "mgcs/extract/segmenter.hpp"

namespace mgcs {

struct ExtractOptions {
  std::size_t max_candidates = 4;
  unsigned jobs = 0;
};

struct ExtractStats {
  std::size_t files = 0;
  std::size_t functions = 0;
  std::size_t skipped_functions = 0;
  std::size_t comments = 0;
  std::size_t pairs = 0;
  std::map<std::string, std::size_t> pairs_by_kind;
  std::map<std::string, std::size_t> unaligned_by_kind;
};

struct ExtractResult {
  std::vector<CorpusRecord> records;
  ExtractStats stats;
};

/// Walks `root` (sorted, recursive) and cuts every top-level function out of
/// each file whose extension a grammar claims. Method bodies are dedented so
/// each function parses on its own. Unparsable files are counted and skipped.
std::vector<SourceFunction> collect_functions(const std::filesystem::path& root, const GrammarRegistry& grammars,
                                              ExtractStats* stats = nullptr, unsigned jobs = 0);

/// Runs analysis + alignment per function. Functions that fail to parse are
/// skipped and counted. Output is sorted by (path, function id).
ExtractResult extract_corpus(std::span<const SourceFunction> functions, const GrammarRegistry& grammars,
                             const ExtractOptions& options);

std::vector<CorpusRecord> to_records(const FunctionAnalysis& analysis, std::span<const AlignmentPair> pairs);

/// Re-analyzes each distinct function referenced by the corpus (sorted by
/// function id) and checks the recorded candidate spans still match.
std::vector<FunctionAnalysis> analyze_corpus_functions(std::span<const CorpusRecord> records,
                                                       const GrammarRegistry& grammars, unsigned jobs = 0);

}  // namespace mgcs
