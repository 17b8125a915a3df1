#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mgcs/corpus/types.hpp"
#include "mgcs/encoder/params.hpp"
#include "mgcs/extract/segmenter.hpp"
#include "mgcs/model/hmgr.hpp"
#include "mgcs/search/index.hpp"

namespace mgcs::offline {

struct BuildStats {
  std::size_t functions = 0;
  std::size_t entries = 0;
  std::size_t skipped_snippets = 0;  // no tokens left after truncation
};

/// Encodes every snippet of every function (in the given order, snippets in
/// pre-order). Throws CheckpointMismatch for unusable parameters.
search::CorpusIndex build_index(std::span<const FunctionAnalysis> functions, const EncoderParams& params,
                                hmgr::Mode mode, unsigned jobs = 0, BuildStats* stats = nullptr,
                                std::size_t max_code_tokens = kMaxCodeTokens);

/// One item per record; the gold snippet is the record's first (innermost) candidate.
std::vector<search::EvalItem> make_evalset(std::span<const CorpusRecord> records);

struct Attribution {
  std::string snippet_id;
  Granularity granularity = Granularity::Statement;
  ByteSpan bytes;
  LineSpan lines;
  double gradient_norm = 0.0;
  double contribution = 0.0;
};

/// Gradient of score(query, function vector) with respect to each Block and
/// Statement vector inside the function; contribution = |grad| * |vector|,
/// normalized to sum to 1 (uniform when every gradient vanishes).
std::vector<Attribution> attribute_snippets(std::string_view query, const FunctionAnalysis& function,
                                            const EncoderParams& params, hmgr::Mode mode,
                                            std::size_t max_code_tokens = kMaxCodeTokens);

/// Looks the function up by id first. Throws FunctionMissing.
std::vector<Attribution> attribute_snippets(std::string_view query, std::string_view function_id,
                                            std::span<const FunctionAnalysis> functions, const EncoderParams& params,
                                            hmgr::Mode mode, std::size_t max_code_tokens = kMaxCodeTokens);

}  // namespace mgcs::offline
