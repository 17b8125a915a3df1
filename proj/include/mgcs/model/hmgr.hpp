#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mgcs/autodiff/tape.hpp"
#include "mgcs/corpus/types.hpp"
#include "mgcs/encoder/encoder.hpp"

namespace mgcs::hmgr {

enum class Mode {
  Hierarchical,  // LayerNorm(root + W . mean(children)) bottom-up
  MeanPool,      // plain mean over each snippet's tokens (the no-HMGR ablation)
};

/// Half-open range of token indices lying inside a snippet.
struct TokenRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool empty() const noexcept { return begin == end; }
  std::size_t size() const noexcept { return end - begin; }
};

/// Tokens whose byte span lies entirely inside each snippet's span.
std::vector<TokenRange> token_ranges(std::span<const Snippet> snippets, std::span<const ByteSpan> offsets);

/// Mean of the token rows (rows 1..n of `emb`) inside `span`.
/// Throws EmptyStatement when no token survives truncation inside it.
Vector pool_statement(const EmbeddingMatrix& emb, ByteSpan span, std::span<const ByteSpan> offsets);

/// LayerNorm(root + W . mean(children)); LayerNorm(root) with no children.
Vector aggregate_node(std::span<const double> root, std::span<const Vector> children, const EncoderParams& params);

/// Records one function's snippet representations on a tape, memoized per
/// node so each aggregation happens once.
class FunctionGraph {
 public:
  FunctionGraph(ad::Tape& tape, std::span<const Snippet> snippets, const HierarchyIndex& hierarchy,
                std::span<const ByteSpan> token_offsets, std::span<const ad::Var> token_vars, Mode mode);

  /// nullopt when no token of the snippet survived truncation.
  std::optional<ad::Var> snippet(std::size_t index);

  std::size_t size() const noexcept { return snippets_.size(); }

 private:
  std::optional<ad::Var> build(std::size_t index);
  std::optional<ad::Var> mean_of(std::span<const std::size_t> tokens);

  ad::Tape& tape_;
  std::span<const Snippet> snippets_;
  const HierarchyIndex& hierarchy_;
  std::span<const ad::Var> token_vars_;
  Mode mode_;
  std::vector<TokenRange> ranges_;
  std::vector<std::optional<std::optional<ad::Var>>> memo_;
};

struct SnippetEmbedding {
  std::string snippet_id;
  Granularity granularity = Granularity::Statement;
  Vector vector;
};

/// Every snippet of a function, in input order; nullopt for snippets left
/// without tokens by truncation.
std::vector<std::optional<SnippetEmbedding>> represent_function(std::span<const Snippet> snippets,
                                                                const HierarchyIndex& hierarchy,
                                                                const EmbeddingMatrix& emb,
                                                                std::span<const ByteSpan> offsets,
                                                                const EncoderParams& params, Mode mode);

/// One snippet. Throws EmptyStatement when it has no tokens.
SnippetEmbedding represent_snippet(std::size_t index, std::span<const Snippet> snippets,
                                   const HierarchyIndex& hierarchy, const EmbeddingMatrix& emb,
                                   std::span<const ByteSpan> offsets, const EncoderParams& params, Mode mode);

}  // namespace mgcs::hmgr
