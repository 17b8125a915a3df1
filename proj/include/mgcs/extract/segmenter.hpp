#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "mgcs/corpus/types.hpp"
#include "mgcs/extract/grammar.hpp"

namespace mgcs {

struct Segmentation {
  std::vector<Snippet> snippets;  // pre-order, the Function snippet first
  HierarchyIndex hierarchy;
};

/// Everything one parse of a function yields.
struct FunctionAnalysis {
  SourceFunction function;
  std::vector<Snippet> snippets;
  HierarchyIndex hierarchy;
  std::vector<CommentRecord> comments;
  // Bytes of every comment and docstring; excluded from the encoder input.
  std::vector<ByteSpan> comment_spans;
};

/// Parses the function and keeps only block/statement structure.
/// Throws ParseError on syntax errors, UnsupportedLanguage on a grammar for
/// an unknown parser.
Segmentation parse_and_segment(const SourceFunction& func, const GrammarConfig& grammar);

std::vector<CommentRecord> classify_comments(const SourceFunction& func, const GrammarConfig& grammar);

FunctionAnalysis analyze_function(const SourceFunction& func, const GrammarConfig& grammar);

struct AlignStats {
  std::size_t aligned[3] = {0, 0, 0};    // indexed by CommentKind
  std::size_t unaligned[3] = {0, 0, 0};
};

/// Docstring -> the function; trailing -> the statement on its line; inline
/// -> the chain of blocks opening on the next code line, innermost first.
std::vector<AlignmentPair> align_comments(std::span<const CommentRecord> comments,
                                          std::span<const Snippet> snippets,
                                          const HierarchyIndex& hierarchy, std::size_t max_candidates,
                                          AlignStats* stats = nullptr);

/// Strips comment/string markers and collapses whitespace. Case is kept.
std::string normalize_comment(std::string_view raw);

}  // namespace mgcs
