#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mgcs/common/types.hpp"

namespace mgcs {

struct SourceFunction {
  std::string id;
  std::string language;
  std::string source_text;
  std::string repo;
  std::string path;
};

struct Snippet {
  std::string snippet_id;
  std::string function_id;
  Granularity granularity = Granularity::Statement;
  ByteSpan bytes;
  LineSpan lines;
  std::optional<std::string> parent_id;
};

/// Containment tree over one function's snippets. Nodes are addressed by the
/// snippet's position in the vector the index was built from.
class HierarchyIndex {
 public:
  struct Node {
    std::optional<std::size_t> parent;
    std::vector<std::size_t> children;   // ordered by byte start
    std::vector<std::size_t> ancestors;  // sorted ascending
  };

  HierarchyIndex() = default;

  /// Builds from parent ids. Throws FormatError on unknown parents, cycles,
  /// a missing/duplicate root, or children escaping their parent's span.
  static HierarchyIndex build(std::span<const Snippet> snippets);

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  std::size_t root() const noexcept { return root_; }
  std::optional<std::size_t> find(std::string_view snippet_id) const;

  /// True when `a` is a strict ancestor of `b`.
  bool is_ancestor(std::size_t a, std::size_t b) const;
  /// True when one of the two is an ancestor of the other (or they are equal).
  bool nested(std::size_t a, std::size_t b) const;

  /// Post-order (children before parents), children visited in byte order.
  std::vector<std::size_t> bottom_up() const;

 private:
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::size_t root_ = 0;
};

enum class CommentKind { Docstring, Inline, Trailing };

std::string_view to_string(CommentKind kind) noexcept;
std::optional<CommentKind> parse_comment_kind(std::string_view s) noexcept;

struct CommentRecord {
  std::string comment_id;
  std::string function_id;
  CommentKind kind = CommentKind::Inline;
  std::string text;
  std::size_t anchor_line = 0;
  // Last line covered by the (possibly merged) comment group.
  std::size_t last_line = 0;
  // First line after the group holding code outside any comment; 0 if none.
  std::size_t next_code_line = 0;
};

struct AlignmentPair {
  std::string pair_id;
  CommentRecord comment;
  std::vector<std::string> candidates;
  Granularity granularity = Granularity::Function;
};

/// One candidate as serialized in the corpus file.
struct CandidateSpan {
  std::string snippet_id;
  ByteSpan bytes;
  LineSpan lines;
  std::optional<std::string> parent_id;
};

/// One line of the corpus JSONL.
struct CorpusRecord {
  std::string pair_id;
  std::string function_id;
  std::string language;
  std::string comment_text;
  CommentKind comment_kind = CommentKind::Inline;
  Granularity granularity = Granularity::Function;
  std::vector<CandidateSpan> candidate_spans;
  std::string function_source;
};

}  // namespace mgcs
