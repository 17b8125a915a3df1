#include "mgcs/corpus/types.hpp"

#include <algorithm>

#include "mgcs/common/error.hpp"

namespace mgcs {

HierarchyIndex HierarchyIndex::build(std::span<const Snippet> snippets) {
  HierarchyIndex index;
  index.nodes_.resize(snippets.size());
  for (std::size_t i = 0; i < snippets.size(); ++i) {
    auto [it, inserted] = index.by_id_.emplace(snippets[i].snippet_id, i);
    if (!inserted) throw Error(ErrorCode::FormatError, "duplicate snippet id " + snippets[i].snippet_id);
  }

  bool have_root = false;
  for (std::size_t i = 0; i < snippets.size(); ++i) {
    const auto& s = snippets[i];
    if (!s.parent_id) {
      if (have_root) throw Error(ErrorCode::FormatError, "more than one root snippet in " + s.function_id);
      have_root = true;
      index.root_ = i;
      continue;
    }
    auto parent = index.find(*s.parent_id);
    if (!parent) throw Error(ErrorCode::FormatError, "unknown parent " + *s.parent_id);
    if (!snippets[*parent].bytes.contains(s.bytes))
      throw Error(ErrorCode::FormatError, "snippet " + s.snippet_id + " escapes its parent span");
    index.nodes_[i].parent = *parent;
    index.nodes_[*parent].children.push_back(i);
  }
  if (!snippets.empty() && !have_root) throw Error(ErrorCode::FormatError, "no root snippet");

  for (std::size_t i = 0; i < snippets.size(); ++i) {
    auto& node = index.nodes_[i];
    std::ranges::stable_sort(node.children, [&](std::size_t a, std::size_t b) {
      return snippets[a].bytes.start < snippets[b].bytes.start;
    });
    std::optional<std::size_t> cur = node.parent;
    while (cur) {
      if (*cur == i || node.ancestors.size() > snippets.size())
        throw Error(ErrorCode::FormatError, "cycle through snippet " + snippets[i].snippet_id);
      node.ancestors.push_back(*cur);
      cur = index.nodes_[*cur].parent;
    }
    std::ranges::sort(node.ancestors);
  }
  return index;
}

std::optional<std::size_t> HierarchyIndex::find(std::string_view snippet_id) const {
  auto it = by_id_.find(std::string(snippet_id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

bool HierarchyIndex::is_ancestor(std::size_t a, std::size_t b) const {
  return std::ranges::binary_search(nodes_.at(b).ancestors, a);
}

bool HierarchyIndex::nested(std::size_t a, std::size_t b) const {
  return a == b || is_ancestor(a, b) || is_ancestor(b, a);
}

std::vector<std::size_t> HierarchyIndex::bottom_up() const {
  std::vector<std::size_t> order;
  if (nodes_.empty()) return order;
  order.reserve(nodes_.size());
  // Iterative post-order: (node, next child position).
  std::vector<std::pair<std::size_t, std::size_t>> stack{{root_, 0}};
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < nodes_[n].children.size()) {
      const std::size_t child = nodes_[n].children[next++];
      stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  return order;
}

std::string_view to_string(CommentKind kind) noexcept {
  switch (kind) {
    case CommentKind::Docstring: return "docstring";
    case CommentKind::Inline: return "inline";
    case CommentKind::Trailing: return "trailing";
  }
  return "unknown";
}

std::optional<CommentKind> parse_comment_kind(std::string_view s) noexcept {
  if (s == "docstring") return CommentKind::Docstring;
  if (s == "inline") return CommentKind::Inline;
  if (s == "trailing") return CommentKind::Trailing;
  return std::nullopt;
}

}  // namespace mgcs
