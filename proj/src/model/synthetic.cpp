#include "mgcs/model/synthetic.hpp"

#include <algorithm>
#include <functional>

namespace mgcs {
namespace {

struct Shape {
  Granularity granularity;
  std::size_t direct = 0;
  std::vector<std::size_t> children;
};

}  // namespace

SyntheticFunction random_function(Rng& rng, const RandomTreeOptions& options, const std::string& id) {
  const std::size_t max_depth = std::max<std::size_t>(options.max_depth, options.force_nested_blocks ? 4 : 2);
  const std::size_t max_nodes = std::max<std::size_t>(options.max_nodes, options.force_nested_blocks ? 4 : 2);
  const auto draw = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng.below(hi - lo + 1)); };

  std::vector<Shape> shapes{{Granularity::Function, draw(0, options.max_direct_tokens), {}}};
  std::vector<std::size_t> depth{0};
  auto add = [&](std::size_t parent, Granularity g) {
    shapes.push_back({g, g == Granularity::Statement ? draw(1, 3) : draw(0, options.max_direct_tokens), {}});
    depth.push_back(depth[parent] + 1);
    shapes[parent].children.push_back(shapes.size() - 1);
    return shapes.size() - 1;
  };
  if (options.force_nested_blocks) {
    const std::size_t outer = add(0, Granularity::Block);
    const std::size_t inner = add(outer, Granularity::Block);
    add(inner, Granularity::Statement);
  }
  // Breadth-first growth until the node budget runs out.
  for (std::size_t n = 0; n < shapes.size() && shapes.size() < max_nodes; ++n) {
    if (shapes[n].granularity == Granularity::Statement || depth[n] + 1 >= max_depth) continue;
    const std::size_t count = draw(n == 0 ? 1 : 0, options.max_children);
    for (std::size_t c = 0; c < count && shapes.size() < max_nodes; ++c) {
      const bool leaf_level = depth[n] + 2 >= max_depth;
      add(n, leaf_level || rng.below(2) == 0 ? Granularity::Statement : Granularity::Block);
    }
  }
  for (auto& s : shapes)
    if (s.granularity != Granularity::Statement && s.children.empty() && s.direct == 0) s.direct = 1;

  SyntheticFunction out;
  out.id = id;
  std::size_t block_no = 0, stmt_no = 0;
  std::function<void(std::size_t, const std::optional<std::string>&)> emit = [&](std::size_t n,
                                                                               const std::optional<std::string>& parent) {
    const Shape& s = shapes[n];
    Snippet snip;
    snip.function_id = id;
    snip.granularity = s.granularity;
    snip.parent_id = parent;
    switch (s.granularity) {
      case Granularity::Function: snip.snippet_id = id + "::F0"; break;
      case Granularity::Block: snip.snippet_id = id + "::B" + std::to_string(block_no++); break;
      case Granularity::Statement: snip.snippet_id = id + "::S" + std::to_string(stmt_no++); break;
    }
    const std::size_t slot = out.snippets.size();
    out.snippets.push_back(snip);
    const std::size_t first = out.tokens.size();
    // Direct tokens go before, between or after children at random.
    std::vector<std::size_t> gaps(s.children.size() + 1, 0);
    for (std::size_t t = 0; t < s.direct; ++t) ++gaps[rng.below(gaps.size())];
    for (std::size_t c = 0; c <= s.children.size(); ++c) {
      for (std::size_t t = 0; t < gaps[c]; ++t) {
        const std::size_t i = out.tokens.size();
        out.tokens.push_back(static_cast<TokenId>(rng.below(options.vocab)));
        out.offsets.push_back({2 * i, 2 * i + 1});
      }
      if (c < s.children.size()) emit(s.children[c], out.snippets[slot].snippet_id);
    }
    const std::size_t last = out.tokens.size() - 1;
    out.snippets[slot].bytes = {2 * first, 2 * last + 1};
    out.snippets[slot].lines = {first + 1, s.granularity == Granularity::Statement ? first + 1 : last + 1};
  };
  emit(0, std::nullopt);
  out.hierarchy = HierarchyIndex::build(out.snippets);
  return out;
}

}  // namespace mgcs
