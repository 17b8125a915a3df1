#pragma once

#include <string>
#include <vector>

#include "mgcs/common/rng.hpp"
#include "mgcs/corpus/types.hpp"
#include "mgcs/encoder/tokenizer.hpp"

namespace mgcs {

struct RandomTreeOptions {
  std::size_t max_depth = 4;   // levels including the function root
  std::size_t max_nodes = 20;
  std::size_t max_children = 3;
  std::size_t max_direct_tokens = 3;
  std::size_t vocab = 64;      // token ids drawn from [0, vocab)
  bool force_nested_blocks = false;  // guarantee function -> block -> block -> statement
};

/// A function-shaped hierarchy with a token layout, without source text.
/// Token i occupies bytes [2i, 2i + 1); snippets span their tokens.
struct SyntheticFunction {
  std::string id;
  std::vector<Snippet> snippets;  // pre-order
  HierarchyIndex hierarchy;
  std::vector<TokenId> tokens;
  std::vector<ByteSpan> offsets;
};

SyntheticFunction random_function(Rng& rng, const RandomTreeOptions& options, const std::string& id = "synthetic");

}  // namespace mgcs
