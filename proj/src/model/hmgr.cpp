#include "mgcs/model/hmgr.hpp"

#include <algorithm>
#include <numeric>

#include "mgcs/common/error.hpp"
#include "mgcs/encoder/ops.hpp"

namespace mgcs::hmgr {
namespace {

TokenRange range_in(ByteSpan span, std::span<const ByteSpan> offsets) {
  auto first = std::ranges::partition_point(offsets, [&](const ByteSpan& o) { return o.start < span.start; });
  auto last = std::ranges::partition_point(first, offsets.end(), [&](const ByteSpan& o) { return o.end <= span.end; });
  return {static_cast<std::size_t>(first - offsets.begin()), static_cast<std::size_t>(last - offsets.begin())};
}

std::vector<ad::Var> token_constants(ad::Tape& tape, const EmbeddingMatrix& emb) {
  std::vector<ad::Var> vars;
  vars.reserve(emb.token_count());
  for (std::size_t i = 0; i < emb.token_count(); ++i) vars.push_back(tape.constant(emb.row(i + 1)));
  return vars;
}

}  // namespace

std::vector<TokenRange> token_ranges(std::span<const Snippet> snippets, std::span<const ByteSpan> offsets) {
  std::vector<TokenRange> out;
  out.reserve(snippets.size());
  for (const auto& s : snippets) out.push_back(range_in(s.bytes, offsets));
  return out;
}

Vector pool_statement(const EmbeddingMatrix& emb, ByteSpan span, std::span<const ByteSpan> offsets) {
  const TokenRange r = range_in(span, offsets);
  if (r.empty())
    throw Error(ErrorCode::EmptyStatement,
                "no tokens in bytes [" + std::to_string(span.start) + ", " + std::to_string(span.end) + ")");
  std::vector<std::span<const double>> rows;
  for (std::size_t i = r.begin; i < r.end; ++i) rows.push_back(emb.row(i + 1));
  Vector out(emb.d);
  ops::mean_rows(rows, out);
  return out;
}

Vector aggregate_node(std::span<const double> root, std::span<const Vector> children, const EncoderParams& params) {
  if (root.size() != params.d) throw Error(ErrorCode::DimensionMismatch, "root vector must have size d");
  Vector pre(root.begin(), root.end());
  if (!children.empty()) {
    std::vector<std::span<const double>> rows;
    for (const auto& c : children) {
      if (c.size() != params.d) throw Error(ErrorCode::DimensionMismatch, "child vector must have size d");
      rows.push_back(c);
    }
    Vector m(params.d), proj(params.d);
    ops::mean_rows(rows, m);
    ops::matvec(params.hmgr_W, m, proj);
    for (std::size_t i = 0; i < params.d; ++i) pre[i] = root[i] + proj[i];
  }
  Vector out(params.d);
  ops::layer_norm(pre, params.layernorm_gain, params.layernorm_bias, kLayerNormEps, out);
  return out;
}

FunctionGraph::FunctionGraph(ad::Tape& tape, std::span<const Snippet> snippets, const HierarchyIndex& hierarchy,
                             std::span<const ByteSpan> token_offsets, std::span<const ad::Var> token_vars, Mode mode)
    : tape_(tape),
      snippets_(snippets),
      hierarchy_(hierarchy),
      token_vars_(token_vars),
      mode_(mode),
      ranges_(token_ranges(snippets, token_offsets)),
      memo_(snippets.size()) {
  if (hierarchy.size() != snippets.size())
    throw Error(ErrorCode::DimensionMismatch, "hierarchy does not match the snippet list");
  if (token_offsets.size() != token_vars.size())
    throw Error(ErrorCode::DimensionMismatch, "token offsets and embeddings differ in length");
}

std::optional<ad::Var> FunctionGraph::snippet(std::size_t index) {
  if (index >= snippets_.size()) throw Error(ErrorCode::FormatError, "snippet index out of range");
  // Post-order over the subtree so deep hierarchies do not recurse.
  std::vector<std::pair<std::size_t, bool>> stack{{index, false}};
  while (!stack.empty()) {
    auto [n, expanded] = stack.back();
    stack.pop_back();
    if (memo_[n]) continue;
    if (expanded || mode_ == Mode::MeanPool || snippets_[n].granularity == Granularity::Statement) {
      memo_[n] = build(n);
      continue;
    }
    stack.emplace_back(n, true);
    const auto& children = hierarchy_.node(n).children;
    for (auto it = children.rbegin(); it != children.rend(); ++it)
      if (!memo_[*it]) stack.emplace_back(*it, false);
  }
  return *memo_[index];
}

std::optional<ad::Var> FunctionGraph::mean_of(std::span<const std::size_t> tokens) {
  if (tokens.empty()) return std::nullopt;
  std::vector<ad::Var> vars;
  vars.reserve(tokens.size());
  for (std::size_t t : tokens) vars.push_back(token_vars_[t]);
  return tape_.mean(vars);
}

std::optional<ad::Var> FunctionGraph::build(std::size_t n) {
  const TokenRange r = ranges_[n];
  std::vector<std::size_t> all(r.size());
  std::iota(all.begin(), all.end(), r.begin);
  if (mode_ == Mode::MeanPool || snippets_[n].granularity == Granularity::Statement) return mean_of(all);

  std::vector<ad::Var> children;
  std::vector<char> covered(r.size(), 0);
  for (std::size_t c : hierarchy_.node(n).children) {
    for (std::size_t t = ranges_[c].begin; t < ranges_[c].end; ++t) covered[t - r.begin] = 1;
    if (auto v = *memo_[c]) children.push_back(*v);
  }
  std::vector<std::size_t> direct;
  for (std::size_t t = r.begin; t < r.end; ++t)
    if (!covered[t - r.begin]) direct.push_back(t);

  auto root = mean_of(direct.empty() ? all : direct);
  if (!root) return std::nullopt;
  ad::Var pre = children.empty() ? *root : tape_.add(*root, tape_.project(tape_.mean(children)));
  return tape_.layer_norm(pre);
}

std::vector<std::optional<SnippetEmbedding>> represent_function(std::span<const Snippet> snippets,
                                                                const HierarchyIndex& hierarchy,
                                                                const EmbeddingMatrix& emb,
                                                                std::span<const ByteSpan> offsets,
                                                                const EncoderParams& params, Mode mode) {
  ad::Tape tape(params);
  const auto vars = token_constants(tape, emb);
  FunctionGraph graph(tape, snippets, hierarchy, offsets, vars, mode);
  std::vector<std::optional<SnippetEmbedding>> out(snippets.size());
  for (std::size_t i : hierarchy.bottom_up()) {
    if (auto v = graph.snippet(i))
      out[i] = SnippetEmbedding{snippets[i].snippet_id, snippets[i].granularity, tape.copy(*v)};
  }
  return out;
}

SnippetEmbedding represent_snippet(std::size_t index, std::span<const Snippet> snippets,
                                   const HierarchyIndex& hierarchy, const EmbeddingMatrix& emb,
                                   std::span<const ByteSpan> offsets, const EncoderParams& params, Mode mode) {
  ad::Tape tape(params);
  const auto vars = token_constants(tape, emb);
  FunctionGraph graph(tape, snippets, hierarchy, offsets, vars, mode);
  auto v = graph.snippet(index);
  if (!v) throw Error(ErrorCode::EmptyStatement, "snippet " + snippets[index].snippet_id + " has no tokens");
  return {snippets[index].snippet_id, snippets[index].granularity, tape.copy(*v)};
}

}  // namespace mgcs::hmgr
