#include "mgcs/model/indexer.hpp"

#include <cmath>

#include "mgcs/common/error.hpp"
#include "mgcs/common/parallel.hpp"
#include "mgcs/encoder/encoder.hpp"
#include "mgcs/model/trainer.hpp"
#include "mgcs/simd/kernels.hpp"

namespace mgcs::offline {

search::CorpusIndex build_index(std::span<const FunctionAnalysis> functions, const EncoderParams& params,
                                hmgr::Mode mode, unsigned jobs, BuildStats* stats, std::size_t max_code_tokens) {
  try {
    params.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::CheckpointMismatch, std::string("unusable checkpoint: ") + e.what());
  }
  const Tokenizer tokenizer = params.tokenizer();
  std::vector<std::vector<std::optional<hmgr::SnippetEmbedding>>> encoded(functions.size());
  parallel_for(functions.size(), jobs, [&](std::size_t i) {
    const auto& f = functions[i];
    const TokenSeq seq = train::function_tokens(f, tokenizer, max_code_tokens);
    const EmbeddingMatrix emb = encode_tokens(seq, params);
    encoded[i] = hmgr::represent_function(f.snippets, f.hierarchy, emb, seq.offsets, params, mode);
  });

  search::CorpusIndex index(params.d, fingerprint(params));
  BuildStats local;
  for (std::size_t i = 0; i < functions.size(); ++i) {
    ++local.functions;
    const auto& f = functions[i];
    for (std::size_t s = 0; s < f.snippets.size(); ++s) {
      if (!encoded[i][s]) {
        ++local.skipped_snippets;
        continue;
      }
      const Snippet& snip = f.snippets[s];
      index.add({snip.snippet_id, snip.function_id, snip.granularity, snip.bytes, snip.lines}, encoded[i][s]->vector);
    }
  }
  local.entries = index.size();
  if (stats) *stats = local;
  return index;
}

std::vector<search::EvalItem> make_evalset(std::span<const CorpusRecord> records) {
  std::vector<search::EvalItem> items;
  items.reserve(records.size());
  for (const auto& r : records) {
    if (r.candidate_spans.empty()) throw Error(ErrorCode::EmptyCandidates, "pair " + r.pair_id + " has no candidates");
    items.push_back({r.comment_text, r.candidate_spans.front().snippet_id, r.granularity});
  }
  return items;
}

std::vector<Attribution> attribute_snippets(std::string_view query, const FunctionAnalysis& function,
                                            const EncoderParams& params, hmgr::Mode mode,
                                            std::size_t max_code_tokens) {
  const TokenSeq seq = train::function_tokens(function, params.tokenizer(), max_code_tokens);
  ad::Tape tape(params);
  std::vector<ad::Var> tokens;
  for (TokenId t : seq.tokens) tokens.push_back(tape.embedding(t));
  hmgr::FunctionGraph graph(tape, function.snippets, function.hierarchy, seq.offsets, tokens, mode);

  std::vector<std::pair<std::size_t, ad::Var>> parts;
  for (std::size_t i = 0; i < function.snippets.size(); ++i) {
    if (function.snippets[i].granularity == Granularity::Function) continue;
    if (auto v = graph.snippet(i)) parts.emplace_back(i, *v);
  }
  auto fn = graph.snippet(function.hierarchy.root());
  if (!fn) throw Error(ErrorCode::EmptyStatement, "function " + function.function.id + " has no code tokens");
  const Vector q = encode_query(query, params);
  const ad::Var score = tape.dot(tape.constant(q), *fn);
  tape.backward(score, nullptr);

  std::vector<Attribution> out;
  double total = 0.0;
  for (const auto& [i, v] : parts) {
    const Snippet& s = function.snippets[i];
    Attribution a{s.snippet_id, s.granularity, s.bytes, s.lines, 0.0, 0.0};
    const auto g = tape.adjoint(v);
    const auto x = tape.value(v);
    a.gradient_norm = std::sqrt(simd::dot(g, g));
    a.contribution = a.gradient_norm * std::sqrt(simd::dot(x, x));
    total += a.contribution;
    out.push_back(std::move(a));
  }
  for (auto& a : out) a.contribution = total > 0.0 ? a.contribution / total : 1.0 / static_cast<double>(out.size());
  return out;
}

std::vector<Attribution> attribute_snippets(std::string_view query, std::string_view function_id,
                                            std::span<const FunctionAnalysis> functions, const EncoderParams& params,
                                            hmgr::Mode mode, std::size_t max_code_tokens) {
  for (const auto& f : functions)
    if (f.function.id == function_id) return attribute_snippets(query, f, params, mode, max_code_tokens);
  throw Error(ErrorCode::FunctionMissing, "function " + std::string(function_id) + " is not in the corpus");
}

}  // namespace mgcs::offline
