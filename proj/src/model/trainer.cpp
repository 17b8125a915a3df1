#include "mgcs/model/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <unordered_map>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "mgcs/common/error.hpp"
#include "mgcs/encoder/ops.hpp"
#include "mgcs/simd/kernels.hpp"

namespace mgcs::train {
namespace {

const EncoderParams& no_params() {
  static const EncoderParams p{};
  return p;
}

std::size_t gi(Granularity g) { return static_cast<std::size_t>(g); }

}  // namespace

// ---- config ----------------------------------------------------------------

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::ConfigError, m); };
  if (!(tau > 0.0) || !std::isfinite(tau)) fail("tau must be positive");
  if (!(alpha >= 0.0) || !(beta >= 0.0)) fail("alpha and beta must be non-negative");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
  if (!(max_grad_norm >= 0.0)) fail("max_grad_norm must be non-negative");
  if (d == 0 || d > 4096) fail("d must be in [1, 4096]");
  if (!(init_scale > 0.0)) fail("init_scale must be positive");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) fail("holdout_fraction must be in [0, 1)");
  if (max_code_tokens == 0 || max_query_tokens == 0) fail("token limits must be positive");
}

bool TrainConfig::enabled(Granularity g) const {
  if (g == Granularity::Block) return !flags.disable_block_loss;
  if (g == Granularity::Statement) return !flags.disable_statement_loss;
  return true;
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["alpha"] = alpha;
  j["beta"] = beta;
  j["tau"] = tau;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["max_grad_norm"] = max_grad_norm;
  j["epochs"] = epochs;
  j["seed"] = seed;
  j["d"] = d;
  j["init_scale"] = init_scale;
  j["k_in_function"] = k_in_function;
  j["holdout_fraction"] = holdout_fraction;
  j["patience"] = patience;
  j["max_code_tokens"] = max_code_tokens;
  j["max_query_tokens"] = max_query_tokens;
  j["disable_hmgr"] = flags.disable_hmgr;
  j["disable_maxsim"] = flags.disable_maxsim;
  j["disable_infunction_negatives"] = flags.disable_infunction_negatives;
  j["disable_block_loss"] = flags.disable_block_loss;
  j["disable_statement_loss"] = flags.disable_statement_loss;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j, TrainConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "training config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "alpha") c.alpha = v.get<double>();
      else if (key == "beta") c.beta = v.get<double>();
      else if (key == "tau") c.tau = v.get<double>();
      else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (key == "learning_rate") c.learning_rate = v.get<double>();
      else if (key == "max_grad_norm") c.max_grad_norm = v.get<double>();
      else if (key == "epochs") c.epochs = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "d") c.d = v.get<std::size_t>();
      else if (key == "init_scale") c.init_scale = v.get<double>();
      else if (key == "k_in_function") c.k_in_function = v.get<std::size_t>();
      else if (key == "holdout_fraction") c.holdout_fraction = v.get<double>();
      else if (key == "patience") c.patience = v.get<std::size_t>();
      else if (key == "max_code_tokens") c.max_code_tokens = v.get<std::size_t>();
      else if (key == "max_query_tokens") c.max_query_tokens = v.get<std::size_t>();
      else if (key == "disable_hmgr") c.flags.disable_hmgr = v.get<bool>();
      else if (key == "disable_maxsim") c.flags.disable_maxsim = v.get<bool>();
      else if (key == "disable_infunction_negatives") c.flags.disable_infunction_negatives = v.get<bool>();
      else if (key == "disable_block_loss") c.flags.disable_block_loss = v.get<bool>();
      else if (key == "disable_statement_loss") c.flags.disable_statement_loss = v.get<bool>();
      else throw Error(ErrorCode::ConfigError, "unknown training option '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("bad training config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) { return from_json(j, TrainConfig{}); }

// ---- loss pieces -----------------------------------------------------------

double score(std::span<const double> q, std::span<const double> c) {
  if (q.size() != c.size())
    throw Error(ErrorCode::DimensionMismatch,
                "score over sizes " + std::to_string(q.size()) + " and " + std::to_string(c.size()));
  return simd::dot(q, c);
}

MaxSimResult maxsim(std::span<const double> q, std::span<const Vector> candidates) {
  if (candidates.empty()) throw Error(ErrorCode::EmptyCandidates, "maxsim over no candidates");
  MaxSimResult best{score(q, candidates[0]), 0};
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double s = score(q, candidates[i]);
    if (s > best.score) best = {s, i};
  }
  return best;
}

double infonce(double pos, std::span<const double> negs, double tau) {
  if (!(tau > 0.0)) throw Error(ErrorCode::ConfigError, "temperature must be positive");
  return ops::info_nce(pos, negs, tau);
}

double combine_losses(double L_f, double L_b, double L_s, const TrainConfig& cfg) {
  return L_f + cfg.alpha * L_b + cfg.beta * L_s;
}

std::vector<std::size_t> select_in_function_negatives(std::size_t anchor, std::span<const Snippet> snippets,
                                                      const HierarchyIndex& hierarchy, std::size_t k, Rng& rng,
                                                      std::span<const char> eligible) {
  if (anchor >= snippets.size()) throw Error(ErrorCode::FormatError, "anchor outside the function");
  const Granularity g = snippets[anchor].granularity;
  if (g == Granularity::Function || k == 0) return {};
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < snippets.size(); ++i) {
    if (snippets[i].granularity != g || hierarchy.nested(anchor, i)) continue;
    if (!eligible.empty() && !eligible[i]) continue;
    pool.push_back(i);
  }
  if (pool.size() <= k) return pool;
  // Partial Fisher-Yates: the first k slots end up a uniform sample.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

TapeLoss batch_loss(ad::Tape& tape, std::span<const ExampleVars> examples, const TrainConfig& cfg) {
  if (examples.empty()) throw Error(ErrorCode::EmptyBatch, "batch has no examples");
  TapeLoss out;
  out.positive.assign(examples.size(), 0);

  // Resolve positives first: in-batch negatives need every example's choice.
  std::vector<ad::Var> pos_score(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    if (ex.candidates.empty()) throw Error(ErrorCode::EmptyCandidates, "example without candidates");
    if (!cfg.enabled(ex.granularity)) continue;
    std::size_t best = ex.candidates.size() - 1;
    if (!cfg.flags.disable_maxsim) {
      double best_score = 0.0;
      for (std::size_t c = 0; c < ex.candidates.size(); ++c) {
        const double s = simd::dot(tape.value(ex.query), tape.value(ex.candidates[c]));
        if (c == 0 || s > best_score) {
          best = c;
          best_score = s;
        }
      }
    }
    out.positive[i] = best;
    pos_score[i] = tape.dot(ex.query, ex.candidates[best]);
  }

  std::vector<ad::Var> parts;
  std::vector<double> weights;
  const double granularity_weight[kGranularityCount] = {1.0, cfg.alpha, cfg.beta};
  double* slots[kGranularityCount] = {&out.values.L_f, &out.values.L_b, &out.values.L_s};
  for (Granularity g : {Granularity::Function, Granularity::Block, Granularity::Statement}) {
    if (!cfg.enabled(g)) continue;
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < examples.size(); ++i)
      if (examples[i].granularity == g) members.push_back(i);
    if (members.empty()) continue;

    std::vector<ad::Var> losses;
    for (std::size_t i : members) {
      const auto& ex = examples[i];
      std::vector<ad::Var> negs;
      std::unordered_set<std::string_view> used(ex.candidate_ids.begin(), ex.candidate_ids.end());
      for (std::size_t j : members) {
        if (j == i) continue;
        const auto& other = examples[j];
        if (!other.candidate_ids.empty()) {
          const std::string_view id = other.candidate_ids[out.positive[j]];
          if (!used.insert(id).second) continue;
        }
        negs.push_back(tape.dot(ex.query, other.candidates[out.positive[j]]));
      }
      if (!cfg.flags.disable_infunction_negatives)
        for (ad::Var n : ex.in_function_negatives) negs.push_back(tape.dot(ex.query, n));
      losses.push_back(tape.info_nce(pos_score[i], negs, cfg.tau));
    }
    const std::vector<double> mean_w(losses.size(), 1.0 / static_cast<double>(losses.size()));
    ad::Var L = tape.weighted_sum(losses, mean_w);
    *slots[gi(g)] = tape.scalar(L);
    out.values.count[gi(g)] = members.size();
    parts.push_back(L);
    weights.push_back(granularity_weight[gi(g)]);
  }
  if (parts.empty()) throw Error(ErrorCode::EmptyBatch, "batch has no example of an enabled granularity");
  out.total = tape.weighted_sum(parts, weights);
  out.values.total = tape.scalar(out.total);
  return out;
}

LossValues batch_loss(std::span<const TrainingExample> examples, const TrainConfig& cfg) {
  if (examples.empty()) throw Error(ErrorCode::EmptyBatch, "batch has no examples");
  ad::Tape tape(no_params());
  std::vector<ExampleVars> vars(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    auto& v = vars[i];
    v.granularity = ex.granularity;
    v.query = tape.constant(ex.query);
    for (const auto& c : ex.candidates) {
      if (c.size() != ex.query.size()) throw Error(ErrorCode::DimensionMismatch, "candidate size differs from query");
      v.candidates.push_back(tape.constant(c));
    }
    for (const auto& id : ex.candidate_ids) v.candidate_ids.push_back(id);
    if (!v.candidate_ids.empty() && v.candidate_ids.size() != v.candidates.size())
      throw Error(ErrorCode::DimensionMismatch, "candidate ids do not match candidates");
    for (const auto& n : ex.in_function_negatives) {
      if (n.size() != ex.query.size()) throw Error(ErrorCode::DimensionMismatch, "negative size differs from query");
      v.in_function_negatives.push_back(tape.constant(n));
    }
  }
  return batch_loss(tape, vars, cfg).values;
}

// ---- data --------------------------------------------------------------------

TapeLoss record_batch(ad::Tape& tape, std::span<const FunctionView> functions, std::span<const PairView> batch,
                      const TrainConfig& cfg, Rng& rng) {
  struct Encoded {
    std::vector<ad::Var> tokens;
    std::unique_ptr<hmgr::FunctionGraph> graph;
    std::vector<char> eligible;
  };
  std::map<std::size_t, Encoded> encoded;
  auto function = [&](std::size_t f) -> Encoded& {
    auto [it, fresh] = encoded.try_emplace(f);
    if (fresh) {
      const FunctionView& view = functions[f];
      for (TokenId t : view.tokens) it->second.tokens.push_back(tape.embedding(t));
      it->second.graph = std::make_unique<hmgr::FunctionGraph>(tape, view.snippets, *view.hierarchy, view.offsets,
                                                               it->second.tokens, cfg.mode());
      for (const auto& r : hmgr::token_ranges(view.snippets, view.offsets)) it->second.eligible.push_back(!r.empty());
    }
    return it->second;
  };

  std::vector<ExampleVars> examples;
  examples.reserve(batch.size());
  for (const PairView& p : batch) {
    if (!cfg.enabled(p.granularity)) continue;
    if (p.query.empty() || p.candidates.empty())
      throw Error(ErrorCode::EmptyCandidates, "pair without query tokens or candidates");
    Encoded& enc = function(p.function);
    const FunctionView& view = functions[p.function];
    ExampleVars ex;
    ex.granularity = p.granularity;
    std::vector<ad::Var> q;
    for (TokenId t : p.query) q.push_back(tape.embedding(t));
    ex.query = tape.mean(q);
    for (std::size_t c : p.candidates) {
      auto v = enc.graph->snippet(c);
      if (!v) throw Error(ErrorCode::EmptyStatement, "candidate " + view.snippets[c].snippet_id + " has no tokens");
      ex.candidates.push_back(*v);
      ex.candidate_ids.push_back(view.snippets[c].snippet_id);
    }
    if (!cfg.flags.disable_infunction_negatives) {
      for (std::size_t n : select_in_function_negatives(p.candidates.back(), view.snippets, *view.hierarchy,
                                                        cfg.k_in_function, rng, enc.eligible))
        ex.in_function_negatives.push_back(*enc.graph->snippet(n));
    }
    examples.push_back(std::move(ex));
  }
  return batch_loss(tape, examples, cfg);
}

TokenSeq function_tokens(const FunctionAnalysis& analysis, const Tokenizer& tokenizer, std::size_t limit) {
  return tokenizer.tokenize_masked(analysis.function.source_text, analysis.comment_spans, limit);
}

std::vector<FunctionView> TrainingData::views() const {
  std::vector<FunctionView> out;
  out.reserve(functions.size());
  for (const auto& f : functions) {
    const auto& a = analyses[f.analysis];
    out.push_back({a.snippets, &a.hierarchy, f.tokens.tokens, f.tokens.offsets});
  }
  return out;
}

PairView TrainingData::view(const PreparedPair& p) const {
  return {p.function, p.granularity, p.query.tokens, p.candidates};
}

TrainingData prepare_training_data(std::span<const CorpusRecord> records, std::vector<FunctionAnalysis> analyses,
                                   std::uint64_t tokenizer_seed, const TrainConfig& cfg) {
  const Tokenizer tokenizer(tokenizer_seed);
  TrainingData data;
  data.analyses = std::move(analyses);
  std::unordered_map<std::string_view, std::size_t> by_id;
  std::vector<std::vector<hmgr::TokenRange>> ranges;
  for (std::size_t i = 0; i < data.analyses.size(); ++i) {
    const auto& a = data.analyses[i];
    if (!by_id.emplace(a.function.id, i).second)
      throw Error(ErrorCode::FormatError, "function " + a.function.id + " analyzed twice");
    PreparedFunction f;
    f.analysis = i;
    f.tokens = function_tokens(a, tokenizer, cfg.max_code_tokens);
    ranges.push_back(hmgr::token_ranges(a.snippets, f.tokens.offsets));
    data.functions.push_back(std::move(f));
  }
  for (const auto& r : records) {
    auto it = by_id.find(r.function_id);
    if (it == by_id.end()) throw Error(ErrorCode::FunctionMissing, "no analysis for " + r.function_id);
    const auto& a = data.analyses[it->second];
    PreparedPair p;
    p.pair_id = r.pair_id;
    p.function = it->second;
    p.granularity = r.granularity;
    p.query = tokenizer.tokenize(r.comment_text, cfg.max_query_tokens);
    for (const auto& c : r.candidate_spans) {
      auto idx = a.hierarchy.find(c.snippet_id);
      if (!idx) throw Error(ErrorCode::FormatError, "unknown candidate " + c.snippet_id);
      if (!ranges[it->second][*idx].empty()) p.candidates.push_back(*idx);
    }
    if (p.query.empty() || p.candidates.empty()) {
      ++data.skipped_pairs;
      continue;
    }
    data.pairs.push_back(std::move(p));
  }
  return data;
}

HoldoutSplit split_holdout(const TrainingData& data, double fraction, std::uint64_t seed) {
  HoldoutSplit split;
  Rng rng(seed ^ 0x686f6c646f7574ULL);
  for (Granularity g : {Granularity::Function, Granularity::Block, Granularity::Statement}) {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < data.pairs.size(); ++i)
      if (data.pairs[i].granularity == g) ids.push_back(i);
    rng.shuffle(std::span(ids));
    std::size_t n_held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ids.size())));
    if (fraction > 0.0 && ids.size() >= 2) n_held = std::clamp<std::size_t>(n_held, 1, ids.size() - 1);
    split.held_out.insert(split.held_out.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_held));
    split.train.insert(split.train.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_held), ids.end());
  }
  std::ranges::sort(split.train);
  std::ranges::sort(split.held_out);
  return split;
}

// ---- training ----------------------------------------------------------------

nlohmann::ordered_json EpochMetrics::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["L_f"] = L_f;
  j["L_b"] = L_b;
  j["L_s"] = L_s;
  j["total"] = total;
  j["held_out_total"] = held_out_total ? nlohmann::ordered_json(*held_out_total) : nlohmann::ordered_json(nullptr);
  return j;
}

namespace {

struct Accumulator {
  double sum[4] = {0, 0, 0, 0};
  std::size_t batches = 0;

  void add(const LossValues& v) {
    sum[0] += v.L_f;
    sum[1] += v.L_b;
    sum[2] += v.L_s;
    sum[3] += v.total;
    ++batches;
  }
  LossValues mean() const {
    LossValues v;
    if (batches == 0) return v;
    const double n = static_cast<double>(batches);
    v.L_f = sum[0] / n;
    v.L_b = sum[1] / n;
    v.L_s = sum[2] / n;
    v.total = sum[3] / n;
    return v;
  }
};

double gradient_norm(const ad::Gradients& g) {
  double sq = simd::dot(g.hmgr_W, g.hmgr_W) + simd::dot(g.layernorm_gain, g.layernorm_gain) +
              simd::dot(g.layernorm_bias, g.layernorm_bias);
  for (const auto& [token, row] : g.embedding_rows) sq += simd::dot(row, row);
  return std::sqrt(sq);
}

void sgd_step(EncoderParams& params, const ad::Gradients& g, double lr, double max_norm) {
  if (max_norm > 0.0) {
    const double norm = gradient_norm(g);
    if (norm > max_norm) lr *= max_norm / norm;
  }
  for (const auto& [token, row] : g.embedding_rows) simd::axpy(-lr, row, params.embedding(token));
  simd::axpy(-lr, g.hmgr_W, params.hmgr_W);
  simd::axpy(-lr, g.layernorm_gain, params.layernorm_gain);
  simd::axpy(-lr, g.layernorm_bias, params.layernorm_bias);
}

bool batch_has_enabled(const TrainingData& data, std::span<const std::size_t> ids, const TrainConfig& cfg) {
  return std::ranges::any_of(ids, [&](std::size_t i) { return cfg.enabled(data.pairs[i].granularity); });
}

constexpr std::uint64_t kEvalSalt = 0x6576616c6e656773ULL;

}  // namespace

LossValues evaluate_loss(const EncoderParams& params, const TrainingData& data, std::span<const std::size_t> pairs,
                         const TrainConfig& cfg, std::uint64_t negative_seed) {
  const auto views = data.views();
  Rng rng(negative_seed);
  Accumulator acc;
  for (std::size_t start = 0; start < pairs.size(); start += cfg.batch_size) {
    const auto ids = pairs.subspan(start, std::min(cfg.batch_size, pairs.size() - start));
    if (!batch_has_enabled(data, ids, cfg)) continue;
    std::vector<PairView> batch;
    for (std::size_t i : ids) batch.push_back(data.view(data.pairs[i]));
    ad::Tape tape(params);
    acc.add(record_batch(tape, views, batch, cfg, rng).values);
  }
  return acc.mean();
}

TrainResult train(const TrainingData& data, const TrainConfig& cfg,
                  const std::function<void(const EpochMetrics&)>& on_epoch) {
  cfg.validate();
  std::size_t per[kGranularityCount] = {0, 0, 0};
  for (const auto& p : data.pairs) ++per[gi(p.granularity)];
  for (Granularity g : {Granularity::Function, Granularity::Block, Granularity::Statement})
    if (cfg.enabled(g) && per[gi(g)] == 0)
      throw Error(ErrorCode::DegenerateCorpus,
                  "no " + std::string(to_string(g)) + " pairs; disable that loss or extend the corpus");

  TrainResult result;
  result.split = split_holdout(data, cfg.holdout_fraction, cfg.seed);
  const auto& train_ids = result.split.train;
  const auto& held_ids = result.split.held_out;

  EncoderParams params = EncoderParams::initialize(cfg.d, cfg.seed, cfg.init_scale);
  const auto views = data.views();
  Rng order_rng(cfg.seed ^ 0x73687566666c65ULL);
  Rng negative_rng(cfg.seed ^ 0x6e65676174697665ULL);
  const std::uint64_t eval_seed = cfg.seed ^ kEvalSalt;

  auto record = [&](std::size_t epoch, const LossValues& v) {
    EpochMetrics m;
    m.epoch = epoch;
    m.L_f = v.L_f;
    m.L_b = v.L_b;
    m.L_s = v.L_s;
    m.total = v.total;
    if (!held_ids.empty()) m.held_out_total = evaluate_loss(params, data, held_ids, cfg, eval_seed).total;
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m);
    return m;
  };

  const EpochMetrics initial = record(0, evaluate_loss(params, data, train_ids, cfg, eval_seed));
  EncoderParams best = params;
  double best_held = initial.held_out_total.value_or(0.0);
  std::size_t since_best = 0;

  std::vector<std::size_t> order(train_ids);
  ad::Gradients grads(cfg.d);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(std::span(order));
    Accumulator acc;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto ids = std::span<const std::size_t>(order).subspan(start, std::min(cfg.batch_size, order.size() - start));
      if (!batch_has_enabled(data, ids, cfg)) continue;
      std::vector<PairView> batch;
      for (std::size_t i : ids) batch.push_back(data.view(data.pairs[i]));
      ad::Tape tape(params);
      const TapeLoss loss = record_batch(tape, views, batch, cfg, negative_rng);
      grads.clear();
      tape.backward(loss.total, &grads);
      sgd_step(params, grads, cfg.learning_rate, cfg.max_grad_norm);
      acc.add(loss.values);
    }
    const EpochMetrics m = record(epoch, acc.mean());
    spdlog::info("epoch {}: total {:.6f} held-out {}", epoch, m.total,
                 m.held_out_total ? std::to_string(*m.held_out_total) : std::string("n/a"));
    if (!m.held_out_total) {
      best = params;
      result.best_epoch = epoch;
      continue;
    }
    if (*m.held_out_total < best_held) {
      best_held = *m.held_out_total;
      best = params;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      spdlog::info("early stop after epoch {} (best epoch {})", epoch, result.best_epoch);
      break;
    }
  }
  result.params = std::move(best);
  return result;
}

}  // namespace mgcs::train
