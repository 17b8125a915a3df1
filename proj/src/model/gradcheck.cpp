#include <algorithm>
#include <cmath>
#include <set>

#include "mgcs/common/error.hpp"
#include "mgcs/model/synthetic.hpp"
#include "mgcs/model/trainer.hpp"

namespace mgcs::train {
namespace {

constexpr double kStep = 1e-5;
constexpr std::size_t kVocab = 64;

struct Instance {
  EncoderParams params;
  std::vector<SyntheticFunction> functions;
  std::vector<std::vector<TokenId>> queries;
  std::vector<std::vector<std::size_t>> candidates;
  std::vector<PairView> batch;
  std::vector<FunctionView> views;
  std::size_t levels = 0;
  std::size_t choices = 0;
};

std::size_t depth_of(const HierarchyIndex& h, std::size_t i) { return h.node(i).ancestors.size(); }

/// Innermost block with a block parent, so MaxSim has two nested blocks to pick from.
std::vector<std::size_t> block_chain(const SyntheticFunction& f, Rng& rng) {
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < f.snippets.size(); ++i) {
    if (f.snippets[i].granularity != Granularity::Block) continue;
    auto p = f.hierarchy.node(i).parent;
    if (p && f.snippets[*p].granularity == Granularity::Block) starts.push_back(i);
  }
  std::vector<std::size_t> chain{starts[rng.below(starts.size())]};
  while (chain.size() < 3) {
    auto p = f.hierarchy.node(chain.back()).parent;
    if (!p || f.snippets[*p].granularity != Granularity::Block) break;
    chain.push_back(*p);
  }
  return chain;
}

Instance make_instance(Rng& rng, std::size_t d, std::size_t examples) {
  Instance inst;
  inst.params = EncoderParams::initialize(d, rng.next(), 0.5, kVocab);
  for (double& w : inst.params.hmgr_W) w = rng.uniform(-0.5, 0.5);
  for (double& g : inst.params.layernorm_gain) g = rng.uniform(0.5, 1.5);
  for (double& b : inst.params.layernorm_bias) b = rng.uniform(-0.2, 0.2);

  RandomTreeOptions opt;
  opt.max_depth = 5;
  opt.max_nodes = 14;
  opt.vocab = kVocab;
  opt.force_nested_blocks = true;
  for (int f = 0; f < 2; ++f) inst.functions.push_back(random_function(rng, opt, "fn" + std::to_string(f)));

  for (std::size_t e = 0; e < examples; ++e) {
    const std::size_t f = e % inst.functions.size();
    const auto& fn = inst.functions[f];
    const auto g = static_cast<Granularity>(e % kGranularityCount);
    std::vector<std::size_t> cands;
    if (g == Granularity::Function) {
      cands = {fn.hierarchy.root()};
    } else if (g == Granularity::Block) {
      cands = block_chain(fn, rng);
    } else {
      std::vector<std::size_t> stmts;
      for (std::size_t i = 0; i < fn.snippets.size(); ++i)
        if (fn.snippets[i].granularity == Granularity::Statement) stmts.push_back(i);
      cands = {stmts[rng.below(stmts.size())]};
    }
    std::vector<TokenId> q(2 + rng.below(3));
    for (auto& t : q) t = static_cast<TokenId>(rng.below(kVocab));
    inst.queries.push_back(std::move(q));
    inst.candidates.push_back(std::move(cands));
  }
  for (const auto& fn : inst.functions) {
    inst.views.push_back({fn.snippets, &fn.hierarchy, fn.tokens, fn.offsets});
    for (std::size_t i = 0; i < fn.snippets.size(); ++i)
      if (fn.snippets[i].granularity == Granularity::Statement)
        inst.levels = std::max(inst.levels, depth_of(fn.hierarchy, i));
  }
  for (std::size_t e = 0; e < examples; ++e) {
    inst.batch.push_back({e % inst.functions.size(), static_cast<Granularity>(e % kGranularityCount), inst.queries[e],
                          inst.candidates[e]});
    if (inst.candidates[e].size() > 1) ++inst.choices;
  }
  return inst;
}

double loss_at(const Instance& inst, const EncoderParams& params, const TrainConfig& cfg, std::uint64_t neg_seed,
               ad::Gradients* grads, double* min_gap) {
  ad::Tape tape(params);
  Rng rng(neg_seed);
  const TapeLoss loss = record_batch(tape, inst.views, inst.batch, cfg, rng);
  if (min_gap) {
    // Distance of every MaxSim decision from a tie; finite differences are
    // only meaningful away from the argmax switch.
    *min_gap = INFINITY;
    ad::Tape probe(params);
    std::vector<std::vector<ad::Var>> tokens;
    for (const auto& v : inst.views) {
      tokens.emplace_back();
      for (TokenId t : v.tokens) tokens.back().push_back(probe.embedding(t));
    }
    for (const auto& p : inst.batch) {
      if (p.candidates.size() < 2) continue;
      const auto& v = inst.views[p.function];
      hmgr::FunctionGraph graph(probe, v.snippets, *v.hierarchy, v.offsets, tokens[p.function], cfg.mode());
      std::vector<ad::Var> q;
      for (TokenId t : p.query) q.push_back(probe.embedding(t));
      const Vector qv = probe.copy(probe.mean(q));
      std::vector<double> s;
      for (std::size_t c : p.candidates) s.push_back(score(qv, probe.value(*graph.snippet(c))));
      std::ranges::sort(s, std::greater<>());
      *min_gap = std::min(*min_gap, s[0] - s[1]);
    }
  }
  if (grads) tape.backward(loss.total, grads);
  return loss.values.total;
}

double relative_error(const std::vector<double>& a, const std::vector<double>& n) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  const double scale = std::max(std::sqrt(na), std::sqrt(nn));
  if (scale < 1e-10) return std::sqrt(diff);
  return std::sqrt(diff) / scale;
}

/// Central differences over every entry of `tensor` (a member of `params`).
std::vector<double> numeric(Instance& inst, std::vector<double>& tensor, std::span<const std::size_t> entries,
                            const TrainConfig& cfg, std::uint64_t neg_seed) {
  std::vector<double> out;
  out.reserve(entries.size());
  for (std::size_t i : entries) {
    const double saved = tensor[i];
    tensor[i] = saved + kStep;
    const double up = loss_at(inst, inst.params, cfg, neg_seed, nullptr, nullptr);
    tensor[i] = saved - kStep;
    const double down = loss_at(inst, inst.params, cfg, neg_seed, nullptr, nullptr);
    tensor[i] = saved;
    out.push_back((up - down) / (2 * kStep));
  }
  return out;
}

std::vector<std::size_t> all_entries(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

nlohmann::ordered_json GradCheckReport::to_json() const {
  nlohmann::ordered_json j;
  j["max_relative_error"] = max_relative_error;
  j["embedding_table"] = embedding_table;
  j["hmgr_W"] = hmgr_W;
  j["layernorm_gain"] = layernorm_gain;
  j["layernorm_bias"] = layernorm_bias;
  j["instances"] = instances;
  j["aggregation_levels"] = aggregation_levels;
  j["maxsim_choices"] = maxsim_choices;
  return j;
}

GradCheckReport check_gradients(const TrainConfig& base, std::size_t probe_size, std::uint64_t seed,
                                std::size_t instances) {
  base.validate();
  TrainConfig cfg = base;
  const std::size_t d = std::clamp<std::size_t>(cfg.d, 2, 16);
  cfg.d = d;
  const std::size_t examples = std::clamp<std::size_t>(probe_size, 3, 8);
  Rng rng(seed);
  GradCheckReport report;
  for (std::size_t n = 0; n < instances; ++n) {
    Instance inst;
    const std::uint64_t neg_seed = rng.next();
    for (int attempt = 0;; ++attempt) {
      inst = make_instance(rng, d, examples);
      double gap = 0.0;
      loss_at(inst, inst.params, cfg, neg_seed, nullptr, &gap);
      if (gap > 1e-3) break;
      if (attempt > 100) throw Error(ErrorCode::DegenerateCorpus, "could not draw a tie-free gradient probe");
    }
    ad::Gradients grads(d);
    loss_at(inst, inst.params, cfg, neg_seed, &grads, nullptr);

    std::set<TokenId> used;
    for (const auto& f : inst.functions) used.insert(f.tokens.begin(), f.tokens.end());
    for (const auto& q : inst.queries) used.insert(q.begin(), q.end());
    std::vector<std::size_t> emb_entries;
    std::vector<double> emb_analytic;
    for (TokenId t : used) {
      auto it = grads.embedding_rows.find(t);
      for (std::size_t k = 0; k < d; ++k) {
        emb_entries.push_back(std::size_t{t} * d + k);
        emb_analytic.push_back(it == grads.embedding_rows.end() ? 0.0 : it->second[k]);
      }
    }
    const double e_emb =
        relative_error(emb_analytic, numeric(inst, inst.params.embedding_table, emb_entries, cfg, neg_seed));
    const double e_w = relative_error(grads.hmgr_W, numeric(inst, inst.params.hmgr_W, all_entries(d * d), cfg, neg_seed));
    const double e_gain =
        relative_error(grads.layernorm_gain, numeric(inst, inst.params.layernorm_gain, all_entries(d), cfg, neg_seed));
    const double e_bias =
        relative_error(grads.layernorm_bias, numeric(inst, inst.params.layernorm_bias, all_entries(d), cfg, neg_seed));

    report.embedding_table = std::max(report.embedding_table, e_emb);
    report.hmgr_W = std::max(report.hmgr_W, e_w);
    report.layernorm_gain = std::max(report.layernorm_gain, e_gain);
    report.layernorm_bias = std::max(report.layernorm_bias, e_bias);
    report.aggregation_levels = std::max(report.aggregation_levels, inst.levels);
    report.maxsim_choices += inst.choices;
    ++report.instances;
  }
  report.max_relative_error =
      std::max({report.embedding_table, report.hmgr_W, report.layernorm_gain, report.layernorm_bias});
  return report;
}

}  // namespace mgcs::train
