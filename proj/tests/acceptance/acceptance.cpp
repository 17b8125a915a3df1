// Prints one PASS/FAIL line per acceptance criterion; exits non-zero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <spdlog/spdlog.h>

#include "mgcs/common/rng.hpp"
#include "mgcs/corpus/jsonl.hpp"
#include "mgcs/encoder/encoder.hpp"
#include "mgcs/encoder/ops.hpp"
#include "mgcs/extract/extract.hpp"
#include "mgcs/filter/filter.hpp"
#include "mgcs/model/hmgr.hpp"
#include "mgcs/model/indexer.hpp"
#include "mgcs/model/synthetic.hpp"
#include "mgcs/model/trainer.hpp"
#include "mgcs/search/index.hpp"
#include "naive_hmgr.hpp"
#include "planted.hpp"

namespace fs = std::filesystem;
using namespace mgcs;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

int report(int id, const char* name, const std::function<Outcome()>& check) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    o = check();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("threw: ") + e.what();
  }
  std::printf("[%s] criterion %d %s (%.2fs)%s%s\n", o.pass ? "PASS" : "FAIL", id, name, seconds_since(t0),
              o.detail.empty() ? "" : " -- ", o.detail.c_str());
  std::fflush(stdout);
  return o.pass ? 0 : 1;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---- 1 ---------------------------------------------------------------------

Outcome formula_oracles() {
  Outcome o;
  const auto t0 = Clock::now();
  const std::vector<double> one{0.37};
  o.require(std::abs(train::infonce(0.37, one, 0.05) - std::log(2.0)) <= 1e-9, "symmetric InfoNCE != ln 2");
  for (std::size_t n : {2u, 5u, 64u}) {
    const std::vector<double> negs(n - 1, -1.25);
    o.require(std::abs(train::infonce(-1.25, negs, 0.05) - std::log(static_cast<double>(n))) <= 1e-9,
              "equal scores != ln N for N=" + std::to_string(n));
  }
  o.require(train::combine_losses(1.0, 0.5, 0.5, train::TrainConfig{}) == 1.8, "L_f + aL_b + bL_s != 1.8");
  const std::vector<std::size_t> ranks{1, 2, 4};
  o.require(std::abs(search::mrr(ranks) - 0.583333333333333) <= 1e-9, "MRR([1,2,4]) != 0.583333");
  const double t = seconds_since(t0);
  o.require(t < 1.0, "took " + fmt(t) + "s");
  return o;
}

// ---- 2 ---------------------------------------------------------------------

Outcome gradient_suite() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto r = train::check_gradients(train::TrainConfig{}, 8, 2024, 20);
  o.require(r.instances == 20, "ran " + std::to_string(r.instances) + " instances");
  o.require(r.embedding_table < 1e-4, "embedding_table error " + fmt(r.embedding_table));
  o.require(r.hmgr_W < 1e-4, "hmgr_W error " + fmt(r.hmgr_W));
  o.require(r.layernorm_gain < 1e-4, "layernorm_gain error " + fmt(r.layernorm_gain));
  o.require(r.layernorm_bias < 1e-4, "layernorm_bias error " + fmt(r.layernorm_bias));
  o.require(r.aggregation_levels >= 2, "aggregation levels " + std::to_string(r.aggregation_levels));
  o.require(r.maxsim_choices >= 1, "no MaxSim selection exercised");
  const double t = seconds_since(t0);
  o.require(t < 30.0, "took " + fmt(t) + "s");
  if (o.pass) o.detail = "max relative error " + fmt(r.max_relative_error);
  return o;
}

// ---- 3 ---------------------------------------------------------------------

EncoderParams random_params(std::size_t d, Rng& rng, bool zero_w) {
  auto p = EncoderParams::initialize(d, rng.next(), 0.5, 64);
  if (!zero_w)
    for (auto& w : p.hmgr_W) w = rng.uniform(-0.5, 0.5);
  for (auto& g : p.layernorm_gain) g = rng.uniform(0.5, 1.5);
  for (auto& b : p.layernorm_bias) b = rng.uniform(-0.2, 0.2);
  return p;
}

Outcome hmgr_oracle() {
  Outcome o;
  Rng rng(31);
  RandomTreeOptions opts;
  opts.max_depth = 4;
  opts.max_nodes = 20;
  double worst = 0.0, worst_w0 = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = random_function(rng, opts, "h" + std::to_string(trial));
    for (bool zero_w : {false, true}) {
      const auto p = random_params(6, rng, zero_w);
      TokenSeq seq;
      seq.tokens = f.tokens;
      seq.offsets = f.offsets;
      const auto emb = encode_tokens(seq, p);
      const testing::NaiveHmgr naive{f, p};
      for (std::size_t i = 0; i < f.snippets.size(); ++i) {
        const auto got =
            hmgr::represent_snippet(i, f.snippets, f.hierarchy, emb, f.offsets, p, hmgr::Mode::Hierarchical);
        if (!zero_w) {
          const auto want = *naive.rep(i);
          for (std::size_t k = 0; k < p.d; ++k) worst = std::max(worst, std::abs(got.vector[k] - want[k]));
        } else if (f.snippets[i].granularity != Granularity::Statement) {
          // W = 0: exactly the LayerNorm of the direct-token pooling, no child term at all.
          const auto ranges = hmgr::token_ranges(f.snippets, f.offsets);
          std::vector<std::span<const double>> rows;
          for (std::size_t t = ranges[i].begin; t < ranges[i].end; ++t) {
            bool covered = false;
            for (auto c : f.hierarchy.node(i).children) covered |= ranges[c].begin <= t && t < ranges[c].end;
            if (!covered) rows.push_back(emb.row(t + 1));
          }
          if (rows.empty())
            for (std::size_t t = ranges[i].begin; t < ranges[i].end; ++t) rows.push_back(emb.row(t + 1));
          Vector pooled(p.d), want(p.d);
          ops::mean_rows(rows, pooled);
          ops::layer_norm(pooled, p.layernorm_gain, p.layernorm_bias, kLayerNormEps, want);
          for (std::size_t k = 0; k < p.d; ++k) worst_w0 = std::max(worst_w0, std::abs(got.vector[k] - want[k]));
        }
      }
    }
  }
  o.require(worst <= 1e-10, "naive recursion differs by " + fmt(worst));
  o.require(worst_w0 == 0.0, "W = 0 block differs by " + fmt(worst_w0));
  if (o.pass) o.detail = "worst difference " + fmt(worst);
  return o;
}

// ---- 4 ---------------------------------------------------------------------

Outcome extraction_fixtures(const fs::path& fixtures) {
  Outcome o;
  const auto reg = GrammarRegistry::builtin();
  const auto fns = collect_functions(fixtures / "write_data", reg);
  o.require(fns.size() == 1, "expected one fixture function");
  if (!o.pass) return o;
  const auto a = analyze_function(fns[0], reg.for_language("python"));
  const auto pairs = align_comments(a.comments, a.snippets, a.hierarchy, 4);
  auto text = [&](const std::string& id) {
    const auto& s = a.snippets[*a.hierarchy.find(id)];
    return a.function.source_text.substr(s.bytes.start, s.bytes.size());
  };
  bool trailing = false, inline_chain = false, docstring = false;
  for (const auto& p : pairs) {
    if (p.comment.kind == CommentKind::Trailing)
      trailing = p.candidates.size() == 1 && text(p.candidates[0]) == "date = date.isoformat()";
    if (p.comment.kind == CommentKind::Inline)
      inline_chain = p.candidates.size() == 2 &&
                     a.hierarchy.is_ancestor(*a.hierarchy.find(p.candidates[1]), *a.hierarchy.find(p.candidates[0]));
    if (p.comment.kind == CommentKind::Docstring)
      docstring = p.candidates.size() == 1 && p.candidates[0] == a.snippets[0].snippet_id;
  }
  o.require(trailing, "no trailing pair on the isoformat statement");
  o.require(inline_chain, "no inline pair with a 2-block nested chain");
  o.require(docstring, "no docstring pair on the function");
  for (const auto& s : a.snippets)
    if (s.granularity == Granularity::Statement && s.lines.start_line != s.lines.end_line)
      o.require(false, s.snippet_id + " spans several lines");

  // Filter fixtures: three comments that must go, the fixture's own three that must stay.
  auto records = extract_corpus(fns, reg, {}).records;
  const auto keep_count = records.size();
  const std::vector<std::string> bad{"TODO: handle timeout", "see https://example.com/api for the format", "fix it"};
  for (const auto& t : bad) {
    auto r = records.front();
    r.pair_id += "/" + std::to_string(records.size());
    r.comment_text = t;
    records.push_back(r);
  }
  const auto analyses = analyze_corpus_functions(records, reg);
  const auto res = filter::filter_corpus(records, analyses, filter::build_tfidf(analyses), filter::FilterConfig{});
  o.require(res.records.size() == keep_count, "kept " + std::to_string(res.records.size()) + " of " +
                                                  std::to_string(keep_count) + " clean pairs");
  std::map<std::string, std::size_t> dropped;
  for (const auto& [rule, n] : res.report.dropped_by_rule)
    if (n > 0) dropped[rule] = n;
  const std::map<std::string, std::size_t> want{{"special-term", 1}, {"too-short", 1}, {"url", 1}};
  o.require(dropped == want,
            "drop reasons " + res.report.to_json()["dropped_by_rule"].dump());
  return o;
}

// ---- 5 ---------------------------------------------------------------------

Outcome negative_independence() {
  Outcome o;
  Rng rng(55);
  RandomTreeOptions opts;
  opts.max_nodes = 20;
  std::size_t returned = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto f = random_function(rng, opts, "n" + std::to_string(trial));
    for (std::size_t anchor = 0; anchor < f.snippets.size(); ++anchor) {
      for (auto n : train::select_in_function_negatives(anchor, f.snippets, f.hierarchy, 3, rng)) {
        ++returned;
        // Brute force: walk parent ids both ways.
        auto reaches = [&](std::size_t from, std::size_t to) {
          for (auto p = f.snippets[from].parent_id; p;) {
            const auto i = *f.hierarchy.find(*p);
            if (i == to) return true;
            p = f.snippets[i].parent_id;
          }
          return false;
        };
        if (n == anchor || reaches(n, anchor) || reaches(anchor, n))
          o.require(false, f.id + ": negative nested with its anchor");
        if (f.snippets[n].granularity != f.snippets[anchor].granularity)
          o.require(false, f.id + ": negative of another granularity");
      }
    }
  }
  o.require(returned > 0, "no negatives were ever drawn");
  if (o.pass) o.detail = std::to_string(returned) + " negatives checked";
  return o;
}

// ---- 6-8: planted corpus -----------------------------------------------------

struct RunResult {
  std::vector<train::EpochMetrics> metrics;
  std::size_t best_epoch = 0;
  search::MrrReport mrr;
  double random_baseline[kGranularityCount] = {0, 0, 0};
  std::string corpus_bytes, checkpoint_bytes, index_bytes, mrr_json;
};

struct Planted {
  GrammarRegistry reg = GrammarRegistry::builtin();
  std::vector<CorpusRecord> filtered;
  std::string corpus_bytes;

  explicit Planted(const fs::path& dir) {
    const auto fns = collect_functions(dir, reg);
    const auto extracted = extract_corpus(fns, reg, {}).records;
    const auto analyses = analyze_corpus_functions(extracted, reg);
    filtered =
        filter::filter_corpus(extracted, analyses, filter::build_tfidf(analyses), filter::FilterConfig{}).records;
    std::ostringstream ss;
    write_corpus(ss, filtered);
    corpus_bytes = ss.str();
  }

  RunResult run(const train::TrainConfig& cfg) const {
    RunResult out;
    out.corpus_bytes = corpus_bytes;
    const auto data =
        train::prepare_training_data(filtered, analyze_corpus_functions(filtered, reg), kDefaultTokenizerSeed, cfg);
    auto res = train::train(data, cfg);
    out.metrics = res.metrics;
    out.best_epoch = res.best_epoch;
    const auto index = offline::build_index(data.analyses, res.params, cfg.mode());
    std::vector<CorpusRecord> held;
    for (auto i : res.split.held_out)
      for (const auto& r : filtered)
        if (r.pair_id == data.pairs[i].pair_id) held.push_back(r);
    const search::Searcher searcher(index, res.params);
    out.mrr = search::evaluate_mrr(offline::make_evalset(held), searcher);
    std::size_t n[kGranularityCount] = {0, 0, 0};
    for (std::size_t i = 0; i < index.size(); ++i) ++n[static_cast<int>(index.entry(i).granularity)];
    for (std::size_t g = 0; g < kGranularityCount; ++g) out.random_baseline[g] = search::random_mrr(n[g]);
    out.checkpoint_bytes = serialize_checkpoint(res.params);
    out.index_bytes = index.serialize();
    out.mrr_json = out.mrr.to_json().dump();
    return out;
  }
};

train::TrainConfig planted_config(std::uint64_t seed) {
  train::TrainConfig cfg;
  cfg.d = 128;
  cfg.epochs = 30;
  cfg.seed = seed;
  return cfg;
}

Outcome end_to_end(const Planted& planted, const RunResult& r, double seconds) {
  Outcome o;
  const double first = r.metrics.front().total, best = r.metrics[r.best_epoch].total;
  const double drop = 1.0 - best / first;
  o.require(drop >= 0.5, "loss fell only " + fmt(100 * drop) + "%");
  static const char* names[] = {"function", "block", "statement"};
  std::string summary = "pairs " + std::to_string(planted.filtered.size()) + ", loss " + fmt(first) + " -> " +
                        fmt(best) + " (epoch " + std::to_string(r.best_epoch) + ")";
  for (std::size_t g = 0; g < kGranularityCount; ++g) {
    o.require(r.mrr.count[g] > 0, std::string("no held-out ") + names[g] + " queries");
    o.require(r.mrr.per_granularity[g] >= 0.30,
              std::string(names[g]) + " MRR " + fmt(r.mrr.per_granularity[g]) + " < 0.30");
    summary += std::string(", ") + names[g] + " MRR " + fmt(r.mrr.per_granularity[g]) + " (random " +
               fmt(r.random_baseline[g]) + ")";
  }
  o.require(seconds < 600.0, "took " + fmt(seconds) + "s");
  if (o.pass) o.detail = summary;
  return o;
}

Outcome ablation_direction(const Planted& planted, const RunResult& seed0) {
  Outcome o;
  constexpr double kNoise = 0.02;
  double full = 0.0, no_inf = 0.0, no_maxsim = 0.0;
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    full += seed == 0 ? seed0.mrr.per_granularity[1] : planted.run(planted_config(seed)).mrr.per_granularity[1];
    auto cfg = planted_config(seed);
    cfg.flags.disable_infunction_negatives = true;
    no_inf += planted.run(cfg).mrr.per_granularity[1];
    cfg = planted_config(seed);
    cfg.flags.disable_maxsim = true;
    no_maxsim += planted.run(cfg).mrr.per_granularity[1];
  }
  full /= 3;
  no_inf /= 3;
  no_maxsim /= 3;
  o.require(no_inf <= full + kNoise, "without in-function negatives block MRR " + fmt(no_inf) + " > " + fmt(full));
  o.require(no_maxsim <= full + kNoise, "without MaxSim block MRR " + fmt(no_maxsim) + " > " + fmt(full));
  o.detail = (o.pass ? "" : o.detail + "; ") + "block MRR full " + fmt(full) + ", no in-function negatives " +
             fmt(no_inf) + ", no MaxSim " + fmt(no_maxsim);
  return o;
}

Outcome determinism(const fs::path& root, const RunResult& first) {
  Outcome o;
  // A second corpus directory generated from scratch, run through every stage again.
  const auto dir = root / "again";
  testing::write_planted(dir);
  const Planted planted(dir);
  const auto second = planted.run(planted_config(0));
  o.require(second.corpus_bytes == first.corpus_bytes, "corpus differs");
  o.require(second.checkpoint_bytes == first.checkpoint_bytes, "checkpoint differs");
  o.require(second.index_bytes == first.index_bytes, "index differs");
  o.require(second.mrr_json == first.mrr_json, "MRR differs");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  const fs::path fixtures = argc > 1 ? fs::path(argv[1]) : fs::path(MGCS_FIXTURES_DIR);
  const fs::path work = fs::temp_directory_path() / ("mgcs_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(work);

  int failures = 0;
  failures += report(1, "formula oracles", formula_oracles);
  failures += report(2, "gradient suite", gradient_suite);
  failures += report(3, "HMGR oracle equivalence", hmgr_oracle);
  failures += report(4, "extraction and filter fixtures", [&] { return extraction_fixtures(fixtures); });
  failures += report(5, "in-function negative independence", negative_independence);

  RunResult seed0;
  std::optional<Planted> planted;
  failures += report(6, "planted corpus end to end", [&] {
    const auto t0 = Clock::now();
    testing::write_planted(work / "planted");
    planted.emplace(work / "planted");
    seed0 = planted->run(planted_config(0));
    return end_to_end(*planted, seed0, seconds_since(t0));
  });
  failures += report(7, "ablation direction", [&] {
    if (!planted) throw std::runtime_error("planted corpus unavailable");
    return ablation_direction(*planted, seed0);
  });
  failures += report(8, "pipeline determinism", [&] {
    if (!planted) throw std::runtime_error("planted corpus unavailable");
    return determinism(work, seed0);
  });

  fs::remove_all(work);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
