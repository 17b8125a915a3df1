// mgcs: extract -> filter -> train -> index -> search/eval, plus attribute and gradcheck.
//
// Every subcommand prints one JSON object on stdout when it succeeds; logs go
// to stderr (level from MGCS_LOG_LEVEL). Exit status: 0 ok, 1 usage, 2 data.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "mgcs/common/error.hpp"
#include "mgcs/corpus/jsonl.hpp"
#include "mgcs/encoder/params.hpp"
#include "mgcs/extract/extract.hpp"
#include "mgcs/filter/filter.hpp"
#include "mgcs/model/indexer.hpp"
#include "mgcs/model/trainer.hpp"
#include "mgcs/search/index.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Values shared by all subcommands. Anything given on the command line wins
// over the --config file, which wins over the built-in defaults.
struct Common {
  std::string config_path;
  std::optional<unsigned> jobs;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> grammar_paths;
};

struct PipelineConfig {
  json doc = json::object();

  static PipelineConfig load(const std::string& path) {
    PipelineConfig c;
    if (path.empty()) return c;
    try {
      c.doc = json::parse(mgcs::read_file(path));
    } catch (const json::exception& e) {
      throw mgcs::Error(mgcs::ErrorCode::ConfigError, path + ": " + e.what());
    }
    if (!c.doc.is_object()) throw mgcs::Error(mgcs::ErrorCode::ConfigError, path + ": expected a JSON object");
    return c;
  }

  const json* section(const char* name) const {
    auto it = doc.find(name);
    return it == doc.end() ? nullptr : &*it;
  }

  std::optional<std::string> path(const char* name) const {
    if (const json* p = section("paths"); p && p->contains(name)) return (*p)[name].get<std::string>();
    return std::nullopt;
  }

  template <typename T>
  std::optional<T> value(const char* sec, const char* key) const {
    const json* s = section(sec);
    if (!s || !s->contains(key)) return std::nullopt;
    try {
      return (*s)[key].get<T>();
    } catch (const json::exception& e) {
      throw mgcs::Error(mgcs::ErrorCode::ConfigError, std::string(sec) + "." + key + ": " + e.what());
    }
  }
};

struct Context {
  Common common;
  PipelineConfig config;

  unsigned jobs() const {
    if (common.jobs) return *common.jobs;
    if (auto j = config.doc.find("jobs"); j != config.doc.end()) return j->get<unsigned>();
    return 0;
  }

  std::uint64_t seed() const {
    if (common.seed) return *common.seed;
    if (auto s = config.doc.find("seed"); s != config.doc.end()) return s->get<std::uint64_t>();
    return 0;
  }

  std::string path(const std::string& flag, const char* key, const char* what) const {
    if (!flag.empty()) return flag;
    if (auto p = config.path(key)) return *p;
    throw UsageError(std::string("missing ") + what + " (--" + key + " or paths." + key + " in --config)");
  }

  mgcs::GrammarRegistry grammars() const {
    auto reg = mgcs::GrammarRegistry::builtin();
    std::vector<std::string> paths = common.grammar_paths;
    if (paths.empty()) {
      if (auto g = config.doc.find("grammars"); g != config.doc.end()) paths = g->get<std::vector<std::string>>();
    }
    for (const auto& p : paths) reg.add(mgcs::GrammarConfig::load(p));
    return reg;
  }
};

void emit(const ojson& summary) { std::cout << summary.dump(2) << '\n'; }

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = s.find(',', pos);
    const std::size_t end = comma == std::string::npos ? s.size() : comma;
    if (end > pos) out.push_back(s.substr(pos, end - pos));
    pos = end + 1;
  }
  return out;
}

// ---- extract -----------------------------------------------------------------

struct ExtractArgs {
  std::string in, out;
  std::optional<std::size_t> max_candidates;
};

int run_extract(const Context& ctx, const ExtractArgs& a) {
  const fs::path in = ctx.path(a.in, "in", "input directory or functions JSONL");
  const fs::path out = ctx.path(a.out, "out", "output corpus path");
  const auto grammars = ctx.grammars();

  mgcs::ExtractOptions opts;
  opts.jobs = ctx.jobs();
  opts.max_candidates =
      a.max_candidates.value_or(ctx.config.value<std::size_t>("extract", "max_candidates").value_or(4));

  mgcs::ExtractStats collected;
  std::vector<mgcs::SourceFunction> functions;
  if (fs::is_regular_file(in) && in.extension() == ".jsonl") {
    functions = mgcs::read_functions(in);
  } else {
    functions = mgcs::collect_functions(in, grammars, &collected, opts.jobs);
  }
  auto result = mgcs::extract_corpus(functions, grammars, opts);
  mgcs::write_corpus(out, result.records);

  const auto& s = result.stats;
  spdlog::info("extracted {} pairs from {} functions", s.pairs, s.functions);
  ojson j;
  j["command"] = "extract";
  j["out"] = out.string();
  j["files"] = collected.files;
  j["functions"] = s.functions;
  j["skipped_functions"] = s.skipped_functions + collected.skipped_functions;
  j["comments"] = s.comments;
  j["pairs"] = s.pairs;
  j["pairs_by_kind"] = s.pairs_by_kind;
  j["unaligned_by_kind"] = s.unaligned_by_kind;
  emit(j);
  return 0;
}

// ---- filter ------------------------------------------------------------------

struct FilterArgs {
  std::string corpus, out, report, tfidf_in, tfidf_out, special_terms;
  std::optional<double> margin;
  std::optional<std::size_t> min_tokens;
  bool no_reliance = false;
};

int run_filter(const Context& ctx, const FilterArgs& a) {
  const fs::path corpus = ctx.path(a.corpus, "corpus", "input corpus");
  const fs::path out = ctx.path(a.out, "out", "output corpus path");
  const auto records = mgcs::read_corpus(corpus);
  const auto analyses = mgcs::analyze_corpus_functions(records, ctx.grammars(), ctx.jobs());

  mgcs::filter::FilterConfig cfg;
  cfg.jobs = ctx.jobs();
  cfg.margin = a.margin.value_or(ctx.config.value<double>("filter", "margin").value_or(0.0));
  cfg.regex.min_tokens =
      a.min_tokens.value_or(ctx.config.value<std::size_t>("filter", "min_tokens").value_or(cfg.regex.min_tokens));
  if (!a.special_terms.empty())
    cfg.regex.special_terms = split_list(a.special_terms);
  else if (auto t = ctx.config.value<std::vector<std::string>>("filter", "special_terms"))
    cfg.regex.special_terms = *t;
  if (auto t = ctx.config.value<std::vector<std::string>>("filter", "auto_review_terms"))
    cfg.regex.auto_review_terms = *t;
  cfg.reliance = !a.no_reliance && ctx.config.value<bool>("filter", "reliance").value_or(true);

  // Reusing a saved model keeps a second pass over the output a no-op.
  mgcs::filter::TfidfModel model;
  if (!a.tfidf_in.empty()) {
    try {
      model = mgcs::filter::TfidfModel::from_json(json::parse(mgcs::read_file(a.tfidf_in)));
    } catch (const json::exception& e) {
      throw mgcs::Error(mgcs::ErrorCode::FormatError, a.tfidf_in + ": " + e.what());
    }
  } else if (cfg.reliance) {
    model = mgcs::filter::build_tfidf(analyses);
  }
  if (!a.tfidf_out.empty()) mgcs::write_file(a.tfidf_out, model.to_json().dump() + "\n");

  auto result = mgcs::filter::filter_corpus(records, analyses, model, cfg);
  mgcs::write_corpus(out, result.records);
  const fs::path report = a.report.empty() ? fs::path(out.string() + ".report.json") : fs::path(a.report);
  mgcs::write_file(report, result.report.to_json().dump(2) + "\n");

  spdlog::info("kept {} of {} pairs", result.report.kept, result.report.input);
  ojson j;
  j["command"] = "filter";
  j["out"] = out.string();
  j["report"] = report.string();
  j["input"] = result.report.input;
  j["kept"] = result.report.kept;
  j["dropped_by_rule"] = result.report.to_json()["dropped_by_rule"];
  emit(j);
  return 0;
}

// ---- train -------------------------------------------------------------------

struct TrainArgs {
  std::string corpus, out, metrics, heldout_out;
  std::optional<std::size_t> epochs, d, batch_size, patience;
  std::optional<double> learning_rate, alpha, beta, tau, max_grad_norm;
  bool disable_hmgr = false, disable_maxsim = false, disable_infunction = false;
};

mgcs::train::TrainConfig train_config(const Context& ctx, const TrainArgs& a) {
  mgcs::train::TrainConfig cfg;
  if (const json* t = ctx.config.section("train")) cfg = mgcs::train::TrainConfig::from_json(*t, cfg);
  if (ctx.common.seed || ctx.config.doc.contains("seed")) cfg.seed = ctx.seed();
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.d) cfg.d = *a.d;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.patience) cfg.patience = *a.patience;
  if (a.learning_rate) cfg.learning_rate = *a.learning_rate;
  if (a.max_grad_norm) cfg.max_grad_norm = *a.max_grad_norm;
  if (a.alpha) cfg.alpha = *a.alpha;
  if (a.beta) cfg.beta = *a.beta;
  if (a.tau) cfg.tau = *a.tau;
  if (a.disable_hmgr) cfg.flags.disable_hmgr = true;
  if (a.disable_maxsim) cfg.flags.disable_maxsim = true;
  if (a.disable_infunction) cfg.flags.disable_infunction_negatives = true;
  cfg.validate();
  return cfg;
}

int run_train(const Context& ctx, const TrainArgs& a) {
  const fs::path corpus = ctx.path(a.corpus, "corpus", "training corpus");
  const fs::path out = ctx.path(a.out, "checkpoint", "checkpoint output path (--out)");
  const auto cfg = train_config(ctx, a);

  const auto records = mgcs::read_corpus(corpus);
  auto analyses = mgcs::analyze_corpus_functions(records, ctx.grammars(), ctx.jobs());
  const auto data = mgcs::train::prepare_training_data(records, std::move(analyses), mgcs::kDefaultTokenizerSeed, cfg);

  std::ofstream metrics;
  if (!a.metrics.empty()) {
    metrics.open(a.metrics, std::ios::binary | std::ios::trunc);
    if (!metrics) throw mgcs::Error(mgcs::ErrorCode::IoError, "cannot write " + a.metrics);
  }
  auto result = mgcs::train::train(data, cfg, [&](const mgcs::train::EpochMetrics& m) {
    spdlog::debug("epoch {}: total {:.4f} (f {:.4f} b {:.4f} s {:.4f})", m.epoch, m.total, m.L_f, m.L_b, m.L_s);
    if (metrics) metrics << m.to_json().dump() << '\n';
  });
  mgcs::save_checkpoint(out, result.params);

  if (!a.heldout_out.empty()) {
    std::unordered_map<std::string_view, const mgcs::CorpusRecord*> by_pair;
    for (const auto& r : records) by_pair.emplace(r.pair_id, &r);
    std::vector<mgcs::search::EvalItem> items;
    for (std::size_t i : result.split.held_out) {
      const auto& r = *by_pair.at(data.pairs[i].pair_id);
      items.push_back({r.comment_text, r.candidate_spans.front().snippet_id, r.granularity});
    }
    mgcs::search::write_evalset(a.heldout_out, items);
  }

  const auto& first = result.metrics.front();
  const auto& best = result.metrics.at(result.best_epoch);
  ojson j;
  j["command"] = "train";
  j["checkpoint"] = out.string();
  j["fingerprint"] = mgcs::fingerprint(result.params);
  j["pairs"] = data.pairs.size();
  j["skipped_pairs"] = data.skipped_pairs;
  j["held_out_pairs"] = result.split.held_out.size();
  j["epochs_run"] = result.metrics.size() - 1;
  j["best_epoch"] = result.best_epoch;
  j["initial"] = first.to_json();
  j["best"] = best.to_json();
  j["config"] = cfg.to_json();
  emit(j);
  return 0;
}

// ---- index -------------------------------------------------------------------

struct IndexArgs {
  std::string corpus, checkpoint, out;
  bool disable_hmgr = false;
};

int run_index(const Context& ctx, const IndexArgs& a) {
  const fs::path corpus = ctx.path(a.corpus, "corpus", "corpus");
  const fs::path ckpt = ctx.path(a.checkpoint, "checkpoint", "checkpoint");
  const fs::path out = ctx.path(a.out, "index", "index output path (--out)");
  const auto params = mgcs::load_checkpoint(ckpt);
  const auto records = mgcs::read_corpus(corpus);
  const auto analyses = mgcs::analyze_corpus_functions(records, ctx.grammars(), ctx.jobs());
  const bool mean_pool = a.disable_hmgr || ctx.config.value<bool>("train", "disable_hmgr").value_or(false);

  mgcs::offline::BuildStats stats;
  const auto index = mgcs::offline::build_index(
      analyses, params, mean_pool ? mgcs::hmgr::Mode::MeanPool : mgcs::hmgr::Mode::Hierarchical, ctx.jobs(), &stats);
  index.save(out);

  ojson j;
  j["command"] = "index";
  j["index"] = out.string();
  j["fingerprint"] = index.fingerprint();
  j["d"] = index.d();
  j["functions"] = stats.functions;
  j["entries"] = stats.entries;
  j["skipped_snippets"] = stats.skipped_snippets;
  emit(j);
  return 0;
}

// ---- search / eval -----------------------------------------------------------

struct SearchArgs {
  std::string index, checkpoint, query, granularity;
  std::size_t k = 10;
};

std::optional<mgcs::Granularity> granularity_arg(const std::string& s) {
  if (s.empty()) return std::nullopt;
  auto g = mgcs::parse_granularity(s);
  if (!g) throw UsageError("unknown granularity '" + s + "'");
  return g;
}

int run_search(const Context& ctx, const SearchArgs& a) {
  const auto index = mgcs::search::CorpusIndex::load(ctx.path(a.index, "index", "index"));
  const auto params = mgcs::load_checkpoint(ctx.path(a.checkpoint, "checkpoint", "checkpoint"));
  const mgcs::search::Searcher searcher(index, params);
  const auto hits = searcher.search(a.query, a.k, granularity_arg(a.granularity));

  ojson results = ojson::array();
  std::size_t rank = 0;
  for (const auto& h : hits) {
    const auto& e = index.entry(h.entry);
    results.push_back({{"rank", ++rank},
                       {"snippet_id", e.snippet_id},
                       {"function_id", e.function_id},
                       {"granularity", mgcs::to_string(e.granularity)},
                       {"score", h.score},
                       {"start_line", e.lines.start_line},
                       {"end_line", e.lines.end_line}});
  }
  ojson j;
  j["command"] = "search";
  j["query"] = a.query;
  j["results"] = std::move(results);
  emit(j);
  return 0;
}

struct EvalArgs {
  std::string index, checkpoint, evalset;
};

int run_eval(const Context& ctx, const EvalArgs& a) {
  const auto index = mgcs::search::CorpusIndex::load(ctx.path(a.index, "index", "index"));
  const auto params = mgcs::load_checkpoint(ctx.path(a.checkpoint, "checkpoint", "checkpoint"));
  const auto items = mgcs::search::read_evalset(ctx.path(a.evalset, "evalset", "evalset"));
  const mgcs::search::Searcher searcher(index, params);
  const auto report = mgcs::search::evaluate_mrr(items, searcher);

  std::size_t candidates[mgcs::kGranularityCount] = {0, 0, 0};
  for (std::size_t i = 0; i < index.size(); ++i) ++candidates[static_cast<std::size_t>(index.entry(i).granularity)];
  ojson random = ojson::object();
  for (std::size_t g = 0; g < mgcs::kGranularityCount; ++g) {
    if (report.count[g] == 0) continue;
    random[std::string(mgcs::to_string(static_cast<mgcs::Granularity>(g)))] = mgcs::search::random_mrr(candidates[g]);
  }

  ojson j = report.to_json();
  j["random_baseline"] = std::move(random);
  emit(j);
  return 0;
}

// ---- attribute ---------------------------------------------------------------

struct AttributeArgs {
  std::string corpus, checkpoint, function, query;
  bool disable_hmgr = false;
};

int run_attribute(const Context& ctx, const AttributeArgs& a) {
  const auto params = mgcs::load_checkpoint(ctx.path(a.checkpoint, "checkpoint", "checkpoint"));
  const auto records = mgcs::read_corpus(ctx.path(a.corpus, "corpus", "corpus"));
  const auto analyses = mgcs::analyze_corpus_functions(records, ctx.grammars(), ctx.jobs());
  const auto mode = a.disable_hmgr ? mgcs::hmgr::Mode::MeanPool : mgcs::hmgr::Mode::Hierarchical;
  const auto attributions = mgcs::offline::attribute_snippets(a.query, a.function, analyses, params, mode);

  ojson rows = ojson::array();
  for (const auto& at : attributions) {
    rows.push_back({{"snippet_id", at.snippet_id},
                    {"granularity", mgcs::to_string(at.granularity)},
                    {"start_line", at.lines.start_line},
                    {"end_line", at.lines.end_line},
                    {"gradient_norm", at.gradient_norm},
                    {"contribution", at.contribution}});
  }
  ojson j;
  j["command"] = "attribute";
  j["function_id"] = a.function;
  j["query"] = a.query;
  j["snippets"] = std::move(rows);
  emit(j);
  return 0;
}

// ---- gradcheck ---------------------------------------------------------------

struct GradcheckArgs {
  std::size_t instances = 20;
  std::size_t probe_size = 8;
  double tolerance = 1e-4;
};

int run_gradcheck(const Context& ctx, const GradcheckArgs& a) {
  mgcs::train::TrainConfig cfg;
  if (const json* t = ctx.config.section("train")) cfg = mgcs::train::TrainConfig::from_json(*t, cfg);
  const auto report = mgcs::train::check_gradients(cfg, a.probe_size, ctx.seed(), a.instances);
  ojson j = report.to_json();
  j["tolerance"] = a.tolerance;
  j["passed"] = report.max_relative_error < a.tolerance;
  emit(j);
  if (report.max_relative_error >= a.tolerance) {
    spdlog::error("gradient check failed: {:.3e} >= {:.1e}", report.max_relative_error, a.tolerance);
    return 2;
  }
  return 0;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("mgcs");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* lvl = std::getenv("MGCS_LOG_LEVEL")) spdlog::set_level(spdlog::level::from_str(lvl));
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"multi-granularity code search toolkit"};
  app.require_subcommand(1);
  Context ctx;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", ctx.common.config_path, "JSON pipeline config; flags override it");
    sub->add_option("--jobs", ctx.common.jobs, "worker threads (default: logical cores)");
    sub->add_option("--seed", ctx.common.seed, "seed for every stochastic step");
    sub->add_option("--grammar", ctx.common.grammar_paths, "extra grammar config (JSON); repeatable");
  };

  std::function<int()> action;

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "mine comment/snippet pairs from source files");
  add_common(extract);
  extract->add_option("--in", ex.in, "source directory, file, or functions JSONL");
  extract->add_option("--out", ex.out, "corpus JSONL to write");
  extract->add_option("--max-candidates", ex.max_candidates, "cap on inline-comment candidate chains");
  extract->callback([&] { action = [&] { return run_extract(ctx, ex); }; });

  FilterArgs fa;
  auto* filter = app.add_subcommand("filter", "drop noisy pairs");
  add_common(filter);
  filter->add_option("--corpus", fa.corpus, "corpus JSONL to read");
  filter->add_option("--out", fa.out, "filtered corpus JSONL");
  filter->add_option("--report", fa.report, "report path (default: <out>.report.json)");
  filter->add_option("--margin", fa.margin, "reliance margin");
  filter->add_option("--special-terms", fa.special_terms, "comma-separated special terms");
  filter->add_option("--min-tokens", fa.min_tokens, "minimum comment length in tokens");
  filter->add_flag("--no-reliance", fa.no_reliance, "skip the TF-IDF reliance rule");
  filter->add_option("--tfidf-in", fa.tfidf_in, "reuse a saved TF-IDF model");
  filter->add_option("--tfidf-out", fa.tfidf_out, "save the TF-IDF model used");
  filter->callback([&] { action = [&] { return run_filter(ctx, fa); }; });

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train the encoder");
  add_common(train);
  train->add_option("--corpus", ta.corpus, "training corpus JSONL");
  train->add_option("--out", ta.out, "checkpoint to write");
  train->add_option("--metrics", ta.metrics, "per-epoch metrics JSONL");
  train->add_option("--heldout-out", ta.heldout_out, "write the held-out pairs as an evalset");
  train->add_option("--epochs", ta.epochs);
  train->add_option("--dim", ta.d, "embedding width");
  train->add_option("--batch-size", ta.batch_size);
  train->add_option("--patience", ta.patience, "early-stopping patience; 0 disables");
  train->add_option("--lr", ta.learning_rate, "SGD learning rate");
  train->add_option("--max-grad-norm", ta.max_grad_norm, "global gradient-norm cap; 0 disables");
  train->add_option("--alpha", ta.alpha, "block loss weight");
  train->add_option("--beta", ta.beta, "statement loss weight");
  train->add_option("--tau", ta.tau, "InfoNCE temperature");
  train->add_flag("--disable-hmgr", ta.disable_hmgr, "mean-pool every snippet");
  train->add_flag("--disable-maxsim", ta.disable_maxsim, "use the outermost candidate as the positive");
  train->add_flag("--disable-infunction-negatives", ta.disable_infunction);
  train->callback([&] { action = [&] { return run_train(ctx, ta); }; });

  IndexArgs ia;
  auto* index = app.add_subcommand("index", "encode every snippet of a corpus");
  add_common(index);
  index->add_option("--corpus", ia.corpus, "corpus JSONL");
  index->add_option("--checkpoint", ia.checkpoint, "trained checkpoint");
  index->add_option("--out", ia.out, "index file to write");
  index->add_flag("--disable-hmgr", ia.disable_hmgr, "mean-pool every snippet");
  index->callback([&] { action = [&] { return run_index(ctx, ia); }; });

  SearchArgs sa;
  auto* search = app.add_subcommand("search", "rank indexed snippets for a query");
  add_common(search);
  search->add_option("--index", sa.index, "index file");
  search->add_option("--checkpoint", sa.checkpoint, "checkpoint the index was built with");
  search->add_option("--query", sa.query, "natural-language query")->required();
  search->add_option("-k,--top", sa.k, "number of results")->check(CLI::PositiveNumber);
  search->add_option("--granularity", sa.granularity, "function, block or statement");
  search->callback([&] { action = [&] { return run_search(ctx, sa); }; });

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "MRR of an evalset against an index");
  add_common(eval);
  eval->add_option("--index", ea.index, "index file");
  eval->add_option("--checkpoint", ea.checkpoint, "checkpoint the index was built with");
  eval->add_option("--evalset", ea.evalset, "evalset JSONL");
  eval->callback([&] { action = [&] { return run_eval(ctx, ea); }; });

  AttributeArgs aa;
  auto* attribute = app.add_subcommand("attribute", "per-snippet contribution to a function's score");
  add_common(attribute);
  attribute->add_option("--corpus", aa.corpus, "corpus JSONL holding the function");
  attribute->add_option("--checkpoint", aa.checkpoint, "trained checkpoint");
  attribute->add_option("--function", aa.function, "function id")->required();
  attribute->add_option("--query", aa.query, "natural-language query")->required();
  attribute->add_flag("--disable-hmgr", aa.disable_hmgr, "mean-pool every snippet");
  attribute->callback([&] { action = [&] { return run_attribute(ctx, aa); }; });

  GradcheckArgs ga;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the training gradients");
  add_common(gradcheck);
  gradcheck->add_option("--instances", ga.instances, "random problems to check")->check(CLI::PositiveNumber);
  gradcheck->add_option("--probe-size", ga.probe_size, "embedding width of the probes");
  gradcheck->add_option("--tolerance", ga.tolerance, "maximum relative error");
  gradcheck->callback([&] { action = [&] { return run_gradcheck(ctx, ga); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    ctx.config = PipelineConfig::load(ctx.common.config_path);
    return action();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\nRun with --help for usage.\n";
    return 1;
  } catch (const mgcs::Error& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
}
