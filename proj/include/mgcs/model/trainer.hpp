#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mgcs/autodiff/tape.hpp"
#include "mgcs/common/rng.hpp"
#include "mgcs/corpus/types.hpp"
#include "mgcs/encoder/params.hpp"
#include "mgcs/extract/segmenter.hpp"
#include "mgcs/model/hmgr.hpp"

namespace mgcs::train {

struct AblationFlags {
  bool disable_hmgr = false;
  bool disable_maxsim = false;
  bool disable_infunction_negatives = false;
  bool disable_block_loss = false;
  bool disable_statement_loss = false;
};

struct TrainConfig {
  double alpha = 1.0;
  double beta = 0.6;
  double tau = 0.05;
  std::size_t batch_size = 32;
  double learning_rate = 3.0;
  // Global gradient-norm cap applied before each SGD step; 0 disables.
  double max_grad_norm = 0.3;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  std::size_t d = 128;
  double init_scale = 0.05;
  std::size_t k_in_function = 3;
  double holdout_fraction = 0.1;
  std::size_t patience = 5;  // epochs without held-out improvement; 0 disables
  std::size_t max_code_tokens = kMaxCodeTokens;
  std::size_t max_query_tokens = kMaxQueryTokens;
  AblationFlags flags;

  /// Throws ConfigError.
  void validate() const;
  hmgr::Mode mode() const { return flags.disable_hmgr ? hmgr::Mode::MeanPool : hmgr::Mode::Hierarchical; }
  bool enabled(Granularity g) const;

  nlohmann::ordered_json to_json() const;
  /// Keys present in `j` override `base`; unknown keys are a ConfigError.
  static TrainConfig from_json(const nlohmann::json& j, TrainConfig base);
  static TrainConfig from_json(const nlohmann::json& j);
};

// ---- loss pieces ---------------------------------------------------------

/// Dot product; throws DimensionMismatch.
double score(std::span<const double> q, std::span<const double> c);

struct MaxSimResult {
  double score = 0.0;
  std::size_t index = 0;
};

/// Best candidate by dot product, smallest index on ties. Throws EmptyCandidates.
MaxSimResult maxsim(std::span<const double> q, std::span<const Vector> candidates);

/// -ln(e^{pos/tau} / (e^{pos/tau} + sum_j e^{neg_j/tau})). Throws ConfigError for tau <= 0.
double infonce(double pos, std::span<const double> negs, double tau);

/// L_f + alpha L_b + beta L_s.
double combine_losses(double L_f, double L_b, double L_s, const TrainConfig& cfg);

/// Up to k same-granularity snippets of the function that are neither the
/// anchor nor nested with it, drawn uniformly without replacement. Empty for
/// Function anchors. `eligible`, when non-empty, masks out snippets.
std::vector<std::size_t> select_in_function_negatives(std::size_t anchor, std::span<const Snippet> snippets,
                                                      const HierarchyIndex& hierarchy, std::size_t k, Rng& rng,
                                                      std::span<const char> eligible = {});

struct TrainingExample {
  Granularity granularity = Granularity::Function;
  Vector query;
  std::vector<Vector> candidates;
  // Optional: ids of the candidates, used to keep an example's own
  // candidates out of its in-batch negatives.
  std::vector<std::string> candidate_ids;
  std::vector<Vector> in_function_negatives;
};

struct LossValues {
  double L_f = 0.0;
  double L_b = 0.0;
  double L_s = 0.0;
  double total = 0.0;
  std::size_t count[kGranularityCount] = {0, 0, 0};
};

/// Plain evaluation of the batch objective. Throws EmptyBatch.
LossValues batch_loss(std::span<const TrainingExample> examples, const TrainConfig& cfg);

/// One example already recorded on a tape.
struct ExampleVars {
  Granularity granularity = Granularity::Function;
  ad::Var query;
  std::vector<ad::Var> candidates;
  std::vector<std::string_view> candidate_ids;
  std::vector<ad::Var> in_function_negatives;
};

struct TapeLoss {
  ad::Var total;
  LossValues values;
  std::vector<std::size_t> positive;  // resolved candidate per example
};

TapeLoss batch_loss(ad::Tape& tape, std::span<const ExampleVars> examples, const TrainConfig& cfg);

// ---- data ----------------------------------------------------------------

/// A function as the loss sees it: structure plus its encoder input.
struct FunctionView {
  std::span<const Snippet> snippets;
  const HierarchyIndex* hierarchy = nullptr;
  std::span<const TokenId> tokens;
  std::span<const ByteSpan> offsets;
};

struct PairView {
  std::size_t function = 0;
  Granularity granularity = Granularity::Function;
  std::span<const TokenId> query;
  std::span<const std::size_t> candidates;  // snippet indices, innermost first
};

/// Encodes the batch on `tape` (embeddings -> HMGR -> scores) and records the
/// loss. In-function negatives are drawn from `rng` unless disabled.
TapeLoss record_batch(ad::Tape& tape, std::span<const FunctionView> functions, std::span<const PairView> batch,
                      const TrainConfig& cfg, Rng& rng);

struct PreparedFunction {
  std::size_t analysis = 0;
  TokenSeq tokens;
};

struct PreparedPair {
  std::string pair_id;
  std::size_t function = 0;
  Granularity granularity = Granularity::Function;
  TokenSeq query;
  std::vector<std::size_t> candidates;
};

struct TrainingData {
  std::vector<FunctionAnalysis> analyses;
  std::vector<PreparedFunction> functions;
  std::vector<PreparedPair> pairs;
  std::size_t skipped_pairs = 0;  // no query tokens, or every candidate truncated away

  std::vector<FunctionView> views() const;
  PairView view(const PreparedPair& p) const;
};

/// `analyses` as returned by analyze_corpus_functions for `records`.
TrainingData prepare_training_data(std::span<const CorpusRecord> records, std::vector<FunctionAnalysis> analyses,
                                   std::uint64_t tokenizer_seed, const TrainConfig& cfg);

/// Code tokens of a function with comments and docstrings masked out.
TokenSeq function_tokens(const FunctionAnalysis& analysis, const Tokenizer& tokenizer, std::size_t limit);

struct HoldoutSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> held_out;
};

/// Per-granularity seeded split; each granularity with >= 2 pairs gives at
/// least one pair to the held-out side.
HoldoutSplit split_holdout(const TrainingData& data, double fraction, std::uint64_t seed);

// ---- training ------------------------------------------------------------

struct EpochMetrics {
  std::size_t epoch = 0;
  double L_f = 0.0;
  double L_b = 0.0;
  double L_s = 0.0;
  double total = 0.0;
  std::optional<double> held_out_total;

  nlohmann::ordered_json to_json() const;
};

struct TrainResult {
  EncoderParams params;  // best held-out checkpoint
  std::vector<EpochMetrics> metrics;
  std::size_t best_epoch = 0;
  HoldoutSplit split;
};

/// Epoch 0 is the untrained baseline on the same batches; epochs 1..N train.
/// Throws ConfigError, DegenerateCorpus.
TrainResult train(const TrainingData& data, const TrainConfig& cfg,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {});

/// Mean batch loss over `pairs` without updating anything.
LossValues evaluate_loss(const EncoderParams& params, const TrainingData& data, std::span<const std::size_t> pairs,
                         const TrainConfig& cfg, std::uint64_t negative_seed);

// ---- verification ----------------------------------------------------------

struct GradCheckReport {
  double max_relative_error = 0.0;
  double embedding_table = 0.0;
  double hmgr_W = 0.0;
  double layernorm_gain = 0.0;
  double layernorm_bias = 0.0;
  std::size_t instances = 0;
  std::size_t aggregation_levels = 0;   // deepest Block/Function chain exercised
  std::size_t maxsim_choices = 0;       // examples resolving among >= 2 candidates

  nlohmann::ordered_json to_json() const;
};

/// Central differences (step 1e-5) against the tape's gradients for every
/// parameter tensor on `instances` random small problems (d <= 16, <= 8
/// examples, nested blocks, random non-zero W). Errors are norm-wise relative
/// per tensor; the report keeps the maximum over instances.
GradCheckReport check_gradients(const TrainConfig& cfg, std::size_t probe_size, std::uint64_t seed,
                                std::size_t instances = 1);

}  // namespace mgcs::train
