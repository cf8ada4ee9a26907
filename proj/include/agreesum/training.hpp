#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "agreesum/config_file.hpp"
#include "agreesum/corpus.hpp"
#include "agreesum/dataset_builder.hpp"
#include "agreesum/entailment.hpp"
#include "agreesum/nn/conv_head.hpp"
#include "agreesum/summarizer.hpp"

namespace agreesum {

struct TrainConfig {
  nn::OptimizerConfig optimizer;  // plain SGD at 1e-4 unless configured
  double lambda = 0.1;
  int batch_size = 8;
  int max_steps = 1000;  // counted over every phase
  int ce_steps = 1;
  int unsup_steps = 1;
  int disc_steps = 1;
  int pg_samples = 1;
  bool reward_baseline = false;
  bool sample_baseline = false;  // leave-one-out mean over a cluster's pg_samples
  std::uint64_t seed = 0;
  std::string scorer_endpoint;
  int eval_every = 0;     // dev ROUGE-2 checkpoint selection; 0 keeps the last step
  int phase1_steps = -1;  // B3 phases; -1 means max_steps
  int phase2_steps = -1;
  int patience = 0;       // cycles without reward improvement before stopping; 0 disables
  double epsilon = 1e-3;
  int disc_filters = 256;
  std::size_t probe_size = 32;
  int probe_samples = 4;

  static TrainConfig from(const KeyValueConfig& kv, TrainConfig defaults);
  static TrainConfig from(const KeyValueConfig& kv) { return from(kv, TrainConfig{}); }
  void validate() const;
  KeyValueConfig echo() const;
};

enum class BaselineKind { b1, b2, b3, b4 };
BaselineKind parse_baseline_kind(std::string_view text);

struct TrainData {
  std::vector<ClusterExample> train;
  std::vector<ClusterExample> dev;
  std::vector<LinkedPair> linked_pairs;
};

// Vocabulary over every training text (articles, summaries, linked pairs).
Vocabulary build_vocabulary(const TrainData& data, std::size_t max_size = 8000);

// A supervised example: the cluster's summary is the target; masked
// articles become pad slots.
struct TrainingExample {
  ClusterExample cluster;
  std::optional<std::vector<bool>> keep_mask;
};

std::vector<TrainingExample> linked_examples(std::span<const LinkedPair> pairs);
// Annotated clusters restricted to their entailed articles.
std::vector<TrainingExample> entailed_examples(std::span<const ClusterExample> train);
// Annotated clusters with non-entailed articles masked out.
std::vector<TrainingExample> masked_examples(std::span<const ClusterExample> train);

struct LogRecord {
  std::int64_t step = 0;
  std::string phase;  // "ce", "unsup" or "disc"
  double loss = 0.0;
  std::optional<double> mean_reward;
};

// Append-only JSONL training log (kept in memory as well).
class TrainingLog {
 public:
  explicit TrainingLog(std::optional<std::filesystem::path> path = std::nullopt);
  void write(LogRecord record);
  const std::vector<LogRecord>& records() const { return records_; }

 private:
  std::optional<std::filesystem::path> path_;
  std::vector<LogRecord> records_;
};

// Shuffled sampling without replacement, reshuffled at every wrap.
class BatchCursor {
 public:
  BatchCursor(std::size_t size, std::uint64_t seed);
  std::vector<std::size_t> next(std::size_t count);

 private:
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::mt19937_64 rng_;
};

// Mean token negative log-likelihood over all target positions of the batch.
nn::Var ce_loss(const Summarizer& model, std::span<const TrainingExample> batch);
double step_ce(Summarizer& model, nn::Optimizer& optimizer, std::span<const TrainingExample> batch);

// -(1/N) sum (R_i - b) log p_i. Terms with zero advantage are left out of
// the graph, so an all-zero advantage yields a constant zero.
nn::Var policy_gradient_surrogate(std::span<const nn::Var> log_probs,
                                  std::span<const double> rewards, double baseline);

// Exponential running mean of batch rewards.
class RewardBaseline {
 public:
  explicit RewardBaseline(double decay = 0.9) : decay_(decay) {}
  double value() const { return value_.value_or(0.0); }
  void update(double batch_mean);

 private:
  double decay_;
  std::optional<double> value_;
};

// Sequence discriminator over decoder hidden states: padded or truncated to
// a fixed length, convolution and max-pooling, then a single logit.
class Discriminator {
 public:
  Discriminator(int hidden_dim, int max_len, std::vector<int> windows, int filters,
                std::uint64_t seed);
  nn::Var logit(const nn::Var& hidden) const;  // (T x d) -> 1 x 1
  double probability(const nn::Matrix& hidden) const;
  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }

 private:
  int hidden_dim_;
  int max_len_;
  nn::ParameterStore store_;
  nn::ConvPoolHead head_;
  nn::Linear output_;
};

// -(1/k) sum [log p_real + log(1 - p_fake)], probabilities clipped to [eps, 1 - eps].
double language_loss(std::span<const double> p_real, std::span<const double> p_fake,
                     double eps = 1e-7);

// One update of the discriminator only; returns the loss before the update.
double step_discriminator(Discriminator& disc, nn::Optimizer& optimizer,
                          std::span<const nn::Matrix> real, std::span<const nn::Matrix> fake);

struct PgStepResult {
  double surrogate = 0.0;
  double mean_reward = 0.0;
  double generator_loss = 0.0;
  std::vector<nn::Matrix> fake_hidden;
};

// Samples summaries for each cluster, rewards them with signed_reward and
// applies one update of L_e plus lambda times the generator-side adversarial
// term -log F_l(fake). Scorer failures abort before any parameter change.
PgStepResult step_entailment_pg(Summarizer& model, nn::Optimizer& optimizer,
                                std::span<const ClusterExample> batch,
                                const EntailmentJudge& judge, RewardBaseline* baseline,
                                std::mt19937_64& rng, int samples = 1, double lambda = 0.0,
                                Discriminator* disc = nullptr, bool sample_baseline = false);

// Mean signed reward of sampled summaries over `probe`, from a fixed seed.
double probe_reward(const Summarizer& model, std::span<const ClusterExample> probe,
                    const EntailmentJudge& judge, std::uint64_t seed, int samples);

// Mean ROUGE-2 F of greedy decodes against cluster summaries.
double dev_rouge2(const Summarizer& model, std::span<const ClusterExample> dev);

struct BaselineReport {
  std::int64_t steps = 0;
  std::optional<std::int64_t> best_step;
  std::vector<std::pair<std::int64_t, double>> dev_rouge2;
};

// Trains `model` in place. B4 switches the model to merged encodings.
BaselineReport train_baseline(BaselineKind kind, Summarizer& model, const TrainData& data,
                              const TrainConfig& config, TrainingLog* log = nullptr);

struct AsmReport {
  std::int64_t steps = 0;
  double initial_mean_reward = 0.0;
  double final_mean_reward = 0.0;
  std::vector<double> cycle_rewards;
  bool converged = false;
};

// Alternating masked cross-entropy, policy-gradient and discriminator
// updates on a (normally B1-finetuned) model, in place.
AsmReport train_asm(Summarizer& model, const TrainData& data, const EntailmentJudge& judge,
                    const TrainConfig& config, TrainingLog* log = nullptr);

}  // namespace agreesum
