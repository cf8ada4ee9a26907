#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "agreesum/corpus.hpp"
#include "agreesum/nn/conv_head.hpp"
#include "agreesum/nn/parameters.hpp"
#include "agreesum/text.hpp"

namespace agreesum {

struct TextPair {
  std::string premise;
  std::string hypothesis;
};

// Anything that can label (premise, hypothesis) pairs. Implementations must
// be safe to call concurrently.
class EntailmentJudge {
 public:
  virtual ~EntailmentJudge() = default;
  virtual std::vector<Label> judge(std::span<const TextPair> pairs) const = 0;
  Label judge_one(const std::string& premise, const std::string& hypothesis) const;
};

// Entailed iff every normalized hypothesis word occurs in the premise.
class ContainmentOracle : public EntailmentJudge {
 public:
  std::vector<Label> judge(std::span<const TextPair> pairs) const override;
  static Label classify(std::string_view premise, std::string_view hypothesis);
};

// Per-article labels of `candidate` against the cluster's article bodies.
std::vector<Label> article_labels(const EntailmentJudge& judge, const ClusterExample& cluster,
                                  const std::string& candidate);
// Sum over articles of +1 (entailed) / -1 (not entailed).
int signed_reward(const EntailmentJudge& judge, const ClusterExample& cluster,
                  const std::string& candidate);
int signed_reward(std::span<const Label> labels);
// Fraction of articles entailing the candidate.
double cluster_entailment_score(const EntailmentJudge& judge, const ClusterExample& cluster,
                                const std::string& candidate);
double cluster_entailment_score(std::span<const Label> labels);

struct ClassifierConfig {
  int embed_dim = 64;
  std::vector<int> windows{2, 3, 4, 5};
  int filters = 256;
  int max_premise_len = 1024;
  int max_hypothesis_len = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ClassifierTrainConfig {
  int epochs = 10;
  int batch_size = 16;
  nn::OptimizerConfig optimizer{nn::OptimizerConfig::Kind::adam, 1e-3};
  std::uint64_t seed = 0;
};

// Text-pair classifier: token embeddings of "premise <sep> hypothesis", each
// position enriched by soft alignment onto the premise, then a convolutional
// max-pooling head and a two-way softmax.
class EntailmentClassifier : public EntailmentJudge {
 public:
  EntailmentClassifier(Vocabulary vocab, ClassifierConfig config);
  EntailmentClassifier(EntailmentClassifier&&) = default;

  const Vocabulary& vocab() const { return vocab_; }
  const ClassifierConfig& config() const { return config_; }
  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }

  std::vector<TokenId> encode_pair(std::string_view premise, std::string_view hypothesis) const;
  nn::Var log_probs(std::string_view premise, std::string_view hypothesis) const;  // 1 x 2
  // (p(not_entailed), p(entailed)).
  std::array<double, 2> probabilities(std::string_view premise, std::string_view hypothesis) const;
  Label classify(std::string_view premise, std::string_view hypothesis) const;
  std::vector<Label> judge(std::span<const TextPair> pairs) const override;

  void save(const std::filesystem::path& path) const;
  static EntailmentClassifier load(const std::filesystem::path& path);

 private:
  Vocabulary vocab_;
  ClassifierConfig config_;
  nn::ParameterStore store_;
  nn::Var embedding_;
  nn::Var segment_;
  nn::Var align_;
  nn::Linear fuse_;
  nn::ConvPoolHead head_;
  nn::Linear output_;
};

struct ClassifierTrainResult {
  std::vector<double> batch_losses;
};

// Builds the vocabulary from the records and fits a fresh classifier.
EntailmentClassifier train_classifier(std::span<const EntailmentRecord> records,
                                      const ClassifierConfig& model_config,
                                      const ClassifierTrainConfig& train_config,
                                      ClassifierTrainResult* result = nullptr);
double classifier_accuracy(const EntailmentJudge& judge, std::span<const EntailmentRecord> records);

nlohmann::ordered_json to_json(const EntailmentRecord& record);
EntailmentRecord entailment_record_from_json(const nlohmann::json& j);
std::vector<EntailmentRecord> load_entailment_records(const std::filesystem::path& path);
void save_entailment_records(std::span<const EntailmentRecord> records,
                             const std::filesystem::path& path);

}  // namespace agreesum
