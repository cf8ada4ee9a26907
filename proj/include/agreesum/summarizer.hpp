#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "agreesum/corpus.hpp"
#include "agreesum/nn/parameters.hpp"
#include "agreesum/search.hpp"
#include "agreesum/text.hpp"

namespace agreesum {

struct SummarizerConfig {
  int embed_dim = 128;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int max_input_len = 1024;
  int max_output_len = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

// How a cluster is presented to the encoder.
enum class InputMode { concat, merge };
std::string_view to_string(InputMode mode);
InputMode parse_input_mode(std::string_view text);

struct Encoding {
  nn::Var states;             // L x d
  nn::Var states_t;           // d x L
  std::vector<bool> masked;   // positions excluded from attention
  nn::Var pooled;             // 1 x d, mean over unmasked positions
};

struct TeacherForced {
  nn::Var logits;  // T x V
  nn::Var hidden;  // T x d, attentional decoder states
};

struct DecoderState {
  std::vector<nn::Var> layers;  // per-layer GRU state, 1 x d
  nn::Var attentional;          // 1 x d, state that produced `log_probs`
  Eigen::RowVectorXd log_probs;
};

// Small encoder-decoder: residual convolutional encoder over token
// embeddings, stacked-GRU decoder with dot-product attention and input
// feeding. Embeddings are shared between encoder and decoder.
class Summarizer {
 public:
  Summarizer(Vocabulary vocab, SummarizerConfig config);
  Summarizer(const Summarizer& other);
  Summarizer& operator=(const Summarizer&) = delete;
  Summarizer(Summarizer&&) = default;

  const Vocabulary& vocab() const { return vocab_; }
  const SummarizerConfig& config() const { return config_; }
  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }
  InputMode input_mode() const { return input_mode_; }
  void set_input_mode(InputMode mode) { input_mode_ = mode; }
  std::int64_t step_count() const { return step_count_; }
  void add_steps(std::int64_t n) { step_count_ += n; }

  // Articles truncated to an equal share of the input budget (unused share
  // flows left to right), joined by separators. Articles with keep_mask
  // false become a single pad token.
  std::vector<TokenId> prepare_cluster_input(const ClusterExample& cluster,
                                             const std::vector<bool>* keep_mask = nullptr) const;
  std::vector<TokenId> prepare_article_input(const Article& article) const;
  std::vector<TokenId> encode_target(std::string_view summary) const;  // appends eos, capped

  Encoding encode(std::span<const TokenId> input) const;
  // Encodes each article separately (end-padded to a common length) and
  // averages the outputs elementwise.
  Encoding merge_encodings(std::span<const std::vector<TokenId>> articles) const;
  // Encoding for a cluster according to input_mode(): concatenation or merge.
  Encoding encode_cluster(const ClusterExample& cluster,
                          const std::vector<bool>* keep_mask = nullptr) const;

  TeacherForced forward_teacher_forced(const Encoding& enc, std::span<const TokenId> target) const;
  TeacherForced forward_teacher_forced(std::span<const TokenId> input,
                                       std::span<const TokenId> target) const;

  DecoderState start(const Encoding& enc) const;
  DecoderState advance(const Encoding& enc, const DecoderState& state, TokenId token) const;

  void save(const std::filesystem::path& path) const;
  static Summarizer load(const std::filesystem::path& path);

 private:
  DecoderState step(const Encoding& enc, const std::vector<nn::Var>& layers,
                    const nn::Var& previous_attentional, TokenId input) const;
  void build(std::mt19937_64& rng);
  nn::Var output_logits(const nn::Var& hidden) const;

  Vocabulary vocab_;
  SummarizerConfig config_;
  InputMode input_mode_ = InputMode::concat;
  std::int64_t step_count_ = 0;
  nn::ParameterStore store_;

  nn::Var embedding_;
  nn::Var positions_;
  std::vector<nn::Linear> encoder_convs_;
  nn::Linear init_;
  struct GruLayer {
    nn::Linear input;
    nn::Linear recurrent;
  };
  std::vector<GruLayer> gru_;
  nn::Linear attention_;
  nn::Linear combine_;
  nn::Linear output_;
  nn::Var output_mask_;  // pad, bos and sep are never emitted
};

// StepModel adapter for beam search and sampling over one encoding.
class SummarizerStepper {
 public:
  using State = DecoderState;
  SummarizerStepper(const Summarizer& model, const Encoding& enc) : model_(&model), enc_(&enc) {}
  State initial() const { return model_->start(*enc_); }
  State advance(const State& s, TokenId t) const { return model_->advance(*enc_, s, t); }
  Eigen::RowVectorXd next_log_probs(const State& s) const { return s.log_probs; }
  TokenId eos() const { return Vocabulary::kEos; }
  int max_length() const { return model_->config().max_output_len; }

 private:
  const Summarizer* model_;
  const Encoding* enc_;
};

struct SampledSummary {
  std::vector<TokenId> tokens;
  double log_prob = 0.0;
  nn::Matrix hidden;  // T x d, free-running attentional states
};

SampledSummary sample_summary(const Summarizer& model, std::span<const TokenId> input,
                              std::mt19937_64& rng);
SampledSummary sample_summary(const Summarizer& model, const Encoding& enc, std::mt19937_64& rng);

std::vector<BeamCandidate> beam_search(const Summarizer& model, const Encoding& enc,
                                       int beam_size, double alpha);
std::vector<BeamCandidate> beam_search(const Summarizer& model, std::span<const TokenId> input,
                                       int beam_size, double alpha);

}  // namespace agreesum
