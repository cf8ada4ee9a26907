#pragma once

#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "agreesum/corpus.hpp"
#include "agreesum/entailment.hpp"
#include "agreesum/evaluation.hpp"
#include "agreesum/search.hpp"
#include "agreesum/summarizer.hpp"

namespace agreesum {

// Splits after . ! ? (optionally followed by closing quotes or brackets) when
// whitespace and a capital letter follow, except after common abbreviations
// and single-letter initials.
std::vector<std::string> split_sentences(std::string_view text);

struct DecodeConfig {
  int beam_size = 8;
  double alpha = 0.8;
  std::optional<int> entdec_k;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DecodeResult {
  std::string text;
  double entail_score = 0.0;
  int beam_rank = 0;
  bool truncated = false;
  std::vector<std::string> warnings;
};

// Index of the candidate with the highest score; ties go to the higher
// norm_score, then to the earlier beam position.
std::size_t select_entdec(std::span<const BeamCandidate> beam, std::span<const double> scores);

// Top beam candidate; entail_score is filled in when a judge is given.
DecodeResult decode_plain(const Summarizer& model, const ClusterExample& cluster, int beam_size,
                          double alpha, const EntailmentJudge* judge = nullptr);

// Beam of size k reranked by cluster entailment score.
DecodeResult decode_entdec(const Summarizer& model, const EntailmentJudge& judge,
                           const ClusterExample& cluster, int k, double alpha);

// Extractive: the lead sentence with the best cluster entailment score,
// ties broken uniformly at random. beam_rank holds the source article index.
DecodeResult decode_b5(const EntailmentJudge& judge, const ClusterExample& cluster,
                       std::mt19937_64& rng);

// Decodes every cluster (in parallel across `workers` threads). Output order
// and content do not depend on the number of workers.
std::vector<DecodedRecord> decode_clusters(const Summarizer* model, const EntailmentJudge* judge,
                                           std::span<const ClusterExample> clusters,
                                           const DecodeConfig& config, bool b5,
                                           const std::string& model_name, int workers = 1);

}  // namespace agreesum
