#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agreesum/corpus.hpp"
#include "agreesum/entailment.hpp"

namespace agreesum {

struct RougeScores {
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double rougeL = 0.0;
};

// F-measures over lower-cased, punctuation-stripped words with clipped counts.
RougeScores rouge(std::string_view candidate, std::string_view reference);

struct OverlapResult {
  double percent = 0.0;
  bool too_short = false;  // generation has fewer than n words; percent is 0
};

// Share of generation n-gram instances whose n-gram occurs anywhere in the
// concatenated article bodies.
OverlapResult ngram_overlap(std::string_view generation, const ClusterExample& cluster, int n);

struct AgreementMetrics {
  double article_entail_pct = 0.0;
  double cluster_entail_pct = 0.0;
  double hallucination_pct = 0.0;
};

// One label list per cluster, one label per article.
AgreementMetrics agreement_metrics(std::span<const std::vector<Label>> cluster_labels);

struct DecodedPair {
  const ClusterExample* cluster;
  std::string summary;
};
AgreementMetrics agreement_metrics(std::span<const DecodedPair> decoded,
                                   const EntailmentJudge& judge);

enum class ReferenceMode { dev_gold, test_approx };
ReferenceMode parse_reference_mode(std::string_view text);

struct HumanAnnotation {
  std::string cluster_id;
  std::optional<std::string> article_id;
  std::string question;  // "entail" or "language"
  std::vector<bool> votes;
};
std::vector<HumanAnnotation> load_human_annotations(const std::filesystem::path& path);

inline constexpr std::array<int, 4> kOverlapOrders{3, 4, 5, 6};

struct MetricsReport {
  std::string model;
  ReferenceMode reference_mode = ReferenceMode::dev_gold;
  std::size_t clusters = 0;
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double rougeL = 0.0;
  double article_entail_pct = 0.0;
  double cluster_entail_pct = 0.0;
  double hallucination_pct = 0.0;
  std::optional<double> language_pct;
  std::optional<double> human_article_entail_pct;
  std::optional<double> human_cluster_entail_pct;
  std::optional<double> human_hallucination_pct;
  std::map<int, double> ngram_overlap;
  std::map<int, std::size_t> short_generations;

  nlohmann::ordered_json to_json() const;
  // Aligned plain-text table: ROUGE triple, entailment columns, language,
  // then n-gram overlap for n = 3..6.
  std::string table() const;
};

struct DecodedRecord {
  std::string cluster_id;
  std::string model;
  std::string summary;
  double entail_score = 0.0;
  int beam_rank = 0;
  bool truncated = false;  // no finished hypothesis; best unfinished one emitted
};
nlohmann::ordered_json to_json(const DecodedRecord& record);
DecodedRecord decoded_record_from_json(const nlohmann::json& j);
std::vector<DecodedRecord> load_decoded(const std::filesystem::path& path);
std::string serialize_decoded(std::span<const DecodedRecord> records);

MetricsReport evaluate_records(std::span<const DecodedRecord> decoded,
                               std::span<const ClusterExample> dataset,
                               const EntailmentJudge& judge, ReferenceMode mode,
                               std::span<const HumanAnnotation> human = {});
MetricsReport evaluate_run(const std::filesystem::path& decoded_path,
                           std::span<const ClusterExample> dataset, const EntailmentJudge& judge,
                           ReferenceMode mode, std::span<const HumanAnnotation> human = {});

}  // namespace agreesum
