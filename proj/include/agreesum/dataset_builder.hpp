#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "agreesum/config_file.hpp"
#include "agreesum/corpus.hpp"

namespace agreesum {

// A summary with its linked article and up to eight topical neighbours,
// before the final-form transformation.
struct RawCluster {
  std::string cluster_id;
  std::string summary;
  Article linked_article;
  std::vector<Article> neighbors;
  Date summary_date{};

  bool operator==(const RawCluster&) const = default;
};

struct SummaryEntry {
  std::string cluster_id;
  std::string summary;
  Article linked_article;
  Date summary_date{};
};

// Linked-article / summary pair used for single-document finetuning.
struct LinkedPair {
  std::string cluster_id;
  Article article;
  std::string summary;

  bool operator==(const LinkedPair&) const = default;
};

struct BuilderConfig {
  std::uint64_t seed = 0;
  int duplication_factor = 10;
  int final_cluster_size = 4;
  Date train_dev_cutoff = parse_date("2019-08-01");
  Date test_window_start = parse_date("2019-08-01");
  Date test_window_end = parse_date("2020-08-01");  // exclusive
  int test_cluster_count = 150;
  double dev_fraction = 0.1;

  static BuilderConfig from(const KeyValueConfig& kv);
  void validate() const;
  KeyValueConfig echo() const;
};

using Similarity = std::function<double(const Article&, const Article&)>;
using AnnotationMap = std::map<std::string, std::vector<Label>, std::less<>>;

inline constexpr int kMaxNeighbors = 8;

// Jaccard overlap of lower-cased body word sets; the default pluggable similarity.
double jaccard_similarity(const Article& a, const Article& b);

std::vector<RawCluster> assemble_raw_clusters(std::span<const SummaryEntry> summaries,
                                              std::span<const Article> candidates,
                                              const Similarity& similarity, int k);

std::vector<ClusterExample> build_train_split(std::span<const RawCluster> raw,
                                              const AnnotationMap& annotations,
                                              const BuilderConfig& config);

std::vector<ClusterExample> build_dev_split(std::span<const RawCluster> raw,
                                            const AnnotationMap& annotations);

// `excluded_article_ids` are ids already used by train/dev outputs; a window
// cluster touching any of them is skipped and the next sampled one is used.
std::vector<ClusterExample> build_test_split(std::span<const RawCluster> raw,
                                             const BuilderConfig& config,
                                             const std::set<std::string, std::less<>>& excluded_article_ids = {});

struct Dataset {
  std::vector<ClusterExample> train;
  std::vector<ClusterExample> dev;
  std::vector<ClusterExample> test;
  std::vector<LinkedPair> linked_pairs;
  DatasetManifest manifest;
};

// Routes raw clusters by date and annotation status and builds all splits.
Dataset build_dataset(std::span<const RawCluster> raw, const AnnotationMap& annotations,
                      const BuilderConfig& config);

// Majority-aggregates per-article votes into label lists aligned with each
// raw cluster's neighbours. Partially annotated clusters are rejected.
AnnotationMap aggregate_annotations(std::span<const AnnotationVotes> votes,
                                    std::span<const RawCluster> raw);

void validate_raw_cluster(const RawCluster& raw);

nlohmann::ordered_json to_json(const RawCluster& raw);
RawCluster raw_cluster_from_json(const nlohmann::json& j);
std::vector<RawCluster> load_raw_clusters(const std::filesystem::path& path);
void save_raw_clusters(std::span<const RawCluster> raw, const std::filesystem::path& path);

nlohmann::ordered_json to_json(const LinkedPair& pair);
std::vector<LinkedPair> load_linked_pairs(const std::filesystem::path& path);
void save_linked_pairs(std::span<const LinkedPair> pairs, const std::filesystem::path& path);

}  // namespace agreesum
