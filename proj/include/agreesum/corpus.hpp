#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace agreesum {

using Date = std::chrono::year_month_day;

enum class Split { train, dev, test };
enum class Label { not_entailed, entailed };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);
std::string_view to_string(Label label);

// Strict "YYYY-MM-DD" with calendar validation.
Date parse_date(std::string_view text);
std::string format_date(Date date);

struct Article {
  std::string article_id;
  std::string title;
  std::string body;
  std::string url;
  Date published_date{};

  bool operator==(const Article&) const = default;
};

struct ClusterExample {
  std::string cluster_id;
  std::vector<Article> articles;
  std::string summary;
  std::optional<std::vector<Label>> labels;
  Split split = Split::train;

  bool operator==(const ClusterExample&) const = default;

  bool annotated() const { return labels.has_value(); }
  std::size_t entailed_count() const;
};

// Article-summary pair with rater votes; `label` is the strict majority.
struct EntailmentRecord {
  std::string article_id;
  std::string cluster_id;
  std::string premise;
  std::string hypothesis;
  std::vector<bool> votes;
  Label label = Label::not_entailed;
};

// Raw annotation line: votes for one article of one cluster.
struct AnnotationVotes {
  std::string cluster_id;
  std::string article_id;
  std::vector<bool> votes;
};

// Mirrors the dataset summary table: per split, counts of cluster-summary and
// article-summary pairs broken down by annotation status.
struct DatasetManifest {
  struct Counts {
    std::size_t all = 0;
    std::size_t annotated = 0;
    std::size_t entailed = 0;  // annotated with at least one entailed article (cluster rows)
    std::size_t unannotated = 0;
    bool operator==(const Counts&) const = default;
  };
  std::array<Counts, 3> clusters{};  // indexed by Split
  std::array<Counts, 3> articles{};

  static DatasetManifest from(std::span<const ClusterExample> examples);
  std::string table() const;
  nlohmann::ordered_json to_json() const;
};

// Majority label of an odd vote list of length 3 or 5.
Label aggregate_votes(const std::vector<bool>& votes);

// Throws ValidationError naming the cluster on any invariant violation.
void validate_cluster(const ClusterExample& cluster);

nlohmann::ordered_json to_json(const Article& article);
Article article_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const ClusterExample& cluster);
ClusterExample cluster_from_json(const nlohmann::json& j);

std::vector<ClusterExample> load_clusters(const std::filesystem::path& path);
void save_clusters(std::span<const ClusterExample> clusters, const std::filesystem::path& path);
std::string serialize_clusters(std::span<const ClusterExample> clusters);

std::vector<AnnotationVotes> load_annotations(const std::filesystem::path& path);

// Throws ValidationError unless `j` is an object whose keys are a subset of
// `allowed` and contain every entry of `required`.
void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> required,
                std::initializer_list<std::string_view> optional, std::string_view what);

}  // namespace agreesum
