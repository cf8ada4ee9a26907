#include "agreesum/dataset_builder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "agreesum/error.hpp"
#include "agreesum/hash.hpp"
#include "agreesum/io.hpp"
#include "agreesum/text.hpp"

namespace agreesum {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::mt19937_64 cluster_rng(std::uint64_t seed, std::string_view split, std::string_view id) {
  return std::mt19937_64(derive_seed(derive_seed(seed, split), id));
}

// Uniform sample without replacement; survivors keep their original order.
std::vector<std::size_t> sample_indices(std::size_t population, std::size_t k,
                                        std::mt19937_64& rng) {
  std::vector<std::size_t> all(population);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (k >= population) return all;
  std::vector<std::size_t> out;
  out.reserve(k);
  std::sample(all.begin(), all.end(), std::back_inserter(out), k, rng);
  return out;
}

ClusterExample make_example(std::string id, const RawCluster& raw,
                            const std::vector<std::size_t>& picks,
                            const std::vector<Label>* labels, Split split) {
  ClusterExample c;
  c.cluster_id = std::move(id);
  c.summary = raw.summary;
  c.split = split;
  for (auto i : picks) c.articles.push_back(raw.neighbors[i]);
  if (labels) {
    std::vector<Label> sub;
    for (auto i : picks) sub.push_back((*labels)[i]);
    c.labels = std::move(sub);
  }
  return c;
}

bool in_window(Date d, Date start, Date end) {
  return std::chrono::sys_days{d} >= std::chrono::sys_days{start} &&
         std::chrono::sys_days{d} < std::chrono::sys_days{end};
}

}  // namespace

BuilderConfig BuilderConfig::from(const KeyValueConfig& kv) {
  kv.restrict_to({"seed", "duplication_factor", "final_cluster_size", "train_dev_cutoff",
                  "test_window_start", "test_window_end", "test_cluster_count", "dev_fraction"});
  BuilderConfig c;
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  c.duplication_factor = static_cast<int>(kv.get_int("duplication_factor", c.duplication_factor));
  c.final_cluster_size = static_cast<int>(kv.get_int("final_cluster_size", c.final_cluster_size));
  if (auto v = kv.get("train_dev_cutoff")) c.train_dev_cutoff = parse_date(*v);
  if (auto v = kv.get("test_window_start")) c.test_window_start = parse_date(*v);
  if (auto v = kv.get("test_window_end")) c.test_window_end = parse_date(*v);
  c.test_cluster_count = static_cast<int>(kv.get_int("test_cluster_count", c.test_cluster_count));
  c.dev_fraction = kv.get_double("dev_fraction", c.dev_fraction);
  c.validate();
  return c;
}

void BuilderConfig::validate() const {
  if (duplication_factor < 1) throw ValidationError("duplication_factor must be >= 1");
  if (final_cluster_size < 2 || final_cluster_size > 4)
    throw ValidationError("final_cluster_size must be in [2, 4]");
  if (test_cluster_count < 0) throw ValidationError("test_cluster_count must be >= 0");
  if (dev_fraction < 0.0 || dev_fraction > 1.0)
    throw ValidationError("dev_fraction must be in [0, 1]");
  using std::chrono::sys_days;
  if (sys_days{test_window_end} <= sys_days{test_window_start})
    throw ValidationError("test window is empty");
  if (sys_days{test_window_start} < sys_days{train_dev_cutoff})
    throw ValidationError("test window overlaps the train/dev window");
}

KeyValueConfig BuilderConfig::echo() const {
  KeyValueConfig kv;
  kv.set("seed", std::to_string(seed));
  kv.set("duplication_factor", std::to_string(duplication_factor));
  kv.set("final_cluster_size", std::to_string(final_cluster_size));
  kv.set("train_dev_cutoff", format_date(train_dev_cutoff));
  kv.set("test_window_start", format_date(test_window_start));
  kv.set("test_window_end", format_date(test_window_end));
  kv.set("test_cluster_count", std::to_string(test_cluster_count));
  kv.set("dev_fraction", std::to_string(dev_fraction));
  return kv;
}

double jaccard_similarity(const Article& a, const Article& b) {
  const auto wa = normalized_words(a.body);
  const auto wb = normalized_words(b.body);
  const std::set<std::string> sa(wa.begin(), wa.end());
  const std::set<std::string> sb(wb.begin(), wb.end());
  if (sa.empty() && sb.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& w : sa) common += sb.count(w);
  return static_cast<double>(common) / static_cast<double>(sa.size() + sb.size() - common);
}

std::vector<RawCluster> assemble_raw_clusters(std::span<const SummaryEntry> summaries,
                                              std::span<const Article> candidates,
                                              const Similarity& similarity, int k) {
  if (k > kMaxNeighbors) throw ArgumentError("k must be <= 8, got " + std::to_string(k));
  if (k < 0) throw ArgumentError("k must be non-negative");
  std::vector<RawCluster> out;
  out.reserve(summaries.size());
  for (const auto& s : summaries) {
    std::vector<std::pair<double, const Article*>> scored;
    for (const auto& cand : candidates) {
      if (cand.article_id == s.linked_article.article_id) continue;
      scored.emplace_back(similarity(s.linked_article, cand), &cand);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second->article_id < b.second->article_id;
    });
    RawCluster raw;
    raw.cluster_id = s.cluster_id;
    raw.summary = s.summary;
    raw.linked_article = s.linked_article;
    raw.summary_date = s.summary_date;
    const auto take = std::min(scored.size(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < take; ++i) raw.neighbors.push_back(*scored[i].second);
    out.push_back(std::move(raw));
  }
  return out;
}

std::vector<ClusterExample> build_train_split(std::span<const RawCluster> raw,
                                              const AnnotationMap& annotations,
                                              const BuilderConfig& config) {
  config.validate();
  const auto size = static_cast<std::size_t>(config.final_cluster_size);
  std::vector<ClusterExample> out;
  for (const auto& r : raw) {
    if (r.neighbors.empty()) continue;
    auto rng = cluster_rng(config.seed, "train", r.cluster_id);
    auto it = annotations.find(r.cluster_id);
    if (it != annotations.end()) {
      if (it->second.size() != r.neighbors.size())
        throw ValidationError("cluster_id=" + r.cluster_id +
                              " annotation/neighbor length mismatch (" +
                              std::to_string(it->second.size()) + " vs " +
                              std::to_string(r.neighbors.size()) + ")");
      for (int d = 0; d < config.duplication_factor; ++d) {
        auto picks = sample_indices(r.neighbors.size(), size, rng);
        out.push_back(make_example(r.cluster_id + "#dup" + std::to_string(d), r, picks,
                                   &it->second, Split::train));
      }
    } else {
      auto picks = sample_indices(r.neighbors.size(), size, rng);
      out.push_back(make_example(r.cluster_id, r, picks, nullptr, Split::train));
    }
  }
  return out;
}

std::vector<ClusterExample> build_dev_split(std::span<const RawCluster> raw,
                                            const AnnotationMap& annotations) {
  std::vector<ClusterExample> out;
  for (const auto& r : raw) {
    auto it = annotations.find(r.cluster_id);
    if (it == annotations.end())
      throw ValidationError("cluster_id=" + r.cluster_id + " has no labels for the dev split");
    if (it->second.size() != r.neighbors.size())
      throw ValidationError("cluster_id=" + r.cluster_id + " annotation/neighbor length mismatch");
    std::vector<std::size_t> entailed;
    for (std::size_t i = 0; i < r.neighbors.size(); ++i)
      if (it->second[i] == Label::entailed) entailed.push_back(i);
    const auto n = entailed.size();
    if (n < 2) continue;
    std::vector<Label> all_entailed(r.neighbors.size(), Label::entailed);
    if (n <= 4) {
      out.push_back(make_example(r.cluster_id, r, entailed, &all_entailed, Split::dev));
      continue;
    }
    const auto first = (n + 1) / 2;
    std::vector<std::size_t> a(entailed.begin(), entailed.begin() + static_cast<long>(first));
    std::vector<std::size_t> b(entailed.begin() + static_cast<long>(first), entailed.end());
    out.push_back(make_example(r.cluster_id + "#a", r, a, &all_entailed, Split::dev));
    out.push_back(make_example(r.cluster_id + "#b", r, b, &all_entailed, Split::dev));
  }
  return out;
}

std::vector<ClusterExample> build_test_split(std::span<const RawCluster> raw,
                                             const BuilderConfig& config,
                                             const std::set<std::string, std::less<>>& excluded) {
  config.validate();
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& r = raw[i];
    if (!in_window(r.summary_date, config.test_window_start, config.test_window_end)) continue;
    if (r.neighbors.empty()) continue;
    const bool overlaps = std::any_of(r.neighbors.begin(), r.neighbors.end(), [&](const Article& a) {
      return excluded.contains(a.article_id);
    });
    if (!overlaps) eligible.push_back(i);
  }
  const auto need = static_cast<std::size_t>(config.test_cluster_count);
  if (eligible.size() < need)
    throw BuilderError("insufficient test clusters: need " + std::to_string(need) + ", found " +
                       std::to_string(eligible.size()));
  std::mt19937_64 rng(derive_seed(config.seed, "test"));
  std::shuffle(eligible.begin(), eligible.end(), rng);
  eligible.resize(need);
  std::sort(eligible.begin(), eligible.end());
  std::vector<ClusterExample> out;
  for (auto i : eligible) {
    const auto& r = raw[i];
    auto crng = cluster_rng(config.seed, "test", r.cluster_id);
    auto picks = sample_indices(r.neighbors.size(),
                                static_cast<std::size_t>(config.final_cluster_size), crng);
    out.push_back(make_example(r.cluster_id, r, picks, nullptr, Split::test));
  }
  return out;
}

Dataset build_dataset(std::span<const RawCluster> raw, const AnnotationMap& annotations,
                      const BuilderConfig& config) {
  config.validate();
  using std::chrono::sys_days;
  std::vector<RawCluster> pool_annotated;
  std::vector<RawCluster> pool_unannotated;
  for (const auto& r : raw) {
    validate_raw_cluster(r);
    if (sys_days{r.summary_date} >= sys_days{config.train_dev_cutoff}) continue;
    (annotations.contains(r.cluster_id) ? pool_annotated : pool_unannotated).push_back(r);
  }

  // Deterministic dev designation over the annotated pool.
  std::vector<std::size_t> order(pool_annotated.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(config.seed, "dev"));
  std::shuffle(order.begin(), order.end(), rng);
  const auto dev_count = static_cast<std::size_t>(
      std::llround(config.dev_fraction * static_cast<double>(pool_annotated.size())));
  std::vector<bool> is_dev(pool_annotated.size(), false);
  for (std::size_t i = 0; i < dev_count; ++i) is_dev[order[i]] = true;

  std::vector<RawCluster> train_raw;
  std::vector<RawCluster> dev_raw;
  for (std::size_t i = 0; i < pool_annotated.size(); ++i)
    (is_dev[i] ? dev_raw : train_raw).push_back(pool_annotated[i]);
  train_raw.insert(train_raw.end(), pool_unannotated.begin(), pool_unannotated.end());
  std::stable_sort(train_raw.begin(), train_raw.end(),
                   [](const RawCluster& a, const RawCluster& b) { return a.cluster_id < b.cluster_id; });

  Dataset ds;
  ds.train = build_train_split(train_raw, annotations, config);
  ds.dev = build_dev_split(dev_raw, annotations);
  std::set<std::string, std::less<>> used;
  for (const auto* split : {&ds.train, &ds.dev})
    for (const auto& c : *split)
      for (const auto& a : c.articles) used.insert(a.article_id);
  ds.test = build_test_split(raw, config, used);
  for (const auto& r : train_raw) ds.linked_pairs.push_back({r.cluster_id, r.linked_article, r.summary});

  std::vector<ClusterExample> all;
  for (const auto* split : {&ds.train, &ds.dev, &ds.test})
    all.insert(all.end(), split->begin(), split->end());
  ds.manifest = DatasetManifest::from(all);
  return ds;
}

AnnotationMap aggregate_annotations(std::span<const AnnotationVotes> votes,
                                    std::span<const RawCluster> raw) {
  std::map<std::string, std::map<std::string, Label>, std::less<>> by_cluster;
  for (const auto& v : votes) {
    auto& per = by_cluster[v.cluster_id];
    if (!per.emplace(v.article_id, aggregate_votes(v.votes)).second)
      throw ValidationError("duplicate annotation for cluster_id=" + v.cluster_id +
                            " article_id=" + v.article_id);
  }
  AnnotationMap out;
  for (const auto& r : raw) {
    auto it = by_cluster.find(r.cluster_id);
    if (it == by_cluster.end()) continue;
    std::vector<Label> labels;
    for (const auto& a : r.neighbors) {
      auto jt = it->second.find(a.article_id);
      if (jt == it->second.end())
        throw ValidationError("cluster_id=" + r.cluster_id + " is partially annotated (article " +
                              a.article_id + " has no votes)");
      labels.push_back(jt->second);
    }
    if (it->second.size() != r.neighbors.size())
      throw ValidationError("cluster_id=" + r.cluster_id + " has votes for unknown articles");
    out.emplace(r.cluster_id, std::move(labels));
  }
  return out;
}

void validate_raw_cluster(const RawCluster& r) {
  if (r.cluster_id.empty()) throw ValidationError("raw cluster with empty cluster_id");
  if (r.neighbors.size() > kMaxNeighbors)
    throw ValidationError("cluster_id=" + r.cluster_id + " has more than 8 neighbors");
  std::set<std::string_view> ids;
  for (const auto& a : r.neighbors) {
    if (a.article_id == r.linked_article.article_id)
      throw ValidationError("cluster_id=" + r.cluster_id + " lists its linked article as a neighbor");
    if (!ids.insert(a.article_id).second)
      throw ValidationError("cluster_id=" + r.cluster_id + " repeats neighbor " + a.article_id);
    if (a.body.empty())
      throw ValidationError("cluster_id=" + r.cluster_id + " neighbor " + a.article_id + " has empty body");
  }
}

ordered_json to_json(const RawCluster& r) {
  ordered_json j;
  j["cluster_id"] = r.cluster_id;
  j["summary"] = r.summary;
  j["summary_date"] = format_date(r.summary_date);
  j["linked_article"] = to_json(r.linked_article);
  j["neighbors"] = ordered_json::array();
  for (const auto& a : r.neighbors) j["neighbors"].push_back(to_json(a));
  return j;
}

RawCluster raw_cluster_from_json(const json& j) {
  check_keys(j, {"cluster_id", "summary", "summary_date", "linked_article", "neighbors"}, {},
             "raw cluster");
  RawCluster r;
  r.cluster_id = j.at("cluster_id").get<std::string>();
  r.summary = j.at("summary").get<std::string>();
  r.summary_date = parse_date(j.at("summary_date").get<std::string>());
  r.linked_article = article_from_json(j.at("linked_article"));
  for (const auto& a : j.at("neighbors")) r.neighbors.push_back(article_from_json(a));
  return r;
}

std::vector<RawCluster> load_raw_clusters(const std::filesystem::path& path) {
  std::vector<RawCluster> out;
  io::for_each_line(path, [&](std::size_t number, std::string_view line) {
    try {
      out.push_back(raw_cluster_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
    validate_raw_cluster(out.back());
  });
  return out;
}

void save_raw_clusters(std::span<const RawCluster> raw, const std::filesystem::path& path) {
  std::string out;
  for (const auto& r : raw) out += to_json(r).dump() + "\n";
  io::write_file_atomic(path, out);
}

ordered_json to_json(const LinkedPair& p) {
  ordered_json j;
  j["cluster_id"] = p.cluster_id;
  j["summary"] = p.summary;
  j["article"] = to_json(p.article);
  return j;
}

std::vector<LinkedPair> load_linked_pairs(const std::filesystem::path& path) {
  std::vector<LinkedPair> out;
  io::for_each_line(path, [&](std::size_t number, std::string_view line) {
    try {
      const auto j = json::parse(line);
      check_keys(j, {"cluster_id", "summary", "article"}, {}, "linked pair");
      out.push_back({j.at("cluster_id").get<std::string>(), article_from_json(j.at("article")),
                     j.at("summary").get<std::string>()});
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  });
  return out;
}

void save_linked_pairs(std::span<const LinkedPair> pairs, const std::filesystem::path& path) {
  std::string out;
  for (const auto& p : pairs) out += to_json(p).dump() + "\n";
  io::write_file_atomic(path, out);
}

}  // namespace agreesum
