#include "agreesum/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <iomanip>
#include <set>
#include <sstream>

#include "agreesum/error.hpp"
#include "agreesum/io.hpp"

namespace agreesum {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "dev") return Split::dev;
  if (text == "test") return Split::test;
  throw ValidationError("unknown split '" + std::string(text) + "'");
}

std::string_view to_string(Label label) {
  return label == Label::entailed ? "entailed" : "not_entailed";
}

Date parse_date(std::string_view text) {
  auto fail = [&] { return ValidationError("unparseable date '" + std::string(text) + "'"); };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw fail();
  auto number = [&](std::size_t pos, std::size_t len) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, value);
    if (ec != std::errc{} || ptr != text.data() + pos + len) throw fail();
    return value;
  };
  Date date{std::chrono::year{number(0, 4)},
            std::chrono::month{static_cast<unsigned>(number(5, 2))},
            std::chrono::day{static_cast<unsigned>(number(8, 2))}};
  if (!date.ok()) throw fail();
  return date;
}

std::string format_date(Date date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

std::size_t ClusterExample::entailed_count() const {
  if (!labels) return 0;
  return static_cast<std::size_t>(std::count(labels->begin(), labels->end(), Label::entailed));
}

Label aggregate_votes(const std::vector<bool>& votes) {
  if (votes.size() != 3 && votes.size() != 5)
    throw ArgumentError("vote list must have 3 or 5 entries, got " + std::to_string(votes.size()));
  const auto yes = std::count(votes.begin(), votes.end(), true);
  const auto no = static_cast<std::ptrdiff_t>(votes.size()) - yes;
  return yes > no ? Label::entailed : Label::not_entailed;
}

void validate_cluster(const ClusterExample& c) {
  auto fail = [&](const std::string& msg) {
    return ValidationError("cluster_id=" + c.cluster_id + " " + msg);
  };
  if (c.cluster_id.empty()) throw ValidationError("empty cluster_id");
  if (c.articles.empty()) throw fail("has no articles");
  if (c.articles.size() > 4) throw fail("exceeds 4 articles");
  std::set<std::string_view> ids;
  for (const auto& a : c.articles) {
    if (a.article_id.empty()) throw fail("has an article with empty article_id");
    if (a.body.empty()) throw fail("article " + a.article_id + " has an empty body");
    if (!a.published_date.ok()) throw fail("article " + a.article_id + " has an invalid date");
    if (!ids.insert(a.article_id).second) throw fail("repeats article " + a.article_id);
  }
  if (c.labels && c.labels->size() != c.articles.size())
    throw fail("labels do not align with articles");
  switch (c.split) {
    case Split::dev:
      if (!c.labels) throw fail("dev cluster without labels");
      if (c.entailed_count() != c.articles.size()) throw fail("dev cluster with non-entailed article");
      if (c.articles.size() < 2) throw fail("dev cluster with fewer than 2 articles");
      break;
    case Split::test:
      if (c.labels) throw fail("test cluster with labels");
      break;
    case Split::train:
      break;
  }
}

void check_keys(const json& j, std::initializer_list<std::string_view> required,
                std::initializer_list<std::string_view> optional, std::string_view what) {
  if (!j.is_object()) throw ValidationError(std::string(what) + " is not a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& key = it.key();
    const bool known =
        std::find(required.begin(), required.end(), key) != required.end() ||
        std::find(optional.begin(), optional.end(), key) != optional.end();
    if (!known) throw ValidationError(std::string(what) + " has unknown field '" + key + "'");
  }
  for (auto key : required)
    if (!j.contains(key))
      throw ValidationError(std::string(what) + " is missing field '" + std::string(key) + "'");
}

ordered_json to_json(const Article& a) {
  ordered_json j;
  j["article_id"] = a.article_id;
  j["title"] = a.title;
  j["body"] = a.body;
  j["url"] = a.url;
  j["published_date"] = format_date(a.published_date);
  return j;
}

Article article_from_json(const json& j) {
  check_keys(j, {"article_id", "title", "body", "url", "published_date"}, {}, "article");
  Article a;
  a.article_id = j.at("article_id").get<std::string>();
  a.title = j.at("title").get<std::string>();
  a.body = j.at("body").get<std::string>();
  a.url = j.at("url").get<std::string>();
  a.published_date = parse_date(j.at("published_date").get<std::string>());
  return a;
}

ordered_json to_json(const ClusterExample& c) {
  ordered_json j;
  j["cluster_id"] = c.cluster_id;
  j["split"] = std::string(to_string(c.split));
  j["summary"] = c.summary;
  j["articles"] = ordered_json::array();
  for (const auto& a : c.articles) j["articles"].push_back(to_json(a));
  if (c.labels) {
    j["labels"] = ordered_json::array();
    for (auto l : *c.labels) j["labels"].push_back(l == Label::entailed);
  } else {
    j["labels"] = nullptr;
  }
  return j;
}

ClusterExample cluster_from_json(const json& j) {
  check_keys(j, {"cluster_id", "split", "summary", "articles"}, {"labels"}, "cluster");
  ClusterExample c;
  c.cluster_id = j.at("cluster_id").get<std::string>();
  c.split = parse_split(j.at("split").get<std::string>());
  c.summary = j.at("summary").get<std::string>();
  for (const auto& a : j.at("articles")) c.articles.push_back(article_from_json(a));
  if (j.contains("labels") && !j.at("labels").is_null()) {
    std::vector<Label> labels;
    for (const auto& l : j.at("labels"))
      labels.push_back(l.get<bool>() ? Label::entailed : Label::not_entailed);
    c.labels = std::move(labels);
  }
  return c;
}

std::vector<ClusterExample> load_clusters(const std::filesystem::path& path) {
  std::vector<ClusterExample> out;
  io::for_each_line(path, [&](std::size_t number, std::string_view line) {
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
    ClusterExample c;
    try {
      c = cluster_from_json(j);
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
    validate_cluster(c);
    out.push_back(std::move(c));
  });
  return out;
}

std::string serialize_clusters(std::span<const ClusterExample> clusters) {
  std::string out;
  for (const auto& c : clusters) {
    out += to_json(c).dump();
    out += '\n';
  }
  return out;
}

void save_clusters(std::span<const ClusterExample> clusters, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_clusters(clusters));
}

std::vector<AnnotationVotes> load_annotations(const std::filesystem::path& path) {
  std::vector<AnnotationVotes> out;
  io::for_each_line(path, [&](std::size_t number, std::string_view line) {
    try {
      const json j = json::parse(line);
      check_keys(j, {"cluster_id", "article_id", "votes"}, {}, "annotation");
      AnnotationVotes a;
      a.cluster_id = j.at("cluster_id").get<std::string>();
      a.article_id = j.at("article_id").get<std::string>();
      a.votes = j.at("votes").get<std::vector<bool>>();
      out.push_back(std::move(a));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  });
  return out;
}

DatasetManifest DatasetManifest::from(std::span<const ClusterExample> examples) {
  DatasetManifest m;
  for (const auto& c : examples) {
    const auto s = static_cast<std::size_t>(c.split);
    auto& cc = m.clusters[s];
    auto& ac = m.articles[s];
    ++cc.all;
    ac.all += c.articles.size();
    if (c.annotated()) {
      ++cc.annotated;
      ac.annotated += c.articles.size();
      const auto entailed = c.entailed_count();
      if (entailed > 0) ++cc.entailed;
      ac.entailed += entailed;
    } else {
      ++cc.unannotated;
      ac.unannotated += c.articles.size();
    }
  }
  return m;
}

std::string DatasetManifest::table() const {
  std::ostringstream os;
  os << std::left << std::setw(22) << "" << std::right;
  os << std::setw(9) << "train" << std::setw(9) << "dev" << std::setw(9) << "test" << "  |";
  os << std::setw(9) << "train" << std::setw(9) << "dev" << std::setw(9) << "test" << '\n';
  os << std::left << std::setw(22) << "" << std::right << std::setw(27) << "cluster-summary pairs"
     << "  |" << std::setw(27) << "article-summary pairs" << '\n';
  auto row = [&](const char* name, auto field) {
    os << std::left << std::setw(22) << name << std::right;
    for (const auto& c : clusters) os << std::setw(9) << field(c);
    os << "  |";
    for (const auto& c : articles) os << std::setw(9) << field(c);
    os << '\n';
  };
  row("all", [](const Counts& c) { return c.all; });
  row("annotated", [](const Counts& c) { return c.annotated; });
  row("(at least 1) entailed", [](const Counts& c) { return c.entailed; });
  row("unannotated", [](const Counts& c) { return c.unannotated; });
  return os.str();
}

ordered_json DatasetManifest::to_json() const {
  auto counts = [](const Counts& c) {
    ordered_json j;
    j["all"] = c.all;
    j["annotated"] = c.annotated;
    j["entailed"] = c.entailed;
    j["unannotated"] = c.unannotated;
    return j;
  };
  ordered_json j;
  for (auto split : {Split::train, Split::dev, Split::test}) {
    const auto s = static_cast<std::size_t>(split);
    j["cluster_summary_pairs"][std::string(to_string(split))] = counts(clusters[s]);
    j["article_summary_pairs"][std::string(to_string(split))] = counts(articles[s]);
  }
  return j;
}

}  // namespace agreesum
