#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "agreesum/corpus.hpp"

namespace agreesum::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("agreesum-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Article make_article(std::string id, std::string body, std::string date = "2019-01-01") {
  Article a;
  a.article_id = std::move(id);
  a.title = "title " + a.article_id;
  a.body = std::move(body);
  a.url = "https://example.com/" + a.article_id;
  a.published_date = parse_date(date);
  return a;
}

inline ClusterExample make_cluster(std::string id, std::vector<std::string> bodies,
                                   std::string summary, Split split = Split::train) {
  ClusterExample c;
  c.cluster_id = id;
  for (std::size_t i = 0; i < bodies.size(); ++i)
    c.articles.push_back(make_article(id + "-a" + std::to_string(i), bodies[i]));
  c.summary = std::move(summary);
  c.split = split;
  return c;
}

}  // namespace agreesum::testing
