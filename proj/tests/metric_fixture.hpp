#pragma once

#include <map>
#include <string>
#include <vector>

#include "agreesum/evaluation.hpp"
#include "test_util.hpp"

namespace agreesum::testing {

// Five dev clusters with decoded summaries, judged by the containment oracle.
// Expected values were computed by a separate script that reimplements the
// metric formulas.
struct MetricFixture {
  std::vector<ClusterExample> clusters;
  std::vector<DecodedRecord> decoded;
};

inline MetricFixture metric_fixture() {
  struct Row {
    const char* id;
    std::vector<std::string> bodies;
    const char* gold;
    const char* decoded;
  };
  const std::vector<Row> rows{
      {"m1", {"The cat sat on the mat today.", "A cat sat on a mat."}, "The cat sat on the mat.",
       "the cat sat on the mat"},
      {"m2", {"Storm hits the northern coast overnight.", "Heavy storm hits coast."},
       "Storm hits northern coast.", "storm hits coast"},
      {"m3", {"Markets rose sharply on Friday.", "Stocks fell on Monday.", "Investors were calm."},
       "Markets rose on Friday.", "stocks rose on friday"},
      {"m4", {"The team won the final game.", "Fans celebrated the team win."},
       "The team won the final.", "the team won"},
      {"m5", {"Officials said the bridge will reopen in June.", "The bridge reopens in June, officials said."},
       "The bridge will reopen in June.", "officials said the bridge will reopen in june"},
  };
  MetricFixture f;
  for (const auto& r : rows) {
    auto c = make_cluster(r.id, r.bodies, r.gold, Split::dev);
    c.labels = std::vector<Label>(r.bodies.size(), Label::entailed);
    f.clusters.push_back(std::move(c));
    f.decoded.push_back({r.id, "fixture", r.decoded, 0.0, 0, false});
  }
  return f;
}

inline constexpr double kFixtureRouge1 = 0.8428571428571429;
inline constexpr double kFixtureRouge2 = 0.7133333333333333;
inline constexpr double kFixtureRougeL = 0.8428571428571429;
inline constexpr double kFixtureArticlePct = 100.0 * 5.0 / 11.0;
inline constexpr double kFixtureClusterPct = 20.0;
inline constexpr double kFixtureHallucinationPct = 20.0;
inline const std::map<int, double> kFixtureOverlap{{3, 80.0}, {4, 40.0}, {5, 40.0}, {6, 40.0}};
inline const std::map<int, std::size_t> kFixtureShort{{3, 0}, {4, 2}, {5, 3}, {6, 3}};

}  // namespace agreesum::testing
