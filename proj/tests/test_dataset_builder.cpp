#include <gtest/gtest.h>

#include <set>

#include "agreesum/dataset_builder.hpp"
#include "agreesum/error.hpp"
#include "agreesum/synth.hpp"
#include "test_util.hpp"

using namespace agreesum;
using agreesum::testing::make_article;
using agreesum::testing::TempDir;

namespace {

RawCluster make_raw(const std::string& id, int neighbors, const std::string& date = "2019-01-01") {
  RawCluster r;
  r.cluster_id = id;
  r.summary = "summary of " + id + " .";
  r.summary_date = parse_date(date);
  r.linked_article = make_article(id + "-linked", "linked body " + id, date);
  for (int i = 0; i < neighbors; ++i)
    r.neighbors.push_back(make_article(id + "-n" + std::to_string(i), "body " + std::to_string(i), date));
  return r;
}

std::vector<Label> labels_with(int entailed, int total) {
  std::vector<Label> out(static_cast<std::size_t>(total), Label::not_entailed);
  for (int i = 0; i < entailed; ++i) out[static_cast<std::size_t>(i)] = Label::entailed;
  return out;
}

std::set<std::string> article_ids(const std::vector<ClusterExample>& clusters) {
  std::set<std::string> ids;
  for (const auto& c : clusters)
    for (const auto& a : c.articles) ids.insert(a.article_id);
  return ids;
}

BuilderConfig small_config(int test_count = 0) {
  BuilderConfig c;
  c.seed = 7;
  c.test_cluster_count = test_count;
  return c;
}

}  // namespace

TEST(AssembleRawClusters, TopKExcludesLinkedArticle) {
  SummaryEntry s{"s1", "sum", make_article("linked", "x"), parse_date("2019-01-01")};
  std::vector<Article> candidates{s.linked_article};
  for (int i = 0; i < 10; ++i) candidates.push_back(make_article("c" + std::to_string(i), "b"));
  auto sim = [](const Article&, const Article& b) {
    return b.article_id == "linked" ? 1.0 : 0.1 * (b.article_id.back() - '0') / 10.0;
  };
  const auto raw = assemble_raw_clusters(std::span(&s, 1), candidates, sim, 8);
  ASSERT_EQ(raw.size(), 1u);
  EXPECT_EQ(raw[0].neighbors.size(), 8u);
  for (const auto& a : raw[0].neighbors) EXPECT_NE(a.article_id, "linked");
  // c0 and c1 have the lowest scores and are left out.
  for (const auto& a : raw[0].neighbors) {
    EXPECT_NE(a.article_id, "c0");
    EXPECT_NE(a.article_id, "c1");
  }
}

TEST(AssembleRawClusters, FewerCandidatesThanK) {
  SummaryEntry s{"s1", "sum", make_article("linked", "x"), parse_date("2019-01-01")};
  std::vector<Article> candidates{make_article("a", "b"), make_article("b", "b"), make_article("c", "b")};
  const auto raw = assemble_raw_clusters(std::span(&s, 1), candidates, jaccard_similarity, 8);
  EXPECT_EQ(raw[0].neighbors.size(), 3u);
}

TEST(AssembleRawClusters, TieBrokenBySmallerArticleId) {
  SummaryEntry s{"s1", "sum", make_article("linked", "x"), parse_date("2019-01-01")};
  std::vector<Article> candidates{make_article("zz", "b"), make_article("aa", "b"),
                                  make_article("top", "b")};
  auto sim = [](const Article&, const Article& b) { return b.article_id == "top" ? 1.0 : 0.9; };
  const auto raw = assemble_raw_clusters(std::span(&s, 1), candidates, sim, 2);
  ASSERT_EQ(raw[0].neighbors.size(), 2u);
  std::set<std::string> ids{raw[0].neighbors[0].article_id, raw[0].neighbors[1].article_id};
  EXPECT_TRUE(ids.contains("aa"));
  EXPECT_FALSE(ids.contains("zz"));
  EXPECT_THROW(assemble_raw_clusters(std::span(&s, 1), candidates, sim, 9), ArgumentError);
}

TEST(BuildTrainSplit, DuplicatesAnnotatedClusters) {
  std::vector<RawCluster> raw{make_raw("ann", 8)};
  for (int i = 0; i < 10; ++i) raw.push_back(make_raw("u" + std::to_string(i), 8));
  AnnotationMap ann{{"ann", labels_with(5, 8)}};
  const auto train = build_train_split(raw, ann, small_config());
  std::size_t annotated = 0, unannotated = 0;
  for (const auto& c : train) {
    (c.annotated() ? annotated : unannotated)++;
    EXPECT_EQ(c.articles.size(), 4u);
    EXPECT_NO_THROW(validate_cluster(c));
  }
  EXPECT_EQ(annotated, 10u);
  EXPECT_EQ(unannotated, 10u);
}

TEST(BuildTrainSplit, LabelsFollowSampledArticles) {
  std::vector<RawCluster> raw{make_raw("ann", 8)};
  const auto labels = labels_with(3, 8);
  AnnotationMap ann{{"ann", labels}};
  for (const auto& c : build_train_split(raw, ann, small_config())) {
    for (std::size_t i = 0; i < c.articles.size(); ++i) {
      const auto idx = static_cast<std::size_t>(std::stoi(c.articles[i].article_id.substr(5)));
      EXPECT_EQ((*c.labels)[i], labels[idx]);
    }
  }
}

TEST(BuildTrainSplit, FourNeighborsKeepsAll) {
  std::vector<RawCluster> raw{make_raw("ann", 4)};
  AnnotationMap ann{{"ann", labels_with(2, 4)}};
  const auto expected = article_ids({ClusterExample{"x", raw[0].neighbors, "", {}, Split::train}});
  for (const auto& c : build_train_split(raw, ann, small_config())) {
    EXPECT_EQ(article_ids({c}), expected);
  }
}

TEST(BuildTrainSplit, DeterministicAndMismatchRejected) {
  std::vector<RawCluster> raw{make_raw("ann", 8), make_raw("u", 7)};
  AnnotationMap ann{{"ann", labels_with(2, 8)}};
  EXPECT_EQ(serialize_clusters(build_train_split(raw, ann, small_config())),
            serialize_clusters(build_train_split(raw, ann, small_config())));
  AnnotationMap bad{{"ann", labels_with(2, 7)}};
  EXPECT_THROW(build_train_split(raw, bad, small_config()), ValidationError);
}

TEST(BuildDevSplit, BalancedSplitDropAndPassThrough) {
  std::vector<RawCluster> raw{make_raw("six", 8), make_raw("one", 8), make_raw("four", 8),
                              make_raw("five", 8)};
  AnnotationMap ann{{"six", labels_with(6, 8)}, {"one", labels_with(1, 8)},
                    {"four", labels_with(4, 8)}, {"five", labels_with(5, 8)}};
  const auto dev = build_dev_split(raw, ann);
  std::vector<std::size_t> sizes;
  for (const auto& c : dev) {
    sizes.push_back(c.articles.size());
    EXPECT_EQ(c.entailed_count(), c.articles.size());
    EXPECT_NO_THROW(validate_cluster(c));
  }
  EXPECT_EQ(sizes, (std::vector<std::size_t>{3, 3, 4, 3, 2}));
  EXPECT_EQ(dev[0].articles[0].article_id, "six-n0");
  EXPECT_EQ(dev[1].articles[0].article_id, "six-n3");
  EXPECT_THROW(build_dev_split(std::vector<RawCluster>{make_raw("none", 4)}, ann), ValidationError);
}

TEST(BuildTestSplit, SamplesFromWindow) {
  std::vector<RawCluster> raw;
  for (int i = 0; i < 200; ++i) raw.push_back(make_raw("t" + std::to_string(i), 8, "2019-09-01"));
  for (int i = 0; i < 50; ++i) raw.push_back(make_raw("early" + std::to_string(i), 8, "2019-01-01"));
  const auto test = build_test_split(raw, small_config(150));
  ASSERT_EQ(test.size(), 150u);
  for (const auto& c : test) {
    EXPECT_FALSE(c.labels.has_value());
    EXPECT_EQ(c.articles.size(), 4u);
    EXPECT_EQ(c.cluster_id.rfind("t", 0), 0u);
  }
}

TEST(BuildTestSplit, ShortfallIsReported) {
  std::vector<RawCluster> raw;
  for (int i = 0; i < 100; ++i) raw.push_back(make_raw("t" + std::to_string(i), 8, "2019-09-01"));
  try {
    build_test_split(raw, small_config(150));
    FAIL();
  } catch (const BuilderError& e) {
    EXPECT_NE(std::string(e.what()).find("need 150, found 100"), std::string::npos);
  }
}

TEST(BuildTestSplit, OverlappingClusterSkipped) {
  std::vector<RawCluster> raw;
  for (int i = 0; i < 5; ++i) raw.push_back(make_raw("t" + std::to_string(i), 4, "2019-09-01"));
  const std::set<std::string, std::less<>> excluded{"t2-n1"};
  const auto test = build_test_split(raw, small_config(4), excluded);
  ASSERT_EQ(test.size(), 4u);
  for (const auto& c : test) EXPECT_NE(c.cluster_id, "t2");
  BuilderConfig five = small_config(5);
  EXPECT_THROW(build_test_split(raw, five, excluded), BuilderError);
}

TEST(BuildDataset, SyntheticCorpusInvariants) {
  RawCorpusConfig rc;
  rc.seed = 3;
  const auto corpus = synthetic_raw_corpus(rc);
  const auto ann = aggregate_annotations(corpus.votes, corpus.clusters);
  BuilderConfig config;
  config.seed = 3;
  config.test_cluster_count = 150;
  const auto ds = build_dataset(corpus.clusters, ann, config);

  std::set<std::string> linked;
  for (const auto& r : corpus.clusters) linked.insert(r.linked_article.article_id);
  for (const auto* split : {&ds.train, &ds.dev, &ds.test})
    for (const auto& c : *split)
      for (const auto& a : c.articles) EXPECT_FALSE(linked.contains(a.article_id));

  for (const auto& c : ds.dev) {
    EXPECT_EQ(c.entailed_count(), c.articles.size());
    EXPECT_GE(c.articles.size(), 2u);
    EXPECT_LE(c.articles.size(), 4u);
  }
  std::size_t annotated_descended = 0;
  for (const auto& c : ds.train) annotated_descended += c.annotated();
  std::set<std::string> ann_train_raw;
  for (const auto& c : ds.train)
    if (c.annotated()) ann_train_raw.insert(c.cluster_id.substr(0, c.cluster_id.find('#')));
  EXPECT_EQ(annotated_descended, 10 * ann_train_raw.size());

  const auto test_ids = article_ids(ds.test);
  auto used = article_ids(ds.train);
  const auto dev_ids = article_ids(ds.dev);
  used.insert(dev_ids.begin(), dev_ids.end());
  for (const auto& id : test_ids) EXPECT_FALSE(used.contains(id));
  EXPECT_EQ(ds.test.size(), 150u);
  for (const auto& c : ds.test) EXPECT_FALSE(c.labels.has_value());

  const auto again = build_dataset(corpus.clusters, ann, config);
  EXPECT_EQ(serialize_clusters(again.train), serialize_clusters(ds.train));
  EXPECT_EQ(serialize_clusters(again.dev), serialize_clusters(ds.dev));
  EXPECT_EQ(serialize_clusters(again.test), serialize_clusters(ds.test));
}

TEST(AggregateAnnotations, MajorityAndPartialRejected) {
  const auto r = make_raw("c", 3);
  std::vector<AnnotationVotes> votes{{"c", "c-n0", {true, true, false}},
                                     {"c", "c-n1", {false, false, true}},
                                     {"c", "c-n2", {true, true, true}}};
  const auto map = aggregate_annotations(votes, std::span(&r, 1));
  EXPECT_EQ(map.at("c"), (std::vector<Label>{Label::entailed, Label::not_entailed, Label::entailed}));
  votes.pop_back();
  EXPECT_THROW(aggregate_annotations(votes, std::span(&r, 1)), ValidationError);
}

TEST(RawClusterIo, RoundTripAndValidation) {
  TempDir dir;
  std::vector<RawCluster> raw{make_raw("a", 3), make_raw("b", 8)};
  save_raw_clusters(raw, dir / "raw.jsonl");
  EXPECT_EQ(load_raw_clusters(dir / "raw.jsonl"), raw);
  auto bad = make_raw("x", 2);
  bad.neighbors.push_back(bad.linked_article);
  EXPECT_THROW(validate_raw_cluster(bad), ValidationError);
  auto many = make_raw("y", 9);
  EXPECT_THROW(validate_raw_cluster(many), ValidationError);
}

TEST(BuilderConfig, FromKeyValue) {
  const auto kv = KeyValueConfig::parse(
      "seed = 4\nduplication_factor = 3\ntest_cluster_count = 20\ntest_window_start = 2019-09-01\n");
  const auto c = BuilderConfig::from(kv);
  EXPECT_EQ(c.seed, 4u);
  EXPECT_EQ(c.duplication_factor, 3);
  EXPECT_EQ(c.test_cluster_count, 20);
  EXPECT_EQ(format_date(c.test_window_start), "2019-09-01");
  EXPECT_THROW(BuilderConfig::from(KeyValueConfig::parse("duplication_factor = 0\n")), ValidationError);
  EXPECT_THROW(BuilderConfig::from(KeyValueConfig::parse("bogus = 1\n")), ValidationError);
}
