#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "agreesum/config_file.hpp"
#include "agreesum/corpus.hpp"
#include "agreesum/error.hpp"
#include "agreesum/io.hpp"
#include "agreesum/text.hpp"
#include "test_util.hpp"

using namespace agreesum;
using agreesum::testing::make_cluster;
using agreesum::testing::TempDir;

namespace {

std::vector<ClusterExample> sample_clusters() {
  auto a = make_cluster("c1", {"Alpha beta.", "Gamma delta."}, "Alpha.");
  a.labels = std::vector<Label>{Label::entailed, Label::not_entailed};
  auto b = make_cluster("c2", {"One two.", "Three four.", "Five."}, "One.", Split::dev);
  b.labels = std::vector<Label>(3, Label::entailed);
  auto c = make_cluster("c3", {"Test body."}, "Test.", Split::test);
  return {a, b, c};
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p) << s;
}

}  // namespace

TEST(Corpus, EmptyFileLoadsEmptyList) {
  TempDir dir;
  write_text(dir / "empty.jsonl", "");
  EXPECT_TRUE(load_clusters(dir / "empty.jsonl").empty());
}

TEST(Corpus, RoundTripIsExact) {
  TempDir dir;
  const auto clusters = sample_clusters();
  save_clusters(clusters, dir / "c.jsonl");
  EXPECT_EQ(load_clusters(dir / "c.jsonl"), clusters);
}

TEST(Corpus, SaveIsDeterministicAndLineDelimited) {
  TempDir dir;
  const auto clusters = sample_clusters();
  save_clusters(clusters, dir / "a.jsonl");
  save_clusters(clusters, dir / "b.jsonl");
  const auto a = io::read_file(dir / "a.jsonl");
  EXPECT_EQ(a, io::read_file(dir / "b.jsonl"));
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 3);
  const std::vector<ClusterExample> two(clusters.begin(), clusters.begin() + 2);
  save_clusters(two, dir / "two.jsonl");
  const auto t = io::read_file(dir / "two.jsonl");
  EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 2);
  save_clusters({}, dir / "none.jsonl");
  EXPECT_EQ(io::read_file(dir / "none.jsonl"), "");
}

TEST(Corpus, FiveArticleClusterIsRejected) {
  TempDir dir;
  auto c = make_cluster("X", {"a.", "b.", "c.", "d.", "e."}, "s.");
  write_text(dir / "bad.jsonl", to_json(c).dump() + "\n");
  try {
    load_clusters(dir / "bad.jsonl");
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("cluster_id=X exceeds 4 articles"), std::string::npos);
  }
}

TEST(Corpus, MalformedLineNamesLineNumber) {
  TempDir dir;
  write_text(dir / "bad.jsonl", to_json(sample_clusters()[0]).dump() + "\n{not json\n");
  try {
    load_clusters(dir / "bad.jsonl");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
}

TEST(Corpus, UnknownFieldIsRejected) {
  TempDir dir;
  auto j = to_json(sample_clusters()[0]);
  j["extra"] = 1;
  write_text(dir / "bad.jsonl", j.dump() + "\n");
  EXPECT_THROW(load_clusters(dir / "bad.jsonl"), ValidationError);
}

TEST(Corpus, ClusterInvariants) {
  auto dev = make_cluster("d", {"a.", "b."}, "s.", Split::dev);
  EXPECT_THROW(validate_cluster(dev), ValidationError);  // dev without labels
  dev.labels = std::vector<Label>{Label::entailed, Label::not_entailed};
  EXPECT_THROW(validate_cluster(dev), ValidationError);
  dev.labels = std::vector<Label>{Label::entailed, Label::entailed};
  EXPECT_NO_THROW(validate_cluster(dev));
  auto single = make_cluster("d1", {"a."}, "s.", Split::dev);
  single.labels = std::vector<Label>{Label::entailed};
  EXPECT_THROW(validate_cluster(single), ValidationError);

  auto test = make_cluster("t", {"a."}, "s.", Split::test);
  test.labels = std::vector<Label>{Label::entailed};
  EXPECT_THROW(validate_cluster(test), ValidationError);

  auto misaligned = make_cluster("m", {"a.", "b."}, "s.");
  misaligned.labels = std::vector<Label>{Label::entailed};
  EXPECT_THROW(validate_cluster(misaligned), ValidationError);

  auto dup = make_cluster("u", {"a.", "b."}, "s.");
  dup.articles[1].article_id = dup.articles[0].article_id;
  EXPECT_THROW(validate_cluster(dup), ValidationError);

  auto empty_body = make_cluster("e", {""}, "s.");
  EXPECT_THROW(validate_cluster(empty_body), ValidationError);
}

TEST(Corpus, AggregateVotes) {
  EXPECT_EQ(aggregate_votes({true, true, false, false, true}), Label::entailed);
  EXPECT_EQ(aggregate_votes({false, false, false}), Label::not_entailed);
  EXPECT_THROW(aggregate_votes({true, false}), ArgumentError);
  EXPECT_THROW(aggregate_votes({}), ArgumentError);
}

TEST(Corpus, AggregateVotesIsPermutationInvariant) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<bool> votes(trial % 2 ? 5 : 3);
    for (std::size_t i = 0; i < votes.size(); ++i) votes[i] = rng() % 2;
    const auto expected = aggregate_votes(votes);
    std::vector<bool> shuffled = votes;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_EQ(aggregate_votes(shuffled), expected);
  }
}

TEST(Corpus, RandomRoundTripProperty) {
  TempDir dir;
  std::mt19937_64 rng(11);
  std::vector<ClusterExample> clusters;
  for (int i = 0; i < 40; ++i) {
    const int n = 1 + static_cast<int>(rng() % 4);
    std::vector<std::string> bodies;
    for (int k = 0; k < n; ++k) bodies.push_back("body \"quoted\" \\ " + std::to_string(rng() % 1000) + " é");
    auto c = make_cluster("c" + std::to_string(i), bodies, "summary " + std::to_string(i));
    if (rng() % 2) {
      std::vector<Label> labels;
      for (int k = 0; k < n; ++k) labels.push_back(rng() % 2 ? Label::entailed : Label::not_entailed);
      c.labels = labels;
    }
    clusters.push_back(std::move(c));
  }
  save_clusters(clusters, dir / "r.jsonl");
  EXPECT_EQ(load_clusters(dir / "r.jsonl"), clusters);
}

TEST(Corpus, Dates) {
  EXPECT_EQ(format_date(parse_date("2019-08-01")), "2019-08-01");
  EXPECT_THROW(parse_date("2019-02-30"), ValidationError);
  EXPECT_THROW(parse_date("2019-8-1"), ValidationError);
  EXPECT_LT(parse_date("2019-07-31"), parse_date("2019-08-01"));
}

TEST(Corpus, ManifestCountsAddUp) {
  const auto m = DatasetManifest::from(sample_clusters());
  const auto& train = m.clusters[static_cast<std::size_t>(Split::train)];
  EXPECT_EQ(train.all, 1u);
  EXPECT_EQ(train.annotated, 1u);
  EXPECT_EQ(train.entailed, 1u);
  for (std::size_t s = 0; s < 3; ++s) {
    EXPECT_EQ(m.clusters[s].annotated + m.clusters[s].unannotated, m.clusters[s].all);
    EXPECT_EQ(m.articles[s].annotated + m.articles[s].unannotated, m.articles[s].all);
  }
  EXPECT_EQ(m.articles[static_cast<std::size_t>(Split::dev)].all, 3u);
}

TEST(Corpus, LoadAnnotations) {
  TempDir dir;
  write_text(dir / "a.jsonl", R"({"cluster_id":"c","article_id":"a","votes":[true,false,true]})" "\n");
  const auto votes = load_annotations(dir / "a.jsonl");
  ASSERT_EQ(votes.size(), 1u);
  EXPECT_EQ(votes[0].votes, (std::vector<bool>{true, false, true}));
}

TEST(ConfigFile, ParsesCommentsAndOverrides) {
  const auto kv = KeyValueConfig::parse("# comment\n\nseed = 7\nlambda=0.5\nseed = 9\nflag = yes\n");
  EXPECT_EQ(kv.get_int("seed", 0), 9);
  EXPECT_DOUBLE_EQ(kv.get_double("lambda", 0), 0.5);
  EXPECT_TRUE(kv.get_bool("flag", false));
  EXPECT_EQ(kv.get_int("missing", 3), 3);
  EXPECT_THROW(KeyValueConfig::parse("novalue\n"), ParseError);
  EXPECT_THROW(KeyValueConfig::parse("x = abc\n").get_int("x", 0), ValidationError);
  EXPECT_THROW(kv.restrict_to({"seed"}), ValidationError);
  EXPECT_NO_THROW(kv.restrict_to({"seed", "lambda", "flag"}));
}

TEST(Text, Tokenization) {
  EXPECT_EQ(split_tokens("Hello, world!"), (std::vector<std::string>{"Hello", ",", "world", "!"}));
  EXPECT_EQ(normalized_words("The CAT, sat."), (std::vector<std::string>{"the", "cat", "sat"}));
}

TEST(Text, VocabularyEncodeDecode) {
  const std::vector<std::string> texts{"a b b c", "b c ."};
  const auto v = Vocabulary::build(texts);
  EXPECT_EQ(v.size(), static_cast<std::size_t>(Vocabulary::kReserved) + 4);
  EXPECT_EQ(v.token(Vocabulary::kReserved), "b");  // most frequent first
  const auto ids = v.encode("a b zzz");
  EXPECT_EQ(ids[2], Vocabulary::kUnk);
  std::vector<TokenId> with_eos = v.encode("c b");
  with_eos.push_back(Vocabulary::kEos);
  with_eos.push_back(v.id("a"));
  EXPECT_EQ(v.decode(with_eos), "c b");
  EXPECT_EQ(Vocabulary::from_tokens(v.tokens()).hash(), v.hash());
}

TEST(Io, AtomicWriteAndHash) {
  TempDir dir;
  io::write_file_atomic(dir / "f.txt", "abc");
  EXPECT_EQ(io::read_file(dir / "f.txt"), "abc");
  io::write_file_atomic(dir / "g.txt", "abc");
  EXPECT_EQ(io::file_hash(dir / "f.txt"), io::file_hash(dir / "g.txt"));
  EXPECT_THROW(io::read_file(dir / "missing"), IoError);
  // A regular file where a directory is needed makes the target unwritable.
  EXPECT_THROW(io::write_file_atomic(dir / "f.txt" / "child", "x"), IoError);
}
