#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <tuple>

#include "agreesum/decoding.hpp"
#include "agreesum/error.hpp"
#include "test_util.hpp"

using namespace agreesum;
using agreesum::testing::make_cluster;

namespace {

// Argmax by (score desc, norm_score desc, position asc).
std::size_t rerank_oracle(const std::vector<BeamCandidate>& beam, const std::vector<double>& scores) {
  std::vector<std::size_t> idx(beam.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::make_tuple(-scores[a], -beam[a].norm_score, a) <
           std::make_tuple(-scores[b], -beam[b].norm_score, b);
  });
  return idx.front();
}

BeamCandidate candidate(double norm) {
  BeamCandidate c;
  c.norm_score = norm;
  c.finished = true;
  return c;
}

std::string words(int start, int count) {
  std::string s;
  for (int i = 0; i < count; ++i) {
    if (i) s += ' ';
    s += "w" + std::to_string((start + i) % 30);
  }
  return s;
}

Summarizer tiny_model(std::uint64_t seed = 4) {
  std::vector<std::string> texts{words(0, 30)};
  SummarizerConfig c;
  c.embed_dim = 12;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.max_input_len = 32;
  c.max_output_len = 5;
  c.seed = seed;
  return Summarizer(Vocabulary::build(texts), c);
}

std::vector<ClusterExample> tiny_clusters(int count) {
  std::vector<ClusterExample> out;
  for (int i = 0; i < count; ++i)
    out.push_back(make_cluster("c" + std::to_string(i), {words(i, 6), words(i + 3, 6)}, "s"));
  return out;
}

}  // namespace

TEST(SelectEntdec, HighestScoreThenNormScore) {
  const std::vector<BeamCandidate> beam{candidate(-1.0), candidate(-3.0), candidate(-2.0)};
  const std::vector<double> scores{0.5, 1.0, 1.0};
  EXPECT_EQ(select_entdec(beam, scores), 2u);
}

TEST(SelectEntdec, FullTieKeepsBestNormScore) {
  const std::vector<BeamCandidate> beam{candidate(-1.5), candidate(-0.5), candidate(-2.0)};
  const std::vector<double> scores(3, 0.0);
  EXPECT_EQ(select_entdec(beam, scores), 1u);
  const std::vector<BeamCandidate> same{candidate(-1.0), candidate(-1.0)};
  const std::vector<double> tied(2, 0.5);
  EXPECT_EQ(select_entdec(same, tied), 0u);
}

TEST(SelectEntdec, RejectsEmptyOrMisaligned) {
  const std::vector<BeamCandidate> beam{candidate(-1.0)};
  const std::vector<double> none;
  EXPECT_THROW(select_entdec({}, none), ArgumentError);
  EXPECT_THROW(select_entdec(beam, none), ArgumentError);
}

TEST(SelectEntdec, MatchesBruteForceOnRandomBeams) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> size(1, 12), quarter(0, 4), norm(-6, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = size(rng);
    std::vector<BeamCandidate> beam;
    std::vector<double> scores;
    for (int i = 0; i < k; ++i) {
      beam.push_back(candidate(norm(rng) / 2.0));
      scores.push_back(quarter(rng) / 4.0);
    }
    ASSERT_EQ(select_entdec(beam, scores), rerank_oracle(beam, scores)) << "trial " << trial;
  }
}

TEST(SplitSentences, Examples) {
  EXPECT_EQ(split_sentences("A first. A second."),
            (std::vector<std::string>{"A first.", "A second."}));
  EXPECT_EQ(split_sentences("Dr. Smith spoke. He left."),
            (std::vector<std::string>{"Dr. Smith spoke.", "He left."}));
  EXPECT_TRUE(split_sentences("").empty());
  EXPECT_EQ(split_sentences("Is it? Yes! \"Quoted.\" Then J. Doe came."),
            (std::vector<std::string>{"Is it?", "Yes! \"Quoted.\"", "Then J. Doe came."}));
  EXPECT_EQ(split_sentences("Pi is 3.14 today. ok then."),
            (std::vector<std::string>{"Pi is 3.14 today. ok then."}));
}

TEST(SplitSentences, KeepsEveryNonSeparatorCharacter) {
  const std::string text = "  One thing. Two things!  Mr. Three said \"four?\" Five.\nSix";
  std::string joined;
  for (const auto& s : split_sentences(text)) joined += s;
  std::string stripped;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) stripped += c;
  std::string joined_stripped;
  for (char c : joined)
    if (!std::isspace(static_cast<unsigned char>(c))) joined_stripped += c;
  EXPECT_EQ(joined_stripped, stripped);
}

TEST(DecodeB5, UniqueMaximumWins) {
  const auto c = make_cluster("c", {"Alpha one here. Shared fact here.", "Beta two here. Shared fact here.",
                                    "Shared fact here. Gamma three.", "Delta four. Shared fact here."},
                              "s");
  ContainmentOracle oracle;
  std::mt19937_64 rng(1);
  const auto r = decode_b5(oracle, c, rng);
  EXPECT_EQ(r.text, "Shared fact here.");
  EXPECT_EQ(r.entail_score, 1.0);
  EXPECT_EQ(r.beam_rank, 2);
}

TEST(DecodeB5, TiesAreUniform) {
  const auto c = make_cluster("c", {"Apple one. Rest.", "Banana two. Rest.", "Cherry three. Rest.",
                                    "Damson four. Rest."},
                              "s");
  ContainmentOracle oracle;
  std::mt19937_64 rng(12345);
  std::vector<int> counts(4, 0);
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    const auto r = decode_b5(oracle, c, rng);
    ASSERT_EQ(r.entail_score, 0.25);
    ++counts[static_cast<std::size_t>(r.beam_rank)];
  }
  for (int n : counts) EXPECT_NEAR(n / static_cast<double>(trials), 0.25, 0.02);
}

TEST(DecodeB5, SingletonAndDeterminism) {
  ContainmentOracle oracle;
  const auto single = make_cluster("c", {"Only lead. Second sentence."}, "s");
  std::mt19937_64 rng(3);
  EXPECT_EQ(decode_b5(oracle, single, rng).text, "Only lead.");

  const auto c = make_cluster("d", {"Apple one. Rest.", "Banana two. Rest."}, "s");
  std::mt19937_64 a(7), b(7);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(decode_b5(oracle, c, a).text, decode_b5(oracle, c, b).text);
}

TEST(DecodeB5, WordlessArticlesSkipped) {
  ContainmentOracle oracle;
  std::mt19937_64 rng(3);
  const auto c = make_cluster("c", {"... !!!", "Real lead. More."}, "s");
  const auto r = decode_b5(oracle, c, rng);
  EXPECT_EQ(r.text, "Real lead.");
  EXPECT_EQ(r.warnings.size(), 1u);
  const auto empty = make_cluster("e", {"...", "?!"}, "s");
  EXPECT_THROW(decode_b5(oracle, empty, rng), ArgumentError);
}

TEST(DecodeEntdec, BeamOfOneIsPlainDecoding) {
  const auto model = tiny_model();
  ContainmentOracle oracle;
  for (const auto& c : tiny_clusters(6)) {
    const auto plain = decode_plain(model, c, 1, 0.8, &oracle);
    const auto ent = decode_entdec(model, oracle, c, 1, 0.8);
    EXPECT_EQ(ent.text, plain.text);
    EXPECT_EQ(ent.entail_score, plain.entail_score);
  }
}

TEST(DecodeEntdec, NeverScoresBelowTheBeamTop) {
  ContainmentOracle oracle;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto model = tiny_model(seed);
    for (const auto& c : tiny_clusters(6)) {
      const auto plain = decode_plain(model, c, 6, 0.8, &oracle);
      const auto ent = decode_entdec(model, oracle, c, 6, 0.8);
      if (!plain.truncated) {
        EXPECT_GE(ent.entail_score, plain.entail_score);
      }
    }
  }
}

TEST(DecodeEntdec, FallsBackToUnfinishedHypothesis) {
  auto model = tiny_model();
  model.parameters().get("decoder.output.bias").mutable_value()(0, Vocabulary::kEos) = -50.0;
  ContainmentOracle oracle;
  const auto c = tiny_clusters(1).front();
  const auto r = decode_entdec(model, oracle, c, 3, 0.8);
  EXPECT_TRUE(r.truncated);
  EXPECT_EQ(normalized_words(r.text).size(), 5u);
  EXPECT_THROW(decode_entdec(model, oracle, c, 0, 0.8), ArgumentError);
}

TEST(DecodeClusters, OutputIndependentOfWorkers) {
  const auto model = tiny_model();
  ContainmentOracle oracle;
  const auto clusters = tiny_clusters(10);
  DecodeConfig config;
  config.beam_size = 3;
  config.entdec_k = 3;
  const auto one = decode_clusters(&model, &oracle, clusters, config, false, "m", 1);
  const auto four = decode_clusters(&model, &oracle, clusters, config, false, "m", 4);
  EXPECT_EQ(serialize_decoded(one), serialize_decoded(four));
  ASSERT_EQ(one.size(), clusters.size());
  for (std::size_t i = 0; i < one.size(); ++i) EXPECT_EQ(one[i].cluster_id, clusters[i].cluster_id);
}

TEST(DecodeClusters, ScorerRequirements) {
  const auto model = tiny_model();
  const auto clusters = tiny_clusters(2);
  DecodeConfig config;
  try {
    decode_clusters(nullptr, nullptr, clusters, config, true, "b5");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.code(), "NO_SCORER");
  }
  config.entdec_k = 2;
  EXPECT_THROW(decode_clusters(&model, nullptr, clusters, config, false, "m"), ValidationError);
  config.entdec_k = 0;
  EXPECT_THROW(decode_clusters(&model, nullptr, clusters, config, false, "m"), ValidationError);
  config.entdec_k.reset();
  const auto plain = decode_clusters(&model, nullptr, clusters, config, false, "m");
  EXPECT_EQ(plain.size(), 2u);
  EXPECT_EQ(plain[0].entail_score, 0.0);
}

TEST(DecodeClusters, B5SeedIsPerCluster) {
  ContainmentOracle oracle;
  std::vector<ClusterExample> clusters;
  for (int i = 0; i < 8; ++i)
    clusters.push_back(make_cluster("c" + std::to_string(i),
                                    {"Apple one. Rest.", "Banana two. Rest.", "Cherry three. Rest."}, "s"));
  DecodeConfig config;
  config.seed = 5;
  const auto a = decode_clusters(nullptr, &oracle, clusters, config, true, "b5", 3);
  const auto b = decode_clusters(nullptr, &oracle, clusters, config, true, "b5", 1);
  EXPECT_EQ(serialize_decoded(a), serialize_decoded(b));
}
