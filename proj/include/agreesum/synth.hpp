#pragma once

#include <cstdint>
#include <vector>

#include "agreesum/corpus.hpp"
#include "agreesum/dataset_builder.hpp"

namespace agreesum {

// Premise/hypothesis pairs labelled by word containment. Half are positives
// (hypothesis words drawn from the premise); negatives swap one or two words
// for words absent from the premise.
struct ContainmentConfig {
  std::size_t count = 2000;
  int vocab_size = 200;
  int min_premise = 20;
  int max_premise = 40;
  int min_hypothesis = 3;
  int max_hypothesis = 8;
  std::uint64_t seed = 0;
};
std::vector<EntailmentRecord> containment_records(const ContainmentConfig& config);

// Intersection summarization: every article is a list of short "facts"; the
// summary is one fact. Unannotated train, dev and test clusters carry the
// summary in every article at a random position. Annotated clusters carry it
// only in their entailed articles, always first, so the lead fact is a
// shortcut that agrees with the annotated data but not with the test data.
struct IntersectionConfig {
  int vocab_size = 120;
  int fact_len = 3;
  int facts_per_article = 3;
  int cluster_size = 4;
  std::size_t annotated = 300;
  std::size_t unannotated = 300;
  std::size_t dev = 40;
  std::size_t test = 200;
  std::uint64_t seed = 0;
};

struct IntersectionTask {
  std::vector<ClusterExample> train;  // annotated (with labels) then unannotated
  std::vector<ClusterExample> dev;
  std::vector<ClusterExample> test;
  std::vector<LinkedPair> linked_pairs;
};
IntersectionTask intersection_task(const IntersectionConfig& config);

// Raw clusters (eight neighbours each) spread over the train/dev period and
// the test window, with three-rater votes for a fraction of the early ones.
struct RawCorpusConfig {
  std::size_t count = 500;
  double annotated_fraction = 0.3;
  double test_fraction = 0.4;
  std::uint64_t seed = 0;
};
struct RawCorpus {
  std::vector<RawCluster> clusters;
  std::vector<AnnotationVotes> votes;
};
RawCorpus synthetic_raw_corpus(const RawCorpusConfig& config);

}  // namespace agreesum
