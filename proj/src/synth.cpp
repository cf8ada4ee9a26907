#include "agreesum/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <set>

#include "agreesum/error.hpp"
#include "agreesum/hash.hpp"
#include "agreesum/text.hpp"

namespace agreesum {

namespace {

std::string word(int i) { return "w" + std::to_string(i); }

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::string padded_id(std::string_view prefix, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", i);
  return std::string(prefix) + buf;
}

int uniform(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

using Fact = std::vector<int>;

struct FactMaker {
  const IntersectionConfig& cfg;
  std::mt19937_64& rng;

  Fact operator()() const {
    Fact f;
    while (static_cast<int>(f.size()) < cfg.fact_len) {
      const int w = uniform(rng, 0, cfg.vocab_size - 1);
      if (std::find(f.begin(), f.end(), w) == f.end()) f.push_back(w);
    }
    return f;
  }
};

std::string fact_text(const Fact& f) {
  std::string out;
  for (int w : f) out += word(w) + " ";
  return out + ".";
}

std::string article_text(const std::vector<Fact>& facts) {
  std::string out;
  for (const auto& f : facts) {
    if (!out.empty()) out += ' ';
    out += fact_text(f);
  }
  return out;
}

bool covers(const std::vector<Fact>& facts, const Fact& target) {
  std::set<int> seen;
  for (const auto& f : facts) seen.insert(f.begin(), f.end());
  return std::all_of(target.begin(), target.end(), [&](int w) { return seen.contains(w); });
}

// Facts other than `summary`, never jointly containing all of its words.
std::vector<Fact> distractors(const FactMaker& make, const Fact& summary, int count) {
  for (;;) {
    std::vector<Fact> facts;
    for (int i = 0; i < count; ++i) facts.push_back(make());
    if (!covers(facts, summary)) return facts;
  }
}

Article make_article(const std::string& id, const std::vector<Fact>& facts, std::string date) {
  return Article{id, "Report " + id, article_text(facts), "https://example.org/" + id,
                 parse_date(date)};
}

}  // namespace

std::vector<EntailmentRecord> containment_records(const ContainmentConfig& cfg) {
  if (cfg.vocab_size <= cfg.max_premise + 2 || cfg.min_premise < 1 ||
      cfg.min_premise > cfg.max_premise || cfg.min_hypothesis < 2 ||
      cfg.min_hypothesis > cfg.max_hypothesis || cfg.max_hypothesis > cfg.min_premise)
    throw ArgumentError("inconsistent containment generator settings");
  std::mt19937_64 rng(derive_seed(cfg.seed, "containment"));
  std::vector<EntailmentRecord> out;
  out.reserve(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i) {
    const int plen = uniform(rng, cfg.min_premise, cfg.max_premise);
    std::vector<int> pool(static_cast<std::size_t>(cfg.vocab_size));
    for (int w = 0; w < cfg.vocab_size; ++w) pool[static_cast<std::size_t>(w)] = w;
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::vector<int> premise(pool.begin(), pool.begin() + plen);
    const std::vector<int> absent(pool.begin() + plen, pool.end());

    const int hlen = uniform(rng, cfg.min_hypothesis, cfg.max_hypothesis);
    std::vector<int> hyp;
    std::sample(premise.begin(), premise.end(), std::back_inserter(hyp), hlen, rng);
    std::shuffle(hyp.begin(), hyp.end(), rng);
    const bool positive = i % 2 == 0;
    if (!positive) {
      const int swaps = uniform(rng, 1, 2);
      std::vector<int> slots(hyp.size());
      for (std::size_t s = 0; s < slots.size(); ++s) slots[s] = static_cast<int>(s);
      std::shuffle(slots.begin(), slots.end(), rng);
      for (int s = 0; s < swaps; ++s)
        hyp[static_cast<std::size_t>(slots[static_cast<std::size_t>(s)])] =
            absent[static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(absent.size()) - 1))];
    }
    std::vector<std::string> pw, hw;
    for (int w : premise) pw.push_back(word(w));
    for (int w : hyp) hw.push_back(word(w));
    EntailmentRecord r;
    r.article_id = padded_id("cont-a", i);
    r.cluster_id = padded_id("cont-c", i);
    r.premise = join(pw) + " .";
    r.hypothesis = join(hw) + " .";
    r.label = positive ? Label::entailed : Label::not_entailed;
    r.votes = std::vector<bool>(3, positive);
    out.push_back(std::move(r));
  }
  return out;
}

IntersectionTask intersection_task(const IntersectionConfig& cfg) {
  if (cfg.vocab_size < 2 * cfg.fact_len || cfg.fact_len < 1 || cfg.facts_per_article < 1 ||
      cfg.cluster_size < 2 || cfg.cluster_size > 4)
    throw ArgumentError("inconsistent intersection task settings");
  std::mt19937_64 rng(derive_seed(cfg.seed, "intersection"));
  const FactMaker make{cfg, rng};
  const int m = cfg.facts_per_article;
  IntersectionTask task;

  // Facts of an article carrying `summary` at position `slot`.
  auto with_summary = [&](const Fact& summary, int slot) {
    auto facts = distractors(make, summary, m - 1);
    facts.insert(facts.begin() + slot, summary);
    return facts;
  };
  auto random_slot = [&] { return uniform(rng, 0, m - 1); };
  auto linked = [&](const std::string& cid, const Fact& summary) {
    task.linked_pairs.push_back(
        {cid, make_article(cid + "-x0", with_summary(summary, 0), "2019-01-01"), fact_text(summary)});
  };

  std::discrete_distribution<int> entailed_count({0.5, 0.3, 0.2});
  for (std::size_t i = 0; i < cfg.annotated; ++i) {
    const auto cid = padded_id("int-ann-", i);
    const Fact summary = make();
    const int n_ent = entailed_count(rng) + 1;
    std::vector<bool> entailed(static_cast<std::size_t>(cfg.cluster_size), false);
    std::fill(entailed.begin(), entailed.begin() + n_ent, true);
    std::shuffle(entailed.begin(), entailed.end(), rng);
    ClusterExample c{cid, {}, fact_text(summary), std::vector<Label>{}, Split::train};
    for (int j = 0; j < cfg.cluster_size; ++j) {
      const bool e = entailed[static_cast<std::size_t>(j)];
      const auto facts = e ? with_summary(summary, 0) : distractors(make, summary, m);
      c.articles.push_back(make_article(cid + "-a" + std::to_string(j), facts, "2019-01-01"));
      c.labels->push_back(e ? Label::entailed : Label::not_entailed);
    }
    linked(cid, summary);
    task.train.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < cfg.unannotated; ++i) {
    const auto cid = padded_id("int-unl-", i);
    const Fact summary = make();
    ClusterExample c{cid, {}, fact_text(summary), std::nullopt, Split::train};
    for (int j = 0; j < cfg.cluster_size; ++j)
      c.articles.push_back(make_article(cid + "-a" + std::to_string(j),
                                        with_summary(summary, random_slot()), "2019-01-01"));
    linked(cid, summary);
    task.train.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < cfg.dev; ++i) {
    const auto cid = padded_id("int-dev-", i);
    const Fact summary = make();
    const int n = uniform(rng, 2, cfg.cluster_size);
    ClusterExample c{cid, {}, fact_text(summary), std::vector<Label>(static_cast<std::size_t>(n), Label::entailed),
                     Split::dev};
    for (int j = 0; j < n; ++j)
      c.articles.push_back(make_article(cid + "-a" + std::to_string(j),
                                        with_summary(summary, random_slot()), "2019-06-01"));
    task.dev.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < cfg.test; ++i) {
    const auto cid = padded_id("int-test-", i);
    const Fact summary = make();
    ClusterExample c{cid, {}, fact_text(summary), std::nullopt, Split::test};
    for (int j = 0; j < cfg.cluster_size; ++j)
      c.articles.push_back(make_article(cid + "-a" + std::to_string(j),
                                        with_summary(summary, random_slot()), "2019-10-01"));
    task.test.push_back(std::move(c));
  }
  return task;
}

RawCorpus synthetic_raw_corpus(const RawCorpusConfig& cfg) {
  std::mt19937_64 rng(derive_seed(cfg.seed, "raw-corpus"));
  std::bernoulli_distribution is_test(cfg.test_fraction);
  std::bernoulli_distribution is_annotated(cfg.annotated_fraction);
  std::bernoulli_distribution vote_yes(0.75);
  using std::chrono::days;
  using std::chrono::sys_days;
  const sys_days early = sys_days{parse_date("2018-01-01")};
  const sys_days window = sys_days{parse_date("2019-08-01")};
  auto words = [&](int n) {
    std::vector<std::string> w;
    for (int i = 0; i < n; ++i) w.push_back(word(uniform(rng, 0, 499)));
    return join(w);
  };
  RawCorpus out;
  for (std::size_t i = 0; i < cfg.count; ++i) {
    RawCluster r;
    r.cluster_id = padded_id("raw-", i);
    const bool test = is_test(rng);
    const auto day = test ? window + days{uniform(rng, 0, 365)} : early + days{uniform(rng, 0, 570)};
    r.summary_date = Date{day};
    r.summary = "Event " + std::to_string(i) + " " + words(8) + ".";
    const auto date = format_date(r.summary_date);
    auto article = [&](const std::string& id) {
      return Article{id, "Title " + id, "Report " + id + " " + words(30) + ".",
                     "https://example.org/" + id, parse_date(date)};
    };
    r.linked_article = article(r.cluster_id + "-x0");
    for (int j = 1; j <= kMaxNeighbors; ++j) r.neighbors.push_back(article(r.cluster_id + "-x" + std::to_string(j)));
    if (!test && is_annotated(rng)) {
      for (const auto& a : r.neighbors) {
        AnnotationVotes v{r.cluster_id, a.article_id, {}};
        for (int k = 0; k < 3; ++k) v.votes.push_back(vote_yes(rng));
        out.votes.push_back(std::move(v));
      }
    }
    out.clusters.push_back(std::move(r));
  }
  return out;
}

}  // namespace agreesum
