#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "agreesum/error.hpp"
#include "agreesum/text.hpp"

namespace agreesum {

// A left-to-right scorer over a fixed token inventory. A state carries the
// next-token log-distribution; `advance` consumes one token.
template <typename M>
concept StepModel = requires(const M& m, const typename M::State& s, TokenId t) {
  { m.initial() } -> std::convertible_to<typename M::State>;
  { m.advance(s, t) } -> std::convertible_to<typename M::State>;
  { m.next_log_probs(s) } -> std::convertible_to<Eigen::RowVectorXd>;
  { m.eos() } -> std::convertible_to<TokenId>;
  { m.max_length() } -> std::convertible_to<int>;
};

struct BeamCandidate {
  std::vector<TokenId> tokens;
  double log_prob = 0.0;
  double norm_score = 0.0;
  bool finished = false;  // ended with eos (otherwise cut at max length)
};

inline double length_normalized(double log_prob, std::size_t length, double alpha) {
  return log_prob / std::pow(static_cast<double>(std::max<std::size_t>(length, 1)), alpha);
}

// Length-normalized beam search. Each step keeps the `beam_size` best
// expansions by raw log-probability; expansions ending in eos (or reaching
// the length cap) retire as candidates. Candidates are returned sorted by
// log_prob / len^alpha, best first, at most `beam_size` of them.
template <StepModel M>
std::vector<BeamCandidate> beam_search(const M& model, int beam_size, double alpha) {
  if (beam_size < 1) throw ArgumentError("beam_size must be >= 1");
  struct Hyp {
    std::vector<TokenId> tokens;
    double log_prob;
    typename M::State state;
  };
  struct Expansion {
    std::size_t hyp;
    TokenId token;
    double log_prob;
  };
  const TokenId eos = model.eos();
  const int max_len = model.max_length();
  std::vector<Hyp> alive;
  alive.push_back({{}, 0.0, model.initial()});
  std::vector<BeamCandidate> finished;
  std::vector<Expansion> expansions;
  for (int step = 0; step < max_len && !alive.empty(); ++step) {
    expansions.clear();
    for (std::size_t h = 0; h < alive.size(); ++h) {
      const Eigen::RowVectorXd lp = model.next_log_probs(alive[h].state);
      for (Eigen::Index t = 0; t < lp.size(); ++t)
        expansions.push_back({h, static_cast<TokenId>(t), alive[h].log_prob + lp(t)});
    }
    const auto keep = std::min(expansions.size(), static_cast<std::size_t>(beam_size));
    std::partial_sort(expansions.begin(), expansions.begin() + static_cast<long>(keep),
                      expansions.end(), [](const Expansion& a, const Expansion& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        if (a.hyp != b.hyp) return a.hyp < b.hyp;
                        return a.token < b.token;
                      });
    std::vector<Hyp> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& e = expansions[i];
      auto tokens = alive[e.hyp].tokens;
      tokens.push_back(e.token);
      const bool ended = e.token == eos;
      if (ended || static_cast<int>(tokens.size()) >= max_len) {
        BeamCandidate c;
        c.norm_score = length_normalized(e.log_prob, tokens.size(), alpha);
        c.tokens = std::move(tokens);
        c.log_prob = e.log_prob;
        c.finished = ended;
        finished.push_back(std::move(c));
      } else {
        next.push_back({std::move(tokens), e.log_prob, model.advance(alive[e.hyp].state, e.token)});
      }
    }
    alive = std::move(next);
  }
  std::stable_sort(finished.begin(), finished.end(),
                   [](const BeamCandidate& a, const BeamCandidate& b) {
                     return a.norm_score > b.norm_score;
                   });
  if (finished.size() > static_cast<std::size_t>(beam_size))
    finished.resize(static_cast<std::size_t>(beam_size));
  return finished;
}

// Inverse-CDF draw from a row of log-probabilities.
template <typename Rng>
TokenId sample_categorical(const Eigen::RowVectorXd& log_probs, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  Eigen::Index last_positive = 0;
  for (Eigen::Index i = 0; i < log_probs.size(); ++i) {
    const double p = std::exp(log_probs(i));
    if (p > 0) last_positive = i;
    acc += p;
    if (u < acc) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(last_positive);
}

template <typename State>
struct SampledSequence {
  std::vector<TokenId> tokens;
  double log_prob = 0.0;
  std::vector<State> states;  // states[t] produced the distribution for tokens[t]
};

// Ancestral sampling until eos or the length cap.
template <StepModel M, typename Rng>
SampledSequence<typename M::State> sample_sequence(const M& model, Rng& rng) {
  SampledSequence<typename M::State> out;
  auto state = model.initial();
  for (int step = 0; step < model.max_length(); ++step) {
    const Eigen::RowVectorXd lp = model.next_log_probs(state);
    const TokenId t = sample_categorical(lp, rng);
    out.tokens.push_back(t);
    out.log_prob += lp(t);
    out.states.push_back(state);
    if (t == model.eos()) break;
    if (step + 1 < model.max_length()) state = model.advance(state, t);
  }
  return out;
}

}  // namespace agreesum
