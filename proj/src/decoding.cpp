#include "agreesum/decoding.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <mutex>
#include <set>
#include <thread>

#include "agreesum/error.hpp"
#include "agreesum/hash.hpp"

namespace agreesum {

namespace {

const std::set<std::string, std::less<>>& abbreviations() {
  static const std::set<std::string, std::less<>> list{
      "Mr", "Mrs", "Ms", "Dr", "Prof", "Sr", "Jr", "St", "Mt", "Gen", "Gov", "Sen", "Rep",
      "Lt", "Col", "Capt", "Sgt", "Rev", "Inc", "Ltd", "Co", "Corp", "vs", "etc", "No",
      "Jan", "Feb", "Mar", "Apr", "Jun", "Jul", "Aug", "Sep", "Sept", "Oct", "Nov", "Dec",
      "U.S", "U.K", "U.N", "e.g", "i.e", "approx", "est", "Ave", "Blvd"};
  return list;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Generations without a single word cannot be judged and score zero.
double text_score(const EntailmentJudge& judge, const ClusterExample& cluster,
                  const std::string& text) {
  if (normalized_words(text).empty()) return 0.0;
  return cluster_entailment_score(judge, cluster, text);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t end = i + 1;
    while (end < text.size() && (text[end] == '"' || text[end] == '\'' || text[end] == ')' ||
                                 text[end] == ']'))
      ++end;
    std::size_t next = end;
    while (next < text.size() && is_space(text[next])) ++next;
    if (next == end || next >= text.size() ||
        !std::isupper(static_cast<unsigned char>(text[next])))
      continue;
    if (c == '.') {
      std::size_t w = i;
      while (w > start && !is_space(text[w - 1])) --w;
      const auto word = text.substr(w, i - w);
      if (abbreviations().contains(word)) continue;
      if (word.size() == 1 && std::isupper(static_cast<unsigned char>(word[0]))) continue;
    }
    const auto sentence = trim(text.substr(start, end - start));
    if (!sentence.empty()) out.emplace_back(sentence);
    start = next;
    i = next - 1;
  }
  const auto rest = trim(text.substr(std::min(start, text.size())));
  if (!rest.empty()) out.emplace_back(rest);
  return out;
}

void DecodeConfig::validate() const {
  if (beam_size < 1) throw ValidationError("beam_size must be >= 1");
  if (entdec_k && *entdec_k < 1) throw ValidationError("entdec k must be >= 1");
}

std::size_t select_entdec(std::span<const BeamCandidate> beam, std::span<const double> scores) {
  if (beam.empty()) throw ArgumentError("entdec selection over an empty beam");
  if (scores.size() != beam.size()) throw ArgumentError("entdec scores do not align with the beam");
  std::size_t best = 0;
  for (std::size_t i = 1; i < beam.size(); ++i) {
    if (scores[i] > scores[best] ||
        (scores[i] == scores[best] && beam[i].norm_score > beam[best].norm_score))
      best = i;
  }
  return best;
}

DecodeResult decode_plain(const Summarizer& model, const ClusterExample& cluster, int beam_size,
                          double alpha, const EntailmentJudge* judge) {
  nn::NoGradGuard guard;
  const auto enc = model.encode_cluster(cluster);
  const auto beam = beam_search(model, enc, beam_size, alpha);
  DecodeResult r;
  if (beam.empty()) {
    r.truncated = true;
    return r;
  }
  r.text = model.vocab().decode(beam.front().tokens);
  r.truncated = !beam.front().finished;
  if (judge) r.entail_score = text_score(*judge, cluster, r.text);
  return r;
}

DecodeResult decode_entdec(const Summarizer& model, const EntailmentJudge& judge,
                           const ClusterExample& cluster, int k, double alpha) {
  if (k < 1) throw ArgumentError("entdec k must be >= 1");
  nn::NoGradGuard guard;
  const auto enc = model.encode_cluster(cluster);
  const auto full = beam_search(model, enc, k, alpha);
  std::vector<BeamCandidate> finished;
  std::vector<std::size_t> ranks;
  for (std::size_t i = 0; i < full.size(); ++i) {
    if (!full[i].finished) continue;
    finished.push_back(full[i]);
    ranks.push_back(i);
  }
  DecodeResult r;
  if (finished.empty()) {
    r.truncated = true;
    if (full.empty()) return r;
    r.text = model.vocab().decode(full.front().tokens);
    r.entail_score = text_score(judge, cluster, r.text);
    return r;
  }
  std::vector<std::string> texts;
  for (const auto& c : finished) texts.push_back(model.vocab().decode(c.tokens));
  std::vector<double> scores(finished.size(), 0.0);
  std::vector<TextPair> judged;
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < finished.size(); ++i) {
    if (normalized_words(texts[i]).empty()) continue;
    for (const auto& a : cluster.articles) {
      judged.push_back({a.body, texts[i]});
      owner.push_back(i);
    }
  }
  const auto labels = judge.judge(judged);
  if (labels.size() != judged.size()) throw ProtocolError("judge returned a misaligned label list");
  for (std::size_t p = 0; p < labels.size(); ++p)
    if (labels[p] == Label::entailed) scores[owner[p]] += 1.0;
  for (auto& s : scores) s /= static_cast<double>(cluster.articles.size());
  const auto best = select_entdec(finished, scores);
  r.text = texts[best];
  r.entail_score = scores[best];
  r.beam_rank = static_cast<int>(ranks[best]);
  return r;
}

DecodeResult decode_b5(const EntailmentJudge& judge, const ClusterExample& cluster,
                       std::mt19937_64& rng) {
  DecodeResult r;
  std::vector<std::string> leads;
  std::vector<int> sources;
  for (std::size_t i = 0; i < cluster.articles.size(); ++i) {
    const auto sentences = split_sentences(cluster.articles[i].body);
    if (sentences.empty() || normalized_words(sentences.front()).empty()) {
      r.warnings.push_back("article " + cluster.articles[i].article_id + " has no lead sentence");
      continue;
    }
    leads.push_back(sentences.front());
    sources.push_back(static_cast<int>(i));
  }
  if (leads.empty()) throw ArgumentError("cluster " + cluster.cluster_id + " has no lead sentences");
  std::vector<double> scores;
  for (const auto& lead : leads) scores.push_back(cluster_entailment_score(judge, cluster, lead));
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<std::size_t> tied;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] == top) tied.push_back(i);
  const auto pick = tied[std::uniform_int_distribution<std::size_t>(0, tied.size() - 1)(rng)];
  r.text = leads[pick];
  r.entail_score = top;
  r.beam_rank = sources[pick];
  return r;
}

std::vector<DecodedRecord> decode_clusters(const Summarizer* model, const EntailmentJudge* judge,
                                           std::span<const ClusterExample> clusters,
                                           const DecodeConfig& config, bool b5,
                                           const std::string& model_name, int workers) {
  config.validate();
  if (b5 && !judge) throw ValidationError("extractive decoding needs an entailment scorer", "NO_SCORER");
  if (!b5 && !model) throw ValidationError("decoding needs a summarizer checkpoint");
  if (!b5 && config.entdec_k && !judge)
    throw ValidationError("entdec decoding needs an entailment scorer", "NO_SCORER");
  std::vector<DecodedRecord> out(clusters.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < clusters.size(); i = next++) {
      try {
        const auto& c = clusters[i];
        DecodeResult r;
        if (b5) {
          std::mt19937_64 rng(derive_seed(derive_seed(config.seed, "b5"), c.cluster_id));
          r = decode_b5(*judge, c, rng);
        } else if (config.entdec_k) {
          r = decode_entdec(*model, *judge, c, *config.entdec_k, config.alpha);
        } else {
          r = decode_plain(*model, c, config.beam_size, config.alpha, judge);
        }
        out[i] = {c.cluster_id, model_name, r.text, r.entail_score, r.beam_rank, r.truncated};
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = clusters.size();
      }
    }
  };
  std::vector<std::thread> threads;
  for (int w = 1; w < std::max(workers, 1); ++w) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace agreesum
