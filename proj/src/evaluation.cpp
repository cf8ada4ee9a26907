#include "agreesum/evaluation.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_set>

#include "agreesum/error.hpp"
#include "agreesum/io.hpp"

namespace agreesum {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::vector<std::string> ngrams(const std::vector<std::string>& words, std::size_t n) {
  std::vector<std::string> out;
  if (words.size() < n) return out;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    std::string g = words[i];
    for (std::size_t k = 1; k < n; ++k) g += '\x1f' + words[i + k];
    out.push_back(std::move(g));
  }
  return out;
}

double f_measure(double overlap, double candidate_total, double reference_total) {
  if (overlap == 0.0 || candidate_total == 0.0 || reference_total == 0.0) return 0.0;
  const double p = overlap / candidate_total;
  const double r = overlap / reference_total;
  return 2.0 * p * r / (p + r);
}

double ngram_f(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
               std::size_t n) {
  const auto cg = ngrams(cand, n);
  const auto rg = ngrams(ref, n);
  std::map<std::string, int> counts;
  for (const auto& g : rg) ++counts[g];
  double overlap = 0.0;
  for (const auto& g : cg) {
    auto it = counts.find(g);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      overlap += 1.0;
    }
  }
  return f_measure(overlap, static_cast<double>(cg.size()), static_cast<double>(rg.size()));
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double pct(std::size_t part, std::size_t whole) {
  return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

}  // namespace

RougeScores rouge(std::string_view candidate, std::string_view reference) {
  const auto c = normalized_words(candidate);
  const auto r = normalized_words(reference);
  RougeScores s;
  if (c.empty() || r.empty()) return s;
  s.rouge1 = ngram_f(c, r, 1);
  s.rouge2 = ngram_f(c, r, 2);
  s.rougeL = f_measure(static_cast<double>(lcs_length(c, r)), static_cast<double>(c.size()),
                       static_cast<double>(r.size()));
  return s;
}

OverlapResult ngram_overlap(std::string_view generation, const ClusterExample& cluster, int n) {
  if (n < 1) throw ArgumentError("n-gram order must be >= 1, got " + std::to_string(n));
  const auto gen = ngrams(normalized_words(generation), static_cast<std::size_t>(n));
  if (gen.empty()) return {0.0, true};
  std::string source;
  for (const auto& a : cluster.articles) {
    if (!source.empty()) source += ' ';
    source += a.body;
  }
  const auto src = ngrams(normalized_words(source), static_cast<std::size_t>(n));
  const std::unordered_set<std::string> present(src.begin(), src.end());
  const auto hits = std::count_if(gen.begin(), gen.end(), [&](const auto& g) { return present.contains(g); });
  return {pct(static_cast<std::size_t>(hits), gen.size()), false};
}

AgreementMetrics agreement_metrics(std::span<const std::vector<Label>> cluster_labels) {
  if (cluster_labels.empty()) throw ArgumentError("agreement metrics over no clusters");
  std::size_t pairs = 0, entailed_pairs = 0, all_entailed = 0, none_entailed = 0;
  for (const auto& labels : cluster_labels) {
    if (labels.empty()) throw ArgumentError("agreement metrics over an empty cluster");
    const auto e = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label::entailed));
    pairs += labels.size();
    entailed_pairs += e;
    all_entailed += e == labels.size();
    none_entailed += e == 0;
  }
  return {pct(entailed_pairs, pairs), pct(all_entailed, cluster_labels.size()),
          pct(none_entailed, cluster_labels.size())};
}

AgreementMetrics agreement_metrics(std::span<const DecodedPair> decoded,
                                   const EntailmentJudge& judge) {
  if (decoded.empty()) throw ArgumentError("agreement metrics over no clusters");
  // A summary with no words cannot be entailed and is not sent to the judge.
  std::vector<TextPair> pairs;
  for (const auto& d : decoded) {
    if (d.cluster->articles.empty())
      throw ArgumentError("cluster " + d.cluster->cluster_id + " has no articles");
    if (normalized_words(d.summary).empty()) continue;
    for (const auto& a : d.cluster->articles) pairs.push_back({a.body, d.summary});
  }
  const auto labels = pairs.empty() ? std::vector<Label>{} : judge.judge(pairs);
  if (labels.size() != pairs.size()) throw ProtocolError("judge returned a misaligned label list");
  std::vector<std::vector<Label>> per_cluster;
  std::size_t k = 0;
  for (const auto& d : decoded) {
    const auto n = d.cluster->articles.size();
    if (normalized_words(d.summary).empty()) {
      per_cluster.emplace_back(n, Label::not_entailed);
      continue;
    }
    per_cluster.emplace_back(labels.begin() + static_cast<long>(k),
                             labels.begin() + static_cast<long>(k + n));
    k += n;
  }
  return agreement_metrics(per_cluster);
}

ReferenceMode parse_reference_mode(std::string_view text) {
  if (text == "dev_gold" || text == "dev") return ReferenceMode::dev_gold;
  if (text == "test_approx" || text == "test") return ReferenceMode::test_approx;
  throw ValidationError("unknown reference mode '" + std::string(text) + "'");
}

std::vector<HumanAnnotation> load_human_annotations(const std::filesystem::path& path) {
  std::vector<HumanAnnotation> out;
  io::for_each_line(path, [&](std::size_t number, std::string_view line) {
    const auto where = path.string() + ":" + std::to_string(number) + ": ";
    try {
      const json j = json::parse(line);
      check_keys(j, {"cluster_id", "article_id", "question", "votes"}, {}, "human annotation");
      HumanAnnotation h;
      h.cluster_id = j.at("cluster_id").get<std::string>();
      if (!j.at("article_id").is_null()) h.article_id = j.at("article_id").get<std::string>();
      h.question = j.at("question").get<std::string>();
      if (h.question != "entail" && h.question != "language")
        throw ValidationError(where + "question must be \"entail\" or \"language\"");
      if (h.question == "entail" && !h.article_id)
        throw ValidationError(where + "entail annotations need an article_id");
      h.votes = j.at("votes").get<std::vector<bool>>();
      out.push_back(std::move(h));
    } catch (const json::exception& e) {
      throw ParseError(where + e.what());
    }
  });
  return out;
}

ordered_json MetricsReport::to_json() const {
  ordered_json j;
  j["model"] = model;
  j["reference_mode"] = reference_mode == ReferenceMode::dev_gold ? "dev_gold" : "test_approx";
  j["rouge_reference"] = reference_mode == ReferenceMode::dev_gold ? "gold" : "approximate-reference";
  j["clusters"] = clusters;
  j["rouge1"] = rouge1;
  j["rouge2"] = rouge2;
  j["rougeL"] = rougeL;
  j["article_entail_pct"] = article_entail_pct;
  j["cluster_entail_pct"] = cluster_entail_pct;
  j["hallucination_pct"] = hallucination_pct;
  auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  j["language_pct"] = opt(language_pct);
  j["human_article_entail_pct"] = opt(human_article_entail_pct);
  j["human_cluster_entail_pct"] = opt(human_cluster_entail_pct);
  j["human_hallucination_pct"] = opt(human_hallucination_pct);
  ordered_json overlap = ordered_json::object();
  ordered_json short_gen = ordered_json::object();
  for (const auto& [n, v] : ngram_overlap) overlap[std::to_string(n)] = v;
  for (const auto& [n, v] : short_generations) short_gen[std::to_string(n)] = v;
  j["ngram_overlap"] = overlap;
  j["short_generations"] = short_gen;
  return j;
}

std::string MetricsReport::table() const {
  auto num = [](double v, int precision) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
  };
  auto pair = [&](double automatic, const std::optional<double>& human) {
    return human ? num(automatic, 1) + "/" + num(*human, 1) : num(automatic, 1);
  };
  const std::string rouge_group =
      reference_mode == ReferenceMode::dev_gold ? "ROUGE-dev" : "ROUGE-test (approximate-reference)";
  std::vector<std::string> header{"model", "R1", "R2", "RL", "article-entail%", "cluster-entail%",
                                  "hallucination%", "language%"};
  std::vector<std::string> row{model.empty() ? "-" : model, num(100 * rouge1, 1),
                               num(100 * rouge2, 1), num(100 * rougeL, 1),
                               pair(article_entail_pct, human_article_entail_pct),
                               pair(cluster_entail_pct, human_cluster_entail_pct),
                               pair(hallucination_pct, human_hallucination_pct),
                               language_pct ? num(*language_pct, 1) : "-"};
  for (int n : kOverlapOrders) {
    header.push_back(std::to_string(n) + "-gram%");
    auto it = ngram_overlap.find(n);
    row.push_back(it == ngram_overlap.end() ? "-" : num(it->second, 1));
  }
  std::ostringstream os;
  os << rouge_group << " columns R1 R2 RL; n-gram overlap = share of generation n-grams found in the source\n";
  for (int line = 0; line < 2; ++line) {
    const auto& cells = line == 0 ? header : row;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto width = std::max(header[i].size(), row[i].size());
      if (i > 0) os << "  ";
      os << std::setw(static_cast<int>(width)) << (i == 0 ? std::left : std::right) << cells[i];
    }
    os << "\n";
  }
  return os.str();
}

ordered_json to_json(const DecodedRecord& r) {
  ordered_json j;
  j["cluster_id"] = r.cluster_id;
  j["model"] = r.model;
  j["summary"] = r.summary;
  j["entail_score"] = r.entail_score;
  j["beam_rank"] = r.beam_rank;
  if (r.truncated) j["truncated"] = true;
  return j;
}

DecodedRecord decoded_record_from_json(const json& j) {
  check_keys(j, {"cluster_id", "model", "summary", "entail_score", "beam_rank"}, {"truncated"},
             "decoded record");
  DecodedRecord r;
  r.cluster_id = j.at("cluster_id").get<std::string>();
  r.model = j.at("model").get<std::string>();
  r.summary = j.at("summary").get<std::string>();
  r.entail_score = j.at("entail_score").get<double>();
  r.beam_rank = j.at("beam_rank").get<int>();
  r.truncated = j.value("truncated", false);
  return r;
}

std::vector<DecodedRecord> load_decoded(const std::filesystem::path& path) {
  std::vector<DecodedRecord> out;
  io::for_each_line(path, [&](std::size_t number, std::string_view line) {
    try {
      out.push_back(decoded_record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  });
  return out;
}

std::string serialize_decoded(std::span<const DecodedRecord> records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  return out;
}

MetricsReport evaluate_records(std::span<const DecodedRecord> decoded,
                               std::span<const ClusterExample> dataset,
                               const EntailmentJudge& judge, ReferenceMode mode,
                               std::span<const HumanAnnotation> human) {
  if (decoded.empty()) throw ValidationError("no decoded records to evaluate");
  std::map<std::string, const DecodedRecord*, std::less<>> by_id;
  for (const auto& r : decoded)
    if (!by_id.emplace(r.cluster_id, &r).second)
      throw ValidationError("duplicate decoded record for cluster_id=" + r.cluster_id);
  std::set<std::string, std::less<>> dataset_ids;
  std::vector<std::string> missing;
  for (const auto& c : dataset) {
    dataset_ids.insert(c.cluster_id);
    if (!by_id.contains(c.cluster_id)) missing.push_back(c.cluster_id);
  }
  std::vector<std::string> extra;
  for (const auto& [id, r] : by_id)
    if (!dataset_ids.contains(id)) extra.push_back(id);
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "decoded records do not match the dataset;";
    auto list = [&](const char* what, const std::vector<std::string>& ids) {
      if (ids.empty()) return;
      msg += std::string(" ") + what + ":";
      for (const auto& id : ids) msg += " " + id;
    };
    list("missing ids", missing);
    list("unexpected ids", extra);
    throw ValidationError(msg);
  }

  MetricsReport report;
  report.model = decoded.front().model;
  report.reference_mode = mode;
  report.clusters = dataset.size();
  std::vector<DecodedPair> pairs;
  for (const auto& c : dataset) {
    const auto& summary = by_id.at(c.cluster_id)->summary;
    pairs.push_back({&c, summary});
    const auto r = rouge(summary, c.summary);
    report.rouge1 += r.rouge1;
    report.rouge2 += r.rouge2;
    report.rougeL += r.rougeL;
    for (int n : kOverlapOrders) {
      const auto o = ngram_overlap(summary, c, n);
      report.ngram_overlap[n] += o.percent;
      report.short_generations[n] += o.too_short ? 1 : 0;
    }
  }
  const auto count = static_cast<double>(dataset.size());
  report.rouge1 /= count;
  report.rouge2 /= count;
  report.rougeL /= count;
  for (auto& [n, v] : report.ngram_overlap) v /= count;
  const auto agreement = agreement_metrics(pairs, judge);
  report.article_entail_pct = agreement.article_entail_pct;
  report.cluster_entail_pct = agreement.cluster_entail_pct;
  report.hallucination_pct = agreement.hallucination_pct;

  std::size_t language_yes = 0, language_total = 0;
  std::map<std::string, std::vector<Label>> human_entail;
  for (const auto& h : human) {
    if (!dataset_ids.contains(h.cluster_id)) continue;
    const auto label = aggregate_votes(h.votes);
    if (h.question == "language") {
      ++language_total;
      language_yes += label == Label::entailed;
    } else {
      human_entail[h.cluster_id].push_back(label);
    }
  }
  if (language_total > 0) report.language_pct = pct(language_yes, language_total);
  if (!human_entail.empty()) {
    std::vector<std::vector<Label>> lists;
    for (auto& [id, labels] : human_entail) lists.push_back(std::move(labels));
    const auto h = agreement_metrics(lists);
    report.human_article_entail_pct = h.article_entail_pct;
    report.human_cluster_entail_pct = h.cluster_entail_pct;
    report.human_hallucination_pct = h.hallucination_pct;
  }
  return report;
}

MetricsReport evaluate_run(const std::filesystem::path& decoded_path,
                           std::span<const ClusterExample> dataset, const EntailmentJudge& judge,
                           ReferenceMode mode, std::span<const HumanAnnotation> human) {
  const auto decoded = load_decoded(decoded_path);
  return evaluate_records(decoded, dataset, judge, mode, human);
}

}  // namespace agreesum
