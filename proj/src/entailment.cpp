#include "agreesum/entailment.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "agreesum/error.hpp"
#include "agreesum/hash.hpp"
#include "agreesum/io.hpp"

namespace agreesum {

using nlohmann::json;
using nlohmann::ordered_json;
using nn::Matrix;
using nn::Var;

Label EntailmentJudge::judge_one(const std::string& premise, const std::string& hypothesis) const {
  const TextPair pair{premise, hypothesis};
  return judge(std::span<const TextPair>(&pair, 1)).front();
}

Label ContainmentOracle::classify(std::string_view premise, std::string_view hypothesis) {
  const auto hyp = normalized_words(hypothesis);
  if (hyp.empty()) throw ArgumentError("empty hypothesis");
  const auto words = normalized_words(premise);
  const std::set<std::string, std::less<>> vocab(words.begin(), words.end());
  for (const auto& w : hyp)
    if (!vocab.contains(w)) return Label::not_entailed;
  return Label::entailed;
}

std::vector<Label> ContainmentOracle::judge(std::span<const TextPair> pairs) const {
  std::vector<Label> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(classify(p.premise, p.hypothesis));
  return out;
}

std::vector<Label> article_labels(const EntailmentJudge& judge, const ClusterExample& cluster,
                                  const std::string& candidate) {
  if (cluster.articles.empty())
    throw ArgumentError("cluster " + cluster.cluster_id + " has no articles");
  std::vector<TextPair> pairs;
  pairs.reserve(cluster.articles.size());
  for (const auto& a : cluster.articles) pairs.push_back({a.body, candidate});
  auto labels = judge.judge(pairs);
  if (labels.size() != pairs.size()) throw ProtocolError("judge returned a misaligned label list");
  return labels;
}

int signed_reward(std::span<const Label> labels) {
  if (labels.empty()) throw ArgumentError("signed_reward of an empty cluster");
  int r = 0;
  for (auto l : labels) r += l == Label::entailed ? 1 : -1;
  return r;
}

double cluster_entailment_score(std::span<const Label> labels) {
  if (labels.empty()) throw ArgumentError("entailment score of an empty cluster");
  const auto n = std::count(labels.begin(), labels.end(), Label::entailed);
  return static_cast<double>(n) / static_cast<double>(labels.size());
}

int signed_reward(const EntailmentJudge& judge, const ClusterExample& cluster,
                  const std::string& candidate) {
  return signed_reward(article_labels(judge, cluster, candidate));
}

double cluster_entailment_score(const EntailmentJudge& judge, const ClusterExample& cluster,
                                const std::string& candidate) {
  return cluster_entailment_score(article_labels(judge, cluster, candidate));
}

void ClassifierConfig::validate() const {
  if (embed_dim < 1) throw ValidationError("classifier embed_dim must be >= 1");
  if (filters < 1) throw ValidationError("classifier filters must be >= 1");
  if (windows.empty()) throw ValidationError("classifier needs at least one window size");
  for (int w : windows)
    if (w < 1) throw ValidationError("classifier window sizes must be >= 1");
  if (max_premise_len < 1 || max_hypothesis_len < 1)
    throw ValidationError("classifier length limits must be >= 1");
}

EntailmentClassifier::EntailmentClassifier(Vocabulary vocab, ClassifierConfig config)
    : vocab_(std::move(vocab)), config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(derive_seed(config_.seed, "entailment-init"));
  const Eigen::Index d = config_.embed_dim;
  embedding_ = store_.add("embedding",
                          nn::normal_matrix(static_cast<Eigen::Index>(vocab_.size()), d, 0.3, rng));
  segment_ = store_.add("segment", nn::normal_matrix(2, d, 0.1, rng));
  // Identity start: alignment scores begin as plain embedding similarity.
  align_ = store_.add("align", Matrix::Identity(d, d));
  fuse_ = nn::Linear(store_, "fuse", 5 * d, d, rng);
  head_ = nn::ConvPoolHead(store_, "head", d, config_.windows, config_.filters, rng);
  output_ = nn::Linear(store_, "output", head_.output_dim(), 2, rng);
}

std::vector<TokenId> EntailmentClassifier::encode_pair(std::string_view premise,
                                                       std::string_view hypothesis) const {
  auto p = vocab_.encode(premise);
  auto h = vocab_.encode(hypothesis);
  if (h.empty()) throw ArgumentError("empty hypothesis");
  if (p.empty()) throw ArgumentError("empty premise");
  if (p.size() > static_cast<std::size_t>(config_.max_premise_len))
    p.resize(static_cast<std::size_t>(config_.max_premise_len));
  if (h.size() > static_cast<std::size_t>(config_.max_hypothesis_len))
    h.resize(static_cast<std::size_t>(config_.max_hypothesis_len));
  p.push_back(Vocabulary::kSep);
  p.insert(p.end(), h.begin(), h.end());
  return p;
}

Var EntailmentClassifier::log_probs(std::string_view premise, std::string_view hypothesis) const {
  const auto ids = encode_pair(premise, hypothesis);
  const auto sep = std::find(ids.begin(), ids.end(), Vocabulary::kSep) - ids.begin();
  std::vector<TokenId> segments(ids.size(), 0);
  std::fill(segments.begin() + sep + 1, segments.end(), 1);

  const Var e = nn::gather_rows(embedding_, ids);
  const Var premise_rows = nn::slice_rows(e, 0, sep);
  const Var scores = nn::matmul(nn::matmul(e, align_), nn::transpose(premise_rows));
  const Var aligned = nn::matmul(nn::softmax_rows(scores), premise_rows);
  const Var parts[5] = {e, aligned, nn::mul(e, aligned), e - aligned,
                        nn::gather_rows(segment_, segments)};
  const Var features = nn::tanh(fuse_(nn::concat_cols(parts)));
  return nn::log_softmax_rows(output_(head_(features)));
}

std::array<double, 2> EntailmentClassifier::probabilities(std::string_view premise,
                                                          std::string_view hypothesis) const {
  nn::NoGradGuard guard;
  const Matrix lp = log_probs(premise, hypothesis).value();
  // Normalize the pair explicitly so it sums to one regardless of rounding in exp.
  const double a = std::exp(lp(0, 0));
  const double b = std::exp(lp(0, 1));
  return {a / (a + b), b / (a + b)};
}

Label EntailmentClassifier::classify(std::string_view premise, std::string_view hypothesis) const {
  const auto p = probabilities(premise, hypothesis);
  return p[1] > p[0] ? Label::entailed : Label::not_entailed;
}

std::vector<Label> EntailmentClassifier::judge(std::span<const TextPair> pairs) const {
  std::vector<Label> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(classify(p.premise, p.hypothesis));
  return out;
}

void EntailmentClassifier::save(const std::filesystem::path& path) const {
  io::write_file_atomic(path, store_.serialize());
  ordered_json meta;
  meta["format"] = "agreesum-entailment";
  meta["config"] = {{"embed_dim", config_.embed_dim},
                    {"windows", config_.windows},
                    {"filters", config_.filters},
                    {"max_premise_len", config_.max_premise_len},
                    {"max_hypothesis_len", config_.max_hypothesis_len},
                    {"seed", config_.seed}};
  meta["parameter_count"] = store_.scalar_count();
  meta["vocab_hash"] = hex64(vocab_.hash());
  meta["special_tokens"] = vocab_.special_tokens_json();
  meta["vocab"] = vocab_.tokens();
  auto meta_path = path;
  meta_path += ".meta.json";
  io::write_file_atomic(meta_path, meta.dump(1) + "\n");
}

EntailmentClassifier EntailmentClassifier::load(const std::filesystem::path& path) {
  auto meta_path = path;
  meta_path += ".meta.json";
  json meta;
  try {
    meta = json::parse(io::read_file(meta_path));
  } catch (const json::exception& e) {
    throw ParseError(meta_path.string() + ": " + e.what());
  }
  if (meta.value("format", "") != "agreesum-entailment")
    throw ValidationError(meta_path.string() + " is not an entailment checkpoint");
  ClassifierConfig cfg;
  try {
    const auto& c = meta.at("config");
    cfg.embed_dim = c.at("embed_dim").get<int>();
    cfg.windows = c.at("windows").get<std::vector<int>>();
    cfg.filters = c.at("filters").get<int>();
    cfg.max_premise_len = c.at("max_premise_len").get<int>();
    cfg.max_hypothesis_len = c.at("max_hypothesis_len").get<int>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ParseError(meta_path.string() + ": " + e.what());
  }
  auto vocab = Vocabulary::from_tokens(meta.at("vocab").get<std::vector<std::string>>());
  if (hex64(vocab.hash()) != meta.at("vocab_hash").get<std::string>())
    throw ValidationError("vocabulary hash mismatch in " + meta_path.string());
  EntailmentClassifier model(std::move(vocab), cfg);
  model.store_.deserialize(io::read_file(path));
  return model;
}

EntailmentClassifier train_classifier(std::span<const EntailmentRecord> records,
                                      const ClassifierConfig& model_config,
                                      const ClassifierTrainConfig& train_config,
                                      ClassifierTrainResult* result) {
  if (records.empty()) throw TrainingError("no entailment records to train on");
  const auto positives = std::count_if(records.begin(), records.end(), [](const auto& r) {
    return r.label == Label::entailed;
  });
  if (positives == 0 || positives == static_cast<long>(records.size()))
    throw TrainingError("degenerate label distribution");
  if (train_config.epochs < 0 || train_config.batch_size < 1)
    throw ValidationError("classifier epochs must be >= 0 and batch_size >= 1");

  std::vector<std::string> texts;
  texts.reserve(records.size() * 2);
  for (const auto& r : records) {
    texts.push_back(r.premise);
    texts.push_back(r.hypothesis);
  }
  EntailmentClassifier model(Vocabulary::build(texts), model_config);
  nn::Optimizer opt(model.parameters(), train_config.optimizer);
  std::mt19937_64 rng(derive_seed(train_config.seed, "entailment-train"));
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(train_config.batch_size);
  for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const auto end = std::min(order.size(), start + batch);
      Var total;
      for (std::size_t i = start; i < end; ++i) {
        const auto& r = records[order[i]];
        const TokenId gold[1] = {r.label == Label::entailed ? 1 : 0};
        const Var nll = nn::scale(nn::pick(model.log_probs(r.premise, r.hypothesis), gold), -1.0);
        total = total ? total + nll : nll;
      }
      const Var loss = nn::scale(total, 1.0 / static_cast<double>(end - start));
      nn::backward(loss);
      opt.step();
      if (result) result->batch_losses.push_back(loss.scalar());
    }
  }
  return model;
}

double classifier_accuracy(const EntailmentJudge& judge, std::span<const EntailmentRecord> records) {
  if (records.empty()) throw ArgumentError("accuracy over an empty record list");
  std::vector<TextPair> pairs;
  pairs.reserve(records.size());
  for (const auto& r : records) pairs.push_back({r.premise, r.hypothesis});
  const auto labels = judge.judge(pairs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < records.size(); ++i) correct += labels[i] == records[i].label;
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

ordered_json to_json(const EntailmentRecord& r) {
  ordered_json j;
  j["article_id"] = r.article_id;
  j["cluster_id"] = r.cluster_id;
  j["premise"] = r.premise;
  j["hypothesis"] = r.hypothesis;
  j["votes"] = r.votes;
  j["label"] = std::string(to_string(r.label));
  return j;
}

EntailmentRecord entailment_record_from_json(const json& j) {
  check_keys(j, {"article_id", "cluster_id", "premise", "hypothesis", "votes", "label"}, {},
             "entailment record");
  EntailmentRecord r;
  r.article_id = j.at("article_id").get<std::string>();
  r.cluster_id = j.at("cluster_id").get<std::string>();
  r.premise = j.at("premise").get<std::string>();
  r.hypothesis = j.at("hypothesis").get<std::string>();
  r.votes = j.at("votes").get<std::vector<bool>>();
  const auto label = j.at("label").get<std::string>();
  if (label == "entailed") r.label = Label::entailed;
  else if (label == "not_entailed") r.label = Label::not_entailed;
  else throw ValidationError("unknown label '" + label + "' for article_id=" + r.article_id);
  if (r.label != aggregate_votes(r.votes))
    throw ValidationError("label disagrees with vote majority for article_id=" + r.article_id);
  if (r.premise.empty() || r.hypothesis.empty())
    throw ValidationError("empty premise or hypothesis for article_id=" + r.article_id);
  return r;
}

std::vector<EntailmentRecord> load_entailment_records(const std::filesystem::path& path) {
  std::vector<EntailmentRecord> out;
  io::for_each_line(path, [&](std::size_t number, std::string_view line) {
    const auto where = path.string() + ":" + std::to_string(number) + ": ";
    try {
      out.push_back(entailment_record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(where + e.what());
    } catch (const ArgumentError& e) {
      throw ValidationError(where + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
  });
  return out;
}

void save_entailment_records(std::span<const EntailmentRecord> records,
                             const std::filesystem::path& path) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  io::write_file_atomic(path, out);
}

}  // namespace agreesum
