#include "agreesum/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "agreesum/error.hpp"
#include "agreesum/evaluation.hpp"
#include "agreesum/hash.hpp"
#include "agreesum/io.hpp"

namespace agreesum {

using nlohmann::ordered_json;
using nn::Matrix;
using nn::Var;

TrainConfig TrainConfig::from(const KeyValueConfig& kv, TrainConfig c) {
  c.optimizer.learning_rate = kv.get_double("learning_rate", c.optimizer.learning_rate);
  if (auto v = kv.get("optimizer")) c.optimizer.kind = nn::parse_optimizer_kind(*v);
  c.optimizer.clip_norm = kv.get_double("clip_norm", c.optimizer.clip_norm);
  c.lambda = kv.get_double("lambda", c.lambda);
  c.batch_size = static_cast<int>(kv.get_int("batch_size", c.batch_size));
  c.max_steps = static_cast<int>(kv.get_int("max_steps", c.max_steps));
  c.ce_steps = static_cast<int>(kv.get_int("ce_steps", c.ce_steps));
  c.unsup_steps = static_cast<int>(kv.get_int("unsup_steps", c.unsup_steps));
  c.disc_steps = static_cast<int>(kv.get_int("disc_steps", c.disc_steps));
  c.pg_samples = static_cast<int>(kv.get_int("pg_samples", c.pg_samples));
  c.reward_baseline = kv.get_bool("reward_baseline", c.reward_baseline);
  c.sample_baseline = kv.get_bool("sample_baseline", c.sample_baseline);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
  c.scorer_endpoint = kv.get_string("scorer_endpoint", c.scorer_endpoint);
  c.eval_every = static_cast<int>(kv.get_int("eval_every", c.eval_every));
  c.phase1_steps = static_cast<int>(kv.get_int("phase1_steps", c.phase1_steps));
  c.phase2_steps = static_cast<int>(kv.get_int("phase2_steps", c.phase2_steps));
  c.patience = static_cast<int>(kv.get_int("patience", c.patience));
  c.epsilon = kv.get_double("epsilon", c.epsilon);
  c.disc_filters = static_cast<int>(kv.get_int("disc_filters", c.disc_filters));
  c.probe_size = static_cast<std::size_t>(kv.get_int("probe_size", static_cast<long long>(c.probe_size)));
  c.probe_samples = static_cast<int>(kv.get_int("probe_samples", c.probe_samples));
  c.validate();
  return c;
}

void TrainConfig::validate() const {
  if (!(optimizer.learning_rate > 0)) throw ValidationError("learning_rate must be > 0");
  if (lambda < 0) throw ValidationError("lambda must be >= 0");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (max_steps < 0 || ce_steps < 0 || unsup_steps < 0 || disc_steps < 0)
    throw ValidationError("step counts must be >= 0");
  if (ce_steps + unsup_steps + disc_steps == 0)
    throw ValidationError("at least one of ce_steps, unsup_steps, disc_steps must be positive");
  if (pg_samples < 1) throw ValidationError("pg_samples must be >= 1");
  if (sample_baseline && pg_samples < 2) throw ValidationError("sample_baseline needs pg_samples >= 2");
  if (eval_every < 0 || patience < 0) throw ValidationError("eval_every and patience must be >= 0");
  if (phase1_steps < -1 || phase2_steps < -1) throw ValidationError("phase step budgets must be >= 0");
  if (disc_filters < 1) throw ValidationError("disc_filters must be >= 1");
  if (probe_samples < 1) throw ValidationError("probe_samples must be >= 1");
}

KeyValueConfig TrainConfig::echo() const {
  KeyValueConfig kv;
  kv.set("learning_rate", std::to_string(optimizer.learning_rate));
  kv.set("optimizer", optimizer.kind == nn::OptimizerConfig::Kind::adam ? "adam" : "sgd");
  kv.set("clip_norm", std::to_string(optimizer.clip_norm));
  kv.set("lambda", std::to_string(lambda));
  kv.set("batch_size", std::to_string(batch_size));
  kv.set("max_steps", std::to_string(max_steps));
  kv.set("ce_steps", std::to_string(ce_steps));
  kv.set("unsup_steps", std::to_string(unsup_steps));
  kv.set("disc_steps", std::to_string(disc_steps));
  kv.set("pg_samples", std::to_string(pg_samples));
  kv.set("reward_baseline", reward_baseline ? "true" : "false");
  kv.set("sample_baseline", sample_baseline ? "true" : "false");
  kv.set("seed", std::to_string(seed));
  kv.set("scorer_endpoint", scorer_endpoint);
  kv.set("eval_every", std::to_string(eval_every));
  kv.set("phase1_steps", std::to_string(phase1_steps));
  kv.set("phase2_steps", std::to_string(phase2_steps));
  kv.set("patience", std::to_string(patience));
  kv.set("epsilon", std::to_string(epsilon));
  kv.set("disc_filters", std::to_string(disc_filters));
  kv.set("probe_size", std::to_string(probe_size));
  kv.set("probe_samples", std::to_string(probe_samples));
  return kv;
}

BaselineKind parse_baseline_kind(std::string_view text) {
  if (text == "b1") return BaselineKind::b1;
  if (text == "b2") return BaselineKind::b2;
  if (text == "b3") return BaselineKind::b3;
  if (text == "b4") return BaselineKind::b4;
  throw ValidationError("unknown baseline '" + std::string(text) + "'");
}

Vocabulary build_vocabulary(const TrainData& data, std::size_t max_size) {
  std::vector<std::string> texts;
  for (const auto* split : {&data.train, &data.dev})
    for (const auto& c : *split) {
      texts.push_back(c.summary);
      for (const auto& a : c.articles) texts.push_back(a.body);
    }
  for (const auto& p : data.linked_pairs) {
    texts.push_back(p.summary);
    texts.push_back(p.article.body);
  }
  return Vocabulary::build(texts, 1, max_size);
}

std::vector<TrainingExample> linked_examples(std::span<const LinkedPair> pairs) {
  std::vector<TrainingExample> out;
  for (const auto& p : pairs)
    out.push_back({ClusterExample{p.cluster_id, {p.article}, p.summary, std::nullopt, Split::train},
                   std::nullopt});
  return out;
}

std::vector<TrainingExample> entailed_examples(std::span<const ClusterExample> train) {
  std::vector<TrainingExample> out;
  for (const auto& c : train) {
    if (!c.labels) continue;
    ClusterExample sub{c.cluster_id, {}, c.summary, std::vector<Label>{}, c.split};
    for (std::size_t i = 0; i < c.articles.size(); ++i) {
      if ((*c.labels)[i] != Label::entailed) continue;
      sub.articles.push_back(c.articles[i]);
      sub.labels->push_back(Label::entailed);
    }
    if (!sub.articles.empty()) out.push_back({std::move(sub), std::nullopt});
  }
  return out;
}

std::vector<TrainingExample> masked_examples(std::span<const ClusterExample> train) {
  std::vector<TrainingExample> out;
  for (const auto& c : train) {
    if (!c.labels) continue;
    std::vector<bool> keep;
    for (auto l : *c.labels) keep.push_back(l == Label::entailed);
    if (std::none_of(keep.begin(), keep.end(), [](bool k) { return k; })) continue;
    out.push_back({c, std::move(keep)});
  }
  return out;
}

TrainingLog::TrainingLog(std::optional<std::filesystem::path> path) : path_(std::move(path)) {}

void TrainingLog::write(LogRecord record) {
  if (path_) {
    ordered_json j;
    j["step"] = record.step;
    j["phase"] = record.phase;
    j["loss"] = record.loss;
    j["mean_reward"] = record.mean_reward ? ordered_json(*record.mean_reward) : ordered_json(nullptr);
    io::append_line(*path_, j.dump());
  }
  records_.push_back(std::move(record));
}

BatchCursor::BatchCursor(std::size_t size, std::uint64_t seed) : order_(size), rng_(seed) {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::shuffle(order_.begin(), order_.end(), rng_);
}

std::vector<std::size_t> BatchCursor::next(std::size_t count) {
  if (order_.empty()) throw ArgumentError("batch requested from an empty view");
  std::vector<std::size_t> out;
  while (out.size() < count) {
    if (pos_ == order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      pos_ = 0;
    }
    out.push_back(order_[pos_++]);
  }
  return out;
}

namespace {

Var sequence_log_prob(const Var& logits, std::span<const TokenId> tokens) {
  return nn::sum(nn::pick(nn::log_softmax_rows(logits), tokens));
}

template <typename T>
std::vector<T> gather(std::span<const T> items, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(items[i]);
  return out;
}

}  // namespace

Var ce_loss(const Summarizer& model, std::span<const TrainingExample> batch) {
  if (batch.empty()) throw ArgumentError("empty batch");
  Var total;
  std::size_t tokens = 0;
  for (const auto& ex : batch) {
    const auto target = model.encode_target(ex.cluster.summary);
    const auto* mask = ex.keep_mask ? &*ex.keep_mask : nullptr;
    const auto tf = model.forward_teacher_forced(model.encode_cluster(ex.cluster, mask), target);
    const Var lp = sequence_log_prob(tf.logits, target);
    total = total ? total + lp : lp;
    tokens += target.size();
  }
  return nn::scale(total, -1.0 / static_cast<double>(tokens));
}

double step_ce(Summarizer& model, nn::Optimizer& optimizer, std::span<const TrainingExample> batch) {
  const Var loss = ce_loss(model, batch);
  nn::backward(loss);
  optimizer.step();
  model.add_steps(1);
  return loss.scalar();
}

Var policy_gradient_surrogate(std::span<const Var> log_probs, std::span<const double> rewards,
                              double baseline) {
  if (log_probs.size() != rewards.size())
    throw ArgumentError("rewards do not align with sampled sequences");
  if (rewards.empty()) throw ArgumentError("policy gradient over no samples");
  Var total;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    const double advantage = rewards[i] - baseline;
    if (advantage == 0.0) continue;
    const Var term = nn::scale(log_probs[i], -advantage);
    total = total ? total + term : term;
  }
  if (!total) return nn::scalar_constant(0.0);
  return nn::scale(total, 1.0 / static_cast<double>(rewards.size()));
}

void RewardBaseline::update(double batch_mean) {
  value_ = value_ ? decay_ * *value_ + (1.0 - decay_) * batch_mean : batch_mean;
}

Discriminator::Discriminator(int hidden_dim, int max_len, std::vector<int> windows, int filters,
                             std::uint64_t seed)
    : hidden_dim_(hidden_dim), max_len_(max_len) {
  if (hidden_dim < 1 || max_len < 1) throw ArgumentError("discriminator dimensions must be >= 1");
  std::mt19937_64 rng(derive_seed(seed, "discriminator-init"));
  head_ = nn::ConvPoolHead(store_, "head", hidden_dim, std::move(windows), filters, rng);
  output_ = nn::Linear(store_, "output", head_.output_dim(), 1, rng);
}

Var Discriminator::logit(const Var& hidden) const {
  if (hidden.cols() != hidden_dim_) throw ArgumentError("hidden state width mismatch");
  Var x = hidden;
  if (x.rows() > max_len_) {
    x = nn::slice_rows(x, 0, max_len_);
  } else if (x.rows() < max_len_) {
    const Var parts[2] = {x, nn::constant(Matrix::Zero(max_len_ - x.rows(), hidden_dim_))};
    x = nn::concat_rows(parts);
  }
  return output_(head_(x));
}

double Discriminator::probability(const Matrix& hidden) const {
  nn::NoGradGuard guard;
  return 1.0 / (1.0 + std::exp(-logit(nn::constant(hidden)).scalar()));
}

double language_loss(std::span<const double> p_real, std::span<const double> p_fake, double eps) {
  if (p_real.size() != p_fake.size()) throw ArgumentError("real and fake batches differ in size");
  if (p_real.empty()) throw ArgumentError("language loss over an empty batch");
  auto clip = [eps](double p) { return std::clamp(p, eps, 1.0 - eps); };
  double total = 0.0;
  for (std::size_t i = 0; i < p_real.size(); ++i)
    total += std::log(clip(p_real[i])) + std::log(1.0 - clip(p_fake[i]));
  return -total / static_cast<double>(p_real.size());
}

double step_discriminator(Discriminator& disc, nn::Optimizer& optimizer,
                          std::span<const Matrix> real, std::span<const Matrix> fake) {
  if (real.size() != fake.size()) throw ArgumentError("real and fake batches differ in size");
  if (real.empty()) throw ArgumentError("empty discriminator batch");
  std::vector<double> p_real, p_fake;
  Var total;
  for (std::size_t i = 0; i < real.size(); ++i) {
    const Var lr = disc.logit(nn::constant(real[i]));
    const Var lf = disc.logit(nn::constant(fake[i]));
    p_real.push_back(1.0 / (1.0 + std::exp(-lr.scalar())));
    p_fake.push_back(1.0 / (1.0 + std::exp(-lf.scalar())));
    const Var term = nn::log_sigmoid(lr) + nn::log_sigmoid(nn::scale(lf, -1.0));
    total = total ? total + term : term;
  }
  const double value = language_loss(p_real, p_fake);
  nn::backward(nn::scale(total, -1.0 / static_cast<double>(real.size())));
  optimizer.step();
  return value;
}

namespace {

// Rewards for decoded texts against their clusters; wordless texts are
// entailed by nothing.
std::vector<double> signed_rewards(const EntailmentJudge& judge,
                                   const std::vector<const ClusterExample*>& clusters,
                                   const std::vector<std::string>& texts) {
  std::vector<TextPair> pairs;
  std::vector<std::size_t> owner;
  std::vector<double> rewards(texts.size(), 0.0);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    rewards[i] = -static_cast<double>(clusters[i]->articles.size());
    if (normalized_words(texts[i]).empty()) continue;
    for (const auto& a : clusters[i]->articles) {
      pairs.push_back({a.body, texts[i]});
      owner.push_back(i);
    }
  }
  const auto labels = judge.judge(pairs);
  if (labels.size() != pairs.size()) throw ProtocolError("judge returned a misaligned label list");
  for (std::size_t p = 0; p < labels.size(); ++p)
    if (labels[p] == Label::entailed) rewards[owner[p]] += 2.0;
  return rewards;
}

}  // namespace

PgStepResult step_entailment_pg(Summarizer& model, nn::Optimizer& optimizer,
                                std::span<const ClusterExample> batch,
                                const EntailmentJudge& judge, RewardBaseline* baseline,
                                std::mt19937_64& rng, int samples, double lambda,
                                Discriminator* disc, bool sample_baseline) {
  if (batch.empty()) throw ArgumentError("empty batch");
  if (samples < 1) throw ArgumentError("pg samples must be >= 1");
  if (sample_baseline && samples < 2) throw ArgumentError("sample baseline needs >= 2 samples");
  std::vector<Encoding> encodings;
  for (const auto& c : batch) {
    if (c.articles.empty()) throw ArgumentError("cluster " + c.cluster_id + " has no articles");
    encodings.push_back(model.encode_cluster(c));
  }
  std::vector<std::size_t> owner;
  std::vector<std::vector<TokenId>> tokens;
  std::vector<std::string> texts;
  std::vector<const ClusterExample*> clusters;
  PgStepResult result;
  for (std::size_t c = 0; c < batch.size(); ++c) {
    for (int s = 0; s < samples; ++s) {
      auto sample = sample_summary(model, encodings[c], rng);
      texts.push_back(model.vocab().decode(sample.tokens));
      tokens.push_back(std::move(sample.tokens));
      result.fake_hidden.push_back(std::move(sample.hidden));
      owner.push_back(c);
      clusters.push_back(&batch[c]);
    }
  }
  const auto rewards = signed_rewards(judge, clusters, texts);
  double b = baseline ? baseline->value() : 0.0;
  std::vector<double> advantaged = rewards;
  if (sample_baseline) {
    // Samples of one cluster are contiguous; each is compared with its siblings.
    const auto k = static_cast<std::size_t>(samples);
    for (std::size_t start = 0; start < rewards.size(); start += k) {
      const double sum = std::accumulate(rewards.begin() + static_cast<long>(start),
                                         rewards.begin() + static_cast<long>(start + k), 0.0);
      for (std::size_t i = start; i < start + k; ++i)
        advantaged[i] = rewards[i] - (sum - rewards[i]) / static_cast<double>(k - 1);
    }
    b = 0.0;
  }

  std::vector<Var> log_probs(tokens.size());
  std::vector<Var> hidden(tokens.size());
  const bool adversarial = lambda > 0.0 && disc != nullptr;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (advantaged[i] - b == 0.0 && !adversarial) continue;
    const auto tf = model.forward_teacher_forced(encodings[owner[i]], tokens[i]);
    log_probs[i] = sequence_log_prob(tf.logits, tokens[i]);
    hidden[i] = tf.hidden;
  }
  const Var surrogate = policy_gradient_surrogate(log_probs, advantaged, b);
  Var total = surrogate;
  if (adversarial) {
    Var gen;
    for (const auto& h : hidden) {
      const Var term = nn::scale(nn::log_sigmoid(disc->logit(h)), -1.0);
      gen = gen ? gen + term : term;
    }
    gen = nn::scale(gen, 1.0 / static_cast<double>(hidden.size()));
    result.generator_loss = gen.scalar();
    total = total + nn::scale(gen, lambda);
  }
  if (total.requires_grad()) {
    nn::backward(total);
    if (disc) disc->parameters().zero_grad();
    optimizer.step();
  }
  model.add_steps(1);
  result.surrogate = surrogate.scalar();
  result.mean_reward = std::accumulate(rewards.begin(), rewards.end(), 0.0) /
                       static_cast<double>(rewards.size());
  if (baseline) baseline->update(result.mean_reward);
  return result;
}

double probe_reward(const Summarizer& model, std::span<const ClusterExample> probe,
                    const EntailmentJudge& judge, std::uint64_t seed, int samples) {
  if (probe.empty()) throw ArgumentError("empty probe set");
  nn::NoGradGuard guard;
  std::mt19937_64 rng(seed);
  std::vector<std::string> texts;
  std::vector<const ClusterExample*> clusters;
  for (const auto& c : probe) {
    const auto enc = model.encode_cluster(c);
    for (int s = 0; s < samples; ++s) {
      texts.push_back(model.vocab().decode(sample_summary(model, enc, rng).tokens));
      clusters.push_back(&c);
    }
  }
  const auto rewards = signed_rewards(judge, clusters, texts);
  return std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
}

double dev_rouge2(const Summarizer& model, std::span<const ClusterExample> dev) {
  if (dev.empty()) throw ArgumentError("empty dev set");
  nn::NoGradGuard guard;
  double total = 0.0;
  for (const auto& c : dev) {
    const auto beam = beam_search(model, model.encode_cluster(c), 1, 0.0);
    const auto text = beam.empty() ? std::string() : model.vocab().decode(beam.front().tokens);
    total += rouge(text, c.summary).rouge2;
  }
  return total / static_cast<double>(dev.size());
}

namespace {

void run_supervised(Summarizer& model, std::span<const TrainingExample> examples, int steps,
                    std::string_view view, const TrainData& data, const TrainConfig& config,
                    TrainingLog* log, BaselineReport& report) {
  nn::Optimizer opt(model.parameters(), config.optimizer);
  BatchCursor cursor(examples.size(), derive_seed(config.seed, view));
  const bool select = config.eval_every > 0 && !data.dev.empty();
  double best = -std::numeric_limits<double>::infinity();
  std::optional<std::vector<Matrix>> best_params;
  for (int s = 1; s <= steps; ++s) {
    const auto batch = gather(examples, cursor.next(static_cast<std::size_t>(config.batch_size)));
    const double loss = step_ce(model, opt, batch);
    ++report.steps;
    if (log) log->write({report.steps, "ce", loss, std::nullopt});
    if (select && (s % config.eval_every == 0 || s == steps)) {
      const double r2 = dev_rouge2(model, data.dev);
      report.dev_rouge2.emplace_back(report.steps, r2);
      if (r2 > best) {
        best = r2;
        best_params = model.parameters().snapshot();
        report.best_step = report.steps;
      }
    }
  }
  if (best_params) model.parameters().restore(*best_params);
}

}  // namespace

BaselineReport train_baseline(BaselineKind kind, Summarizer& model, const TrainData& data,
                              const TrainConfig& config, TrainingLog* log) {
  config.validate();
  BaselineReport report;
  const auto phase1 = config.phase1_steps < 0 ? config.max_steps : config.phase1_steps;
  const auto phase2 = config.phase2_steps < 0 ? config.max_steps : config.phase2_steps;
  auto linked = [&] {
    auto ex = linked_examples(data.linked_pairs);
    if (ex.empty()) throw TrainingError("B1 needs linked article/summary pairs");
    return ex;
  };
  auto entailed = [&] {
    auto ex = entailed_examples(data.train);
    if (ex.empty()) throw TrainingError("no annotated clusters with entailed articles");
    return ex;
  };
  switch (kind) {
    case BaselineKind::b1:
      model.set_input_mode(InputMode::concat);
      run_supervised(model, linked(), config.max_steps, "linked", data, config, log, report);
      break;
    case BaselineKind::b2:
      model.set_input_mode(InputMode::concat);
      run_supervised(model, entailed(), config.max_steps, "entailed", data, config, log, report);
      break;
    case BaselineKind::b3: {
      model.set_input_mode(InputMode::concat);
      const auto second = entailed();
      run_supervised(model, linked(), phase1, "linked", data, config, log, report);
      run_supervised(model, second, phase2, "entailed", data, config, log, report);
      break;
    }
    case BaselineKind::b4:
      model.set_input_mode(InputMode::merge);
      run_supervised(model, entailed(), config.max_steps, "entailed", data, config, log, report);
      break;
  }
  return report;
}

AsmReport train_asm(Summarizer& model, const TrainData& data, const EntailmentJudge& judge,
                    const TrainConfig& config, TrainingLog* log) {
  config.validate();
  const auto supervised = masked_examples(data.train);
  if (supervised.empty()) throw TrainingError("ASM requires supervised signal");
  const std::span<const ClusterExample> clusters = data.train;
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  nn::Optimizer opt(model.parameters(), config.optimizer);
  Discriminator disc(model.config().embed_dim, model.config().max_output_len, {2, 3, 4, 5},
                     config.disc_filters, config.seed);
  nn::Optimizer disc_opt(disc.parameters(), config.optimizer);
  BatchCursor ce_cursor(supervised.size(), derive_seed(config.seed, "masked"));
  BatchCursor pg_cursor(clusters.size(), derive_seed(config.seed, "clusters"));
  BatchCursor real_cursor(clusters.size(), derive_seed(config.seed, "real"));
  std::mt19937_64 rng(derive_seed(config.seed, "asm-sample"));
  RewardBaseline baseline;

  std::vector<ClusterExample> probe;
  const auto stride = std::max<std::size_t>(1, clusters.size() / std::max<std::size_t>(config.probe_size, 1));
  for (std::size_t i = 0; i < clusters.size() && probe.size() < config.probe_size; i += stride)
    probe.push_back(clusters[i]);
  const auto probe_seed = derive_seed(config.seed, "probe");

  AsmReport report;
  report.initial_mean_reward = probe_reward(model, probe, judge, probe_seed, config.probe_samples);
  double best = -std::numeric_limits<double>::infinity();
  int stale = 0;
  std::int64_t& step = report.steps;
  while (step < config.max_steps) {
    for (int i = 0; i < config.ce_steps && step < config.max_steps; ++i) {
      const auto batch = gather<TrainingExample>(supervised, ce_cursor.next(batch_size));
      const double loss = step_ce(model, opt, batch);
      ++step;
      if (log) log->write({step, "ce", loss, std::nullopt});
    }
    double reward_sum = 0.0;
    int reward_count = 0;
    for (int i = 0; i < config.unsup_steps && step < config.max_steps; ++i) {
      const auto batch = gather(clusters, pg_cursor.next(batch_size));
      const auto r = step_entailment_pg(model, opt, batch, judge,
                                        config.reward_baseline ? &baseline : nullptr, rng,
                                        config.pg_samples, config.lambda,
                                        config.lambda > 0 ? &disc : nullptr,
                                        config.sample_baseline);
      reward_sum += r.mean_reward;
      ++reward_count;
      const double loss = r.surrogate + config.lambda * r.generator_loss;
      ++step;
      if (log) log->write({step, "unsup", loss, r.mean_reward});
    }
    for (int i = 0; i < config.disc_steps && step < config.max_steps; ++i) {
      std::vector<Matrix> real, fake;
      {
        nn::NoGradGuard guard;
        for (auto idx : real_cursor.next(batch_size)) {
          const auto& c = clusters[idx];
          const auto enc = model.encode_cluster(c);
          real.push_back(model.forward_teacher_forced(enc, model.encode_target(c.summary)).hidden.value());
          fake.push_back(sample_summary(model, enc, rng).hidden);
        }
      }
      const double loss = step_discriminator(disc, disc_opt, real, fake);
      ++step;
      if (log) log->write({step, "disc", loss, std::nullopt});
    }
    if (reward_count > 0) {
      const double mean = reward_sum / reward_count;
      report.cycle_rewards.push_back(mean);
      if (config.patience > 0) {
        if (mean > best + config.epsilon) {
          best = mean;
          stale = 0;
        } else if (++stale >= config.patience) {
          report.converged = true;
          break;
        }
      }
    }
  }
  report.final_mean_reward = probe_reward(model, probe, judge, probe_seed, config.probe_samples);
  return report;
}

}  // namespace agreesum
