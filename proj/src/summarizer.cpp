#include "agreesum/summarizer.hpp"

#include <algorithm>

#include "agreesum/error.hpp"
#include "agreesum/hash.hpp"
#include "agreesum/io.hpp"

namespace agreesum {

using nn::Matrix;
using nn::Var;
using nlohmann::json;
using nlohmann::ordered_json;

void SummarizerConfig::validate() const {
  if (embed_dim < 1) throw ValidationError("embed_dim must be >= 1");
  if (encoder_layers < 0) throw ValidationError("encoder_layers must be >= 0");
  if (decoder_layers < 1) throw ValidationError("decoder_layers must be >= 1");
  if (max_input_len < 1) throw ValidationError("max_input_len must be >= 1");
  if (max_output_len < 1) throw ValidationError("max_output_len must be >= 1");
}

std::string_view to_string(InputMode mode) { return mode == InputMode::merge ? "merge" : "concat"; }

InputMode parse_input_mode(std::string_view text) {
  if (text == "concat") return InputMode::concat;
  if (text == "merge") return InputMode::merge;
  throw ValidationError("unknown input mode '" + std::string(text) + "'");
}

Summarizer::Summarizer(Vocabulary vocab, SummarizerConfig config)
    : vocab_(std::move(vocab)), config_(config) {
  config_.validate();
  std::mt19937_64 rng(derive_seed(config_.seed, "summarizer-init"));
  build(rng);
}

Summarizer::Summarizer(const Summarizer& other) : Summarizer(other.vocab_, other.config_) {
  input_mode_ = other.input_mode_;
  step_count_ = other.step_count_;
  store_.restore(other.store_.snapshot());
}

void Summarizer::build(std::mt19937_64& rng) {
  const Eigen::Index d = config_.embed_dim;
  const auto v = static_cast<Eigen::Index>(vocab_.size());
  embedding_ = store_.add("embedding", nn::normal_matrix(v, d, 0.3, rng));
  positions_ = store_.add("encoder.positions", nn::normal_matrix(config_.max_input_len, d, 0.1, rng));
  for (int l = 0; l < config_.encoder_layers; ++l)
    encoder_convs_.emplace_back(store_, "encoder.conv" + std::to_string(l), 3 * d, d, rng);
  init_ = nn::Linear(store_, "decoder.init", d, d, rng);
  for (int l = 0; l < config_.decoder_layers; ++l) {
    const Eigen::Index in = l == 0 ? 2 * d : d;
    const auto name = "decoder.gru" + std::to_string(l);
    gru_.push_back({nn::Linear(store_, name + ".input", in, 3 * d, rng),
                    nn::Linear(store_, name + ".recurrent", d, 3 * d, rng)});
  }
  attention_ = nn::Linear(store_, "decoder.attention", d, d, rng);
  combine_ = nn::Linear(store_, "decoder.combine", 2 * d, d, rng);
  // Small output weights keep the untrained next-token distribution near uniform.
  output_ = nn::Linear(store_, "decoder.output", d, v, rng, 0.05);
  Matrix mask = Matrix::Zero(1, v);
  for (TokenId t : {Vocabulary::kPad, Vocabulary::kBos, Vocabulary::kSep}) mask(0, t) = -1e9;
  output_mask_ = nn::constant(std::move(mask));
}

Var Summarizer::output_logits(const Var& hidden) const {
  return nn::add_row(output_(hidden), output_mask_);
}

std::vector<TokenId> Summarizer::prepare_cluster_input(const ClusterExample& cluster,
                                                       const std::vector<bool>* keep_mask) const {
  const auto n = cluster.articles.size();
  if (n == 0) throw ArgumentError("cluster " + cluster.cluster_id + " has no articles");
  if (keep_mask && keep_mask->size() != n)
    throw ArgumentError("keep mask does not align with articles");
  std::vector<std::vector<TokenId>> tokens(n);
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep_mask && !(*keep_mask)[i]) continue;
    kept.push_back(i);
    tokens[i] = vocab_.encode(cluster.articles[i].body);
  }
  if (kept.empty()) throw ArgumentError("empty effective input");
  const auto max_len = static_cast<std::size_t>(config_.max_input_len);
  const std::size_t overhead = (n - 1) + (n - kept.size());
  if (overhead >= max_len) throw ArgumentError("cluster does not fit the input length budget");
  const std::size_t budget = max_len - overhead;
  const std::size_t share = budget / kept.size();
  std::vector<std::size_t> alloc(n, 0);
  std::size_t used = 0;
  for (auto i : kept) {
    alloc[i] = std::min(tokens[i].size(), share);
    used += alloc[i];
  }
  std::size_t leftover = budget - used;
  for (auto i : kept) {
    const auto add = std::min(tokens[i].size() - alloc[i], leftover);
    alloc[i] += add;
    leftover -= add;
  }
  std::vector<TokenId> out;
  out.reserve(max_len);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) out.push_back(Vocabulary::kSep);
    if (keep_mask && !(*keep_mask)[i]) {
      out.push_back(Vocabulary::kPad);
    } else {
      out.insert(out.end(), tokens[i].begin(), tokens[i].begin() + static_cast<long>(alloc[i]));
    }
  }
  return out;
}

std::vector<TokenId> Summarizer::prepare_article_input(const Article& article) const {
  auto ids = vocab_.encode(article.body);
  if (ids.size() > static_cast<std::size_t>(config_.max_input_len))
    ids.resize(static_cast<std::size_t>(config_.max_input_len));
  return ids;
}

std::vector<TokenId> Summarizer::encode_target(std::string_view summary) const {
  auto ids = vocab_.encode(summary);
  const auto cap = static_cast<std::size_t>(config_.max_output_len);
  if (ids.size() >= cap) ids.resize(cap - 1);
  ids.push_back(Vocabulary::kEos);
  return ids;
}

namespace {

Encoding finish_encoding(Var states, std::vector<bool> masked) {
  Encoding enc;
  const auto len = states.rows();
  std::size_t live = 0;
  for (bool m : masked) live += m ? 0 : 1;
  Matrix weights(1, len);
  for (Eigen::Index i = 0; i < len; ++i) {
    const bool m = masked[static_cast<std::size_t>(i)];
    weights(0, i) = live == 0 ? 1.0 / static_cast<double>(len) : (m ? 0.0 : 1.0 / static_cast<double>(live));
  }
  enc.pooled = nn::matmul(nn::constant(std::move(weights)), states);
  enc.states_t = nn::transpose(states);
  enc.states = std::move(states);
  enc.masked = std::move(masked);
  return enc;
}

}  // namespace

Encoding Summarizer::encode(std::span<const TokenId> input) const {
  if (input.empty()) throw ArgumentError("empty encoder input");
  if (input.size() > static_cast<std::size_t>(config_.max_input_len))
    throw ArgumentError("encoder input exceeds max_input_len");
  std::vector<TokenId> slots(input.size());
  for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = static_cast<TokenId>(i);
  Var x = nn::gather_rows(embedding_, input) + nn::gather_rows(positions_, slots);
  for (const auto& conv : encoder_convs_) x = nn::add(x, nn::tanh(conv(nn::unfold(x, 3, 1, 1))));
  std::vector<bool> masked(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) masked[i] = input[i] == Vocabulary::kPad;
  return finish_encoding(std::move(x), std::move(masked));
}

Encoding Summarizer::merge_encodings(std::span<const std::vector<TokenId>> articles) const {
  if (articles.empty()) throw ArgumentError("merge_encodings needs at least one article");
  std::size_t len = 0;
  for (const auto& a : articles) {
    if (a.empty()) throw ArgumentError("merge_encodings got an empty article");
    len = std::max(len, a.size());
  }
  Var total;
  std::vector<bool> masked(len, true);
  for (const auto& a : articles) {
    std::vector<TokenId> padded(a);
    padded.resize(len, Vocabulary::kPad);
    for (std::size_t i = 0; i < len; ++i) masked[i] = masked[i] && padded[i] == Vocabulary::kPad;
    Encoding e = encode(padded);
    total = total ? nn::add(total, e.states) : e.states;
  }
  return finish_encoding(nn::scale(total, 1.0 / static_cast<double>(articles.size())),
                         std::move(masked));
}

Encoding Summarizer::encode_cluster(const ClusterExample& cluster,
                                    const std::vector<bool>* keep_mask) const {
  if (input_mode_ == InputMode::merge) {
    std::vector<std::vector<TokenId>> articles;
    for (std::size_t i = 0; i < cluster.articles.size(); ++i) {
      if (keep_mask && !(*keep_mask)[i]) continue;
      articles.push_back(prepare_article_input(cluster.articles[i]));
    }
    if (articles.empty()) throw ArgumentError("empty effective input");
    return merge_encodings(articles);
  }
  return encode(prepare_cluster_input(cluster, keep_mask));
}

DecoderState Summarizer::step(const Encoding& enc, const std::vector<Var>& layers,
                              const Var& previous_attentional, TokenId input) const {
  const Eigen::Index d = config_.embed_dim;
  const TokenId ids[1] = {input};
  const Var parts[2] = {nn::gather_rows(embedding_, ids), previous_attentional};
  Var x = nn::concat_cols(parts);
  DecoderState out;
  out.layers.reserve(layers.size());
  for (std::size_t l = 0; l < gru_.size(); ++l) {
    const Var& h = layers[l];
    const Var gx = gru_[l].input(x);
    const Var gh = gru_[l].recurrent(h);
    const Var r = nn::sigmoid(nn::slice_cols(gx, 0, d) + nn::slice_cols(gh, 0, d));
    const Var z = nn::sigmoid(nn::slice_cols(gx, d, d) + nn::slice_cols(gh, d, d));
    const Var cand =
        nn::tanh(nn::slice_cols(gx, 2 * d, d) + nn::mul(r, nn::slice_cols(gh, 2 * d, d)));
    x = cand + nn::mul(z, h - cand);
    out.layers.push_back(x);
  }
  const Var query = attention_(x);
  const Var weights = nn::softmax_rows(nn::matmul(query, enc.states_t), &enc.masked);
  const Var context = nn::matmul(weights, enc.states);
  const Var joined[2] = {x, context};
  out.attentional = nn::tanh(combine_(nn::concat_cols(joined)));
  return out;
}

TeacherForced Summarizer::forward_teacher_forced(const Encoding& enc,
                                                 std::span<const TokenId> target) const {
  if (target.empty()) throw ArgumentError("empty target");
  if (target.size() > static_cast<std::size_t>(config_.max_output_len))
    throw ArgumentError("target length " + std::to_string(target.size()) +
                        " exceeds max_output_len " + std::to_string(config_.max_output_len));
  const Var init = nn::tanh(init_(enc.pooled));
  std::vector<Var> layers(gru_.size(), init);
  Var attentional = nn::constant(Matrix::Zero(1, config_.embed_dim));
  std::vector<Var> hidden;
  hidden.reserve(target.size());
  TokenId input = Vocabulary::kBos;
  for (TokenId t : target) {
    DecoderState s = step(enc, layers, attentional, input);
    layers = std::move(s.layers);
    attentional = s.attentional;
    hidden.push_back(attentional);
    input = t;
  }
  TeacherForced out;
  out.hidden = nn::concat_rows(hidden);
  out.logits = output_logits(out.hidden);
  return out;
}

TeacherForced Summarizer::forward_teacher_forced(std::span<const TokenId> input,
                                                 std::span<const TokenId> target) const {
  return forward_teacher_forced(encode(input), target);
}

DecoderState Summarizer::start(const Encoding& enc) const {
  nn::NoGradGuard guard;
  const Var init = nn::tanh(init_(enc.pooled));
  std::vector<Var> layers(gru_.size(), init);
  DecoderState s = step(enc, layers, nn::constant(Matrix::Zero(1, config_.embed_dim)),
                        Vocabulary::kBos);
  s.log_probs = nn::log_softmax(output_logits(s.attentional).value()).row(0);
  return s;
}

DecoderState Summarizer::advance(const Encoding& enc, const DecoderState& state,
                                 TokenId token) const {
  nn::NoGradGuard guard;
  DecoderState s = step(enc, state.layers, state.attentional, token);
  s.log_probs = nn::log_softmax(output_logits(s.attentional).value()).row(0);
  return s;
}

void Summarizer::save(const std::filesystem::path& path) const {
  io::write_file_atomic(path, store_.serialize());
  ordered_json meta;
  meta["format"] = "agreesum-summarizer";
  meta["config"] = {{"embed_dim", config_.embed_dim},
                    {"encoder_layers", config_.encoder_layers},
                    {"decoder_layers", config_.decoder_layers},
                    {"max_input_len", config_.max_input_len},
                    {"max_output_len", config_.max_output_len},
                    {"seed", config_.seed}};
  meta["input_mode"] = std::string(to_string(input_mode_));
  meta["step_count"] = step_count_;
  meta["parameter_count"] = store_.scalar_count();
  meta["vocab_hash"] = hex64(vocab_.hash());
  meta["special_tokens"] = vocab_.special_tokens_json();
  meta["vocab"] = vocab_.tokens();
  auto meta_path = path;
  meta_path += ".meta.json";
  io::write_file_atomic(meta_path, meta.dump(1) + "\n");
}

Summarizer Summarizer::load(const std::filesystem::path& path) {
  auto meta_path = path;
  meta_path += ".meta.json";
  json meta;
  try {
    meta = json::parse(io::read_file(meta_path));
  } catch (const json::exception& e) {
    throw ParseError(meta_path.string() + ": " + e.what());
  }
  if (meta.value("format", "") != "agreesum-summarizer")
    throw ValidationError(meta_path.string() + " is not a summarizer checkpoint");
  SummarizerConfig cfg;
  const auto& c = meta.at("config");
  cfg.embed_dim = c.at("embed_dim").get<int>();
  cfg.encoder_layers = c.at("encoder_layers").get<int>();
  cfg.decoder_layers = c.at("decoder_layers").get<int>();
  cfg.max_input_len = c.at("max_input_len").get<int>();
  cfg.max_output_len = c.at("max_output_len").get<int>();
  cfg.seed = c.at("seed").get<std::uint64_t>();
  auto vocab = Vocabulary::from_tokens(meta.at("vocab").get<std::vector<std::string>>());
  if (hex64(vocab.hash()) != meta.at("vocab_hash").get<std::string>())
    throw ValidationError("vocabulary hash mismatch in " + meta_path.string());
  Summarizer model(std::move(vocab), cfg);
  model.input_mode_ = parse_input_mode(meta.at("input_mode").get<std::string>());
  model.step_count_ = meta.at("step_count").get<std::int64_t>();
  model.store_.deserialize(io::read_file(path));
  return model;
}

SampledSummary sample_summary(const Summarizer& model, const Encoding& enc, std::mt19937_64& rng) {
  nn::NoGradGuard guard;
  SummarizerStepper stepper(model, enc);
  auto seq = sample_sequence(stepper, rng);
  SampledSummary out;
  out.tokens = std::move(seq.tokens);
  out.log_prob = seq.log_prob;
  out.hidden.resize(static_cast<Eigen::Index>(seq.states.size()), model.config().embed_dim);
  for (std::size_t t = 0; t < seq.states.size(); ++t)
    out.hidden.row(static_cast<Eigen::Index>(t)) = seq.states[t].attentional.value().row(0);
  return out;
}

SampledSummary sample_summary(const Summarizer& model, std::span<const TokenId> input,
                              std::mt19937_64& rng) {
  nn::NoGradGuard guard;
  return sample_summary(model, model.encode(input), rng);
}

std::vector<BeamCandidate> beam_search(const Summarizer& model, const Encoding& enc,
                                       int beam_size, double alpha) {
  nn::NoGradGuard guard;
  return beam_search(SummarizerStepper(model, enc), beam_size, alpha);
}

std::vector<BeamCandidate> beam_search(const Summarizer& model, std::span<const TokenId> input,
                                       int beam_size, double alpha) {
  nn::NoGradGuard guard;
  const Encoding enc = model.encode(input);
  return beam_search(SummarizerStepper(model, enc), beam_size, alpha);
}

}  // namespace agreesum
