#include "agreesum/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>

#include "agreesum/config_file.hpp"
#include "agreesum/dataset_builder.hpp"
#include "agreesum/decoding.hpp"
#include "agreesum/entailment.hpp"
#include "agreesum/error.hpp"
#include "agreesum/evaluation.hpp"
#include "agreesum/hash.hpp"
#include "agreesum/io.hpp"
#include "agreesum/remote.hpp"
#include "agreesum/summarizer.hpp"
#include "agreesum/synth.hpp"
#include "agreesum/training.hpp"

namespace agreesum::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string manifest_path;
};

struct ScorerFlags {
  std::string entailment_ckpt;
  std::string endpoint;
  bool oracle = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "Key-value config file");
  app->add_option("--set", c.overrides, "Config override key=value (repeatable; wins over --config)");
  app->add_option("--seed", c.seed, "Random seed (wins over config)");
  app->add_option("--workers", c.workers, "Worker threads for per-cluster work")->check(CLI::PositiveNumber);
  app->add_option("--manifest", c.manifest_path, "Run manifest path");
}

void add_scorer(CLI::App* app, ScorerFlags& s) {
  app->add_option("--entailment-ckpt", s.entailment_ckpt, "Entailment classifier checkpoint");
  app->add_option("--scorer-endpoint", s.endpoint,
                  "Remote scorer base URL (default: $AGREESUM_SCORER_ENDPOINT)");
  app->add_flag("--oracle", s.oracle, "Use the word-containment oracle as scorer");
}

KeyValueConfig load_config(const Common& c) {
  KeyValueConfig kv = c.config_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(c.config_path);
  for (const auto& o : c.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ValidationError("--set expects key=value, got '" + o + "'");
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    kv.set(trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
  }
  if (c.seed) kv.set("seed", std::to_string(*c.seed));
  return kv;
}

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

struct Scorer {
  std::unique_ptr<EntailmentJudge> judge;
  ordered_json description;
};

Scorer make_scorer(const ScorerFlags& s, bool required) {
  Scorer out;
  if (s.oracle) {
    out.judge = std::make_unique<ContainmentOracle>();
    out.description = {{"kind", "containment-oracle"}};
    return out;
  }
  if (!s.entailment_ckpt.empty()) {
    out.judge = std::make_unique<EntailmentClassifier>(EntailmentClassifier::load(s.entailment_ckpt));
    out.description = {{"kind", "classifier"}, {"checkpoint", s.entailment_ckpt}};
    return out;
  }
  auto endpoint = s.endpoint.empty() ? env("AGREESUM_SCORER_ENDPOINT") : std::optional(s.endpoint);
  if (endpoint) {
    RemoteConfig rc;
    rc.endpoint = *endpoint;
    if (auto dir = env("AGREESUM_CACHE_DIR")) rc.cache_dir = fs::path(*dir);
    out.judge = std::make_unique<RemoteJudge>(rc);
    out.description = {{"kind", "remote"}, {"endpoint", *endpoint}};
    return out;
  }
  if (required)
    throw ValidationError("an entailment scorer is required: pass --entailment-ckpt, "
                          "--scorer-endpoint, --oracle or set AGREESUM_SCORER_ENDPOINT",
                          "NO_SCORER");
  return out;
}

ordered_json config_json(const KeyValueConfig& kv) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : kv.values()) j[k] = v;
  return j;
}

// Collects what the run read and wrote; written once the run succeeds.
class Manifest {
 public:
  Manifest(std::string subcommand, fs::path path)
      : subcommand_(std::move(subcommand)), path_(std::move(path)),
        start_(std::chrono::steady_clock::now()) {}
  void config(ordered_json j) { config_ = std::move(j); }
  void seed(std::uint64_t s) { seed_ = s; }
  void input(const std::string& name, const fs::path& p) { inputs_.emplace_back(name, p); }
  void output(const std::string& name, const fs::path& p) { outputs_.emplace_back(name, p); }
  void extra(const std::string& key, ordered_json v) { extra_[key] = std::move(v); }

  void write() const {
    ordered_json j;
    j["subcommand"] = subcommand_;
    j["config"] = config_;
    j["seed"] = seed_;
    auto files = [](const auto& list) {
      ordered_json o = ordered_json::object();
      for (const auto& [name, p] : list) {
        ordered_json entry{{"path", p.string()}};
        if (fs::is_regular_file(p)) entry["fnv1a64"] = hex64(io::file_hash(p));
        o[name] = entry;
      }
      return o;
    };
    j["inputs"] = files(inputs_);
    j["outputs"] = files(outputs_);
    for (const auto& [k, v] : extra_.items()) j[k] = v;
    j["duration_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    io::write_file_atomic(path_, j.dump(2) + "\n");
  }
  const fs::path& path() const { return path_; }

 private:
  std::string subcommand_;
  fs::path path_;
  std::chrono::steady_clock::time_point start_;
  ordered_json config_ = ordered_json::object();
  std::uint64_t seed_ = 0;
  std::vector<std::pair<std::string, fs::path>> inputs_, outputs_;
  ordered_json extra_ = ordered_json::object();
};

fs::path manifest_for(const Common& c, const fs::path& out, bool out_is_dir) {
  if (!c.manifest_path.empty()) return c.manifest_path;
  if (out_is_dir) return out / "run_manifest.json";
  auto p = out;
  p += ".manifest.json";
  return p;
}

SummarizerConfig summarizer_config(const KeyValueConfig& kv) {
  SummarizerConfig s;
  s.embed_dim = static_cast<int>(kv.get_int("embed_dim", s.embed_dim));
  s.encoder_layers = static_cast<int>(kv.get_int("encoder_layers", s.encoder_layers));
  s.decoder_layers = static_cast<int>(kv.get_int("decoder_layers", s.decoder_layers));
  s.max_input_len = static_cast<int>(kv.get_int("max_input_len", s.max_input_len));
  s.max_output_len = static_cast<int>(kv.get_int("max_output_len", s.max_output_len));
  s.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  s.validate();
  return s;
}

// ---- subcommands --------------------------------------------------------

struct BuildDatasetArgs {
  Common common;
  std::string raw, annotations, out;
};

int build_dataset_cmd(const BuildDatasetArgs& a, std::ostream& out) {
  const auto kv = load_config(a.common);
  const auto config = BuilderConfig::from(kv);
  const fs::path dir = a.out;
  Manifest m("build-dataset", manifest_for(a.common, dir, true));
  m.config(config_json(config.echo()));
  m.seed(config.seed);
  const auto raw = load_raw_clusters(a.raw);
  m.input("raw", a.raw);
  AnnotationMap annotations;
  if (!a.annotations.empty()) {
    annotations = aggregate_annotations(load_annotations(a.annotations), raw);
    m.input("annotations", a.annotations);
  }
  const auto ds = build_dataset(raw, annotations, config);
  fs::create_directories(dir);
  save_clusters(ds.train, dir / "train.jsonl");
  save_clusters(ds.dev, dir / "dev.jsonl");
  save_clusters(ds.test, dir / "test.jsonl");
  save_linked_pairs(ds.linked_pairs, dir / "linked_pairs.jsonl");
  io::write_file_atomic(dir / "dataset_manifest.json", ds.manifest.to_json().dump(2) + "\n");
  for (const char* split : {"train", "dev", "test"})
    m.output(split, dir / (std::string(split) + ".jsonl"));
  m.output("linked_pairs", dir / "linked_pairs.jsonl");
  m.output("dataset_manifest", dir / "dataset_manifest.json");
  m.write();
  out << ds.manifest.table();
  return kOk;
}

struct TrainEntailmentArgs {
  Common common;
  std::string records, heldout, out, log;
};

int train_entailment_cmd(const TrainEntailmentArgs& a, std::ostream& out) {
  auto kv = load_config(a.common);
  kv.restrict_to({"seed", "embed_dim", "filters", "windows", "max_premise_len",
                  "max_hypothesis_len", "epochs", "batch_size", "learning_rate", "optimizer"});
  ClassifierConfig mc;
  mc.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  mc.embed_dim = static_cast<int>(kv.get_int("embed_dim", mc.embed_dim));
  mc.filters = static_cast<int>(kv.get_int("filters", mc.filters));
  mc.max_premise_len = static_cast<int>(kv.get_int("max_premise_len", mc.max_premise_len));
  mc.max_hypothesis_len = static_cast<int>(kv.get_int("max_hypothesis_len", mc.max_hypothesis_len));
  if (auto w = kv.get("windows")) {
    mc.windows.clear();
    std::stringstream ss(*w);
    for (std::string part; std::getline(ss, part, ',');) mc.windows.push_back(std::stoi(part));
  }
  ClassifierTrainConfig tc;
  tc.seed = mc.seed;
  tc.epochs = static_cast<int>(kv.get_int("epochs", tc.epochs));
  tc.batch_size = static_cast<int>(kv.get_int("batch_size", tc.batch_size));
  tc.optimizer.learning_rate = kv.get_double("learning_rate", tc.optimizer.learning_rate);
  if (auto o = kv.get("optimizer")) tc.optimizer.kind = nn::parse_optimizer_kind(*o);

  Manifest m("train-entailment", manifest_for(a.common, a.out, false));
  m.config(config_json(kv));
  m.seed(mc.seed);
  const auto records = load_entailment_records(a.records);
  m.input("records", a.records);
  ClassifierTrainResult result;
  const auto model = train_classifier(records, mc, tc, &result);
  model.save(a.out);
  auto meta = fs::path(a.out);
  meta += ".meta.json";
  m.output("checkpoint", a.out);
  m.output("checkpoint_meta", meta);
  if (!a.log.empty()) {
    std::string lines;
    for (std::size_t i = 0; i < result.batch_losses.size(); ++i)
      lines += ordered_json{{"step", i + 1}, {"loss", result.batch_losses[i]}}.dump() + "\n";
    io::write_file_atomic(a.log, lines);
    m.output("log", a.log);
  }
  if (!a.heldout.empty()) {
    const auto heldout = load_entailment_records(a.heldout);
    m.input("heldout", a.heldout);
    const double acc = classifier_accuracy(model, heldout);
    m.extra("heldout_accuracy", acc);
    out << "heldout accuracy " << acc << "\n";
  }
  m.write();
  return kOk;
}

std::atomic<ScoringServer*> g_server{nullptr};

extern "C" void stop_server(int) {
  if (auto* s = g_server.load()) s->stop();
}

struct ServeArgs {
  Common common;
  ScorerFlags scorer;
  std::string host = "127.0.0.1";
  int port = 8080;
};

int serve_cmd(const ServeArgs& a, std::ostream& out) {
  if (!a.scorer.endpoint.empty())
    throw ValidationError("serve-entailment needs a local scorer, not --scorer-endpoint");
  ScorerFlags local = a.scorer;
  auto scorer = make_scorer(local, true);
  Manifest m("serve-entailment", a.common.manifest_path.empty() ? fs::path("serve_manifest.json")
                                                                 : fs::path(a.common.manifest_path));
  m.config({{"host", a.host}, {"port", a.port}, {"scorer", scorer.description}});
  if (!a.scorer.entailment_ckpt.empty()) m.input("checkpoint", a.scorer.entailment_ckpt);
  ScoringServer server(*scorer.judge);
  g_server = &server;
  std::signal(SIGINT, stop_server);
  std::signal(SIGTERM, stop_server);
  out << "serving POST /score on http://" << a.host << ":" << a.port << std::endl;
  server.serve(a.host, a.port);
  g_server = nullptr;
  m.write();
  return kOk;
}

struct DataPaths {
  std::string data_dir, train, dev, linked;
};

TrainData load_train_data(const DataPaths& p, Manifest& m) {
  auto pick = [&](const std::string& explicit_path, const char* name) -> fs::path {
    if (!explicit_path.empty()) return explicit_path;
    if (p.data_dir.empty()) return {};
    return fs::path(p.data_dir) / name;
  };
  TrainData data;
  const auto train = pick(p.train, "train.jsonl");
  if (train.empty()) throw ValidationError("training data missing: pass --data or --train");
  data.train = load_clusters(train);
  m.input("train", train);
  if (const auto dev = pick(p.dev, "dev.jsonl"); !dev.empty() && fs::exists(dev)) {
    data.dev = load_clusters(dev);
    m.input("dev", dev);
  }
  if (const auto linked = pick(p.linked, "linked_pairs.jsonl"); !linked.empty() && fs::exists(linked)) {
    data.linked_pairs = load_linked_pairs(linked);
    m.input("linked_pairs", linked);
  }
  return data;
}

struct TrainArgs {
  Common common;
  ScorerFlags scorer;
  DataPaths data;
  std::string model, out, init_ckpt, log;
};

int train_cmd(const TrainArgs& a, std::ostream& out) {
  const bool asm_model = a.model == "asm";
  auto kv = load_config(a.common);
  kv.restrict_to({"learning_rate", "optimizer", "clip_norm", "lambda", "batch_size", "max_steps",
                  "ce_steps", "unsup_steps", "disc_steps", "pg_samples", "reward_baseline", "sample_baseline", "seed",
                  "scorer_endpoint", "eval_every", "phase1_steps", "phase2_steps", "patience",
                  "epsilon", "disc_filters", "probe_size", "probe_samples", "embed_dim",
                  "encoder_layers", "decoder_layers", "max_input_len", "max_output_len",
                  "vocab_size"});
  TrainConfig defaults;
  if (asm_model) defaults.optimizer.learning_rate = 5e-5;
  const auto config = TrainConfig::from(kv, defaults);
  ScorerFlags scorer_flags = a.scorer;
  if (scorer_flags.endpoint.empty() && !config.scorer_endpoint.empty())
    scorer_flags.endpoint = config.scorer_endpoint;
  // Resolve the scorer before any data is read so a missing scorer fails fast.
  Scorer scorer = make_scorer(scorer_flags, asm_model);

  Manifest m("train", manifest_for(a.common, a.out, false));
  auto echo = config_json(config.echo());
  echo["model"] = a.model;
  if (scorer.judge) echo["scorer"] = scorer.description;
  m.config(echo);
  m.seed(config.seed);
  const auto data = load_train_data(a.data, m);

  std::optional<Summarizer> model;
  if (!a.init_ckpt.empty()) {
    model.emplace(Summarizer::load(a.init_ckpt));
    m.input("init_checkpoint", a.init_ckpt);
  } else {
    const auto vocab = build_vocabulary(data, static_cast<std::size_t>(kv.get_int("vocab_size", 8000)));
    model.emplace(vocab, summarizer_config(kv));
  }
  std::optional<TrainingLog> log;
  if (!a.log.empty()) {
    if (fs::exists(a.log)) fs::remove(a.log);
    log.emplace(fs::path(a.log));
  }
  TrainingLog* log_ptr = log ? &*log : nullptr;
  if (asm_model) {
    if (a.init_ckpt.empty()) {
      // No finetuned starting point given: finetune on linked pairs first.
      TrainConfig pre = config;
      pre.max_steps = config.phase1_steps < 0 ? config.max_steps : config.phase1_steps;
      train_baseline(BaselineKind::b1, *model, data, pre, log_ptr);
    }
    const auto report = train_asm(*model, data, *scorer.judge, config, log_ptr);
    m.extra("initial_mean_reward", report.initial_mean_reward);
    m.extra("final_mean_reward", report.final_mean_reward);
    m.extra("converged", report.converged);
    out << "mean reward " << report.initial_mean_reward << " -> " << report.final_mean_reward << "\n";
  } else {
    const auto report = train_baseline(parse_baseline_kind(a.model), *model, data, config, log_ptr);
    if (report.best_step) m.extra("best_step", *report.best_step);
  }
  model->save(a.out);
  auto meta = fs::path(a.out);
  meta += ".meta.json";
  m.output("checkpoint", a.out);
  m.output("checkpoint_meta", meta);
  if (log) m.output("log", a.log);
  m.write();
  return kOk;
}

struct DecodeArgs {
  Common common;
  ScorerFlags scorer;
  std::string model_ckpt, clusters, out, model_name;
  std::optional<int> entdec_k;
  bool b5 = false;
  int beam_size = 8;
  double alpha = 0.8;
};

int decode_cmd(const DecodeArgs& a, std::ostream& out) {
  const auto kv = load_config(a.common);
  DecodeConfig dc;
  dc.beam_size = static_cast<int>(kv.get_int("beam_size", a.beam_size));
  dc.alpha = kv.get_double("alpha", a.alpha);
  dc.entdec_k = a.entdec_k;
  dc.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  dc.validate();
  if (a.b5 && !a.model_ckpt.empty())
    throw ValidationError("--b5 and --model-ckpt are mutually exclusive");
  if (!a.b5 && a.model_ckpt.empty()) throw ValidationError("decode needs --model-ckpt or --b5");
  Scorer scorer = make_scorer(a.scorer, a.b5 || dc.entdec_k.has_value());

  Manifest m("decode", manifest_for(a.common, a.out, false));
  ordered_json echo{{"beam_size", dc.beam_size}, {"alpha", dc.alpha}, {"b5", a.b5}};
  echo["entdec_k"] = dc.entdec_k ? ordered_json(*dc.entdec_k) : ordered_json(nullptr);
  if (scorer.judge) echo["scorer"] = scorer.description;
  m.config(echo);
  m.seed(dc.seed);
  const auto clusters = load_clusters(a.clusters);
  m.input("clusters", a.clusters);
  std::optional<Summarizer> model;
  if (!a.b5) {
    model.emplace(Summarizer::load(a.model_ckpt));
    m.input("checkpoint", a.model_ckpt);
  }
  std::string name = a.model_name;
  if (name.empty()) {
    name = a.b5 ? "b5" : fs::path(a.model_ckpt).stem().string();
    if (!a.b5 && dc.entdec_k) name += "-entdec" + std::to_string(*dc.entdec_k);
  }
  const auto records = decode_clusters(model ? &*model : nullptr, scorer.judge.get(), clusters, dc,
                                       a.b5, name, a.common.workers);
  io::write_file_atomic(a.out, serialize_decoded(records));
  m.output("decoded", a.out);
  m.write();
  out << "decoded " << records.size() << " clusters\n";
  return kOk;
}

struct EvaluateArgs {
  Common common;
  ScorerFlags scorer;
  std::string decoded, clusters, reference = "dev_gold", human, out;
};

int evaluate_cmd(const EvaluateArgs& a, std::ostream& out) {
  const auto mode = parse_reference_mode(a.reference);
  Scorer scorer = make_scorer(a.scorer, true);
  const fs::path report_path = a.out.empty() ? fs::path(a.decoded).replace_extension(".report.json")
                                             : fs::path(a.out);
  Manifest m("evaluate", manifest_for(a.common, report_path, false));
  m.config({{"reference", a.reference}, {"scorer", scorer.description}});
  m.seed(a.common.seed.value_or(0));
  const auto clusters = load_clusters(a.clusters);
  m.input("clusters", a.clusters);
  m.input("decoded", a.decoded);
  std::vector<HumanAnnotation> human;
  if (!a.human.empty()) {
    human = load_human_annotations(a.human);
    m.input("human", a.human);
  }
  const auto report = evaluate_run(a.decoded, clusters, *scorer.judge, mode, human);
  io::write_file_atomic(report_path, report.to_json().dump(2) + "\n");
  auto table_path = report_path;
  table_path.replace_extension(".txt");
  io::write_file_atomic(table_path, report.table());
  m.output("report", report_path);
  m.output("table", table_path);
  m.write();
  out << report.table();
  return kOk;
}

struct SynthArgs {
  Common common;
  std::string task = "intersection", out;
  std::optional<std::size_t> count;
};

int synth_cmd(const SynthArgs& a, std::ostream& out) {
  const auto kv = load_config(a.common);
  const auto seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  const fs::path dir = a.out;
  fs::create_directories(dir);
  Manifest m("synth-data", manifest_for(a.common, dir, true));
  m.seed(seed);
  if (a.task == "intersection") {
    IntersectionConfig c;
    c.seed = seed;
    c.annotated = static_cast<std::size_t>(kv.get_int("annotated", static_cast<long long>(c.annotated)));
    c.unannotated = static_cast<std::size_t>(kv.get_int("unannotated", static_cast<long long>(c.unannotated)));
    c.dev = static_cast<std::size_t>(kv.get_int("dev", static_cast<long long>(c.dev)));
    c.test = a.count.value_or(static_cast<std::size_t>(kv.get_int("test", static_cast<long long>(c.test))));
    m.config({{"task", a.task}, {"annotated", c.annotated}, {"unannotated", c.unannotated},
              {"dev", c.dev}, {"test", c.test}});
    const auto task = intersection_task(c);
    save_clusters(task.train, dir / "train.jsonl");
    save_clusters(task.dev, dir / "dev.jsonl");
    save_clusters(task.test, dir / "test.jsonl");
    save_linked_pairs(task.linked_pairs, dir / "linked_pairs.jsonl");
    for (const char* f : {"train", "dev", "test", "linked_pairs"})
      m.output(f, dir / (std::string(f) + ".jsonl"));
  } else if (a.task == "containment") {
    ContainmentConfig c;
    c.seed = seed;
    c.count = a.count.value_or(c.count);
    m.config({{"task", a.task}, {"count", c.count}});
    save_entailment_records(containment_records(c), dir / "entailment_train.jsonl");
    c.count = 500;
    c.seed = derive_seed(seed, "heldout");
    save_entailment_records(containment_records(c), dir / "entailment_heldout.jsonl");
    m.output("train", dir / "entailment_train.jsonl");
    m.output("heldout", dir / "entailment_heldout.jsonl");
  } else if (a.task == "raw") {
    RawCorpusConfig c;
    c.seed = seed;
    c.count = a.count.value_or(c.count);
    m.config({{"task", a.task}, {"count", c.count}});
    const auto corpus = synthetic_raw_corpus(c);
    save_raw_clusters(corpus.clusters, dir / "raw_clusters.jsonl");
    std::string lines;
    for (const auto& v : corpus.votes)
      lines += ordered_json{{"cluster_id", v.cluster_id}, {"article_id", v.article_id}, {"votes", v.votes}}.dump() + "\n";
    io::write_file_atomic(dir / "annotations.jsonl", lines);
    m.output("raw", dir / "raw_clusters.jsonl");
    m.output("annotations", dir / "annotations.jsonl");
  } else {
    throw ValidationError("unknown synthetic task '" + a.task + "'");
  }
  m.write();
  out << "wrote " << a.task << " data to " << dir.string() << "\n";
  return kOk;
}

int exit_code_for(const Error& e) {
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const ScorerUnavailable*>(&e) ||
      dynamic_cast<const ProtocolError*>(&e))
    return kIo;
  return kValidation;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Agreement-oriented multi-document summarization toolkit", "agreesum"};
  app.require_subcommand(1);

  BuildDatasetArgs build;
  auto* build_cmd = app.add_subcommand("build-dataset", "Build train/dev/test splits from raw clusters");
  add_common(build_cmd, build.common);
  build_cmd->add_option("--raw", build.raw, "Raw cluster JSONL")->required();
  build_cmd->add_option("--annotations", build.annotations, "Annotation vote JSONL");
  build_cmd->add_option("--out", build.out, "Output directory")->required();

  TrainEntailmentArgs te;
  auto* te_cmd = app.add_subcommand("train-entailment", "Train the entailment classifier");
  add_common(te_cmd, te.common);
  te_cmd->add_option("--records", te.records, "Entailment record JSONL")->required();
  te_cmd->add_option("--heldout", te.heldout, "Held-out record JSONL for an accuracy report");
  te_cmd->add_option("--out", te.out, "Checkpoint path")->required();
  te_cmd->add_option("--log", te.log, "Per-batch loss JSONL");

  ServeArgs serve;
  auto* serve_cmd_app = app.add_subcommand("serve-entailment", "Serve POST /score for a local scorer");
  add_common(serve_cmd_app, serve.common);
  add_scorer(serve_cmd_app, serve.scorer);
  serve_cmd_app->add_option("--host", serve.host, "Bind address");
  serve_cmd_app->add_option("--port", serve.port, "Port");

  TrainArgs train;
  auto* train_cmd_app = app.add_subcommand("train", "Train a summarizer (b1|b2|b3|b4|asm)");
  add_common(train_cmd_app, train.common);
  add_scorer(train_cmd_app, train.scorer);
  train_cmd_app->add_option("--model", train.model, "b1, b2, b3, b4 or asm")
      ->required()
      ->check(CLI::IsMember({"b1", "b2", "b3", "b4", "asm"}));
  train_cmd_app->add_option("--data", train.data.data_dir, "Directory with train/dev/linked_pairs JSONL");
  train_cmd_app->add_option("--train", train.data.train, "Train cluster JSONL");
  train_cmd_app->add_option("--dev", train.data.dev, "Dev cluster JSONL");
  train_cmd_app->add_option("--linked", train.data.linked, "Linked pair JSONL");
  train_cmd_app->add_option("--init-ckpt", train.init_ckpt, "Start from this summarizer checkpoint");
  train_cmd_app->add_option("--log", train.log, "Training log JSONL");
  train_cmd_app->add_option("--out", train.out, "Checkpoint path")->required();

  DecodeArgs decode;
  auto* decode_cmd_app = app.add_subcommand("decode", "Decode clusters");
  add_common(decode_cmd_app, decode.common);
  add_scorer(decode_cmd_app, decode.scorer);
  decode_cmd_app->add_option("--model-ckpt", decode.model_ckpt, "Summarizer checkpoint");
  decode_cmd_app->add_option("--clusters", decode.clusters, "Cluster JSONL")->required();
  decode_cmd_app->add_option("--out", decode.out, "Decoded JSONL")->required();
  decode_cmd_app->add_option("--entdec-k", decode.entdec_k, "Rerank a size-k beam by entailment")
      ->check(CLI::PositiveNumber);
  decode_cmd_app->add_flag("--b5", decode.b5, "Extractive lead-sentence baseline");
  decode_cmd_app->add_option("--beam-size", decode.beam_size, "Beam size")->check(CLI::PositiveNumber);
  decode_cmd_app->add_option("--alpha", decode.alpha, "Length normalization exponent");
  decode_cmd_app->add_option("--model-name", decode.model_name, "Model name written to records");

  EvaluateArgs evaluate;
  auto* eval_cmd_app = app.add_subcommand("evaluate", "Compute metrics for decoded summaries");
  add_common(eval_cmd_app, evaluate.common);
  add_scorer(eval_cmd_app, evaluate.scorer);
  eval_cmd_app->add_option("--decoded", evaluate.decoded, "Decoded JSONL")->required();
  eval_cmd_app->add_option("--clusters", evaluate.clusters, "Cluster JSONL")->required();
  eval_cmd_app->add_option("--reference", evaluate.reference, "dev_gold or test_approx")
      ->check(CLI::IsMember({"dev_gold", "test_approx"}));
  eval_cmd_app->add_option("--human", evaluate.human, "Human annotation JSONL");
  eval_cmd_app->add_option("--out", evaluate.out, "Report JSON path");

  SynthArgs synth;
  auto* synth_cmd_app = app.add_subcommand("synth-data", "Generate synthetic data");
  add_common(synth_cmd_app, synth.common);
  synth_cmd_app->add_option("--task", synth.task, "intersection, containment or raw")
      ->check(CLI::IsMember({"intersection", "containment", "raw"}));
  synth_cmd_app->add_option("--count", synth.count, "Number of records/clusters");
  synth_cmd_app->add_option("--out", synth.out, "Output directory")->required();

  std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    out << sub->help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "ERROR:USAGE: " << e.what() << "\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kUsage;
  }

  try {
    if (build_cmd->parsed()) return build_dataset_cmd(build, out);
    if (te_cmd->parsed()) return train_entailment_cmd(te, out);
    if (serve_cmd_app->parsed()) return serve_cmd(serve, out);
    if (train_cmd_app->parsed()) return train_cmd(train, out);
    if (decode_cmd_app->parsed()) return decode_cmd(decode, out);
    if (eval_cmd_app->parsed()) return evaluate_cmd(evaluate, out);
    if (synth_cmd_app->parsed()) return synth_cmd(synth, out);
  } catch (const Error& e) {
    err << "ERROR:" << e.code() << ": " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    err << "ERROR:IO: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    err << "ERROR:INTERNAL: " << e.what() << "\n";
    return kValidation;
  }
  err << "ERROR:USAGE: no subcommand\n" << app.help();
  return kUsage;
}

}  // namespace agreesum::cli
