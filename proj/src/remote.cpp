#include "agreesum/remote.hpp"

#include <httplib.h>

#include <atomic>
#include <fstream>
#include <future>
#include <json.hpp>

#include "agreesum/error.hpp"
#include "agreesum/hash.hpp"
#include "agreesum/io.hpp"

namespace agreesum {

using nlohmann::json;

namespace {

std::string base_url(std::string endpoint) {
  constexpr std::string_view suffix = "/score";
  if (endpoint.size() >= suffix.size() &&
      endpoint.compare(endpoint.size() - suffix.size(), suffix.size(), suffix) == 0)
    endpoint.resize(endpoint.size() - suffix.size());
  while (!endpoint.empty() && endpoint.back() == '/') endpoint.pop_back();
  return endpoint;
}

std::vector<Label> score_chunk(const RemoteConfig& config, std::span<const TextPair> pairs) {
  json body;
  body["pairs"] = json::array();
  for (const auto& p : pairs)
    body["pairs"].push_back({{"premise", p.premise}, {"hypothesis", p.hypothesis}});
  const std::string payload = body.dump();

  httplib::Client client(base_url(config.endpoint));
  client.set_connection_timeout(config.timeout);
  client.set_read_timeout(config.timeout);
  client.set_write_timeout(config.timeout);

  auto delay = config.backoff;
  std::string failure = "no attempt made";
  for (int attempt = 1; attempt <= std::max(config.attempts, 1); ++attempt) {
    auto res = client.Post("/score", payload, "application/json");
    if (res && res->status >= 200 && res->status < 300) {
      json reply;
      try {
        reply = json::parse(res->body);
      } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed /score response: ") + e.what());
      }
      if (!reply.is_object() || !reply.contains("labels") || !reply["labels"].is_array())
        throw ProtocolError("/score response lacks a labels array");
      const auto& labels = reply["labels"];
      if (labels.size() != pairs.size())
        throw ProtocolError("/score returned " + std::to_string(labels.size()) + " labels for " +
                            std::to_string(pairs.size()) + " pairs");
      std::vector<Label> out;
      out.reserve(labels.size());
      for (const auto& l : labels) {
        if (!l.is_number_integer() || (l.get<int>() != 0 && l.get<int>() != 1))
          throw ProtocolError("/score labels must be 0 or 1");
        out.push_back(l.get<int>() == 1 ? Label::entailed : Label::not_entailed);
      }
      return out;
    }
    failure = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
    if (attempt < config.attempts) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  throw ScorerUnavailable("scorer at " + config.endpoint + " failed after " +
                          std::to_string(config.attempts) + " attempts: " + failure);
}

std::string cache_key(const TextPair& p) {
  return hex64(fnv1a(p.hypothesis, fnv1a(std::string_view("\x1f"), fnv1a(p.premise))));
}

}  // namespace

std::vector<Label> batch_score_remote(const RemoteConfig& config, std::span<const TextPair> pairs) {
  if (pairs.empty()) return {};
  if (config.max_batch == 0) throw ArgumentError("max_batch must be >= 1");
  std::vector<std::span<const TextPair>> chunks;
  for (std::size_t i = 0; i < pairs.size(); i += config.max_batch)
    chunks.push_back(pairs.subspan(i, std::min(config.max_batch, pairs.size() - i)));

  std::vector<std::vector<Label>> results(chunks.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  const auto workers = std::min(std::max<std::size_t>(config.max_in_flight, 1), chunks.size());
  auto work = [&] {
    for (std::size_t c = next++; c < chunks.size(); c = next++) {
      try {
        results[c] = score_chunk(config, chunks[c]);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = chunks.size();
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);

  std::vector<Label> out;
  out.reserve(pairs.size());
  for (auto& r : results) out.insert(out.end(), r.begin(), r.end());
  return out;
}

RemoteJudge::RemoteJudge(RemoteConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) throw ValidationError("remote scorer endpoint is empty", "NO_SCORER");
  if (!config_.cache_dir) return;
  const auto file = *config_.cache_dir / "labels.tsv";
  if (!std::filesystem::exists(file)) return;
  io::for_each_line(file, [&](std::size_t, std::string_view line) {
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) return;
    cache_[std::string(line.substr(0, tab))] =
        line.substr(tab + 1) == "1" ? Label::entailed : Label::not_entailed;
  });
}

std::vector<Label> RemoteJudge::judge(std::span<const TextPair> pairs) const {
  if (!config_.cache_dir) return batch_score_remote(config_, pairs);
  std::vector<std::optional<Label>> known(pairs.size());
  std::vector<TextPair> missing;
  std::vector<std::size_t> missing_index;
  {
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      auto it = cache_.find(cache_key(pairs[i]));
      if (it != cache_.end()) {
        known[i] = it->second;
      } else {
        missing.push_back(pairs[i]);
        missing_index.push_back(i);
      }
    }
  }
  const auto fresh = batch_score_remote(config_, missing);
  {
    std::lock_guard lock(mutex_);
    const auto file = *config_.cache_dir / "labels.tsv";
    for (std::size_t k = 0; k < fresh.size(); ++k) {
      const auto key = cache_key(missing[k]);
      if (cache_.emplace(key, fresh[k]).second)
        io::append_line(file, key + (fresh[k] == Label::entailed ? "\t1" : "\t0"));
      known[missing_index[k]] = fresh[k];
    }
  }
  std::vector<Label> out;
  out.reserve(pairs.size());
  for (const auto& l : known) out.push_back(*l);
  return out;
}

struct ScoringServer::Impl {
  const EntailmentJudge* judge;
  httplib::Server server;
  std::thread thread;
  std::string host;
  int port = 0;
};

ScoringServer::ScoringServer(const EntailmentJudge& judge) : impl_(std::make_unique<Impl>()) {
  impl_->judge = &judge;
  impl_->server.Post("/score", [this](const httplib::Request& req, httplib::Response& res) {
    std::vector<TextPair> pairs;
    try {
      const json body = json::parse(req.body);
      for (const auto& p : body.at("pairs"))
        pairs.push_back({p.at("premise").get<std::string>(), p.at("hypothesis").get<std::string>()});
    } catch (const json::exception& e) {
      res.status = 400;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
      return;
    }
    try {
      json labels = json::array();
      for (auto l : impl_->judge->judge(pairs)) labels.push_back(l == Label::entailed ? 1 : 0);
      res.set_content(json{{"labels", labels}}.dump(), "application/json");
    } catch (const ArgumentError& e) {
      res.status = 400;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    }
  });
}

ScoringServer::~ScoringServer() { stop(); }

int ScoringServer::start(const std::string& host, int port) {
  impl_->host = host;
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(host);
  } else {
    if (!impl_->server.bind_to_port(host, port))
      throw IoError("cannot bind " + host + ":" + std::to_string(port));
    impl_->port = port;
  }
  if (impl_->port < 0) throw IoError("cannot bind " + host);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void ScoringServer::serve(const std::string& host, int port) {
  impl_->host = host;
  impl_->port = port;
  if (!impl_->server.listen(host, port))
    throw IoError("cannot serve on " + host + ":" + std::to_string(port));
}

void ScoringServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string ScoringServer::endpoint() const {
  return "http://" + impl_->host + ":" + std::to_string(impl_->port);
}

}  // namespace agreesum
