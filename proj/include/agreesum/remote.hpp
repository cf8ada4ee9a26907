#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "agreesum/entailment.hpp"

namespace agreesum {

struct RemoteConfig {
  std::string endpoint;  // base URL, e.g. http://127.0.0.1:8080
  std::size_t max_batch = 32;
  std::size_t max_in_flight = 8;
  int attempts = 3;
  std::chrono::milliseconds backoff{100};  // doubled after every failed attempt
  std::chrono::seconds timeout{30};
  std::optional<std::filesystem::path> cache_dir;
};

// Labels pairs through POST /score. Pairs are split into requests of at most
// max_batch; up to max_in_flight requests run concurrently; order is preserved.
std::vector<Label> batch_score_remote(const RemoteConfig& config, std::span<const TextPair> pairs);

// Judge backed by a remote scorer, with an optional on-disk label cache.
class RemoteJudge : public EntailmentJudge {
 public:
  explicit RemoteJudge(RemoteConfig config);
  std::vector<Label> judge(std::span<const TextPair> pairs) const override;
  const RemoteConfig& config() const { return config_; }

 private:
  RemoteConfig config_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, Label> cache_;
};

// Serves POST /score for a judge on a background thread.
class ScoringServer {
 public:
  explicit ScoringServer(const EntailmentJudge& judge);
  ~ScoringServer();
  ScoringServer(const ScoringServer&) = delete;
  ScoringServer& operator=(const ScoringServer&) = delete;

  // Binds (port 0 picks a free port) and starts serving; returns the port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Blocks serving on the calling thread.
  void serve(const std::string& host, int port);
  void stop();
  std::string endpoint() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace agreesum
