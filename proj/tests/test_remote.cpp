#include <gtest/gtest.h>

#include <atomic>
#include <json.hpp>

#include "agreesum/error.hpp"
#include "agreesum/remote.hpp"
#include "agreesum/synth.hpp"
#include "stub_server.hpp"
#include "test_util.hpp"

using namespace agreesum;
using agreesum::testing::StubServer;
using agreesum::testing::TempDir;
using nlohmann::json;

namespace {

RemoteConfig fast_config(const std::string& endpoint) {
  RemoteConfig c;
  c.endpoint = endpoint;
  c.backoff = std::chrono::milliseconds(1);
  c.timeout = std::chrono::seconds(5);
  return c;
}

std::vector<TextPair> three_pairs() {
  return {{"a b c", "a"}, {"a b c", "z"}, {"a b c", "b c"}};
}

void reply(httplib::Response& res, const json& labels) {
  res.set_content(json{{"labels", labels}}.dump(), "application/json");
}

}  // namespace

TEST(BatchScoreRemote, EmptyInputMakesNoCall) {
  std::atomic<int> calls{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    reply(res, json::array());
  });
  EXPECT_TRUE(batch_score_remote(fast_config(stub.endpoint()), {}).empty());
  EXPECT_EQ(calls.load(), 0);
}

TEST(BatchScoreRemote, EchoFixture) {
  StubServer stub([](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body);
    EXPECT_EQ(body.at("pairs").size(), 3u);
    EXPECT_EQ(body["pairs"][0]["premise"], "a b c");
    reply(res, {1, 0, 1});
  });
  const auto labels = batch_score_remote(fast_config(stub.endpoint()), three_pairs());
  EXPECT_EQ(labels, (std::vector<Label>{Label::entailed, Label::not_entailed, Label::entailed}));
  // A trailing /score on the endpoint is accepted too.
  EXPECT_EQ(batch_score_remote(fast_config(stub.endpoint() + "/score"), three_pairs()), labels);
}

TEST(BatchScoreRemote, LengthMismatchIsProtocolError) {
  StubServer stub([](const httplib::Request&, httplib::Response& res) { reply(res, {1, 0}); });
  EXPECT_THROW(batch_score_remote(fast_config(stub.endpoint()), three_pairs()), ProtocolError);
}

TEST(BatchScoreRemote, BadLabelsAndMalformedBodies) {
  StubServer bad_label([](const httplib::Request&, httplib::Response& res) { reply(res, {1, 2, 0}); });
  EXPECT_THROW(batch_score_remote(fast_config(bad_label.endpoint()), three_pairs()), ProtocolError);
  StubServer garbage([](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json", "application/json");
  });
  EXPECT_THROW(batch_score_remote(fast_config(garbage.endpoint()), three_pairs()), ProtocolError);
}

TEST(BatchScoreRemote, RetriesTransientFailures) {
  std::atomic<int> calls{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    if (++calls < 3) {
      res.status = 503;
      return;
    }
    reply(res, {1, 1, 1});
  });
  EXPECT_EQ(batch_score_remote(fast_config(stub.endpoint()), three_pairs()).size(), 3u);
  EXPECT_EQ(calls.load(), 3);
}

TEST(BatchScoreRemote, GivesUpAfterThreeAttempts) {
  std::atomic<int> calls{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 500;
  });
  EXPECT_THROW(batch_score_remote(fast_config(stub.endpoint()), three_pairs()), ScorerUnavailable);
  EXPECT_EQ(calls.load(), 3);
}

TEST(BatchScoreRemote, UnreachableEndpoint) {
  auto config = fast_config("http://127.0.0.1:1");
  config.timeout = std::chrono::seconds(1);
  EXPECT_THROW(batch_score_remote(config, three_pairs()), ScorerUnavailable);
}

TEST(BatchScoreRemote, ChunksPreserveOrder) {
  std::atomic<int> calls{0};
  StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    const auto body = json::parse(req.body);
    EXPECT_LE(body["pairs"].size(), 4u);
    json labels = json::array();
    for (const auto& p : body["pairs"]) labels.push_back(std::stoi(p["hypothesis"].get<std::string>()) % 2);
    reply(res, labels);
  });
  std::vector<TextPair> pairs;
  for (int i = 0; i < 37; ++i) pairs.push_back({"p", std::to_string(i)});
  auto config = fast_config(stub.endpoint());
  config.max_batch = 4;
  config.max_in_flight = 3;
  const auto labels = batch_score_remote(config, pairs);
  ASSERT_EQ(labels.size(), 37u);
  for (int i = 0; i < 37; ++i)
    EXPECT_EQ(labels[static_cast<std::size_t>(i)], i % 2 ? Label::entailed : Label::not_entailed);
  EXPECT_EQ(calls.load(), 10);
}

TEST(ScoringServer, RoundTripMatchesLocalJudge) {
  ContainmentOracle oracle;
  ScoringServer server(oracle);
  server.start();
  const auto records = containment_records({.count = 100, .seed = 9});
  std::vector<TextPair> pairs;
  for (const auto& r : records) pairs.push_back({r.premise, r.hypothesis});
  EXPECT_EQ(batch_score_remote(fast_config(server.endpoint()), pairs), oracle.judge(pairs));
}

TEST(ScoringServer, RejectsBadRequests) {
  ContainmentOracle oracle;
  ScoringServer server(oracle);
  server.start();
  httplib::Client client(server.endpoint());
  auto res = client.Post("/score", "{\"nope\": 1}", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  res = client.Post("/score", R"({"pairs":[{"premise":"a","hypothesis":""}]})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
}

TEST(RemoteJudge, RequiresEndpointAndCaches) {
  EXPECT_THROW(RemoteJudge(RemoteConfig{}), ValidationError);
  TempDir dir;
  std::atomic<int> pairs_seen{0};
  StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body);
    pairs_seen += static_cast<int>(body["pairs"].size());
    json labels = json::array();
    for (std::size_t i = 0; i < body["pairs"].size(); ++i) labels.push_back(1);
    reply(res, labels);
  });
  auto config = fast_config(stub.endpoint());
  config.cache_dir = dir.path();
  {
    RemoteJudge judge(config);
    EXPECT_EQ(judge.judge(three_pairs()).size(), 3u);
    EXPECT_EQ(judge.judge(three_pairs()).size(), 3u);
  }
  EXPECT_EQ(pairs_seen.load(), 3);
  RemoteJudge reloaded(config);  // cache persists on disk
  EXPECT_EQ(reloaded.judge(three_pairs()), std::vector<Label>(3, Label::entailed));
  EXPECT_EQ(pairs_seen.load(), 3);
}
