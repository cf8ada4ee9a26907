#pragma once

#include <httplib.h>

#include <functional>
#include <string>
#include <thread>

namespace agreesum::testing {

// Minimal HTTP server with a caller-supplied POST /score handler.
class StubServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;
  explicit StubServer(Handler handler) {
    server_.Post("/score", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace agreesum::testing
