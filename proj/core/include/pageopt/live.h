#ifndef PAGEOPT_LIVE_H_
#define PAGEOPT_LIVE_H_

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>
#include "pageopt/harness.h"

namespace httplib {
class Server;
}

namespace pageopt {

std::string Base64Encode(std::string_view bytes);
std::string Base64Decode(std::string_view text);  // Throws Error.

// Serves one directory over HTTP on a background thread. GET and HEAD only;
// every response carries `Cache-Control: no-store`.
class StaticServer {
 public:
  explicit StaticServer(std::filesystem::path root,
                        const std::string& host = "127.0.0.1");
  ~StaticServer();
  StaticServer(const StaticServer&) = delete;
  StaticServer& operator=(const StaticServer&) = delete;

  void SetRoot(std::filesystem::path root);
  int port() const { return port_; }
  std::string BaseUrl() const;

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::mutex mu_;
  std::filesystem::path root_;
  std::string host_;
  int port_ = 0;
};

// Client side of RFC 6455, text frames only. Blocking, with per-call
// deadlines.
class WebSocketClient {
 public:
  using Clock = std::chrono::steady_clock;

  WebSocketClient() = default;
  ~WebSocketClient();
  WebSocketClient(const WebSocketClient&) = delete;
  WebSocketClient& operator=(const WebSocketClient&) = delete;

  // ws://host:port/path. Throws HarnessUnavailable.
  void Connect(const std::string& url, std::chrono::milliseconds timeout);
  void SendText(std::string_view payload);
  // Next text message, answering pings on the way. nullopt on deadline.
  // Throws HarnessUnavailable when the peer closes.
  std::optional<std::string> Receive(Clock::time_point deadline);
  void Close();
  bool connected() const { return fd_ >= 0; }

 private:
  // Reads whatever arrives before the deadline into buffer_.
  bool Fill(Clock::time_point deadline);
  void WriteFrame(int opcode, std::string_view payload);
  void WriteAll(std::string_view bytes);

  int fd_ = -1;
  std::string buffer_;   // Received, not yet parsed.
  std::string message_;  // Fragments of the message being assembled.
};

// Browser remote-debugging session over one WebSocket.
class CdpClient {
 public:
  using json = nlohmann::json;

  // Finds the first page target at http://endpoint/json/list (opening one
  // if there is none) and connects to it. Throws HarnessUnavailable.
  void Connect(const std::string& endpoint, std::chrono::milliseconds timeout);
  // Sends a command and waits for its reply; events arriving meanwhile are
  // queued. Throws HarnessUnavailable on timeout or on an error reply.
  json Call(const std::string& method, json params,
            std::chrono::milliseconds timeout);
  // Next queued or incoming event. nullopt on deadline.
  std::optional<json> NextEvent(WebSocketClient::Clock::time_point deadline);
  void ClearEvents() { events_.clear(); }
  bool connected() const { return socket_.connected(); }

 private:
  WebSocketClient socket_;
  int64_t next_id_ = 1;
  std::deque<json> events_;
};

// Drives a real browser: serves the app with caching off, navigates, traces
// the load, polls the document for the sentinel every 50 ms and captures a
// PNG screenshot.
class LiveHarness : public Harness {
 public:
  explicit LiveHarness(std::string endpoint);
  ~LiveHarness() override;
  HarnessResult Evaluate(const AppState& app, double timeout_ms) override;
  std::string Name() const override { return "live"; }

  static constexpr int kSentinelPollMs = 50;

 private:
  std::string endpoint_;
  CdpClient cdp_;
  std::unique_ptr<StaticServer> server_;
};

}  // namespace pageopt

#endif  // PAGEOPT_LIVE_H_
