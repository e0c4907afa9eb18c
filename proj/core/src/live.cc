#include "pageopt/live.h"

#include <netdb.h>
#include <openssl/evp.h>
#include <openssl/sha.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <random>
#include <sstream>

#include "httplib.h"
#include "pageopt/errors.h"

namespace pageopt {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = WebSocketClient::Clock;

std::string Base64Encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                          reinterpret_cast<const unsigned char*>(bytes.data()),
                          int(bytes.size()));
  out.resize(size_t(n));
  return out;
}

std::string Base64Decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error("base64 length not a multiple of 4");
  std::string out(3 * text.size() / 4, '\0');
  int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                          reinterpret_cast<const unsigned char*>(text.data()),
                          int(text.size()));
  if (n < 0) throw Error("malformed base64");
  // DecodeBlock keeps the zero bytes that stand in for '=' padding.
  size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(size_t(n) - pad);
  return out;
}

// --- static server ------------------------------------------------------

namespace {

std::string MimeType(const fs::path& path) {
  std::string ext = path.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
  if (ext == ".js") return "text/javascript; charset=utf-8";
  if (ext == ".css") return "text/css; charset=utf-8";
  if (ext == ".json") return "application/json";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

}  // namespace

StaticServer::StaticServer(fs::path root, const std::string& host)
    : server_(std::make_unique<httplib::Server>()),
      root_(std::move(root)),
      host_(host) {
  server_->set_default_headers({{"Cache-Control", "no-store"}});
  server_->Get(R"(/(.*))", [this](const httplib::Request& req,
                                  httplib::Response& res) {
    fs::path rel = req.matches[1].str();
    if (rel.empty()) rel = "index.html";
    for (const fs::path& part : rel) {
      if (part == "..") {
        res.status = 403;
        return;
      }
    }
    fs::path full;
    {
      std::lock_guard lock(mu_);
      full = root_ / rel;
    }
    if (!fs::is_regular_file(full)) {
      res.status = 404;
      return;
    }
    res.set_content(ReadFileBytes(full), MimeType(full));
  });
  auto refuse = [](const httplib::Request&, httplib::Response& res) {
    res.status = 405;
    res.set_header("Allow", "GET, HEAD");
  };
  server_->Post(".*", refuse);
  server_->Put(".*", refuse);
  server_->Patch(".*", refuse);
  server_->Delete(".*", refuse);
  port_ = server_->bind_to_any_port(host_);
  if (port_ <= 0) throw HarnessUnavailable("cannot bind a port on " + host_);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

StaticServer::~StaticServer() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

void StaticServer::SetRoot(fs::path root) {
  std::lock_guard lock(mu_);
  root_ = std::move(root);
}

std::string StaticServer::BaseUrl() const {
  return "http://" + host_ + ":" + std::to_string(port_);
}

// --- websocket ----------------------------------------------------------

namespace {

constexpr char kWebSocketGuid[] = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";

struct WsUrl {
  std::string host;
  std::string port;
  std::string path;
};

WsUrl ParseWsUrl(const std::string& url) {
  constexpr std::string_view kScheme = "ws://";
  if (!url.starts_with(kScheme)) {
    throw HarnessUnavailable("not a ws:// url: " + url);
  }
  std::string rest = url.substr(kScheme.size());
  size_t slash = rest.find('/');
  std::string authority = rest.substr(0, slash);
  WsUrl out;
  out.path = slash == std::string::npos ? "/" : rest.substr(slash);
  size_t colon = authority.rfind(':');
  out.host = authority.substr(0, colon);
  out.port = colon == std::string::npos ? "80" : authority.substr(colon + 1);
  return out;
}

int RemainingMs(Clock::time_point deadline) {
  auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
      deadline - Clock::now());
  return int(std::max<int64_t>(0, left.count()));
}

}  // namespace

WebSocketClient::~WebSocketClient() { Close(); }

void WebSocketClient::Connect(const std::string& url,
                              std::chrono::milliseconds timeout) {
  Close();
  WsUrl parts = ParseWsUrl(url);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  if (getaddrinfo(parts.host.c_str(), parts.port.c_str(), &hints, &found) != 0) {
    throw HarnessUnavailable("cannot resolve " + parts.host);
  }
  for (addrinfo* ai = found; ai && fd_ < 0; ai = ai->ai_next) {
    int fd = socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      fd_ = fd;
    } else {
      ::close(fd);
    }
  }
  freeaddrinfo(found);
  if (fd_ < 0) throw HarnessUnavailable("cannot connect to " + url);

  std::string nonce(16, '\0');
  std::random_device rd;
  for (char& c : nonce) c = char(rd());
  std::string key = Base64Encode(nonce);
  WriteAll("GET " + parts.path + " HTTP/1.1\r\nHost: " + parts.host + ":" +
           parts.port +
           "\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
           "Sec-WebSocket-Key: " + key +
           "\r\nSec-WebSocket-Version: 13\r\n\r\n");

  Clock::time_point deadline = Clock::now() + timeout;
  size_t end;
  while ((end = buffer_.find("\r\n\r\n")) == std::string::npos) {
    if (!Fill(deadline)) {
      Close();
      throw HarnessUnavailable("no websocket handshake from " + url);
    }
  }
  std::string head = buffer_.substr(0, end);
  buffer_.erase(0, end + 4);
  std::string expected_input = key + kWebSocketGuid;
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(expected_input.data()),
       expected_input.size(), digest);
  std::string accept =
      Base64Encode({reinterpret_cast<const char*>(digest), sizeof digest});
  bool accepted = false;
  std::istringstream lines(head);
  std::string line;
  std::getline(lines, line);
  bool switching = line.find(" 101") != std::string::npos;
  while (std::getline(lines, line)) {
    size_t colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string name = line.substr(0, colon);
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    std::string value = line.substr(colon + 1);
    value.erase(0, value.find_first_not_of(' '));
    while (!value.empty() && (value.back() == '\r' || value.back() == ' ')) {
      value.pop_back();
    }
    if (name == "sec-websocket-accept") accepted = value == accept;
  }
  if (!switching || !accepted) {
    Close();
    throw HarnessUnavailable("websocket upgrade refused by " + url);
  }
}

void WebSocketClient::Close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
  buffer_.clear();
  message_.clear();
}

bool WebSocketClient::Fill(Clock::time_point deadline) {
  if (fd_ < 0) throw HarnessUnavailable("websocket not connected");
  pollfd p{fd_, POLLIN, 0};
  int ready = poll(&p, 1, RemainingMs(deadline));
  if (ready <= 0) return false;
  char chunk[65536];
  ssize_t n = recv(fd_, chunk, sizeof chunk, 0);
  if (n <= 0) {
    Close();
    throw HarnessUnavailable("websocket peer went away");
  }
  buffer_.append(chunk, size_t(n));
  return true;
}

void WebSocketClient::WriteAll(std::string_view bytes) {
  while (!bytes.empty()) {
    ssize_t n = send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n <= 0) {
      Close();
      throw HarnessUnavailable("websocket write failed");
    }
    bytes.remove_prefix(size_t(n));
  }
}

void WebSocketClient::WriteFrame(int opcode, std::string_view payload) {
  if (fd_ < 0) throw HarnessUnavailable("websocket not connected");
  std::string frame;
  frame += char(0x80 | opcode);
  uint64_t len = payload.size();
  if (len < 126) {
    frame += char(0x80 | len);
  } else if (len <= 0xFFFF) {
    frame += char(0x80 | 126);
    frame += char(len >> 8);
    frame += char(len & 0xFF);
  } else {
    frame += char(0x80 | 127);
    for (int shift = 56; shift >= 0; shift -= 8) frame += char(len >> shift);
  }
  static thread_local std::mt19937 rng{std::random_device{}()};
  char mask[4];
  for (char& m : mask) m = char(rng());
  frame.append(mask, 4);
  for (size_t i = 0; i < payload.size(); ++i) frame += payload[i] ^ mask[i % 4];
  WriteAll(frame);
}

void WebSocketClient::SendText(std::string_view payload) {
  WriteFrame(0x1, payload);
}

std::optional<std::string> WebSocketClient::Receive(Clock::time_point deadline) {
  while (true) {
    // Try to cut one whole frame off the buffer.
    if (buffer_.size() >= 2) {
      auto byte = [&](size_t i) { return uint8_t(buffer_[i]); };
      bool fin = byte(0) & 0x80;
      int opcode = byte(0) & 0x0F;
      bool masked = byte(1) & 0x80;
      uint64_t len = byte(1) & 0x7F;
      size_t header = 2;
      if (len == 126) {
        header = 4;
        if (buffer_.size() >= header) len = (uint64_t(byte(2)) << 8) | byte(3);
      } else if (len == 127) {
        header = 10;
        if (buffer_.size() >= header) {
          len = 0;
          for (size_t i = 2; i < 10; ++i) len = (len << 8) | byte(i);
        }
      }
      size_t mask_at = header;
      if (masked) header += 4;
      if (buffer_.size() >= header && buffer_.size() - header >= len) {
        std::string payload = buffer_.substr(header, len);
        if (masked) {
          for (size_t i = 0; i < payload.size(); ++i) {
            payload[i] = char(payload[i] ^ buffer_[mask_at + i % 4]);
          }
        }
        buffer_.erase(0, header + len);
        switch (opcode) {
          case 0x0:
          case 0x1:
          case 0x2:
            message_ += payload;
            if (fin) return std::exchange(message_, {});
            break;
          case 0x8:
            Close();
            throw HarnessUnavailable("websocket closed by peer");
          case 0x9:
            WriteFrame(0xA, payload);
            break;
          default:
            break;  // Pong or reserved.
        }
        continue;
      }
    }
    if (!Fill(deadline)) return std::nullopt;
  }
}

// --- CDP ----------------------------------------------------------------

void CdpClient::Connect(const std::string& endpoint,
                        std::chrono::milliseconds timeout) {
  httplib::Client http("http://" + endpoint);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  http.set_connection_timeout(std::max<int64_t>(1, secs.count()));
  http.set_read_timeout(std::max<int64_t>(1, secs.count()));
  auto list = http.Get("/json/list");
  if (!list || list->status != 200) {
    throw HarnessUnavailable("no remote-debugging endpoint at " + endpoint);
  }
  std::string ws_url;
  try {
    for (const json& target : json::parse(list->body)) {
      if (target.value("type", "") == "page" &&
          target.contains("webSocketDebuggerUrl")) {
        ws_url = target["webSocketDebuggerUrl"].get<std::string>();
        break;
      }
    }
    if (ws_url.empty()) {
      auto opened = http.Put("/json/new?about:blank");
      if (!opened || opened->status != 200) {
        throw HarnessUnavailable("cannot open a page target at " + endpoint);
      }
      ws_url = json::parse(opened->body).at("webSocketDebuggerUrl");
    }
  } catch (const json::exception& e) {
    throw HarnessUnavailable(std::string("bad target list: ") + e.what());
  }
  socket_.Connect(ws_url, timeout);
  events_.clear();
}

json CdpClient::Call(const std::string& method, json params,
                     std::chrono::milliseconds timeout) {
  int64_t id = next_id_++;
  json request = {{"id", id}, {"method", method}, {"params", std::move(params)}};
  socket_.SendText(request.dump());
  Clock::time_point deadline = Clock::now() + timeout;
  while (true) {
    std::optional<std::string> text = socket_.Receive(deadline);
    if (!text) throw HarnessUnavailable(method + " timed out");
    json message = json::parse(*text, nullptr, false);
    if (message.is_discarded()) continue;
    if (message.contains("id")) {
      if (message["id"] != id) continue;
      if (message.contains("error")) {
        throw HarnessUnavailable(method + " failed: " +
                                 message["error"].value("message", "?"));
      }
      return message.value("result", json::object());
    }
    if (message.contains("method")) events_.push_back(std::move(message));
  }
}

std::optional<json> CdpClient::NextEvent(Clock::time_point deadline) {
  while (true) {
    if (!events_.empty()) {
      json e = std::move(events_.front());
      events_.pop_front();
      return e;
    }
    std::optional<std::string> text = socket_.Receive(deadline);
    if (!text) return std::nullopt;
    json message = json::parse(*text, nullptr, false);
    if (!message.is_discarded() && message.contains("method")) {
      events_.push_back(std::move(message));
    }
  }
}

// --- live harness -------------------------------------------------------

LiveHarness::LiveHarness(std::string endpoint) : endpoint_(std::move(endpoint)) {}

LiveHarness::~LiveHarness() = default;

HarnessResult LiveHarness::Evaluate(const AppState& app, double timeout_ms) {
  using std::chrono::milliseconds;
  constexpr milliseconds kCommand{10000};
  if (!server_) {
    server_ = std::make_unique<StaticServer>(app.root_dir);
  } else {
    server_->SetRoot(app.root_dir);
  }
  if (!cdp_.connected()) cdp_.Connect(endpoint_, kCommand);

  cdp_.Call("Page.enable", json::object(), kCommand);
  cdp_.Call("Network.enable", json::object(), kCommand);
  cdp_.Call("Network.setCacheDisabled", {{"cacheDisabled", true}}, kCommand);
  cdp_.Call("Page.navigate", {{"url", "about:blank"}}, kCommand);
  cdp_.ClearEvents();
  cdp_.Call("Tracing.start",
            {{"transferMode", "ReportEvents"},
             {"categories",
              "devtools.timeline,v8.execute,"
              "disabled-by-default-devtools.timeline"}},
            kCommand);

  HarnessResult result;
  std::string probe = "document.documentElement !== null && "
                      "document.documentElement.textContent.indexOf(" +
                      json(app.sentinel_text).dump() + ") >= 0";
  Clock::time_point start = Clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(Clock::now() - start)
        .count();
  };
  cdp_.Call("Page.navigate", {{"url", server_->BaseUrl() + "/" + app.PageFile()}},
            kCommand);
  while (true) {
    json r = cdp_.Call("Runtime.evaluate",
                       {{"expression", probe}, {"returnByValue", true}},
                       kCommand);
    if (r.contains("result") && r["result"].value("value", false) == true) {
      result.loaded = true;
      break;
    }
    if (elapsed_ms() >= timeout_ms) {
      result.timed_out = true;
      break;
    }
    std::this_thread::sleep_for(milliseconds(kSentinelPollMs));
  }
  result.wall_clock_ms = elapsed_ms();

  json shot = cdp_.Call("Page.captureScreenshot", {{"format", "png"}}, kCommand);
  std::string png = Base64Decode(shot.value("data", ""));
  result.screenshot = DecodePng(
      {reinterpret_cast<const uint8_t*>(png.data()), png.size()});

  cdp_.Call("Tracing.end", json::object(), kCommand);
  json collected = json::array();
  Clock::time_point deadline = Clock::now() + milliseconds(30000);
  while (true) {
    std::optional<json> e = cdp_.NextEvent(deadline);
    if (!e) throw HarnessUnavailable("trace never completed");
    std::string method = e->value("method", "");
    if (method == "Tracing.dataCollected") {
      for (json& ev : (*e)["params"]["value"]) collected.push_back(std::move(ev));
    } else if (method == "Tracing.tracingComplete") {
      break;
    }
  }
  result.events = ParseTrace(collected.dump()).events;
  return result;
}

}  // namespace pageopt
