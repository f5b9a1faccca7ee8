#pragma once

// Edge-to-gateway transport. Messages are framed as a 4-byte big-endian
// length followed by a JSON document {topic, body}. A connection opens with
// a hello frame {"token": "..."} that must match the listener's shared token.

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "svs/bounded_queue.hpp"
#include "svs/gateway/gateway.hpp"

namespace svs::gateway {

inline constexpr std::size_t kMaxFrameBytes = 16 * 1024 * 1024;

std::string encode_frame(std::string_view payload);
std::string encode_message(const WireMessage& m);

// Incremental decoder for a byte stream of frames.
class FrameDecoder {
 public:
  void feed(std::string_view bytes);
  // Next complete payload, if any. Throws ParseError on an oversized frame.
  std::optional<std::string> next();

 private:
  std::string buffer_;
};

// In-process mode: an ordered, bounded channel of wire messages.
using MessageChannel = BoundedQueue<WireMessage>;

// Accepts connections on 127.0.0.1 and hands every authenticated message to
// `on_message`, one connection at a time per thread, in arrival order.
class GatewayListener {
 public:
  using Handler = std::function<void(WireMessage)>;

  GatewayListener(std::string token, Handler on_message);
  ~GatewayListener();

  GatewayListener(const GatewayListener&) = delete;
  GatewayListener& operator=(const GatewayListener&) = delete;

  // Binds to `port` (0 picks a free one) and starts accepting.
  std::uint16_t start(std::uint16_t port = 0);
  void stop();

  std::size_t rejected_connections() const noexcept { return rejected_.load(); }

 private:
  void accept_loop();
  void serve(int fd);

  std::string token_;
  Handler on_message_;
  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::atomic<std::size_t> rejected_{0};
  std::thread acceptor_;
  std::mutex workers_mutex_;
  std::vector<std::thread> workers_;
  std::vector<int> client_fds_;
};

class GatewayClient {
 public:
  GatewayClient(const std::string& host, std::uint16_t port, const std::string& token);
  ~GatewayClient();

  GatewayClient(const GatewayClient&) = delete;
  GatewayClient& operator=(const GatewayClient&) = delete;

  void send(const WireMessage& m);
  void close();

 private:
  void write_all(std::string_view bytes);
  int fd_ = -1;
};

}  // namespace svs::gateway
