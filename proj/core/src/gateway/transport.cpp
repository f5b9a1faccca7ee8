#include "svs/gateway/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <vector>

namespace svs::gateway {
namespace {

std::uint32_t read_be32(std::string_view b) {
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(b[0])) << 24) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[1])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[2])) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[3]));
}

}  // namespace

std::string encode_frame(std::string_view payload) {
  if (payload.size() > kMaxFrameBytes) throw ValidationError("frame exceeds the maximum size");
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(4 + payload.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out.append(payload);
  return out;
}

std::string encode_message(const WireMessage& m) { return encode_frame(to_json(m).dump()); }

void FrameDecoder::feed(std::string_view bytes) { buffer_.append(bytes); }

std::optional<std::string> FrameDecoder::next() {
  if (buffer_.size() < 4) return std::nullopt;
  const std::uint32_t n = read_be32(buffer_);
  if (n > kMaxFrameBytes) throw ParseError("frame of " + std::to_string(n) + " bytes exceeds the limit", 0);
  if (buffer_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
  std::string payload = buffer_.substr(4, n);
  buffer_.erase(0, 4 + static_cast<std::size_t>(n));
  return payload;
}

GatewayListener::GatewayListener(std::string token, Handler on_message)
    : token_(std::move(token)), on_message_(std::move(on_message)) {}

GatewayListener::~GatewayListener() { stop(); }

std::uint16_t GatewayListener::start(std::uint16_t port) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error("bind: " + err);
  }
  if (::listen(listen_fd_, 16) != 0) throw Error(std::string("listen: ") + std::strerror(errno));
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
  return ntohs(addr.sin_port);
}

void GatewayListener::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(workers_mutex_);
    for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& w : workers) w.join();
}

void GatewayListener::accept_loop() {
  while (running_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (!running_) return;
      continue;
    }
    std::lock_guard lock(workers_mutex_);
    client_fds_.push_back(fd);
    workers_.emplace_back([this, fd] { serve(fd); });
  }
}

void GatewayListener::serve(int fd) {
  auto release = [&] {
    std::lock_guard lock(workers_mutex_);
    std::erase(client_fds_, fd);
    ::close(fd);
  };
  FrameDecoder decoder;
  bool authenticated = false;
  char buf[8192];
  while (true) {
    const ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
    if (n <= 0) break;
    decoder.feed(std::string_view(buf, static_cast<std::size_t>(n)));
    try {
      while (auto payload = decoder.next()) {
        Json doc = Json::parse(*payload, nullptr, false);
        if (!authenticated) {
          if (doc.is_object() && doc.value("token", std::string{}) == token_) {
            authenticated = true;
            continue;
          }
          ++rejected_;
          ::shutdown(fd, SHUT_RDWR);
          release();
          return;
        }
        if (doc.is_discarded()) continue;
        on_message_(wire_message_from_json(doc));
      }
    } catch (const Error&) {
      break;
    }
  }
  release();
}

GatewayClient::GatewayClient(const std::string& host, std::uint16_t port, const std::string& token) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw Error(std::string("socket: ") + std::strerror(errno));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) throw Error("bad gateway address '" + host + "'");
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    const std::string err = std::strerror(errno);
    ::close(fd_);
    fd_ = -1;
    throw Error("connect: " + err);
  }
  write_all(encode_frame(Json{{"token", token}}.dump()));
}

GatewayClient::~GatewayClient() { close(); }

void GatewayClient::send(const WireMessage& m) { write_all(encode_message(m)); }

void GatewayClient::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_WR);
    char sink[256];
    while (::recv(fd_, sink, sizeof(sink), 0) > 0) {
    }
    ::close(fd_);
    fd_ = -1;
  }
}

void GatewayClient::write_all(std::string_view bytes) {
  if (fd_ < 0) throw Error("gateway client is closed");
  while (!bytes.empty()) {
    const ssize_t n = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n <= 0) throw Error(std::string("send: ") + std::strerror(errno));
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

}  // namespace svs::gateway
