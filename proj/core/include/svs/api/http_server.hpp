#pragma once

// HTTP front end for ApiService and the push channel.
//
//   POST /login                         {email, password} -> {token, user}
//   GET  /locations
//   GET  /locations/{id}/cameras
//   GET  /locations/{id}/status
//   GET  /locations/{id}/anomalies?window=24h
//   GET  /cameras/{id}/status
//   GET  /cameras/{id}/anomalies?window=24h
//   GET  /cameras/{id}/heatmap
//   GET  /cameras/{id}/bev
//   GET  /cameras/{id}/search?from=ts&to=ts
//   GET  /events                        text/event-stream, honours Last-Event-ID
//
// Everything except /login needs "Authorization: Bearer <token>"; /events
// also accepts ?token= since browser event sources cannot set headers.

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>

#include "svs/api/events.hpp"
#include "svs/api/service.hpp"

namespace svs::api {

// "24h", "90m", "30s", "1500ms" or a bare millisecond count.
TimestampMs parse_duration_ms(std::string_view text);

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  std::size_t threads = 16;
  std::chrono::milliseconds keepalive{10000};
};

class ApiServer {
 public:
  ApiServer(const ApiService& service, UserRegistry& users, EventBroadcaster& events, ServerOptions options = {});
  ~ApiServer();

  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Binds and serves on a background thread; returns the bound port.
  int start();
  // Blocks serving on the calling thread until stop().
  void run();
  void stop();
  int port() const noexcept { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace svs::api
