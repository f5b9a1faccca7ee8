#include "svs/api/http_server.hpp"

#include <httplib.h>

#include <atomic>
#include <charconv>
#include <thread>

namespace svs::api {

TimestampMs parse_duration_ms(std::string_view text) {
  std::int64_t n = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, n);
  if (ec != std::errc{} || ptr == text.data() || n < 0) throw ValidationError("bad duration '" + std::string(text) + "'");
  const std::string_view unit(ptr, static_cast<std::size_t>(end - ptr));
  if (unit.empty() || unit == "ms") return n;
  if (unit == "s") return n * kMsPerSecond;
  if (unit == "m") return n * 60 * kMsPerSecond;
  if (unit == "h") return n * kMsPerHour;
  if (unit == "d") return n * kMsPerDay;
  throw ValidationError("bad duration unit '" + std::string(unit) + "'");
}

namespace {

TimestampMs parse_ts(const std::string& text, const char* name) {
  TimestampMs v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ValidationError(std::string("query parameter '") + name + "' must be an integer timestamp");
  }
  return v;
}

void send_json(httplib::Response& res, int status, const Json& doc) {
  res.status = status;
  res.set_content(doc.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, Json{{"error", message}});
}

}  // namespace

struct ApiServer::Impl {
  const ApiService& service;
  UserRegistry& users;
  EventBroadcaster& events;
  ServerOptions options;
  httplib::Server server;
  std::thread thread;
  std::atomic<bool> stopping{false};

  Impl(const ApiService& s, UserRegistry& u, EventBroadcaster& e, ServerOptions o)
      : service(s), users(u), events(e), options(std::move(o)) {}

  std::optional<SessionUser> session(const httplib::Request& req) const {
    std::string token;
    const auto auth = req.get_header_value("Authorization");
    if (auth.rfind("Bearer ", 0) == 0) {
      token = auth.substr(7);
    } else if (req.has_param("token")) {
      token = req.get_param_value("token");
    }
    if (token.empty()) return std::nullopt;
    return users.authenticate(token);
  }

  // Authenticated JSON endpoint with the error mapping shared by all routes.
  template <typename F>
  httplib::Server::Handler guarded(F body) {
    return [this, body](const httplib::Request& req, httplib::Response& res) {
      if (!session(req)) {
        send_error(res, 401, "authentication required");
        return;
      }
      try {
        send_json(res, 200, body(req));
      } catch (const NotFoundError& e) {
        send_error(res, 404, e.what());
      } catch (const ValidationError& e) {
        send_error(res, 400, e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    };
  }

  void routes() {
    server.Post("/login", [this](const httplib::Request& req, httplib::Response& res) {
      Json body = Json::parse(req.body, nullptr, false);
      if (!body.is_object() || !body.contains("email") || !body.contains("password") || !body["email"].is_string() ||
          !body["password"].is_string()) {
        send_error(res, 400, "login needs email and password");
        return;
      }
      auto token = users.login(body["email"].get<std::string>(), body["password"].get<std::string>());
      if (!token) {
        send_error(res, 401, "invalid credentials");
        return;
      }
      Json doc{{"token", *token}, {"user", to_json(*users.authenticate(*token))}};
      check_response(doc);
      send_json(res, 200, doc);
    });

    server.Get("/locations", guarded([this](const httplib::Request&) { return service.list_locations(); }));
    server.Get(R"(/locations/([^/]+)/cameras)",
               guarded([this](const httplib::Request& r) { return service.list_cameras(r.matches[1]); }));
    server.Get(R"(/locations/([^/]+)/status)",
               guarded([this](const httplib::Request& r) { return service.location_status(r.matches[1]); }));
    server.Get(R"(/locations/([^/]+)/anomalies)", guarded([this](const httplib::Request& r) {
                 return service.location_anomalies(r.matches[1], window_of(r));
               }));
    server.Get(R"(/cameras/([^/]+)/status)",
               guarded([this](const httplib::Request& r) { return service.current_status(r.matches[1]); }));
    server.Get(R"(/cameras/([^/]+)/anomalies)", guarded([this](const httplib::Request& r) {
                 return service.camera_anomalies(r.matches[1], window_of(r));
               }));
    server.Get(R"(/cameras/([^/]+)/heatmap)",
               guarded([this](const httplib::Request& r) { return service.heatmap(r.matches[1]); }));
    server.Get(R"(/cameras/([^/]+)/bev)",
               guarded([this](const httplib::Request& r) { return service.bev_snapshot(r.matches[1]); }));
    server.Get(R"(/cameras/([^/]+)/search)", guarded([this](const httplib::Request& r) {
                 if (!r.has_param("from") || !r.has_param("to")) throw ValidationError("search needs from and to");
                 return service.search(r.matches[1], parse_ts(r.get_param_value("from"), "from"),
                                       parse_ts(r.get_param_value("to"), "to"));
               }));

    server.Get("/events", [this](const httplib::Request& req, httplib::Response& res) { stream(req, res); });
  }

  static TimestampMs window_of(const httplib::Request& r) {
    return r.has_param("window") ? parse_duration_ms(r.get_param_value("window")) : kMsPerDay;
  }

  void stream(const httplib::Request& req, httplib::Response& res) {
    if (!session(req)) {
      send_error(res, 401, "authentication required");
      return;
    }
    std::optional<std::uint64_t> last;
    if (req.has_header("Last-Event-ID")) {
      const auto v = req.get_header_value("Last-Event-ID");
      std::uint64_t id = 0;
      auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), id);
      if (ec != std::errc{} || ptr != v.data() + v.size()) {
        send_error(res, 400, "bad Last-Event-ID");
        return;
      }
      last = id;
    }
    auto sub = events.subscribe(last);
    auto idle_since = std::make_shared<std::chrono::steady_clock::time_point>(std::chrono::steady_clock::now());
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [this, sub, idle_since](std::size_t, httplib::DataSink& sink) {
          if (stopping) return false;
          if (auto ev = sub->next(std::chrono::milliseconds(100))) {
            const auto text = format_sse(*ev);
            *idle_since = std::chrono::steady_clock::now();
            return sink.write(text.data(), text.size());
          }
          if (sub->closed()) {
            // Dropped for falling behind, or the broadcaster shut down.
            sink.done();
            return true;
          }
          if (std::chrono::steady_clock::now() - *idle_since >= options.keepalive) {
            *idle_since = std::chrono::steady_clock::now();
            static constexpr std::string_view ping = ": keepalive\n\n";
            return sink.write(ping.data(), ping.size());
          }
          return true;
        },
        [this, sub](bool) { events.unsubscribe(sub); });
  }
};

ApiServer::ApiServer(const ApiService& service, UserRegistry& users, EventBroadcaster& events, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, users, events, std::move(options))) {
  const std::size_t threads = impl_->options.threads;
  impl_->server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  impl_->server.set_tcp_nodelay(true);
  impl_->routes();
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::start() {
  auto& o = impl_->options;
  port_ = o.port == 0 ? impl_->server.bind_to_any_port(o.host) : (impl_->server.bind_to_port(o.host, o.port) ? o.port : -1);
  if (port_ <= 0) throw Error("cannot bind API server to " + o.host + ":" + std::to_string(o.port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port_;
}

void ApiServer::run() {
  if (!impl_->thread.joinable()) start();
  impl_->thread.join();
}

void ApiServer::stop() {
  if (!impl_) return;
  impl_->stopping = true;
  impl_->server.stop();
  if (impl_->thread.joinable() && impl_->thread.get_id() != std::this_thread::get_id()) impl_->thread.join();
}

}  // namespace svs::api
