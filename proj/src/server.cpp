#include "kvopt/server.hpp"

#include <atomic>
#include <sstream>

#include <httplib.h>

#include "kvopt/error.hpp"
#include "kvopt/serialize.hpp"

namespace kvopt {

namespace {

constexpr const char* kJson = "application/json";

void send(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed JSON body: ") + e.what());
  }
}

// Runs a handler, mapping library errors onto HTTP status codes.
template <class F>
httplib::Server::Handler guarded(F&& fn) {
  return [fn = std::forward<F>(fn)](const httplib::Request& req,
                                    httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const NotFound& e) {
      send(res, {{"error", e.what()}}, 404);
    } catch (const InvalidArgument& e) {
      send(res, {{"error", e.what()}}, 400);
    } catch (const DimensionError& e) {
      send(res, {{"error", e.what()}}, 400);
    } catch (const json::exception& e) {
      send(res, {{"error", e.what()}}, 400);
    } catch (const std::exception& e) {
      send(res, {{"error", e.what()}}, 500);
    }
  };
}

Eigen::Index parse_index(const std::string& s) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return static_cast<Eigen::Index>(v);
  } catch (const std::exception&) {
    throw InvalidArgument("bad coordinate index: " + s);
  }
}

std::string format_event(const Event& e) {
  std::ostringstream os;
  os << "id: " << e.seq << "\nevent: " << e.type << "\ndata: " << e.data.dump()
     << "\n\n";
  return os.str();
}

}  // namespace

std::string attach_url(const std::string& endpoint, const std::string& pid) {
  std::string base = endpoint;
  while (!base.empty() && base.back() == '/') base.pop_back();
  return base + "/#/attach/" + pid;
}

AttachTarget parse_attach_url(const std::string& url) {
  const std::string marker = "/#/attach/";
  const auto pos = url.rfind(marker);
  if (pos == std::string::npos || pos + marker.size() >= url.size()) {
    throw InvalidArgument("not an attach URL: " + url);
  }
  AttachTarget t{url.substr(0, pos), url.substr(pos + marker.size())};
  if (t.endpoint.empty() || t.pid.find('/') != std::string::npos) {
    throw InvalidArgument("not an attach URL: " + url);
  }
  return t;
}

Server::Server(Store& store, ServerOptions options)
    : store_(store),
      options_(std::move(options)),
      http_(std::make_unique<httplib::Server>()) {
  const std::size_t threads = options_.threads;
  http_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  http_->set_keep_alive_max_count(1000000);
  http_->set_keep_alive_timeout(30);
  http_->set_tcp_nodelay(true);
  // The library default adds SO_REUSEPORT, which would let a second server
  // silently share the port instead of failing to bind.
  http_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  install_routes();
}

Server::~Server() { stop(); }

std::string Server::endpoint() const {
  return "http://" + options_.host + ":" + std::to_string(port_);
}

int Server::bind() {
  if (port_ >= 0) return port_;
  if (options_.port == 0) {
    port_ = http_->bind_to_any_port(options_.host);
  } else {
    port_ = http_->bind_to_port(options_.host, options_.port) ? options_.port : -1;
  }
  if (port_ < 0) {
    throw ServiceError("cannot bind " + options_.host + ":" +
                       std::to_string(options_.port));
  }
  monitor_ = std::make_unique<ResidualMonitor>(store_, options_.monitor_period);
  return port_;
}

int Server::start() {
  const int port = bind();
  thread_ = std::jthread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  return port;
}

void Server::listen() {
  bind();
  http_->listen_after_bind();
}

void Server::stop() {
  if (http_) http_->stop();
  if (thread_.joinable()) thread_.join();
  monitor_.reset();
}

void Server::install_routes() {
  auto& http = *http_;
  Store& store = store_;
  const std::string P = R"(/v1/problems/([^/]+))";

  if (options_.static_dir) http.set_mount_point("/", *options_.static_dir);

  http.Post("/v1/problems", guarded([&store](const auto& req, auto& res) {
    const json body = parse_body(req);
    const ReducedSystem system = system_from_json(body.at("system"));
    CreateOptions opts;
    const json meta = body.value("meta", json::object());
    opts.rho_filter_default = meta.value("rho_filter_default", 0.5);
    opts.name = meta.value("name", std::string{});
    opts.request_id = body.value("request_id", std::string{});
    send(res, {{"pid", store.create_problem(system, opts)}});
  }));

  http.Get("/v1/problems", guarded([&store](const auto&, auto& res) {
    json out = json::array();
    for (const auto& [pid, meta] : store.list_problems()) {
      out.push_back({{"pid", pid}, {"meta", meta_to_json(meta)}});
    }
    send(res, out);
  }));

  http.Get(P + "/meta", guarded([&store](const auto& req, auto& res) {
    send(res, meta_to_json(store.meta(req.matches[1])));
  }));

  http.Delete(P, guarded([&store](const auto& req, auto& res) {
    store.delete_problem(req.matches[1]);
    send(res, {{"ok", true}});
  }));

  http.Post(P + "/control", guarded([&store](const auto& req, auto& res) {
    const json body = parse_body(req);
    const std::string pid = req.matches[1];
    const auto action = body.at("action").get<std::string>();
    if (action == "pause") {
      store.pause(pid);
    } else if (action == "resume") {
      store.resume(pid);
    } else if (action == "set_rho") {
      store.set_rho(pid, body.at("rho").get<double>());
    } else {
      throw InvalidArgument("unknown control action: " + action);
    }
    send(res, meta_to_json(store.meta(pid)));
  }));

  http.Get(P + "/c", guarded([&store](const auto& req, auto& res) {
    const CSnapshot snap = store.read_c(req.matches[1]);
    send(res, {{"values", vector_to_json(snap.values)}, {"epoch", snap.epoch}});
  }));

  http.Get(P + R"(/var/(-?\d+))", guarded([&store](const auto& req, auto& res) {
    send(res, var_to_json(store.read_var(req.matches[1], parse_index(req.matches[2]))));
  }));

  http.Put(P + R"(/c/(-?\d+))", guarded([&store](const auto& req, auto& res) {
    const json body = parse_body(req);
    const json& value = body.at("value");
    // JSON cannot carry NaN/Inf; a null value is how they arrive.
    if (!value.is_number()) {
      throw InvalidArgument("value must be a finite number");
    }
    store.write_c(req.matches[1], parse_index(req.matches[2]),
                  value.get<double>(), body.at("wid").get<std::string>());
    send(res, {{"ok", true}});
  }));

  http.Post(P + "/workers", guarded([&store](const auto& req, auto& res) {
    const json body = parse_body(req);
    send(res, {{"wid", store.register_worker(
                           req.matches[1], body.value("platform", std::string{}))}});
  }));

  http.Get(P + "/analytics", guarded([&store](const auto& req, auto& res) {
    send(res, analytics_to_json(store.analytics(req.matches[1])));
  }));

  http.Get(P + "/residual", guarded([&store](const auto& req, auto& res) {
    json series = json::array();
    for (const auto& s : store.residual_series(req.matches[1])) {
      series.push_back({s.t_ms, s.value});
    }
    send(res, {{"series", std::move(series)}});
  }));

  http.Get(P + "/readout", guarded([&store](const auto& req, auto& res) {
    const std::string pid = req.matches[1];
    const Readout ro = store.current_readout(pid);
    send(res, {{"x", vector_to_json(ro.x_hat)},
               {"w", vector_to_json(ro.w_hat)},
               {"residual", store.current_residual(pid)}});
  }));

  http.Post(P + "/observation", guarded([&store](const auto& req, auto& res) {
    const json body = parse_body(req);
    store.apply_observation(req.matches[1], vector_from_json(body.at("y")));
    send(res, {{"ok", true}});
  }));

  http.Get(P + "/events", guarded([&store, this](const auto& req, auto& res) {
    auto log = store.events(req.matches[1]);
    std::uint64_t after = 0;
    if (req.has_header("Last-Event-ID")) {
      after = std::stoull(req.get_header_value("Last-Event-ID"));
    } else if (req.has_param("after")) {
      after = std::stoull(req.get_param_value("after"));
    }
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [log, after, this](std::size_t, httplib::DataSink& sink) mutable {
          if (!http_->is_running() || log->closed()) {
            sink.done();
            return true;
          }
          const auto events = log->wait_after(after, std::chrono::milliseconds(500));
          if (events.empty()) {
            const std::string ping = ": keepalive\n\n";
            return sink.write(ping.data(), ping.size());
          }
          for (const auto& e : events) {
            const std::string chunk = format_event(e);
            if (!sink.write(chunk.data(), chunk.size())) return false;
            after = e.seq;
          }
          return true;
        });
  }));
}

}  // namespace kvopt
