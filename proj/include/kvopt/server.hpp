#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "kvopt/store.hpp"

namespace httplib {
class Server;
}

namespace kvopt {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 binds an ephemeral port
  std::chrono::milliseconds monitor_period{200};
  std::size_t threads = 64;
  std::optional<std::string> static_dir;  // served at /
};

/*
 * REST + server-sent-events front end for a Store.
 *
 *   POST /v1/problems                      {system, meta, request_id} -> {pid}
 *   GET  /v1/problems                      -> [{pid, meta}]
 *   GET  /v1/problems/{pid}/meta
 *   DELETE /v1/problems/{pid}
 *   POST /v1/problems/{pid}/control        {action: pause|resume|set_rho, rho}
 *   GET  /v1/problems/{pid}/c              -> {values, epoch}
 *   GET  /v1/problems/{pid}/var/{j}        -> {j, m, f, Grow, epoch}
 *   PUT  /v1/problems/{pid}/c/{j}          {value, wid} -> {ok}
 *   POST /v1/problems/{pid}/workers        {platform} -> {wid}
 *   GET  /v1/problems/{pid}/analytics
 *   GET  /v1/problems/{pid}/residual       -> {series: [[t, r], ...]}
 *   GET  /v1/problems/{pid}/readout        -> {x, w, residual}
 *   POST /v1/problems/{pid}/observation    {y}
 *   GET  /v1/problems/{pid}/events         text/event-stream
 *
 * Coordinates j are 0-based.
 */
class Server {
 public:
  Server(Store& store, ServerOptions options = {});
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and starts serving on a background thread. Returns the bound port.
  int start();
  // Serves on the calling thread until stop() is called.
  void listen();
  void stop();

  int port() const { return port_; }
  std::string endpoint() const;

 private:
  void install_routes();
  int bind();

  Store& store_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> http_;
  std::unique_ptr<ResidualMonitor> monitor_;
  std::jthread thread_;
  int port_ = -1;
};

// "{endpoint}/#/attach/{pid}"
std::string attach_url(const std::string& endpoint, const std::string& pid);

struct AttachTarget {
  std::string endpoint;
  std::string pid;
};
// Inverse of attach_url; throws InvalidArgument for anything else.
AttachTarget parse_attach_url(const std::string& url);

}  // namespace kvopt
