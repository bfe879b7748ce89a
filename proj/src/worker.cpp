#include "kvopt/worker.hpp"

#include <cmath>
#include <condition_variable>
#include <mutex>
#include <random>
#include <thread>
#include <unordered_map>

#include <httplib.h>

#include "kvopt/error.hpp"
#include "kvopt/serialize.hpp"

namespace kvopt {

// ---------------------------------------------------------------------------
// StoreClient

StoreClient::StoreClient(const std::string& endpoint)
    : http_(std::make_unique<httplib::Client>(endpoint)) {
  http_->set_keep_alive(true);
  http_->set_tcp_nodelay(true);
  http_->set_connection_timeout(std::chrono::seconds(5));
  http_->set_read_timeout(std::chrono::seconds(30));
  http_->set_write_timeout(std::chrono::seconds(30));
}

StoreClient::~StoreClient() = default;

json StoreClient::request(const std::string& method, const std::string& path,
                          const json* body) {
  const std::string payload = body ? body->dump() : std::string{};
  httplib::Result res;
  if (method == "GET") {
    res = http_->Get(path);
  } else if (method == "POST") {
    res = http_->Post(path, payload, "application/json");
  } else if (method == "PUT") {
    res = http_->Put(path, payload, "application/json");
  } else if (method == "DELETE") {
    res = http_->Delete(path);
  } else {
    throw InvalidArgument("unsupported method " + method);
  }
  if (!res) {
    throw TransportError(method + " " + path + ": " + httplib::to_string(res.error()));
  }
  json parsed;
  try {
    parsed = res->body.empty() ? json::object() : json::parse(res->body);
  } catch (const json::exception&) {
    throw TransportError(method + " " + path + ": unparseable response");
  }
  const std::string message = parsed.is_object() && parsed.contains("error")
                                  ? parsed["error"].get<std::string>()
                                  : res->body;
  if (res->status == 404) throw NotFound(message);
  if (res->status >= 400 && res->status < 500) throw InvalidArgument(message);
  if (res->status >= 500) throw TransportError(message);
  return parsed;
}

std::string StoreClient::create_problem(const ReducedSystem& system,
                                        const CreateOptions& options) {
  const json body = {{"system", system_to_json(system)},
                     {"meta",
                      {{"rho_filter_default", options.rho_filter_default},
                       {"name", options.name}}},
                     {"request_id", options.request_id}};
  return request("POST", "/v1/problems", &body).at("pid").get<std::string>();
}

std::vector<std::pair<std::string, InstanceMeta>> StoreClient::list_problems() {
  std::vector<std::pair<std::string, InstanceMeta>> out;
  for (const auto& e : request("GET", "/v1/problems")) {
    out.emplace_back(e.at("pid").get<std::string>(), meta_from_json(e.at("meta")));
  }
  return out;
}

InstanceMeta StoreClient::meta(const std::string& pid) {
  return meta_from_json(request("GET", "/v1/problems/" + pid + "/meta"));
}

void StoreClient::delete_problem(const std::string& pid) {
  request("DELETE", "/v1/problems/" + pid);
}

void StoreClient::control(const std::string& pid, const std::string& action,
                          std::optional<double> rho) {
  json body = {{"action", action}};
  if (rho) body["rho"] = *rho;
  request("POST", "/v1/problems/" + pid + "/control", &body);
}

CSnapshot StoreClient::read_c(const std::string& pid) {
  const json r = request("GET", "/v1/problems/" + pid + "/c");
  return {vector_from_json(r.at("values")), r.at("epoch").get<std::uint64_t>()};
}

VarObject StoreClient::read_var(const std::string& pid, Eigen::Index j) {
  return var_from_json(
      request("GET", "/v1/problems/" + pid + "/var/" + std::to_string(j)));
}

void StoreClient::write_c(const std::string& pid, Eigen::Index j, double value,
                          const std::string& wid) {
  const json body = {{"value", value}, {"wid", wid}};
  request("PUT", "/v1/problems/" + pid + "/c/" + std::to_string(j), &body);
}

std::string StoreClient::register_worker(const std::string& pid,
                                         const std::string& platform) {
  const json body = {{"platform", platform}};
  return request("POST", "/v1/problems/" + pid + "/workers", &body)
      .at("wid")
      .get<std::string>();
}

json StoreClient::analytics(const std::string& pid) {
  return request("GET", "/v1/problems/" + pid + "/analytics");
}

std::vector<ResidualSample> StoreClient::residual_series(const std::string& pid) {
  std::vector<ResidualSample> out;
  for (const auto& s : request("GET", "/v1/problems/" + pid + "/residual").at("series")) {
    out.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
  }
  return out;
}

Readout StoreClient::readout(const std::string& pid, double* residual) {
  const json r = request("GET", "/v1/problems/" + pid + "/readout");
  if (residual) *residual = r.at("residual").get<double>();
  return {vector_from_json(r.at("x")), vector_from_json(r.at("w"))};
}

void StoreClient::apply_observation(const std::string& pid,
                                    const Eigen::VectorXd& y) {
  const json body = {{"y", vector_to_json(y)}};
  request("POST", "/v1/problems/" + pid + "/observation", &body);
}

// ---------------------------------------------------------------------------
// Worker

double worker_step(const Eigen::VectorXd& c_snapshot, const VarObject& var,
                   double rho) {
  if (var.grow.size() != c_snapshot.size()) {
    throw DimensionError("Grow has length " + std::to_string(var.grow.size()) +
                         ", snapshot has " + std::to_string(c_snapshot.size()));
  }
  if (var.index < 0 || var.index >= c_snapshot.size()) {
    throw DimensionError("coordinate index out of range");
  }
  const double d_j = var.grow.dot(c_snapshot) + var.f;
  if (!std::isfinite(d_j)) {
    throw EvaluationError("intermediate state value is not finite");
  }
  const double next = rho * var.m(d_j) + (1.0 - rho) * c_snapshot[var.index];
  if (!std::isfinite(next)) throw EvaluationError("new state value is not finite");
  return next;
}

void WorkerConfig::validate() const {
  if (rho && !(*rho > 0.0 && *rho <= 1.0)) {
    throw InvalidArgument("rho must lie in (0, 1]");
  }
  if (latency_ms && (latency_ms->first < 0 || latency_ms->first > latency_ms->second)) {
    throw InvalidArgument("latency bounds must satisfy 0 <= min <= max");
  }
  if (report_every < 1) throw InvalidArgument("report_every must be positive");
  if (batch < 1) throw InvalidArgument("batch must be positive");
}

std::pair<int, int> parse_latency(const std::string& spec) {
  const auto colon = spec.find(':');
  try {
    if (colon == std::string::npos) {
      const int v = std::stoi(spec);
      return {v, v};
    }
    return {std::stoi(spec.substr(0, colon)), std::stoi(spec.substr(colon + 1))};
  } catch (const std::exception&) {
    throw InvalidArgument("latency must look like MIN:MAX, got " + spec);
  }
}

namespace {

// Returns false if stop was requested during the wait.
bool sleep_for(std::stop_token stop, std::chrono::milliseconds dur) {
  if (dur.count() <= 0) return !stop.stop_requested();
  std::mutex mu;
  std::condition_variable_any cv;
  std::unique_lock lock(mu);
  return !cv.wait_for(lock, stop, dur, [] { return false; });
}

struct Session {
  std::string wid;
  double rho = 0.5;
  std::uint64_t epoch = 0;
  Eigen::Index K = 0;
  bool paused = false;
};

void refresh(StoreClient& client, const WorkerConfig& config, Session& s) {
  const InstanceMeta meta = client.meta(config.pid);
  s.rho = config.rho.value_or(meta.rho_filter_default);
  s.epoch = meta.epoch;
  s.K = meta.K;
  s.paused = meta.status == InstanceStatus::Paused;
}

}  // namespace

WorkerExit worker_loop(const WorkerConfig& config, std::stop_token stop,
                       WorkerStatsCounters* stats) {
  config.validate();
  StoreClient client(config.endpoint);
  std::mt19937_64 rng(config.seed);
  std::unordered_map<Eigen::Index, VarObject> cache;
  Session session;
  bool initialized = false;
  std::chrono::milliseconds backoff{10};
  std::uint64_t iteration = 0;

  auto count = [stats](std::atomic<std::uint64_t> WorkerStatsCounters::*field) {
    if (stats) (stats->*field).fetch_add(1, std::memory_order_relaxed);
  };

  while (!stop.stop_requested()) {
    try {
      if (!initialized) {
        session.wid = client.register_worker(config.pid, config.platform_label);
        refresh(client, config, session);
        initialized = true;
      } else if (iteration % static_cast<std::uint64_t>(config.report_every) == 0 ||
                 session.paused) {
        const auto old_epoch = session.epoch;
        refresh(client, config, session);
        if (session.epoch != old_epoch) cache.clear();
      }
      if (session.paused) {
        sleep_for(stop, config.idle_poll);
        continue;
      }
      ++iteration;
      count(&WorkerStatsCounters::iterations);

      // (1) random coordinates, uniform over 0..K-1
      std::uniform_int_distribution<Eigen::Index> pick(0, session.K - 1);
      std::vector<Eigen::Index> coords(static_cast<std::size_t>(config.batch));
      for (auto& j : coords) j = pick(rng);

      // (2) read c, then var_j
      const CSnapshot snap = client.read_c(config.pid);
      if (snap.epoch != session.epoch) {
        refresh(client, config, session);
        cache.clear();
      }
      if (config.latency_ms) {
        std::uniform_int_distribution<int> delay(config.latency_ms->first,
                                                 config.latency_ms->second);
        if (!sleep_for(stop, std::chrono::milliseconds(delay(rng)))) break;
      }
      for (const Eigen::Index j : coords) {
        VarObject var;
        if (config.row_cache) {
          auto it = cache.find(j);
          if (it == cache.end()) {
            it = cache.emplace(j, client.read_var(config.pid, j)).first;
          }
          var = it->second;
        } else {
          var = client.read_var(config.pid, j);
        }
        // (3)-(4)
        double value = 0.0;
        try {
          value = worker_step(snap.values, var, session.rho);
        } catch (const EvaluationError&) {
          count(&WorkerStatsCounters::skipped);
          continue;
        }
        // (5)
        client.write_c(config.pid, j, value, session.wid);
        count(&WorkerStatsCounters::writes);
        if (config.on_write) config.on_write(j, value);
      }
      backoff = std::chrono::milliseconds(10);
    } catch (const TransportError&) {
      count(&WorkerStatsCounters::transport_errors);
      if (!sleep_for(stop, backoff)) break;
      backoff = std::min(backoff * 2, config.max_backoff);
    } catch (const NotFound&) {
      return WorkerExit::InstanceDeleted;
    }
  }
  return WorkerExit::Stopped;
}

}  // namespace kvopt
