#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stop_token>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "kvopt/error.hpp"
#include "kvopt/store.hpp"

namespace httplib {
class Client;
}

namespace kvopt {

// Transport failure talking to the store (connection refused, timeout, 5xx).
class TransportError : public ServiceError {
 public:
  using ServiceError::ServiceError;
};

// Thin blocking client for the store's REST API. One per thread.
class StoreClient {
 public:
  explicit StoreClient(const std::string& endpoint);
  ~StoreClient();

  StoreClient(const StoreClient&) = delete;
  StoreClient& operator=(const StoreClient&) = delete;

  std::string create_problem(const ReducedSystem& system,
                             const CreateOptions& options = {});
  std::vector<std::pair<std::string, InstanceMeta>> list_problems();
  InstanceMeta meta(const std::string& pid);
  void delete_problem(const std::string& pid);
  void control(const std::string& pid, const std::string& action,
               std::optional<double> rho = std::nullopt);

  CSnapshot read_c(const std::string& pid);
  VarObject read_var(const std::string& pid, Eigen::Index j);
  void write_c(const std::string& pid, Eigen::Index j, double value,
               const std::string& wid);
  std::string register_worker(const std::string& pid,
                              const std::string& platform);

  nlohmann::json analytics(const std::string& pid);
  std::vector<ResidualSample> residual_series(const std::string& pid);
  Readout readout(const std::string& pid, double* residual = nullptr);
  void apply_observation(const std::string& pid, const Eigen::VectorXd& y);

 private:
  nlohmann::json request(const std::string& method, const std::string& path,
                         const nlohmann::json* body = nullptr);

  std::unique_ptr<httplib::Client> http_;
};

// One coordinate update from a (possibly stale) snapshot of c:
//   d_j = Grow . c + f_j,   c_j <- rho m_j(d_j) + (1 - rho) c_j
// Throws EvaluationError when d_j is not finite; nothing should be written.
double worker_step(const Eigen::VectorXd& c_snapshot, const VarObject& var,
                   double rho);

struct WorkerConfig {
  std::string endpoint;
  std::string pid;
  std::optional<double> rho;  // overrides the instance's metaparameter
  int report_every = 50;      // iterations between status/epoch refreshes
  std::optional<std::pair<int, int>> latency_ms;  // injected [min, max]
  std::string platform_label = "native";
  std::uint64_t seed = 0;
  int batch = 1;           // coordinates per snapshot of c
  bool row_cache = false;  // keep var objects until the epoch changes
  std::chrono::milliseconds idle_poll{50};
  std::chrono::milliseconds max_backoff{2000};
  // Called after each acknowledged write, for instrumentation.
  std::function<void(Eigen::Index j, double value)> on_write;

  void validate() const;
};

struct WorkerStatsCounters {
  std::atomic<std::uint64_t> iterations{0};
  std::atomic<std::uint64_t> writes{0};
  std::atomic<std::uint64_t> skipped{0};
  std::atomic<std::uint64_t> transport_errors{0};
};

enum class WorkerExit { Stopped, InstanceDeleted };

// Steps (1)-(5) until stop is requested or the instance disappears:
// draw j uniformly, read c and var_j, compute worker_step, write c_j.
// Idles while the instance is paused.
WorkerExit worker_loop(const WorkerConfig& config, std::stop_token stop,
                       WorkerStatsCounters* stats = nullptr);

// Parses "MIN:MAX" milliseconds.
std::pair<int, int> parse_latency(const std::string& spec);

}  // namespace kvopt
