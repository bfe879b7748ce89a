#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "kvopt/compiler.hpp"
#include "kvopt/problem.hpp"

namespace kvopt {

enum class InstanceStatus { Running, Paused };

std::string_view to_string(InstanceStatus status);
InstanceStatus instance_status_from_string(std::string_view name);

struct InstanceMeta {
  ProblemKind kind = ProblemKind::Lasso;
  Eigen::Index K = 0;
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  double rho_filter_default = 0.5;
  InstanceStatus status = InstanceStatus::Running;
  std::int64_t created_at = 0;  // ms since the Unix epoch
  // Bumped whenever var objects or metaparameters change; workers re-read
  // cached state when it moves.
  std::uint64_t epoch = 0;
  std::string name;
};

nlohmann::json meta_to_json(const InstanceMeta& meta);
InstanceMeta meta_from_json(const nlohmann::json& j);

// Everything a worker needs to update coordinate j.
struct VarObject {
  Eigen::Index index = 0;
  CoordinateMap m = CoordinateMap::identity();
  double f = 0.0;
  Eigen::VectorXd grow;  // row j of G
  std::uint64_t epoch = 0;
};

nlohmann::json var_to_json(const VarObject& var);
VarObject var_from_json(const nlohmann::json& j);

struct CSnapshot {
  Eigen::VectorXd values;
  std::uint64_t epoch = 0;
};

struct WorkerStats {
  std::string wid;
  std::string platform;
  std::uint64_t updates_count = 0;
  std::int64_t last_seen = 0;  // ms since the Unix epoch
};

struct Analytics {
  std::vector<WorkerStats> workers;
  std::map<std::string, std::size_t> platform_counts;
  std::uint64_t total_updates = 0;
};

nlohmann::json analytics_to_json(const Analytics& a);

struct ResidualSample {
  double t_ms = 0.0;
  double value = 0.0;
};

struct Event {
  std::uint64_t seq = 0;
  std::string type;  // residual | analytics | status
  nlohmann::json data;
};

// Bounded per-instance event history with blocking reads for streaming.
class EventLog {
 public:
  explicit EventLog(std::size_t capacity = 1024) : capacity_(capacity) {}

  void publish(std::string type, nlohmann::json data);

  // Events with seq > after, waiting up to `timeout` for at least one.
  std::vector<Event> wait_after(std::uint64_t after,
                                std::chrono::milliseconds timeout) const;
  std::uint64_t last_seq() const;
  void close();
  bool closed() const;

 private:
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::deque<Event> events_;
  std::uint64_t next_seq_ = 1;
  std::size_t capacity_;
  bool closed_ = false;
};

struct StoreOptions {
  // Enables write-ahead logging and snapshots under this directory.
  std::optional<std::filesystem::path> data_dir;
  std::size_t compact_after = 200000;  // WAL records between snapshots
};

struct CreateOptions {
  double rho_filter_default = 0.5;
  std::string name;
  std::string request_id;  // idempotency key; empty disables
};

/*
 * Key-value coordination service holding live problem instances.
 *
 * Every c slot is an independent atomic scalar. Writes to one slot resolve
 * last-write-wins in arrival order; no operation spans two slots atomically,
 * and read_c returns a slot-by-slot copy with no cross-slot consistency.
 * The state d is never stored; it is rebuilt as G c + f when needed.
 */
class Store {
 public:
  explicit Store(StoreOptions options = {});
  ~Store();

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  std::string create_problem(const ReducedSystem& system,
                             const CreateOptions& options = {});
  std::vector<std::pair<std::string, InstanceMeta>> list_problems() const;
  InstanceMeta meta(const std::string& pid) const;
  void delete_problem(const std::string& pid);

  CSnapshot read_c(const std::string& pid) const;
  VarObject read_var(const std::string& pid, Eigen::Index j) const;
  void write_c(const std::string& pid, Eigen::Index j, double value,
               const std::string& wid);

  std::string register_worker(const std::string& pid,
                              const std::string& platform);
  Analytics analytics(const std::string& pid) const;

  void apply_observation(const std::string& pid, const Eigen::VectorXd& y_new);
  void pause(const std::string& pid);
  void resume(const std::string& pid);
  void set_rho(const std::string& pid, double rho);

  // Residual of the current c snapshot, with d = G c + f.
  double current_residual(const std::string& pid) const;
  Readout current_readout(const std::string& pid) const;
  ReducedSystem system(const std::string& pid) const;

  // Computes and appends one residual sample per instance; also publishes
  // residual and analytics events. Called by ResidualMonitor.
  void sample_residuals();
  double sample_residual(const std::string& pid);
  std::vector<ResidualSample> residual_series(const std::string& pid) const;

  // Shares ownership with the instance so streams outlive a delete.
  std::shared_ptr<const EventLog> events(const std::string& pid) const;

  // Flushes the write-ahead log; compacts it into a snapshot if it has grown
  // past the configured bound.
  void flush();
  void compact();

 private:
  struct Instance;
  class Journal;

  std::shared_ptr<Instance> find(const std::string& pid) const;
  void load();
  void replay(const nlohmann::json& record);
  nlohmann::json snapshot_json() const;
  std::string insert_instance(const ReducedSystem& system,
                              const CreateOptions& options, std::string pid,
                              std::int64_t created_at);
  void publish_status(Instance& inst);

  StoreOptions options_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<Instance>> instances_;
  std::map<std::string, std::string> request_ids_;
  std::unique_ptr<Journal> journal_;
};

// Background thread calling Store::sample_residuals() every period.
class ResidualMonitor {
 public:
  ResidualMonitor(Store& store, std::chrono::milliseconds period);
  ~ResidualMonitor();

  ResidualMonitor(const ResidualMonitor&) = delete;
  ResidualMonitor& operator=(const ResidualMonitor&) = delete;

 private:
  std::jthread thread_;
};

std::int64_t now_ms();

}  // namespace kvopt
