#include "kvopt/store.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "kvopt/error.hpp"
#include "kvopt/serialize.hpp"

namespace kvopt {

namespace {

constexpr std::size_t kSeriesCap = 100000;
constexpr std::size_t kSnapshotSeriesTail = 1000;
constexpr const char* kSnapshotFile = "snapshot.json";
constexpr const char* kWalFile = "wal.jsonl";

std::string random_pid(std::mt19937_64& rng) {
  std::ostringstream os;
  os << 'p' << std::hex << (rng() & 0xffffffffffffULL);
  return os.str();
}

}  // namespace

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string_view to_string(InstanceStatus status) {
  return status == InstanceStatus::Running ? "running" : "paused";
}

InstanceStatus instance_status_from_string(std::string_view name) {
  if (name == "running") return InstanceStatus::Running;
  if (name == "paused") return InstanceStatus::Paused;
  throw InvalidArgument("unknown status: " + std::string(name));
}

json meta_to_json(const InstanceMeta& meta) {
  return {{"kind", std::string(to_string(meta.kind))},
          {"K", meta.K},
          {"n", meta.n},
          {"m", meta.m},
          {"rho_filter_default", meta.rho_filter_default},
          {"status", std::string(to_string(meta.status))},
          {"created_at", meta.created_at},
          {"epoch", meta.epoch},
          {"name", meta.name}};
}

InstanceMeta meta_from_json(const json& j) {
  InstanceMeta meta;
  meta.kind = problem_kind_from_string(j.at("kind").get<std::string>());
  meta.K = j.at("K").get<Eigen::Index>();
  meta.n = j.at("n").get<Eigen::Index>();
  meta.m = j.at("m").get<Eigen::Index>();
  meta.rho_filter_default = j.at("rho_filter_default").get<double>();
  meta.status = instance_status_from_string(j.at("status").get<std::string>());
  meta.created_at = j.value("created_at", std::int64_t{0});
  meta.epoch = j.value("epoch", std::uint64_t{0});
  meta.name = j.value("name", std::string{});
  return meta;
}

json var_to_json(const VarObject& var) {
  return {{"j", var.index},
          {"m", map_to_json(var.m)},
          {"f", var.f},
          {"Grow", vector_to_json(var.grow)},
          {"epoch", var.epoch}};
}

VarObject var_from_json(const json& j) {
  VarObject var;
  var.index = j.value("j", Eigen::Index{0});
  var.m = map_from_json(j.at("m"));
  var.f = j.at("f").get<double>();
  var.grow = vector_from_json(j.at("Grow"));
  var.epoch = j.value("epoch", std::uint64_t{0});
  return var;
}

json analytics_to_json(const Analytics& a) {
  json workers = json::array();
  for (const auto& w : a.workers) {
    workers.push_back({{"wid", w.wid},
                       {"platform", w.platform},
                       {"updates_count", w.updates_count},
                       {"last_seen", w.last_seen}});
  }
  return {{"workers", std::move(workers)},
          {"platform_counts", a.platform_counts},
          {"total_updates", a.total_updates}};
}

// ---------------------------------------------------------------------------
// EventLog

void EventLog::publish(std::string type, json data) {
  {
    std::lock_guard lock(mu_);
    events_.push_back({next_seq_++, std::move(type), std::move(data)});
    while (events_.size() > capacity_) events_.pop_front();
  }
  cv_.notify_all();
}

std::vector<Event> EventLog::wait_after(std::uint64_t after,
                                        std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout,
               [&] { return closed_ || next_seq_ - 1 > after; });
  std::vector<Event> out;
  for (const auto& e : events_) {
    if (e.seq > after) out.push_back(e);
  }
  return out;
}

std::uint64_t EventLog::last_seq() const {
  std::lock_guard lock(mu_);
  return next_seq_ - 1;
}

void EventLog::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool EventLog::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

// ---------------------------------------------------------------------------
// Instance and journal

struct WorkerEntry {
  std::string platform;
  std::atomic<std::uint64_t> updates{0};
  std::atomic<std::int64_t> last_seen{0};
};

struct Store::Instance {
  std::string pid;
  // Guards the mutable parts of system (w-block maps, y) and meta.
  mutable std::shared_mutex mu;
  ReducedSystem system;
  InstanceMeta meta;
  std::unique_ptr<std::atomic<double>[]> c;

  mutable std::mutex workers_mu;
  std::map<std::string, std::shared_ptr<WorkerEntry>> workers;
  std::uint64_t next_worker = 1;

  mutable std::mutex series_mu;
  std::vector<ResidualSample> series;

  EventLog events;

  Eigen::VectorXd snapshot_c() const {
    Eigen::VectorXd out(meta.K);
    for (Eigen::Index j = 0; j < meta.K; ++j) {
      out[j] = c[j].load(std::memory_order_relaxed);
    }
    return out;
  }

  std::shared_ptr<WorkerEntry> worker(const std::string& wid) const {
    std::lock_guard lock(workers_mu);
    auto it = workers.find(wid);
    if (it == workers.end()) {
      throw NotFound("unknown worker " + wid + " for problem " + pid);
    }
    return it->second;
  }
};

// Append-only JSON-lines log. Mutations that must be durable run while the
// journal lock is held, so the log order matches the applied order.
class Store::Journal {
 public:
  explicit Journal(std::filesystem::path dir) : dir_(std::move(dir)) {
    out_.open(dir_ / kWalFile, std::ios::app);
    if (!out_) throw ServiceError("cannot open write-ahead log in " + dir_.string());
  }

  std::unique_lock<std::mutex> lock() { return std::unique_lock(mu_); }

  void append_locked(const json& record) {
    out_ << record.dump() << '\n';
    if (!out_) throw ServiceError("write-ahead log append failed");
    ++records_;
  }

  void flush() {
    std::lock_guard lock(mu_);
    out_.flush();
  }

  std::size_t records_locked() const { return records_; }

  void write_snapshot_locked(const json& snapshot) {
    const auto tmp = dir_ / (std::string(kSnapshotFile) + ".tmp");
    {
      std::ofstream snap(tmp, std::ios::trunc);
      snap << snapshot.dump() << '\n';
      if (!snap) throw ServiceError("snapshot write failed");
    }
    std::filesystem::rename(tmp, dir_ / kSnapshotFile);
    out_.close();
    out_.open(dir_ / kWalFile, std::ios::trunc);
    records_ = 0;
  }

 private:
  std::filesystem::path dir_;
  std::mutex mu_;
  std::ofstream out_;
  std::size_t records_ = 0;
};

// ---------------------------------------------------------------------------
// Store

namespace {

std::unique_lock<std::mutex> maybe_lock(auto& journal) {
  return journal ? journal->lock() : std::unique_lock<std::mutex>();
}

}  // namespace

Store::Store(StoreOptions options) : options_(std::move(options)) {
  if (options_.data_dir) {
    std::filesystem::create_directories(*options_.data_dir);
    load();
    journal_ = std::make_unique<Journal>(*options_.data_dir);
  }
}

Store::~Store() {
  std::shared_lock lock(mu_);
  for (auto& [pid, inst] : instances_) inst->events.close();
  lock.unlock();
  if (journal_) {
    try {
      compact();
    } catch (...) {
      // Best effort; the WAL is still intact.
    }
  }
}

std::shared_ptr<Store::Instance> Store::find(const std::string& pid) const {
  std::shared_lock lock(mu_);
  auto it = instances_.find(pid);
  if (it == instances_.end()) throw NotFound("unknown problem " + pid);
  return it->second;
}

std::string Store::insert_instance(const ReducedSystem& system,
                                   const CreateOptions& options,
                                   std::string pid, std::int64_t created_at) {
  auto inst = std::make_shared<Instance>();
  inst->system = system;
  inst->meta.kind = system.provenance.kind;
  inst->meta.K = system.size();
  inst->meta.n = static_cast<Eigen::Index>(system.x_block.size());
  inst->meta.m = static_cast<Eigen::Index>(system.w_block.size());
  inst->meta.rho_filter_default = options.rho_filter_default;
  inst->meta.created_at = created_at;
  inst->meta.name = options.name.empty() ? system.provenance.name : options.name;
  inst->c = std::make_unique<std::atomic<double>[]>(system.size());
  for (Eigen::Index j = 0; j < system.size(); ++j) inst->c[j].store(0.0);
  inst->pid = pid;

  std::unique_lock lock(mu_);
  if (!options.request_id.empty()) {
    auto it = request_ids_.find(options.request_id);
    if (it != request_ids_.end()) return it->second;
  }
  instances_.emplace(pid, std::move(inst));
  if (!options.request_id.empty()) request_ids_[options.request_id] = pid;
  return pid;
}

std::string Store::create_problem(const ReducedSystem& system,
                                  const CreateOptions& options) {
  system.validate();
  if (!(options.rho_filter_default > 0.0 && options.rho_filter_default <= 1.0)) {
    throw InvalidArgument("rho_filter_default must lie in (0, 1]");
  }
  {
    std::shared_lock lock(mu_);
    if (!options.request_id.empty()) {
      auto it = request_ids_.find(options.request_id);
      if (it != request_ids_.end()) return it->second;
    }
  }
  std::string pid;
  {
    static std::mutex rng_mu;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard rng_lock(rng_mu);
    std::shared_lock lock(mu_);
    do {
      pid = random_pid(rng);
    } while (instances_.count(pid) != 0);
  }
  const auto created = now_ms();
  auto guard = maybe_lock(journal_);
  const auto assigned = insert_instance(system, options, pid, created);
  if (journal_ && assigned == pid) {
    journal_->append_locked({{"op", "create"},
                             {"pid", pid},
                             {"created_at", created},
                             {"rho", options.rho_filter_default},
                             {"name", options.name},
                             {"request_id", options.request_id},
                             {"system", system_to_json(system)}});
  }
  return assigned;
}

std::vector<std::pair<std::string, InstanceMeta>> Store::list_problems() const {
  std::vector<std::shared_ptr<Instance>> all;
  {
    std::shared_lock lock(mu_);
    for (const auto& [pid, inst] : instances_) all.push_back(inst);
  }
  std::vector<std::pair<std::string, InstanceMeta>> out;
  for (const auto& inst : all) {
    std::shared_lock lock(inst->mu);
    out.emplace_back(inst->pid, inst->meta);
  }
  return out;
}

InstanceMeta Store::meta(const std::string& pid) const {
  auto inst = find(pid);
  std::shared_lock lock(inst->mu);
  return inst->meta;
}

void Store::delete_problem(const std::string& pid) {
  auto guard = maybe_lock(journal_);
  std::shared_ptr<Instance> inst;
  {
    std::unique_lock lock(mu_);
    auto it = instances_.find(pid);
    if (it == instances_.end()) throw NotFound("unknown problem " + pid);
    inst = it->second;
    instances_.erase(it);
    std::erase_if(request_ids_, [&](const auto& kv) { return kv.second == pid; });
  }
  inst->events.close();
  if (journal_) journal_->append_locked({{"op", "delete"}, {"pid", pid}});
}

CSnapshot Store::read_c(const std::string& pid) const {
  auto inst = find(pid);
  CSnapshot snap;
  {
    std::shared_lock lock(inst->mu);
    snap.epoch = inst->meta.epoch;
  }
  snap.values = inst->snapshot_c();
  return snap;
}

VarObject Store::read_var(const std::string& pid, Eigen::Index j) const {
  auto inst = find(pid);
  if (j < 0 || j >= inst->meta.K) {
    throw NotFound("coordinate " + std::to_string(j) + " out of range");
  }
  VarObject var;
  var.index = j;
  var.grow = inst->system.G.row(j).transpose();
  std::shared_lock lock(inst->mu);
  var.m = inst->system.maps[j];
  var.f = inst->system.f[j];
  var.epoch = inst->meta.epoch;
  return var;
}

void Store::write_c(const std::string& pid, Eigen::Index j, double value,
                    const std::string& wid) {
  auto inst = find(pid);
  if (j < 0 || j >= inst->meta.K) {
    throw NotFound("coordinate " + std::to_string(j) + " out of range");
  }
  if (!std::isfinite(value)) {
    throw InvalidArgument("rejected non-finite value for coordinate " +
                          std::to_string(j));
  }
  auto entry = inst->worker(wid);
  auto guard = maybe_lock(journal_);
  inst->c[j].store(value, std::memory_order_relaxed);
  entry->updates.fetch_add(1, std::memory_order_relaxed);
  entry->last_seen.store(now_ms(), std::memory_order_relaxed);
  if (journal_) {
    journal_->append_locked(
        {{"op", "c"}, {"pid", pid}, {"j", j}, {"v", value}, {"wid", wid}});
  }
}

std::string Store::register_worker(const std::string& pid,
                                   const std::string& platform) {
  auto inst = find(pid);
  auto guard = maybe_lock(journal_);
  std::string wid;
  {
    std::lock_guard lock(inst->workers_mu);
    wid = "w" + std::to_string(inst->next_worker++);
    auto entry = std::make_shared<WorkerEntry>();
    entry->platform = platform;
    entry->last_seen.store(now_ms());
    inst->workers.emplace(wid, std::move(entry));
  }
  if (journal_) {
    journal_->append_locked(
        {{"op", "worker"}, {"pid", pid}, {"wid", wid}, {"platform", platform}});
  }
  return wid;
}

Analytics Store::analytics(const std::string& pid) const {
  auto inst = find(pid);
  Analytics out;
  std::lock_guard lock(inst->workers_mu);
  for (const auto& [wid, entry] : inst->workers) {
    WorkerStats w;
    w.wid = wid;
    w.platform = entry->platform;
    w.updates_count = entry->updates.load(std::memory_order_relaxed);
    w.last_seen = entry->last_seen.load(std::memory_order_relaxed);
    out.total_updates += w.updates_count;
    ++out.platform_counts[w.platform];
    out.workers.push_back(std::move(w));
  }
  return out;
}

void Store::publish_status(Instance& inst) {
  json data;
  {
    std::shared_lock lock(inst.mu);
    data = {{"status", std::string(to_string(inst.meta.status))},
            {"epoch", inst.meta.epoch},
            {"rho", inst.meta.rho_filter_default}};
  }
  inst.events.publish("status", std::move(data));
}

void Store::apply_observation(const std::string& pid,
                              const Eigen::VectorXd& y_new) {
  auto inst = find(pid);
  auto guard = maybe_lock(journal_);
  {
    std::unique_lock lock(inst->mu);
    // update_observation copies G; rebuild just the w-block maps instead.
    if (y_new.size() != inst->meta.m) {
      throw DimensionError("observation vector has length " +
                           std::to_string(y_new.size()) + ", expected " +
                           std::to_string(inst->meta.m));
    }
    if (!y_new.allFinite()) throw InvalidArgument("observation must be finite");
    if (y_new == inst->system.provenance.y) return;
    const auto& spec = inst->system.provenance;
    const auto maps = w_block_maps(spec.kind, spec.rho_obj, y_new);
    for (std::size_t i = 0; i < inst->system.w_block.size(); ++i) {
      inst->system.maps[inst->system.w_block[i]] = maps[i];
    }
    inst->system.provenance.y = y_new;
    ++inst->meta.epoch;
  }
  if (journal_) {
    journal_->append_locked(
        {{"op", "obs"}, {"pid", pid}, {"y", vector_to_json(y_new)}});
  }
  guard = {};
  publish_status(*inst);
}

void Store::pause(const std::string& pid) {
  auto inst = find(pid);
  auto guard = maybe_lock(journal_);
  {
    std::unique_lock lock(inst->mu);
    inst->meta.status = InstanceStatus::Paused;
  }
  if (journal_) {
    journal_->append_locked({{"op", "status"}, {"pid", pid}, {"status", "paused"}});
  }
  guard = {};
  publish_status(*inst);
}

void Store::resume(const std::string& pid) {
  auto inst = find(pid);
  auto guard = maybe_lock(journal_);
  {
    std::unique_lock lock(inst->mu);
    inst->meta.status = InstanceStatus::Running;
  }
  if (journal_) {
    journal_->append_locked({{"op", "status"}, {"pid", pid}, {"status", "running"}});
  }
  guard = {};
  publish_status(*inst);
}

void Store::set_rho(const std::string& pid, double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) {
    throw InvalidArgument("rho must lie in (0, 1]");
  }
  auto inst = find(pid);
  auto guard = maybe_lock(journal_);
  {
    std::unique_lock lock(inst->mu);
    inst->meta.rho_filter_default = rho;
    ++inst->meta.epoch;
  }
  if (journal_) {
    journal_->append_locked({{"op", "rho"}, {"pid", pid}, {"rho", rho}});
  }
  guard = {};
  publish_status(*inst);
}

ReducedSystem Store::system(const std::string& pid) const {
  auto inst = find(pid);
  std::shared_lock lock(inst->mu);
  return inst->system;
}

double Store::current_residual(const std::string& pid) const {
  auto inst = find(pid);
  const Eigen::VectorXd c = inst->snapshot_c();
  Eigen::VectorXd d = inst->system.G * c;
  std::shared_lock lock(inst->mu);
  d += inst->system.f;
  return (c - eval_m(inst->system.maps, d)).norm();
}

Readout Store::current_readout(const std::string& pid) const {
  auto inst = find(pid);
  const Eigen::VectorXd c = inst->snapshot_c();
  Eigen::VectorXd d = inst->system.G * c;
  std::shared_lock lock(inst->mu);
  d += inst->system.f;
  return readout(inst->system, c, d);
}

double Store::sample_residual(const std::string& pid) {
  auto inst = find(pid);
  const double r = current_residual(pid);
  const ResidualSample sample{static_cast<double>(now_ms()), r};
  {
    std::lock_guard lock(inst->series_mu);
    if (inst->series.size() >= kSeriesCap) {
      inst->series.erase(inst->series.begin(),
                         inst->series.begin() + kSeriesCap / 2);
    }
    inst->series.push_back(sample);
  }
  inst->events.publish("residual", {{"t", sample.t_ms}, {"r", r}});
  inst->events.publish("analytics", analytics_to_json(analytics(pid)));
  return r;
}

void Store::sample_residuals() {
  std::vector<std::string> pids;
  {
    std::shared_lock lock(mu_);
    for (const auto& [pid, inst] : instances_) pids.push_back(pid);
  }
  for (const auto& pid : pids) {
    try {
      sample_residual(pid);
    } catch (const NotFound&) {
      // deleted between listing and sampling
    }
  }
}

std::vector<ResidualSample> Store::residual_series(const std::string& pid) const {
  auto inst = find(pid);
  std::lock_guard lock(inst->series_mu);
  return inst->series;
}

std::shared_ptr<const EventLog> Store::events(const std::string& pid) const {
  auto inst = find(pid);
  return std::shared_ptr<const EventLog>(inst, &inst->events);
}

// ---------------------------------------------------------------------------
// Persistence

json Store::snapshot_json() const {
  json instances = json::array();
  std::shared_lock lock(mu_);
  for (const auto& [pid, inst] : instances_) {
    json entry;
    {
      std::shared_lock ilock(inst->mu);
      entry["pid"] = pid;
      entry["meta"] = meta_to_json(inst->meta);
      entry["system"] = system_to_json(inst->system);
    }
    entry["c"] = vector_to_json(inst->snapshot_c());
    {
      std::lock_guard wlock(inst->workers_mu);
      json workers = json::array();
      for (const auto& [wid, w] : inst->workers) {
        workers.push_back({{"wid", wid},
                           {"platform", w->platform},
                           {"updates_count", w->updates.load()},
                           {"last_seen", w->last_seen.load()}});
      }
      entry["workers"] = std::move(workers);
      entry["next_worker"] = inst->next_worker;
    }
    {
      std::lock_guard slock(inst->series_mu);
      json series = json::array();
      const std::size_t start = inst->series.size() > kSnapshotSeriesTail
                                    ? inst->series.size() - kSnapshotSeriesTail
                                    : 0;
      for (std::size_t i = start; i < inst->series.size(); ++i) {
        series.push_back({inst->series[i].t_ms, inst->series[i].value});
      }
      entry["series"] = std::move(series);
    }
    instances.push_back(std::move(entry));
  }
  return {{"instances", std::move(instances)}, {"request_ids", request_ids_}};
}

void Store::compact() {
  if (!journal_) return;
  auto guard = journal_->lock();
  journal_->write_snapshot_locked(snapshot_json());
}

void Store::flush() {
  if (!journal_) return;
  bool needs_compaction = false;
  {
    auto guard = journal_->lock();
    needs_compaction = journal_->records_locked() >= options_.compact_after;
  }
  if (needs_compaction) {
    compact();
  } else {
    journal_->flush();
  }
}

void Store::replay(const json& r) {
  const auto op = r.at("op").get<std::string>();
  const auto pid = r.at("pid").get<std::string>();
  if (op == "create") {
    CreateOptions opts;
    opts.rho_filter_default = r.at("rho").get<double>();
    opts.name = r.value("name", std::string{});
    opts.request_id = r.value("request_id", std::string{});
    insert_instance(system_from_json(r.at("system")), opts, pid,
                    r.at("created_at").get<std::int64_t>());
    return;
  }
  std::shared_ptr<Instance> inst;
  {
    std::shared_lock lock(mu_);
    auto it = instances_.find(pid);
    if (it == instances_.end()) return;
    inst = it->second;
  }
  if (op == "delete") {
    std::unique_lock lock(mu_);
    instances_.erase(pid);
    std::erase_if(request_ids_, [&](const auto& kv) { return kv.second == pid; });
  } else if (op == "c") {
    inst->c[r.at("j").get<Eigen::Index>()].store(r.at("v").get<double>());
    auto w = inst->workers.find(r.at("wid").get<std::string>());
    if (w != inst->workers.end()) w->second->updates.fetch_add(1);
  } else if (op == "worker") {
    auto entry = std::make_shared<WorkerEntry>();
    entry->platform = r.at("platform").get<std::string>();
    const auto wid = r.at("wid").get<std::string>();
    inst->workers[wid] = std::move(entry);
    inst->next_worker = std::max<std::uint64_t>(
        inst->next_worker, std::stoull(wid.substr(1)) + 1);
  } else if (op == "obs") {
    const Eigen::VectorXd y = vector_from_json(r.at("y"));
    const auto& spec = inst->system.provenance;
    const auto maps = w_block_maps(spec.kind, spec.rho_obj, y);
    for (std::size_t i = 0; i < inst->system.w_block.size(); ++i) {
      inst->system.maps[inst->system.w_block[i]] = maps[i];
    }
    inst->system.provenance.y = y;
    ++inst->meta.epoch;
  } else if (op == "status") {
    inst->meta.status =
        instance_status_from_string(r.at("status").get<std::string>());
  } else if (op == "rho") {
    inst->meta.rho_filter_default = r.at("rho").get<double>();
    ++inst->meta.epoch;
  }
}

void Store::load() {
  const auto& dir = *options_.data_dir;
  const auto snap_path = dir / kSnapshotFile;
  if (std::filesystem::exists(snap_path)) {
    const json snap = read_json_file(snap_path.string());
    for (const auto& entry : snap.at("instances")) {
      const InstanceMeta meta = meta_from_json(entry.at("meta"));
      CreateOptions opts;
      opts.rho_filter_default = meta.rho_filter_default;
      opts.name = meta.name;
      const auto pid = entry.at("pid").get<std::string>();
      insert_instance(system_from_json(entry.at("system")), opts, pid,
                      meta.created_at);
      auto inst = instances_.at(pid);
      inst->meta = meta;
      const Eigen::VectorXd c = vector_from_json(entry.at("c"));
      for (Eigen::Index j = 0; j < c.size() && j < meta.K; ++j) {
        inst->c[j].store(c[j]);
      }
      for (const auto& w : entry.at("workers")) {
        auto e = std::make_shared<WorkerEntry>();
        e->platform = w.at("platform").get<std::string>();
        e->updates.store(w.at("updates_count").get<std::uint64_t>());
        e->last_seen.store(w.at("last_seen").get<std::int64_t>());
        inst->workers[w.at("wid").get<std::string>()] = std::move(e);
      }
      inst->next_worker = entry.at("next_worker").get<std::uint64_t>();
      for (const auto& s : entry.at("series")) {
        inst->series.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
      }
    }
    request_ids_ =
        snap.at("request_ids").get<std::map<std::string, std::string>>();
  }
  std::ifstream wal(dir / kWalFile);
  std::string line;
  while (std::getline(wal, line)) {
    if (line.empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception&) {
      break;  // torn tail from an interrupted append
    }
    replay(record);
  }
}

// ---------------------------------------------------------------------------

ResidualMonitor::ResidualMonitor(Store& store, std::chrono::milliseconds period)
    : thread_([&store, period](std::stop_token stop) {
        std::mutex mu;
        std::condition_variable_any cv;
        while (!stop.stop_requested()) {
          store.sample_residuals();
          store.flush();
          std::unique_lock lock(mu);
          cv.wait_for(lock, stop, period, [] { return false; });
        }
      }) {}

ResidualMonitor::~ResidualMonitor() = default;

}  // namespace kvopt
