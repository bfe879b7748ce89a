// kvopt command-line front end.
//
//   kvopt gen --kind lasso --seed 3 -o problem.json
//   kvopt compile problem.json -o system.json
//   kvopt solve-local system.json --rho 0.5 --p 0.25 --state state.json
//   kvopt readout system.json --state state.json -o x.json
//   kvopt verify problem.json x.json
//   kvopt serve --port 8080
//   kvopt create --endpoint http://127.0.0.1:8080 system.json
//   kvopt work --endpoint http://127.0.0.1:8080 --pid P --n-workers 4

#include <atomic>
#include <chrono>
#include <csignal>
#include <cmath>
#include <fstream>
#include <iostream>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "kvopt/compiler.hpp"
#include "kvopt/error.hpp"
#include "kvopt/instance_gen.hpp"
#include "kvopt/serialize.hpp"
#include "kvopt/server.hpp"
#include "kvopt/solvers.hpp"
#include "kvopt/verify.hpp"
#include "kvopt/worker.hpp"

using namespace kvopt;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted.store(true); }

void emit(const json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json_file(path, j);
  }
}

// Accepts either a problem file or a system file (uses its provenance).
ProblemSpec load_problem(const std::string& path) {
  const json j = read_json_file(path);
  if (j.contains("provenance")) return problem_from_json(j.at("provenance"));
  return problem_from_json(j);
}

Eigen::VectorXd load_vector(const std::string& path, const char* key) {
  const json j = read_json_file(path);
  if (j.is_array()) return vector_from_json(j);
  return vector_from_json(j.at(key));
}

IncrementalState load_state(const std::string& path) {
  const json j = read_json_file(path);
  return {vector_from_json(j.at("c")), vector_from_json(j.at("d"))};
}

json readout_json(const ReducedSystem& sys, const Readout& ro, double r,
                  bool round_plaintext) {
  Eigen::VectorXd x = ro.x_hat;
  if (round_plaintext) x = x.array().round();
  return {{"x", vector_to_json(x)}, {"w", vector_to_json(ro.w_hat)},
          {"residual", r}, {"kind", std::string(to_string(sys.provenance.kind))}};
}

struct SolveArgs {
  std::string system_path;
  std::string solver = "incremental";
  bool unfiltered = false;
  double rho = 0.5;
  double p = 1.0;
  double epsilon = 1e-8;
  long max_sweeps = 20000;
  std::uint64_t seed = 0;
  std::string state_out;
  std::string trace_out;
};

void add_solve_options(CLI::App* cmd, SolveArgs& a) {
  cmd->add_option("system", a.system_path, "System file")->required();
  cmd->add_option("--solver", a.solver, "iterative | incremental")
      ->check(CLI::IsMember({"iterative", "incremental"}));
  cmd->add_flag("--unfiltered", a.unfiltered, "Use rho = 1");
  cmd->add_option("--rho", a.rho, "Filter parameter in (0, 1]");
  cmd->add_option("--p", a.p, "Bernoulli gating probability in (0, 1]");
  cmd->add_option("--eps", a.epsilon, "Residual tolerance");
  cmd->add_option("--max-sweeps", a.max_sweeps, "Sweep budget");
  cmd->add_option("--seed", a.seed, "RNG seed");
}

SolveTrace solve(const SolveArgs& a, ReducedSystem& sys) {
  sys = system_from_json(read_json_file(a.system_path));
  SolverConfig cfg;
  cfg.solver = solver_type_from_string(a.solver);
  cfg.filtered = !a.unfiltered;
  cfg.rho_filter = a.rho;
  cfg.p = a.p;
  cfg.epsilon = a.epsilon;
  cfg.max_sweeps = a.max_sweeps;
  cfg.seed = a.seed;
  return run(sys, cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asynchronous fixed-point optimization over a key-value store"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a random problem instance");
  std::string gen_kind = "lasso", gen_out, gen_truth;
  std::uint64_t gen_seed = 0;
  std::optional<Eigen::Index> gen_m, gen_n, gen_k;
  std::optional<double> gen_noise, gen_rho, gen_corrupt;
  gen->add_option("--kind", gen_kind)->check(CLI::IsMember({"lasso", "nnls", "ecd"}));
  gen->add_option("--m", gen_m, "Rows of A");
  gen->add_option("--n", gen_n, "Columns of A");
  gen->add_option("--k", gen_k, "Planted support size (lasso)");
  gen->add_option("--corruption", gen_corrupt, "Corrupted fraction (ecd)");
  gen->add_option("--noise", gen_noise, "Dense noise standard deviation");
  gen->add_option("--rho-obj", gen_rho, "Objective scale (lasso)");
  gen->add_option("--seed", gen_seed);
  gen->add_option("-o,--out", gen_out, "Problem file (default stdout)");
  gen->add_option("--truth", gen_truth, "Write the planted solution here");

  // compile
  auto* comp = app.add_subcommand("compile", "Compile a problem into a system file");
  std::string comp_in, comp_out;
  comp->add_option("problem", comp_in)->required();
  comp->add_option("-o,--out", comp_out);

  // solve-local / trace
  auto* solve_cmd = app.add_subcommand("solve-local", "Run a local solver");
  SolveArgs solve_args;
  add_solve_options(solve_cmd, solve_args);
  solve_cmd->add_option("--state", solve_args.state_out, "Write final c, d here");
  solve_cmd->add_option("--trace", solve_args.trace_out, "Write the trace CSV here");
  auto* trace_cmd = app.add_subcommand("trace", "Run a local solver, print the trace CSV");
  SolveArgs trace_args;
  add_solve_options(trace_cmd, trace_args);

  // readout
  auto* ro_cmd = app.add_subcommand("readout", "Recover x from a state or a live instance");
  std::string ro_system, ro_state, ro_endpoint, ro_pid, ro_out;
  bool ro_round = false;
  ro_cmd->add_option("system", ro_system, "System file (local mode)");
  ro_cmd->add_option("--state", ro_state, "State file from solve-local");
  ro_cmd->add_option("--endpoint", ro_endpoint, "Store endpoint (live mode)");
  ro_cmd->add_option("--pid", ro_pid);
  ro_cmd->add_flag("--round", ro_round, "Round x to integers (ecd plaintext)");
  ro_cmd->add_option("-o,--out", ro_out);

  // verify
  auto* ver = app.add_subcommand("verify", "Check optimality; exit 0 iff it passes");
  std::string ver_problem, ver_x;
  double ver_tol = 1e-4;
  ver->add_option("problem", ver_problem, "Problem or system file")->required();
  ver->add_option("x", ver_x, "JSON array or {\"x\": [...]}")->required();
  ver->add_option("--tol", ver_tol);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the coordination store");
  ServerOptions sopts;
  std::string data_dir, static_dir;
  int monitor_ms = 200;
  serve->add_option("--host", sopts.host);
  serve->add_option("--port", sopts.port);
  serve->add_option("--data-dir", data_dir, "Persist instances here");
  serve->add_option("--monitor-ms", monitor_ms, "Residual sampling period");
  serve->add_option("--static", static_dir, "Serve a dashboard build from here");

  // create
  auto* create = app.add_subcommand("create", "Upload a system to a running store");
  std::string cr_endpoint, cr_system, cr_name, cr_request;
  double cr_rho = 0.5;
  create->add_option("--endpoint", cr_endpoint)->required();
  create->add_option("system", cr_system)->required();
  create->add_option("--rho", cr_rho, "Default filter parameter for workers");
  create->add_option("--name", cr_name);
  create->add_option("--request-id", cr_request, "Idempotency key");

  // work
  auto* work = app.add_subcommand("work", "Run uncoordinated workers against an instance");
  WorkerConfig wcfg;
  std::string attach, latency;
  int n_workers = 1;
  double duration_s = 0.0, stop_residual = 0.0;
  std::optional<double> work_rho;
  work->add_option("--endpoint", wcfg.endpoint);
  work->add_option("--pid", wcfg.pid);
  work->add_option("--attach", attach, "Attach URL ({endpoint}/#/attach/{pid})");
  work->add_option("--rho", work_rho, "Override the instance filter parameter");
  work->add_option("--n-workers", n_workers);
  work->add_option("--latency", latency, "Injected delay MIN:MAX in ms");
  work->add_option("--seed", wcfg.seed);
  work->add_option("--platform", wcfg.platform_label);
  work->add_option("--batch", wcfg.batch, "Coordinates per read of c");
  work->add_flag("--row-cache", wcfg.row_cache, "Cache var objects per epoch");
  work->add_option("--duration", duration_s, "Stop after this many seconds");
  work->add_option("--stop-at-residual", stop_residual,
                   "Stop once the server residual drops to this value");

  // observe
  auto* observe = app.add_subcommand("observe", "Push a new observation vector");
  std::string ob_endpoint, ob_pid, ob_y;
  observe->add_option("--endpoint", ob_endpoint)->required();
  observe->add_option("--pid", ob_pid)->required();
  observe->add_option("--y", ob_y, "JSON array, {\"y\": [...]} or a problem file")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      GenParams gp = default_params(problem_kind_from_string(gen_kind));
      gp.seed = gen_seed;
      if (gen_m) gp.m = *gen_m;
      if (gen_n) gp.n = *gen_n;
      if (gen_k) gp.k = *gen_k;
      if (gen_noise) gp.noise_sigma = *gen_noise;
      if (gen_rho) gp.rho_obj = *gen_rho;
      if (gen_corrupt) gp.corruption_fraction = *gen_corrupt;
      const GeneratedInstance inst = gen_instance(gp);
      emit(problem_to_json(inst.spec), gen_out);
      if (!gen_truth.empty()) {
        write_json_file(gen_truth, {{"x", vector_to_json(inst.x_true)},
                                    {"corrupted", inst.corrupted}});
      }
      return 0;
    }

    if (*comp) {
      const ReducedSystem sys = compile(load_problem(comp_in));
      emit(system_to_json(sys), comp_out);
      return 0;
    }

    if (*solve_cmd || *trace_cmd) {
      const SolveArgs& a = *solve_cmd ? solve_args : trace_args;
      ReducedSystem sys;
      const SolveTrace tr = solve(a, sys);
      if (*trace_cmd) {
        write_trace_csv(std::cout, tr, sys);
        return tr.converged ? 0 : 1;
      }
      if (!a.trace_out.empty()) {
        std::ofstream out(a.trace_out);
        write_trace_csv(out, tr, sys);
      }
      const double r = tr.records.back().residual;
      if (!a.state_out.empty()) {
        write_json_file(a.state_out, {{"c", vector_to_json(tr.c)},
                                      {"d", vector_to_json(tr.d)},
                                      {"converged", tr.converged},
                                      {"sweeps", tr.sweeps_used},
                                      {"residual", r}});
      }
      std::cerr << (tr.converged ? "converged" : "not converged") << " after "
                << tr.sweeps_used << " sweeps, residual " << r << '\n';
      if (a.state_out.empty()) {
        emit(readout_json(sys, readout(sys, tr.c, tr.d), r, false), "-");
      }
      return tr.converged ? 0 : 1;
    }

    if (*ro_cmd) {
      if (!ro_endpoint.empty()) {
        if (ro_pid.empty()) throw InvalidArgument("--pid is required with --endpoint");
        StoreClient client(ro_endpoint);
        double r = 0.0;
        const Readout ro = client.readout(ro_pid, &r);
        Eigen::VectorXd x = ro_round ? Eigen::VectorXd(ro.x_hat.array().round()) : ro.x_hat;
        emit({{"x", vector_to_json(x)}, {"w", vector_to_json(ro.w_hat)}, {"residual", r}},
             ro_out);
        return 0;
      }
      if (ro_system.empty() || ro_state.empty()) {
        throw InvalidArgument("readout needs a system file and --state, or --endpoint/--pid");
      }
      const ReducedSystem sys = system_from_json(read_json_file(ro_system));
      const IncrementalState st = load_state(ro_state);
      emit(readout_json(sys, readout(sys, st.c, st.d), residual(sys, st.c, st.d),
                        ro_round),
           ro_out);
      return 0;
    }

    if (*ver) {
      const ProblemSpec spec = load_problem(ver_problem);
      const VerifyReport rep = verify_optimality(spec, load_vector(ver_x, "x"), ver_tol);
      std::cout << (rep.pass ? "PASS " : "FAIL ") << rep.detail << '\n';
      return rep.pass ? 0 : 1;
    }

    if (*serve) {
      StoreOptions store_opts;
      if (!data_dir.empty()) store_opts.data_dir = data_dir;
      Store store(store_opts);
      sopts.monitor_period = std::chrono::milliseconds(monitor_ms);
      if (!static_dir.empty()) sopts.static_dir = static_dir;
      Server server(store, sopts);
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.start();
      std::cerr << "serving on " << server.endpoint() << '\n';
      while (!g_interrupted.load()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
      }
      server.stop();
      return 0;
    }

    if (*create) {
      const ReducedSystem sys = system_from_json(read_json_file(cr_system));
      StoreClient client(cr_endpoint);
      CreateOptions opts;
      opts.rho_filter_default = cr_rho;
      opts.name = cr_name;
      opts.request_id = cr_request;
      const std::string pid = client.create_problem(sys, opts);
      std::cout << json{{"pid", pid}, {"attach", attach_url(cr_endpoint, pid)}}.dump()
                << '\n';
      return 0;
    }

    if (*work) {
      if (!attach.empty()) {
        const AttachTarget t = parse_attach_url(attach);
        wcfg.endpoint = t.endpoint;
        wcfg.pid = t.pid;
      }
      if (wcfg.endpoint.empty() || wcfg.pid.empty()) {
        throw InvalidArgument("work needs --endpoint and --pid, or --attach");
      }
      wcfg.rho = work_rho;
      if (!latency.empty()) wcfg.latency_ms = parse_latency(latency);
      wcfg.validate();
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);

      std::vector<WorkerStatsCounters> stats(static_cast<std::size_t>(n_workers));
      std::vector<std::jthread> threads;
      std::atomic<int> finished{0};
      for (int i = 0; i < n_workers; ++i) {
        WorkerConfig c = wcfg;
        c.seed = wcfg.seed * 1000003ULL + static_cast<std::uint64_t>(i);
        threads.emplace_back([c, &stats, i, &finished](std::stop_token st) {
          worker_loop(c, st, &stats[static_cast<std::size_t>(i)]);
          finished.fetch_add(1);
        });
      }
      StoreClient monitor(wcfg.endpoint);
      const auto start = std::chrono::steady_clock::now();
      while (!g_interrupted.load() && finished.load() < n_workers) {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
        const double elapsed = std::chrono::duration<double>(
                                   std::chrono::steady_clock::now() - start)
                                   .count();
        if (duration_s > 0.0 && elapsed >= duration_s) break;
        if (stop_residual > 0.0) {
          double r = 0.0;
          try {
            monitor.readout(wcfg.pid, &r);
          } catch (const TransportError&) {
            continue;
          } catch (const NotFound&) {
            break;
          }
          if (r <= stop_residual) break;
        }
      }
      for (auto& t : threads) t.request_stop();
      threads.clear();
      std::uint64_t writes = 0;
      for (const auto& s : stats) writes += s.writes.load();
      std::cerr << n_workers << " workers stopped after " << writes
                << " acknowledged writes\n";
      return 0;
    }

    if (*observe) {
      const json j = read_json_file(ob_y);
      Eigen::VectorXd y;
      if (j.is_array()) {
        y = vector_from_json(j);
      } else if (j.contains("A")) {
        y = problem_from_json(j).y;
      } else {
        y = vector_from_json(j.at("y"));
      }
      StoreClient(ob_endpoint).apply_observation(ob_pid, y);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
