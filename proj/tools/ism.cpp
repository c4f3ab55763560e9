// Copyright 2026 The ISM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// ism: command-line front end.
//
//   ism solve <instance.json> [--oracle] [--diagnostics] [--timeout S]
//   ism simulate <scenario.json> [--ticks K] [--suggestions file] [--out dir]
//   ism bench optimality|scaling [--config file] --out dir
//   ism export-miqp <instance.json> [--big-m M] [--out file]
//   ism serve [--addr host:port] [--max-sessions N] [--max-suggestion N]
//
// Exit codes: 0 success, 1 solver failure, 2 infeasible, 3 config error,
// 4 timeout.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "ism/ism.hpp"
#include "ism/service.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kFailure = 1, kInfeasible = 2, kConfig = 3, kTimeout = 4 };

int exit_for(ism::SolveStatus s) {
  switch (s) {
    case ism::SolveStatus::Optimal: return kOk;
    case ism::SolveStatus::Infeasible: return kInfeasible;
    case ism::SolveStatus::TimedOut: return kTimeout;
    case ism::SolveStatus::NonConverged: return kFailure;
  }
  return kFailure;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw ism::SchemaError("", "cannot write " + p.string());
  out << text;
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
  } else {
    write_file(out, text);
  }
}

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

int run_solve(const std::string& file, bool oracle, bool diagnostics, double timeout,
              const std::string& out) {
  ism::LoadedInstance loaded = ism::load_instance(file);
  const auto& inst = loaded.instance;
  std::optional<std::chrono::steady_clock::time_point> deadline;
  if (timeout > 0) {
    deadline = std::chrono::steady_clock::now() +
               std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                   std::chrono::duration<double>(timeout));
  }
  if (loaded.ordered) {
    inst.validate();
    ism::QpSolution sol = ism::solve_ordering(inst, loaded.ordering);
    ism::json j = {{"status", ism::to_string(sol.status)},
                   {"ordering", loaded.ordering},
                   {"objective", sol.objective},
                   {"theta_hat", ism::js::from_vector(sol.theta_hat)},
                   {"iterations", sol.iterations},
                   {"kkt",
                    {{"stationarity", sol.residuals.stationarity},
                     {"primal", sol.residuals.primal},
                     {"dual", sol.residuals.dual},
                     {"complementarity", sol.residuals.complementarity}}}};
    emit(j.dump(2) + "\n", out);
    switch (sol.status) {
      case ism::QpStatus::Optimal: return kOk;
      case ism::QpStatus::Infeasible: return kInfeasible;
      case ism::QpStatus::NonConverged: return kFailure;
    }
    return kFailure;
  }
  ism::SolveReport r;
  if (oracle) {
    r = ism::brute_force_oracle(inst, ism::kBruteForceCap, deadline);
  } else {
    ism::BbOptions options;
    options.diagnostics = diagnostics;
    options.deadline = deadline;
    r = ism::solve_bbism(inst, options);
  }
  emit(ism::to_json(r, &inst.theta0).dump(2) + "\n", out);
  return exit_for(r.status);
}

int run_simulate(const std::string& file, std::optional<int> ticks,
                 const std::string& suggestions, const std::string& out) {
  ism::json doc = ism::read_json_file(file);
  ism::Scenario sc = ism::scenario_from_json(doc);
  if (!suggestions.empty()) {
    ism::json s = ism::read_json_file(suggestions);
    const ism::json& list = s.is_object() ? ism::js::at(s, "", "suggestions") : s;
    const std::string base = s.is_object() ? "/suggestions" : "";
    ism::js::array(list, base);
    sc.suggestions.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      sc.suggestions.push_back(ism::suggestion_from_json(list[i], ism::js::child(base, i),
                                                         sc.robots.size(), sc.solver));
    }
    sc.validate();
  }
  if (ticks) {
    if (*ticks < 0) throw ism::SchemaError("--ticks", "must be >= 0");
    sc.ticks = *ticks;
  }
  ism::Simulation sim(sc);
  sim.advance(sc.ticks);
  if (out.empty()) {
    std::cout << sim.log_json().dump(2) << "\n";
  } else {
    fs::create_directories(out);
    write_file(fs::path(out) / "trajectory.csv", sim.trajectory_csv());
    write_file(fs::path(out) / "theta.csv", sim.theta_csv());
    write_file(fs::path(out) / "log.json", sim.log_json().dump(2) + "\n");
  }
  return kOk;
}

int run_bench(const std::string& kind, const std::string& config, const std::string& out) {
  ism::BenchConfig cfg;
  if (!config.empty()) cfg = ism::bench_config_from_json(ism::read_json_file(config));
  fs::create_directories(out);
  ism::Table table;
  ism::json plot;
  bool timed_out = false;
  if (kind == "optimality") {
    table = ism::run_optimality(cfg);
    std::vector<std::string> cols{"bb_deviation", "oracle_deviation"};
    for (int z : cfg.rs_samples) cols.push_back("rs" + std::to_string(z) + "_deviation");
    plot = ism::plot_data(table, "robots", cols);
    const auto st = table.column("status");
    for (const auto& row : table.rows) timed_out |= row[st] == "TimedOut";
  } else {
    table = ism::run_scaling(cfg);
    plot = ism::plot_data(table, "robots",
                          {"bb_time_s", "oracle_time_s", "bb_solves", "oracle_solves",
                           "bb_peak_live_nodes", "oracle_peak_live_nodes"});
    const auto b = table.column("bb_status"), o = table.column("oracle_status");
    for (const auto& row : table.rows) timed_out |= row[b] == "TimedOut" || row[o] == "TimedOut";
  }
  write_file(fs::path(out) / (kind + ".csv"), table.csv());
  write_file(fs::path(out) / (kind + "_series.json"), plot.dump(2) + "\n");
  return timed_out ? kTimeout : kOk;
}

int run_export(const std::string& file, std::optional<double> big_m, const std::string& out) {
  ism::LoadedInstance loaded = ism::load_instance(file);
  emit(ism::export_miqp(loaded.instance, big_m).text, out);
  return kOk;
}

int run_serve(const std::string& addr, ism::ServiceConfig cfg) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw ism::SchemaError("--addr", "expected host:port");
  cfg.address = addr.substr(0, colon);
  try {
    const int port = std::stoi(addr.substr(colon + 1));
    if (port < 0 || port > 65535) throw std::out_of_range("port");
    cfg.port = static_cast<unsigned short>(port);
  } catch (const std::exception&) {
    throw ism::SchemaError("--addr", "invalid port");
  }
  ism::Service svc(cfg);
  const auto port = svc.start();
  std::cerr << "listening on " << cfg.address << ":" << port << std::endl;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  svc.stop();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverse submodular maximization tools"};
  app.require_subcommand(1);

  std::string file, out, suggestions, config, kind;
  bool oracle = false, diagnostics = false;
  double timeout = 0;
  std::optional<int> ticks;
  std::optional<double> big_m;

  auto* solve = app.add_subcommand("solve", "Recover a parameter from an instance");
  solve->add_option("instance", file, "Instance JSON")->required();
  solve->add_flag("--oracle", oracle, "Enumerate every ordering instead of branch and bound");
  solve->add_flag("--diagnostics", diagnostics, "Record the search tree and prunes");
  solve->add_option("--timeout", timeout, "Seconds before giving up (0 = none)");
  solve->add_option("--out", out, "Write the report here instead of stdout");

  auto* simulate = app.add_subcommand("simulate", "Run a coverage scenario");
  simulate->add_option("scenario", file, "Scenario JSON")->required();
  simulate->add_option("--ticks", ticks, "Override the episode length");
  simulate->add_option("--suggestions", suggestions, "JSON list of suggestion events");
  simulate->add_option("--out", out, "Directory for trajectory.csv, theta.csv, log.json");

  auto* bench = app.add_subcommand("bench", "Experiment tables");
  bench->add_option("kind", kind, "optimality or scaling")
      ->required()
      ->check(CLI::IsMember({"optimality", "scaling"}));
  bench->add_option("--config", config, "Bench config JSON");
  bench->add_option("--out", out, "Output directory")->required();

  auto* exp = app.add_subcommand("export-miqp", "Write the big-M mixed-integer formulation");
  exp->add_option("instance", file, "Instance JSON")->required();
  exp->add_option("--big-m", big_m, "Override the big-M constant");
  exp->add_option("--out", out, "Write the LP file here instead of stdout");

  std::string addr = "127.0.0.1:8080";
  ism::ServiceConfig scfg;
  std::size_t max_sessions = scfg.max_sessions, max_suggestion = scfg.max_suggestion_size;
  int heartbeat_ms = static_cast<int>(scfg.heartbeat.count());
  auto* serve = app.add_subcommand("serve", "Run the HTTP/WebSocket service");
  serve->add_option("--addr", addr, "host:port")->envname("ISM_ADDR");
  serve->add_option("--max-sessions", max_sessions)->envname("ISM_MAX_SESSIONS");
  serve->add_option("--max-suggestion", max_suggestion, "Largest suggestion accepted")
      ->envname("ISM_MAX_SUGGESTION");
  serve->add_option("--max-advance", scfg.max_advance_ticks)->envname("ISM_MAX_ADVANCE");
  serve->add_option("--heartbeat-ms", heartbeat_ms)->envname("ISM_HEARTBEAT_MS");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*solve) return run_solve(file, oracle, diagnostics, timeout, out);
    if (*simulate) return run_simulate(file, ticks, suggestions, out);
    if (*bench) return run_bench(kind, config, out);
    if (*exp) return run_export(file, big_m, out);
    if (*serve) {
      scfg.max_sessions = max_sessions;
      scfg.max_suggestion_size = max_suggestion;
      scfg.heartbeat = std::chrono::milliseconds(heartbeat_ms);
      return run_serve(addr, scfg);
    }
  } catch (const ism::SchemaError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const ism::ContractViolation& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const ism::CapExceeded& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const ism::DegenerateActions& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
