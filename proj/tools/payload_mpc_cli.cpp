/*
 Copyright 2025 The payload-mpc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

// Command-line front end: closed-loop simulation, open-loop planning and
// parameter sweeps over a config file.  Exit codes: 0 success, 1 config
// error, 2 run/solver failure.

#include <CLI11.hpp>
#include <filesystem>
#include <future>
#include <iostream>

#include "payload_mpc/config.hpp"

namespace pm = payload_mpc;
namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string reference;  // optional override
  std::string out = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool jitter = false;
};

pm::RepoConfig load_with_overrides(const CommonArgs& args) {
  pm::RepoConfig cfg =
      args.config_path.empty() ? pm::RepoConfig{} : pm::load_config(args.config_path);
  if (!args.reference.empty()) {
    cfg.reference = args.reference;
    cfg.base_dir = ".";  // command-line paths resolve against the working dir
  }
  if (args.seed_set) cfg.sensor.seed = args.seed;
  if (args.jitter) cfg.jitter_dt = true;
  return cfg;
}

int cmd_simulate(const CommonArgs& args) {
  const pm::RepoConfig cfg = load_with_overrides(args);
  const pm::ScenarioConfig sc = pm::build_scenario(cfg);
  fs::create_directories(args.out);
  const pm::EvalResult res = pm::evaluate_scenario(sc, "simulate");
  pm::write_run_log_csv(args.out + "/run_log.csv", res.log);
  pm::write_plan_csv(args.out + "/plan_open_loop.csv", res.open_loop);
  pm::write_metrics_csv(args.out + "/metrics.csv", {res.report});
  {
    auto f = std::ofstream(args.out + "/metrics.txt");
    f << pm::format_metrics_text(res.report);
  }
  pm::write_svg_plot(args.out + "/track.svg", res.log, sc.reference);
  std::cout << pm::format_metrics_text(res.report);
  return 0;
}

int cmd_plan(const CommonArgs& args) {
  const pm::RepoConfig cfg = load_with_overrides(args);
  const pm::ScenarioConfig sc = pm::build_scenario(cfg);
  const pm::LinearModel lin = pm::linearize_hover(sc.nominal_params);
  pm::Planner planner(sc.nominal_params, sc.controller, sc.planner, lin, sc.solver);
  const pm::Vec3 start_uav = sc.reference.positions.front() +
                             pm::Vec3(0.0, 0.0, sc.nominal_params.cable_length);
  const pm::DenseReference plan =
      planner.plan_open_loop(pm::hover_state(sc.nominal_params, start_uav),
                             pm::hover_input(sc.nominal_params), sc.reference);
  fs::create_directories(fs::path(args.out).parent_path().empty()
                             ? fs::path(".")
                             : fs::path(args.out).parent_path());
  pm::write_plan_csv(args.out, plan);
  std::cout << "wrote " << plan.positions.size() << " stages to " << args.out << "\n";
  return 0;
}

pm::SweepGrid parse_grid(const std::string& spec) {
  pm::SweepGrid grid;
  std::vector<std::vector<double>> lists;
  std::string part;
  std::istringstream is(spec);
  while (std::getline(is, part, 'x')) {
    std::vector<double> vals;
    std::istringstream ps(part);
    std::string tok;
    while (std::getline(ps, tok, ',')) {
      if (tok.empty()) continue;
      vals.push_back(pm::cfgdetail::to_double(tok, "--grid"));
    }
    lists.push_back(std::move(vals));
  }
  if (lists.size() != 3 || lists[0].empty() || lists[1].empty() || lists[2].empty())
    throw pm::ConfigError("--grid expects '<masses>x<lengths>x<spacings>', e.g. "
                          "'0.5,1,1.5x1,2,3x2'");
  grid.payload_masses = lists[0];
  grid.cable_lengths = lists[1];
  grid.waypoint_spacings = lists[2];
  return grid;
}

int cmd_sweep(const CommonArgs& args, const std::string& grid_spec) {
  const pm::RepoConfig cfg = load_with_overrides(args);
  const pm::ScenarioConfig base = pm::build_scenario(cfg);
  const pm::SweepGrid grid = parse_grid(grid_spec);
  fs::create_directories(args.out);

  const std::vector<pm::SweepCell> cells = pm::sweep_cells(grid, base);
  struct CellOut {
    pm::MetricsReport report;
    pm::RunLog log;
    bool have_log = false;
  };
  std::vector<std::future<CellOut>> jobs;
  jobs.reserve(cells.size());
  for (const pm::SweepCell& c : cells) {
    jobs.push_back(std::async(std::launch::async, [&c]() {
      CellOut out;
      try {
        pm::EvalResult res = pm::evaluate_scenario(c.scenario, c.name);
        out.report = res.report;
        out.log = std::move(res.log);
        out.have_log = true;
      } catch (const std::exception& e) {
        out.report.name = c.name;
        out.report.ok = false;
        out.report.error = e.what();
        out.report.payload_mass = c.scenario.nominal_params.payload_mass;
        out.report.cable_length = c.scenario.nominal_params.cable_length;
        out.report.waypoint_dt = c.scenario.reference.times.size() > 1
                                     ? c.scenario.reference.times[1] - c.scenario.reference.times[0]
                                     : 0.0;
      }
      return out;
    }));
  }

  std::vector<pm::MetricsReport> reports;
  bool any_failed = false;
  for (size_t i = 0; i < jobs.size(); ++i) {
    CellOut out = jobs[i].get();
    reports.push_back(out.report);
    if (out.have_log)
      pm::write_run_log_csv(args.out + "/cell_" + cells[i].name + ".csv", out.log);
    if (!out.report.ok) any_failed = true;
    std::cout << cells[i].name << ": "
              << (out.report.ok
                      ? "delta_rmse " + pm::fmt9(out.report.delta_percent) + " %"
                      : "failed (" + out.report.error + ")")
              << "\n";
  }
  pm::write_metrics_csv(args.out + "/metrics.csv", reports);
  return any_failed ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cable-suspended payload tracking stack: simulate, plan, sweep"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string grid_spec = "0.5,1,1.5x1,2,3x2";

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", args.config_path, "config file path");
    if (config_required) c->required();
    sub->add_option("--reference", args.reference,
                    "reference override: waypoint CSV path or square:<dt>[x<laps>]");
    sub->add_option("--out", args.out, "output file or directory");
    sub->add_option("--seed", args.seed, "sensor noise seed override")
        ->each([&](const std::string&) { args.seed_set = true; });
    sub->add_flag("--jitter-dt", args.jitter, "enable +-20% control-period jitter");
  };

  CLI::App* sim = app.add_subcommand("simulate", "closed-loop run + metrics");
  add_common(sim, true);
  CLI::App* plan = app.add_subcommand("plan", "open-loop plan over the reference");
  add_common(plan, false);
  CLI::App* sweep = app.add_subcommand("sweep", "grid of closed-loop runs");
  add_common(sweep, true);
  sweep->add_option("--grid", grid_spec, "'<masses>x<lengths>x<spacings>' lists");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed()) return cmd_simulate(args);
    if (plan->parsed()) return cmd_plan(args);
    if (sweep->parsed()) return cmd_sweep(args, grid_spec);
  } catch (const pm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
