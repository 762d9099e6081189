// quadmpc: run scenarios, plot logs, run the acceptance sweep.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "quad_mpc/acceptance.hpp"
#include "quad_mpc/log_io.hpp"
#include "quad_mpc/scenario_config.hpp"
#include "quad_mpc/sim_harness.hpp"

namespace fs = std::filesystem;
using namespace quad_mpc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitConfig = 3;

int cmd_run(const std::string& scenario, const std::vector<std::string>& overrides, std::string output,
            bool no_timing) {
  ScenarioFile file;
  try {
    if (!scenario.empty()) file = load_scenario(scenario);
    for (const auto& o : overrides) apply_override(file, o);
    file.config.validate();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UnknownGait& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  if (output.empty()) output = file.output_dir.empty() ? "out/" + file.config.name : file.output_dir;
  fs::create_directories(output);

  const SimLog log = run_scenario(file.config);
  {
    std::ofstream csv(fs::path(output) / "log.csv");
    write_csv(csv, log, CsvOptions{!no_timing});
  }
  {
    std::ofstream summary(fs::path(output) / "summary.txt");
    write_summary(summary, file.config, log);
  }
  write_summary(std::cout, file.config, log);
  std::cout << "wrote " << (fs::path(output) / "log.csv").string() << '\n';

  if (log.diverged) {
    std::cerr << "simulation diverged at t=" << log.divergence_time << " s: " << log.divergence_reason << '\n';
    return kExitDiverged;
  }
  return kExitOk;
}

int cmd_plot(const std::string& log_path, const std::string& figure, std::string output) {
  try {
    const CsvTable table = CsvTable::read_file(log_path);
    const auto panels = figure_panels(table, figure);
    if (output.empty()) output = (fs::path(log_path).parent_path() / (figure + ".svg")).string();
    std::ofstream out(output);
    if (!out) throw Error("cannot write '" + output + "'");
    write_svg(out, panels);
    std::cout << "wrote " << output << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "plot: " << e.what() << '\n';
    return kExitFailure;
  }
}

int cmd_accept(const std::string& only, const std::vector<std::string>& overrides) {
  try {
    return acceptance::run_all(std::cout, only, overrides) ? kExitOk : kExitFailure;
  } catch (const ConfigError& e) {
    std::cerr << "accept: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convex MPC for a quadruped on a single-rigid-body plant"};
  app.require_subcommand(1);

  std::string scenario, output;
  std::vector<std::string> overrides;
  bool no_timing = false;
  auto* run = app.add_subcommand("run", "Simulate a scenario and write log.csv and summary.txt");
  run->add_option("--scenario", scenario, "Scenario file (defaults apply when omitted)");
  run->add_option("--set", overrides, "Override a setting, key=value (repeatable)")->take_all();
  run->add_option("--output", output, "Output directory");
  run->add_flag("--no-timing", no_timing, "Write qp_ms as 0 for byte-identical logs");

  std::string log_path, figure, plot_out;
  auto* plot = app.add_subcommand("plot", "Render a figure from a log as SVG");
  plot->add_option("log", log_path, "Path to log.csv")->required();
  plot->add_option("figure", figure, "grf_z | states | top_view")->required();
  plot->add_option("--output", plot_out, "SVG path (default: next to the log)");

  std::string only;
  std::vector<std::string> accept_overrides;
  auto* accept = app.add_subcommand("accept", "Run the acceptance criteria");
  accept->add_option("--only", only, "Run a single criterion by name");
  accept->add_option("--set", accept_overrides, "Override applied to every scenario run")->take_all();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (*run) return cmd_run(scenario, overrides, output, no_timing);
  if (*plot) return cmd_plot(log_path, figure, plot_out);
  if (*accept) return cmd_accept(only, accept_overrides);
  return kExitFailure;
}
