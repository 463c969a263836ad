#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("dmrac");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("DMRAC_LOG");
  const std::string level = env ? env : "error";
  if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else {
    spdlog::set_level(spdlog::level::err);
  }
}

void add_source(CLI::App* cmd, dmrac::cli::ScenarioSource& src) {
  auto* scenario = cmd->add_option("--scenario", src.scenario,
                                   "Built-in scenario: desk-attitude, structured, retention");
  auto* config = cmd->add_option("--config", src.config_path, "Scenario configuration file");
  scenario->excludes(config);
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  using namespace dmrac::cli;

  CLI::App app{"Deep model reference adaptive control simulation lab"};
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Run one closed-loop episode");
  add_source(simulate, sim.source);
  simulate->add_option("--mode", sim.mode,
                       "dmrac-adaptive, dmrac-frozen, mrac-fixed-basis or no-adaptation");
  simulate->add_option("--seed", sim.seed, "Run seed");
  simulate->add_option("--out", sim.out, "Trace CSV path");
  simulate->add_option("--summary", sim.summary, "Summary JSON path");
  simulate->add_option("--net", sim.net, "Network file to start from (required when frozen)");
  simulate->add_option("--net-out", sim.net_out, "Write the trained network here");
  simulate->add_flag("--parallel-trainer", sim.parallel_trainer,
                     "Train the hidden layers concurrently with the control loop");
  simulate->add_flag("--evaluation", sim.evaluation, "Track the [evaluation] reference");

  BoundsOptions bnd;
  auto* bounds = app.add_subcommand("bounds", "Print the analytic bound report");
  add_source(bounds, bnd.source);
  bounds->add_option("--eps-bar", bnd.eps_bar, "Approximation error bound");
  bounds->add_option("--calibration-trace", bnd.calibration_trace,
                     "Trace CSV from which to estimate eps_bar");
  bounds->add_option("--e-norm", bnd.e_norm, "Tracking error norm for the generalization bound");
  bounds->add_option("--eps", bnd.eps, "Sample-complexity tolerance");
  bounds->add_option("--delta", bnd.delta, "Sample-complexity confidence parameter");
  bounds->add_option("--k-bits", bnd.k_bits, "Bits per weight");
  bounds->add_option("--n-weights", bnd.n_weights, "Number of weights");

  VerifyOptions ver;
  auto* verify = app.add_subcommand("verify", "Run the module invariant suite");
  verify->add_option("--inject-fault", ver.inject_fault, "Deliberately break a module: gradient");

  DumpBufferOptions dump;
  auto* dump_buffer = app.add_subcommand("dump-buffer", "Run DMRAC and write the final buffer");
  add_source(dump_buffer, dump.source);
  dump_buffer->add_option("--seed", dump.seed, "Run seed");
  dump_buffer->add_option("--out", dump.out, "Buffer CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*simulate) return cmd_simulate(sim, std::cout, std::cerr);
  if (*bounds) return cmd_bounds(bnd, std::cout, std::cerr);
  if (*verify) return cmd_verify(ver, std::cout, std::cerr);
  return cmd_dump_buffer(dump, std::cout, std::cerr);
}
