#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace dmrac::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitDivergence = 2;
inline constexpr int kExitIo = 3;

struct ScenarioSource {
  std::string scenario;     // built-in name
  std::string config_path;  // takes precedence when set
};

struct SimulateOptions {
  ScenarioSource source;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::string out;      // trace CSV; empty falls back to [output] trace
  std::string summary;  // summary JSON; empty falls back to [output] summary
  std::string net;      // network to start from / run frozen
  std::string net_out;  // trained network destination
  bool parallel_trainer = false;
  bool evaluation = false;  // run on the [evaluation] reference
};

struct BoundsOptions {
  ScenarioSource source;
  std::optional<double> eps_bar;
  std::string calibration_trace;
  std::optional<double> e_norm;
  std::optional<double> eps;
  std::optional<double> delta;
  std::optional<std::uint64_t> k_bits;
  std::optional<std::uint64_t> n_weights;
};

struct VerifyOptions {
  std::string inject_fault;  // "gradient" or empty
};

struct DumpBufferOptions {
  ScenarioSource source;
  std::optional<std::uint64_t> seed;
  std::string out;  // empty writes to the output stream
};

int cmd_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err);
int cmd_bounds(const BoundsOptions& opt, std::ostream& out, std::ostream& err);
int cmd_verify(const VerifyOptions& opt, std::ostream& out, std::ostream& err);
int cmd_dump_buffer(const DumpBufferOptions& opt, std::ostream& out, std::ostream& err);

}  // namespace dmrac::cli
