#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dmrac/deepnet.hpp"
#include "dmrac/plant.hpp"
#include "dmrac/simulation.hpp"

namespace dmrac {

/// Either explicit K / K_r, or the second-order shorthand (omega_n, zeta) for
/// a double-integrator axis. K empty selects the shorthand.
struct GainSpec {
  Mat K;
  Mat K_r;
  double omega_n = 4.0;
  double zeta = 0.5;
  double gamma_scale = 0.5;  // Gamma = gamma_scale * I
  Mat Q;
};

struct NetworkSpec {
  std::vector<Eigen::Index> hidden{20, 10};  // last entry is k
  std::uint64_t init_seed = 7;
};

struct BoundSpec {
  std::optional<double> eps_bar;
  double e_norm = 0.0;
  std::optional<double> eps;
  std::optional<double> delta;
  std::uint64_t k_bits = 0;
  std::uint64_t n_weights = 0;
};

struct OutputSpec {
  std::string trace;
  std::string summary;
};

struct ScenarioConfig {
  std::string name = "custom";
  Mat A;
  Mat B;
  GainSpec gains;
  UncertaintySpec uncertainty;
  ReferenceSignal reference;
  // Shifted task for retention runs; no components means none.
  ReferenceSignal evaluation;
  NetworkSpec network;
  BasisId baseline_basis = BasisId::Linear;
  DmracConfig dmrac;
  BoundSpec bounds;
  OutputSpec output;

  friend bool operator==(const ScenarioConfig& a, const ScenarioConfig& b);
};

std::vector<std::string_view> builtin_scenario_names();

/// Throws ValidationError for an unknown name.
ScenarioConfig builtin_scenario(std::string_view name);

/// Flat sectioned key-value text. [scenario] name selects the built-in that
/// supplies every default; remaining keys override it. Throws ParseError for
/// malformed text or values and ValidationError for unknown keys or a
/// configuration that does not resolve to a stable closed loop.
ScenarioConfig parse_config(std::string_view text);
ScenarioConfig load_config(const std::filesystem::path& path);

/// Every field written explicitly, floats with 17 significant digits.
std::string serialize_config(const ScenarioConfig& cfg);

/// Feature dimension the adaptive law sees in the configured mode.
Eigen::Index adaptive_feature_dim(const ScenarioConfig& cfg);

/// Closed loop on the training reference, or on the evaluation reference.
ClosedLoop make_closed_loop(const ScenarioConfig& cfg, bool evaluation = false);

/// Freshly initialized network from network.init_seed.
FeatureNetwork initial_network(const ScenarioConfig& cfg);

/// Throws ValidationError naming the violated constraint.
void validate(const ScenarioConfig& cfg);

struct RunOutput {
  SimTrace trace;
  std::optional<FeatureNetwork> net;   // dmrac-adaptive only
  std::optional<ReplayBuffer> buffer;  // dmrac-adaptive only
};

/// Runs the configured mode with an rng seeded from dmrac.seed. `net` seeds
/// dmrac-adaptive (default: initial_network) and is required by dmrac-frozen.
RunOutput run_configured(const ScenarioConfig& cfg, bool evaluation = false,
                         const std::optional<FeatureNetwork>& net = std::nullopt);

}  // namespace dmrac
