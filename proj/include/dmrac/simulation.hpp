#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>

#include "dmrac/adaptive_law.hpp"
#include "dmrac/bounds.hpp"
#include "dmrac/deepnet.hpp"
#include "dmrac/plant.hpp"
#include "dmrac/replay_buffer.hpp"
#include "dmrac/trace.hpp"

namespace dmrac {

enum class Mode { DmracAdaptive, DmracFrozen, MracFixedBasis, NoAdaptation };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view name);

struct DmracConfig {
  double dt = 0.05;
  double T = 150.0;
  double eta = 0.01;
  double zeta_tol = 0.2;
  std::size_t p_max = 250;
  std::size_t minibatch = 8;
  // Control steps between training rounds; 0 disables training.
  std::size_t train_every = 50;
  std::size_t epochs_per_round = 10;
  double noise_variance = 0.01;
  Mode mode = Mode::DmracAdaptive;
  std::uint64_t seed = 42;
  double w_bound = 100.0;
  double eps_proj = 0.1;
  // Initial plant and reference state; empty means zero.
  Vec x0;
  // Operating-box half widths; the run aborts once |x_i| > 10 * domain_i.
  // Empty disables the check.
  Vec domain;
  // Fixed-basis MRAC only: integrate plant, reference model and W jointly by
  // RK4 instead of holding the control and Euler-stepping W at dt.
  bool continuous_adaptation = false;
  bool record_weights = false;
  bool parallel_trainer = false;
  bool check_snapshots = false;

  std::size_t steps() const;
  void validate() const;
};

/// The fixed pieces of a closed loop: plant, reference model, gains, command.
struct ClosedLoop {
  PlantModel plant;
  ReferenceModel ref;
  GainSet gains;
  ReferenceSignal signal;
};

struct EpisodeResult {
  SimTrace trace;
  FeatureNetwork net;  // trained inner layers, output layer = final W
  ReplayBuffer buffer;
};

/// Features for the fixed-basis baseline: a named basis or the (frozen)
/// hidden layers of a network.
using BasisSpec = std::variant<BasisId, FeatureNetwork>;

/// Full dual time-scale loop: pointwise outer-weight adaptation, generative
/// targets into the replay buffer, periodic mini-batch retraining of the
/// hidden layers followed by a feature swap.
EpisodeResult run_episode(const DmracConfig& config, const ClosedLoop& loop,
                          const FeatureNetwork& net, Rng& rng);

/// nu_ad = theta_n^T Phi(x) from a trained network; nothing adapts.
SimTrace run_frozen(const DmracConfig& config, const ClosedLoop& loop,
                    const FeatureNetwork& net, Rng& rng);

/// Classic MRAC over a fixed basis (mode MracFixedBasis) or no adaptive
/// term at all (mode NoAdaptation).
SimTrace run_baseline(const DmracConfig& config, const ClosedLoop& loop, const BasisSpec& basis,
                      Rng& rng);

struct EpisodeSummary {
  double rms_e = 0.0;
  double rms_e_final = 0.0;  // last quarter of the rows
  double max_e = 0.0;
  double uub_radius = 0.0;
  double fraction_inside = 0.0;
  std::size_t final_buffer_size = 0;
  std::size_t admitted = 0;
  std::size_t rejected = 0;
};

EpisodeSummary summarize(const SimTrace& trace, double uub_radius);

/// Known-basis data for the Lyapunov monitor, when the plant has one.
std::optional<StructuredData> structured_data(const ClosedLoop& loop);

}  // namespace dmrac
