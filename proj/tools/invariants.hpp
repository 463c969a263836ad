#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dmrac/config.hpp"
#include "dmrac/deepnet.hpp"
#include "dmrac/replay_buffer.hpp"

namespace dmrac::check {

struct Result {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Check {
  std::string name;
  std::function<Result()> run;
};

// Independent oracles ---------------------------------------------------------

/// Row-major vectorization of A^T P + P A = -Q solved by full-pivot QR.
Mat lyapunov_oracle(const Mat& a_rm, const Mat& q);

/// Random Hurwitz matrix of size n and random SPD Q.
Mat random_hurwitz(Eigen::Index n, Rng& rng);
Mat random_spd(Eigen::Index n, Rng& rng);

/// Central differences of batch_loss with respect to every parameter, laid out
/// like NetworkGradient.
NetworkGradient finite_difference_gradient(const FeatureNetwork& net, const TrainBatch& batch,
                                           double h = 1e-6);

/// max over entries of |g - fd| / max(1, |g|)
double gradient_relative_error(const NetworkGradient& g, const NetworkGradient& fd);

FeatureNetwork random_network(Rng& rng, int max_hidden_layers, int max_width, Eigen::Index n,
                              Eigen::Index m);

/// Index whose removal maximizes sigma_min (JacobiSVD), lowest index on ties.
std::size_t brute_force_eviction(const std::vector<Vec>& features);

// Criterion-sized checks --------------------------------------------------------

Result lyapunov_solver(int systems, std::uint64_t seed);
Result gradient_fidelity(int nets, std::uint64_t seed);
Result buffer_capacity_and_separation(std::size_t insertions, std::uint64_t seed);
Result eviction_oracle(int buffers, std::uint64_t seed);
Result projection_boundedness(int sequences, std::uint64_t seed);
Result bound_calculators(std::uint64_t seed);

struct StructuredStats {
  double max_v_increase = 0.0;
  double rms_final = 0.0;
  double max_vdot_residual = 0.0;
};
StructuredStats structured_stats(const ScenarioConfig& cfg);
Result structured_stability();
Result uub_consistency(double eps_bar);
Result dmrac_efficacy();
Result retention();
Result determinism(const std::vector<std::string>& scenarios);

/// Full module invariant suite run by `verify`.
std::vector<Check> module_invariants();

}  // namespace dmrac::check
