#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dmrac/numerics.hpp"
#include "dmrac/trace.hpp"

namespace dmrac {

/// Radius outside of which the Lyapunov derivative is negative:
/// 2 lambda_max(P) eps_bar / lambda_min(Q).
double uub_radius(const Mat& p, const Mat& q, double eps_bar);

/// Largest admissible generalization error for a given tracking error norm:
/// lambda_max(Q) ||e|| / lambda_min(P).
double generalization_tolerance(const Mat& p, const Mat& q, double e_norm);

/// ceil((k N ln 2 + ln(2 / delta)) / eps^2)
std::uint64_t sample_complexity(double eps, double delta, std::uint64_t k_bits,
                                std::uint64_t n_weights);

/// e^T P e + tr(W~^T Gamma^-1 W~) / 2, or e^T P e when W~ is absent.
double lyapunov_value(const Vec& e, const std::optional<Mat>& w_tilde, const Mat& p,
                      const Mat& gamma);

/// Known-basis scenario data needed by the Lyapunov derivative monitor.
struct StructuredData {
  Mat w_star;
  // Weight metric of the Lyapunov candidate. For the update
  // dW/dt = Gamma Phi e^T P B the cross terms cancel with Gamma / 2.
  Mat lyapunov_gamma;
};

struct VdotResidual {
  std::vector<double> residual;  // central-difference dV/dt + e^T Q e, rows 1..N-1
  std::vector<double> value;     // V per row
  double max_abs = 0.0;
};

/// Requires a trace recorded with per-row weights.
VdotResidual vdot_residual(const SimTrace& trace, const Mat& p, const Mat& q,
                           const std::optional<StructuredData>& structured);

/// max_i ||delta_true_i - nu_ad_i|| over a calibration trace.
double empirical_eps_bar(const SimTrace& trace);
/// Same estimate from a trace CSV (delta_true* and nu_ad* columns).
double empirical_eps_bar(const CsvTable& table);

struct BoundReport {
  double uub_radius = 0.0;
  double eps_bar = 0.0;
  bool eps_bar_empirical = false;
  double e_norm = 0.0;
  double generalization_tolerance = 0.0;
  std::optional<std::uint64_t> sample_complexity;
  double eps = 0.0;
  double delta = 0.0;
  std::uint64_t k_bits = 0;
  std::uint64_t n_weights = 0;
  double p_lambda_min = 0.0;
  double p_lambda_max = 0.0;
  double q_lambda_min = 0.0;
  double q_lambda_max = 0.0;
};

struct BoundInputs {
  double eps_bar = 0.0;
  bool eps_bar_empirical = false;
  double e_norm = 0.0;
  std::optional<double> eps;
  std::optional<double> delta;
  std::uint64_t k_bits = 0;
  std::uint64_t n_weights = 0;
};

BoundReport make_bound_report(const Mat& p, const Mat& q, const BoundInputs& in);

}  // namespace dmrac
