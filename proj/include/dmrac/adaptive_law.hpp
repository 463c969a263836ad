#pragma once

#include <limits>

#include "dmrac/numerics.hpp"
#include "dmrac/plant.hpp"

namespace dmrac {

/// Outer-layer weights W (k x m) with the projection bound. An infinite bound
/// disables projection entirely.
struct OuterWeights {
  Mat W;
  double bound = std::numeric_limits<double>::infinity();
  double eps_proj = 0.1;

  /// ||W||_F may never exceed bound * (1 + eps_proj).
  double hard_limit() const { return bound * (1.0 + eps_proj); }
};

struct GainSet {
  Mat K;      // m x n
  Mat K_r;    // m x r
  Mat Gamma;  // k x k, SPD
  Mat P;      // n x n, solves A_rm^T P + P A_rm + Q = 0
  Mat Q;      // n x n, SPD

  /// Solves the Lyapunov equation for the given reference model.
  static GainSet make(const ReferenceModel& ref, Mat k, Mat k_r, Mat gamma, Mat q);
};

/// e = x_rm - x
Vec tracking_error(const Vec& x_rm, const Vec& x);

/// nu_ad = W^T Phi
Vec adaptive_term(const OuterWeights& w, const Vec& phi);

/// u = -K x + K_r r - nu_ad
Vec total_control(const GainSet& gains, const Vec& x, const Vec& r, const Vec& nu_ad);

/// Y = Phi (e^T P B), k x m
Mat raw_update_direction(const Vec& phi, const Vec& e, const Mat& p, const Mat& b);

/// Smooth projection of the update direction Y against the convex function
/// f(W) = (||W||^2 - W_b^2) / (eps W_b^2).
Mat project(const OuterWeights& w, const Mat& y);

/// Explicit Euler step of dW/dt = Gamma proj(W, -Phi e^T P B), followed by a
/// radial clamp to the hard limit if the step overshoots.
OuterWeights outer_step(const OuterWeights& w, const Vec& phi, const Vec& e,
                        const GainSet& gains, const Mat& b, double dt);

/// Radially rescales W onto the Frobenius ball of the given radius when it lies
/// outside; no-op for an infinite radius.
void clamp_norm(Mat& w, double limit);

}  // namespace dmrac
