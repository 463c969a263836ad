#include "dmrac/adaptive_law.hpp"

#include <cmath>

namespace dmrac {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::DimensionMismatch, what);
}

}  // namespace

GainSet GainSet::make(const ReferenceModel& ref, Mat k, Mat k_r, Mat gamma, Mat q) {
  if (!is_positive_definite(gamma)) {
    throw Error(ErrorCode::NotPositiveDefinite, "adaptation rate Gamma must be SPD");
  }
  Mat p = solve_lyapunov(ref.A_rm, q);
  return GainSet{std::move(k), std::move(k_r), std::move(gamma), std::move(p), std::move(q)};
}

Vec tracking_error(const Vec& x_rm, const Vec& x) {
  require(x_rm.size() == x.size(), "tracking_error: dimension mismatch");
  return x_rm - x;
}

Vec adaptive_term(const OuterWeights& w, const Vec& phi) {
  require(w.W.rows() == phi.size(), "adaptive_term: W rows must equal feature dimension");
  return w.W.transpose() * phi;
}

Vec total_control(const GainSet& gains, const Vec& x, const Vec& r, const Vec& nu_ad) {
  require(gains.K.cols() == x.size(), "total_control: K columns must equal state dimension");
  require(gains.K_r.cols() == r.size(), "total_control: K_r columns must equal reference dimension");
  require(gains.K.rows() == nu_ad.size() && gains.K_r.rows() == nu_ad.size(),
          "total_control: control dimension");
  return -gains.K * x + gains.K_r * r - nu_ad;
}

Mat raw_update_direction(const Vec& phi, const Vec& e, const Mat& p, const Mat& b) {
  require(p.rows() == e.size() && p.cols() == e.size(), "raw_update_direction: P must be n x n");
  require(b.rows() == e.size(), "raw_update_direction: B must have n rows");
  const Eigen::RowVectorXd epb = e.transpose() * p * b;
  return phi * epb;
}

Mat project(const OuterWeights& w, const Mat& y) {
  require(w.W.rows() == y.rows() && w.W.cols() == y.cols(), "project: W and Y differ in shape");
  if (!std::isfinite(w.bound)) return y;
  const double wb2 = w.bound * w.bound;
  const double denom = w.eps_proj * wb2;
  const double f = (w.W.squaredNorm() - wb2) / denom;
  if (f <= 0.0) return y;
  const Mat grad = (2.0 / denom) * w.W;
  const double outward = (grad.array() * y.array()).sum();
  if (outward <= 0.0) return y;
  return y - f * (outward / grad.squaredNorm()) * grad;
}

OuterWeights outer_step(const OuterWeights& w, const Vec& phi, const Vec& e,
                        const GainSet& gains, const Mat& b, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::ValidationError, "outer_step: dt must be positive");
  require(gains.Gamma.rows() == w.W.rows() && gains.Gamma.cols() == w.W.rows(),
          "outer_step: Gamma must be k x k");
  // With e = x_rm - x and u = ... - nu_ad the error dynamics carry -B W~^T Phi,
  // so the weights descend along -Y for the Lyapunov cross term to cancel.
  const Mat descent = -raw_update_direction(phi, e, gains.P, b);
  OuterWeights next = w;
  next.W = w.W + dt * gains.Gamma * project(w, descent);
  clamp_norm(next.W, w.hard_limit());
  return next;
}

void clamp_norm(Mat& w, double limit) {
  const double norm = w.norm();
  if (!std::isfinite(limit) || norm <= limit) return;
  const Mat raw = w;
  double s = limit / norm;
  // The rescaled norm can round one ulp past the limit; shrink until it does not.
  do {
    w = s * raw;
    s = std::nextafter(s, 0.0);
  } while (w.norm() > limit);
}

}  // namespace dmrac
