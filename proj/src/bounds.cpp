#include "dmrac/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace dmrac {

namespace {

EigBounds<double> spd_bounds(const Mat& s, const char* name) {
  if (s.rows() != s.cols()) throw Error(ErrorCode::DimensionMismatch, std::string(name) + " must be square");
  if (!is_symmetric(s)) throw Error(ErrorCode::NotPositiveDefinite, std::string(name) + " is not symmetric");
  const auto b = sym_eig_bounds(s);
  if (!(b.min > 0.0)) throw Error(ErrorCode::NotPositiveDefinite, std::string(name) + " is not positive definite");
  return b;
}

}  // namespace

double uub_radius(const Mat& p, const Mat& q, double eps_bar) {
  if (!(eps_bar >= 0.0)) throw Error(ErrorCode::InvalidTolerance, "eps_bar must be >= 0");
  const auto pb = spd_bounds(p, "P");
  const auto qb = spd_bounds(q, "Q");
  return 2.0 * pb.max * eps_bar / qb.min;
}

double generalization_tolerance(const Mat& p, const Mat& q, double e_norm) {
  if (!(e_norm >= 0.0)) throw Error(ErrorCode::InvalidTolerance, "e_norm must be >= 0");
  const auto pb = spd_bounds(p, "P");
  const auto qb = spd_bounds(q, "Q");
  return qb.max * e_norm / pb.min;
}

std::uint64_t sample_complexity(double eps, double delta, std::uint64_t k_bits,
                                std::uint64_t n_weights) {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw Error(ErrorCode::InvalidTolerance, "eps must be positive");
  }
  if (!(delta > 0.0 && delta <= 2.0)) {
    throw Error(ErrorCode::InvalidConfidence, "delta must lie in (0, 2]");
  }
  const double bits = static_cast<double>(k_bits) * static_cast<double>(n_weights);
  const double m = (bits * std::log(2.0) + std::log(2.0 / delta)) / (eps * eps);
  return static_cast<std::uint64_t>(std::ceil(m));
}

double lyapunov_value(const Vec& e, const std::optional<Mat>& w_tilde, const Mat& p,
                      const Mat& gamma) {
  if (p.rows() != e.size() || p.cols() != e.size()) {
    throw Error(ErrorCode::DimensionMismatch, "lyapunov_value: P must be n x n");
  }
  if (!is_positive_definite(p)) throw Error(ErrorCode::NotPositiveDefinite, "lyapunov_value: P");
  double v = e.dot(p * e);
  if (w_tilde) {
    if (gamma.rows() != w_tilde->rows() || gamma.cols() != w_tilde->rows()) {
      throw Error(ErrorCode::DimensionMismatch, "lyapunov_value: Gamma must be k x k");
    }
    Eigen::LLT<Mat> llt(gamma);
    if (llt.info() != Eigen::Success || !is_symmetric(gamma)) {
      throw Error(ErrorCode::NotPositiveDefinite, "lyapunov_value: Gamma");
    }
    v += (w_tilde->transpose() * llt.solve(*w_tilde)).trace() / 2.0;
  }
  return v;
}

VdotResidual vdot_residual(const SimTrace& trace, const Mat& p, const Mat& q,
                           const std::optional<StructuredData>& structured) {
  if (!structured) {
    throw Error(ErrorCode::UnstructuredScenario, "vdot_residual needs a known ideal weight matrix");
  }
  if (trace.rows.empty()) throw Error(ErrorCode::EmptyTrace, "vdot_residual: empty trace");
  if (trace.weights.size() != trace.rows.size()) {
    throw Error(ErrorCode::UnstructuredScenario, "vdot_residual: trace lacks per-row weights");
  }
  VdotResidual out;
  const std::size_t len = trace.rows.size();
  out.value.resize(len);
  for (std::size_t i = 0; i < len; ++i) {
    const Mat w_tilde = trace.weights[i] - structured->w_star;
    out.value[i] = lyapunov_value(trace.rows[i].e, w_tilde, p, structured->lyapunov_gamma);
  }
  for (std::size_t i = 1; i + 1 < len; ++i) {
    const double dv = (out.value[i + 1] - out.value[i - 1]) / (2.0 * trace.dt);
    const Vec& e = trace.rows[i].e;
    const double r = dv + e.dot(q * e);
    out.residual.push_back(r);
    out.max_abs = std::max(out.max_abs, std::abs(r));
  }
  return out;
}

double empirical_eps_bar(const SimTrace& trace) {
  if (trace.rows.empty()) throw Error(ErrorCode::EmptyTrace, "empirical_eps_bar: empty trace");
  double m = 0.0;
  for (const TraceRow& r : trace.rows) m = std::max(m, (r.delta_true - r.nu_ad).norm());
  return m;
}

double empirical_eps_bar(const CsvTable& table) {
  if (table.rows.empty()) throw Error(ErrorCode::EmptyTrace, "empirical_eps_bar: empty trace");
  std::vector<std::pair<std::ptrdiff_t, std::ptrdiff_t>> cols;
  for (int i = 0;; ++i) {
    const auto d = table.column("delta_true" + std::to_string(i));
    const auto v = table.column("nu_ad" + std::to_string(i));
    if (d < 0 || v < 0) break;
    cols.emplace_back(d, v);
  }
  if (cols.empty()) {
    throw Error(ErrorCode::ParseError, "trace lacks delta_true0 / nu_ad0 columns");
  }
  double m = 0.0;
  for (const auto& row : table.rows) {
    double sq = 0.0;
    for (const auto& [d, v] : cols) {
      const double diff = row[static_cast<std::size_t>(d)] - row[static_cast<std::size_t>(v)];
      sq += diff * diff;
    }
    m = std::max(m, std::sqrt(sq));
  }
  return m;
}

BoundReport make_bound_report(const Mat& p, const Mat& q, const BoundInputs& in) {
  BoundReport rep;
  const auto pb = spd_bounds(p, "P");
  const auto qb = spd_bounds(q, "Q");
  rep.p_lambda_min = pb.min;
  rep.p_lambda_max = pb.max;
  rep.q_lambda_min = qb.min;
  rep.q_lambda_max = qb.max;
  rep.eps_bar = in.eps_bar;
  rep.eps_bar_empirical = in.eps_bar_empirical;
  rep.uub_radius = uub_radius(p, q, in.eps_bar);
  rep.e_norm = in.e_norm;
  rep.generalization_tolerance = generalization_tolerance(p, q, in.e_norm);
  if (in.eps || in.delta) {
    if (!in.eps) throw Error(ErrorCode::InvalidTolerance, "sample complexity needs eps");
    if (!in.delta) throw Error(ErrorCode::InvalidConfidence, "sample complexity needs delta");
    rep.eps = *in.eps;
    rep.delta = *in.delta;
    rep.k_bits = in.k_bits;
    rep.n_weights = in.n_weights;
    rep.sample_complexity = sample_complexity(*in.eps, *in.delta, in.k_bits, in.n_weights);
  }
  return rep;
}

}  // namespace dmrac
