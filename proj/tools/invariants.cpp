#include "invariants.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "dmrac/adaptive_law.hpp"
#include "dmrac/bounds.hpp"
#include "dmrac/trace.hpp"

namespace dmrac::check {

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

Result make(std::string name, bool pass, std::string detail) {
  return Result{std::move(name), pass, std::move(detail)};
}

Mat random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = scale * rng.normal();
  }
  return m;
}

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec random_vector(Eigen::Index n, Rng& rng, double scale = 1.0) {
  return random_matrix(n, 1, rng, scale);
}

Eigen::Index random_dim(Rng& rng, Eigen::Index lo, Eigen::Index hi) {
  return lo + static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(hi - lo + 1)));
}

std::string csv_of(const SimTrace& trace) {
  std::ostringstream os;
  write_trace_csv(trace, os);
  return os.str();
}

bool same_rows(const SimTrace& a, const SimTrace& b) {
  if (a.rows.size() != b.rows.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const TraceRow& p = a.rows[i];
    const TraceRow& q = b.rows[i];
    if (p.t != q.t || p.x != q.x || p.x_rm != q.x_rm || p.e != q.e || p.u != q.u ||
        p.nu_ad != q.nu_ad) {
      return false;
    }
  }
  return true;
}

ScenarioConfig shortened(ScenarioConfig cfg, double T) {
  cfg.dmrac.T = T;
  return cfg;
}

// Lyapunov sequence of a structured run: V_i and its largest step increase.
StructuredStats stats_of(const SimTrace& trace, const ClosedLoop& loop) {
  StructuredStats s;
  const VdotResidual vr = vdot_residual(trace, loop.gains.P, loop.gains.Q, structured_data(loop));
  for (std::size_t i = 1; i < vr.value.size(); ++i) {
    s.max_v_increase = std::max(s.max_v_increase, vr.value[i] - vr.value[i - 1]);
  }
  s.max_vdot_residual = vr.max_abs;
  s.rms_final = summarize(trace, 0.0).rms_e_final;
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Oracles

Mat lyapunov_oracle(const Mat& a, const Mat& q) {
  const Eigen::Index n = a.rows();
  // Unknown p(i*n + j) = P(i, j); row (i, j) encodes (A^T P + P A)(i, j) = -Q(i, j).
  Mat m = Mat::Zero(n * n, n * n);
  Vec rhs(n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index row = i * n + j;
      for (Eigen::Index k = 0; k < n; ++k) {
        m(row, k * n + j) += a(k, i);
        m(row, i * n + k) += a(k, j);
      }
      rhs(row) = -q(i, j);
    }
  }
  const Vec p = m.fullPivHouseholderQr().solve(rhs);
  Mat out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = p(i * n + j);
  }
  return out;
}

Mat random_hurwitz(Eigen::Index n, Rng& rng) {
  Mat a = random_matrix(n, n, rng);
  const double top = Eigen::EigenSolver<Mat>(a, false).eigenvalues().real().maxCoeff();
  a -= (top + 0.1 + rng.uniform(0.0, 1.0)) * Mat::Identity(n, n);
  return a;
}

Mat random_spd(Eigen::Index n, Rng& rng) {
  const Mat g = random_matrix(n, n, rng);
  Mat s = g * g.transpose() + 0.1 * static_cast<double>(n) * Mat::Identity(n, n);
  return (s + s.transpose()) / 2.0;
}

NetworkGradient finite_difference_gradient(const FeatureNetwork& net, const TrainBatch& batch,
                                           double h) {
  NetworkGradient fd{net.inner_layers(), Mat::Zero(net.output_layer().rows(),
                                                   net.output_layer().cols())};
  auto central = [&](auto&& perturbed) {
    return (batch_loss(perturbed(h), batch) - batch_loss(perturbed(-h), batch)) / (2.0 * h);
  };
  for (std::size_t l = 0; l < net.inner_layers().size(); ++l) {
    const DenseLayer& layer = net.inner_layers()[l];
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) {
        fd.inner[l].weights(i, j) = central([&](double d) {
          auto inner = net.inner_layers();
          inner[l].weights(i, j) += d;
          return FeatureNetwork(std::move(inner), net.output_layer());
        });
      }
      fd.inner[l].bias(i) = central([&](double d) {
        auto inner = net.inner_layers();
        inner[l].bias(i) += d;
        return FeatureNetwork(std::move(inner), net.output_layer());
      });
    }
  }
  for (Eigen::Index i = 0; i < fd.output.rows(); ++i) {
    for (Eigen::Index j = 0; j < fd.output.cols(); ++j) {
      fd.output(i, j) = central([&](double d) {
        Mat out = net.output_layer();
        out(i, j) += d;
        return FeatureNetwork(net.inner_layers(), std::move(out));
      });
    }
  }
  return fd;
}

double gradient_relative_error(const NetworkGradient& g, const NetworkGradient& fd) {
  double worst = 0.0;
  auto scan = [&](const Mat& a, const Mat& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double x = a.data()[i];
      worst = std::max(worst, std::abs(x - b.data()[i]) / std::max(1.0, std::abs(x)));
    }
  };
  for (std::size_t l = 0; l < g.inner.size(); ++l) {
    scan(g.inner[l].weights, fd.inner[l].weights);
    scan(g.inner[l].bias, fd.inner[l].bias);
  }
  scan(g.output, fd.output);
  return worst;
}

FeatureNetwork random_network(Rng& rng, int max_hidden_layers, int max_width, Eigen::Index n,
                              Eigen::Index m) {
  const auto layers = random_dim(rng, 1, max_hidden_layers);
  std::vector<DenseLayer> inner;
  Eigen::Index in = n;
  for (Eigen::Index l = 0; l < layers; ++l) {
    const Eigen::Index out = random_dim(rng, 1, max_width);
    inner.push_back(DenseLayer{random_matrix(out, in, rng, 0.8), random_vector(out, rng, 0.3)});
    in = out;
  }
  return FeatureNetwork(std::move(inner), random_matrix(in, m, rng));
}

std::size_t brute_force_eviction(const std::vector<Vec>& features) {
  std::size_t best = 0;
  double best_sigma = -1.0;
  for (std::size_t drop = 0; drop < features.size(); ++drop) {
    const Eigen::Index rows = static_cast<Eigen::Index>(features.size()) - 1;
    double sigma = 0.0;
    if (rows > 0) {
      Mat x(rows, features.front().size());
      Eigen::Index r = 0;
      for (std::size_t i = 0; i < features.size(); ++i) {
        if (i != drop) x.row(r++) = features[i].transpose();
      }
      const Vec sv = Eigen::JacobiSVD<Mat>(x).singularValues();
      sigma = sv(sv.size() - 1);
    }
    if (sigma > best_sigma + 1e-9 * std::max(1.0, best_sigma)) {
      best_sigma = sigma;
      best = drop;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Criterion-sized checks

Result lyapunov_solver(int systems, std::uint64_t seed) {
  Rng rng(seed);
  double worst_residual = 0.0;
  double worst_oracle = 0.0;
  bool spd = true;
  for (int s = 0; s < systems; ++s) {
    const Eigen::Index n = random_dim(rng, 1, 6);
    const Mat a = random_hurwitz(n, rng);
    const Mat q = random_spd(n, rng);
    const Mat p = solve_lyapunov(a, q);
    worst_residual = std::max(worst_residual,
                              (a.transpose() * p + p * a + q).norm() / q.norm());
    const Mat oracle = lyapunov_oracle(a, q);
    worst_oracle = std::max(worst_oracle, (p - oracle).cwiseAbs().maxCoeff() /
                                              std::max(1.0, oracle.cwiseAbs().maxCoeff()));
    spd = spd && p == p.transpose();
    for (int k = 0; k < 100; ++k) {
      const Vec x = random_vector(n, rng);
      spd = spd && x.dot(p * x) > 0.0;
    }
  }
  return make("lyapunov solver residual and oracle",
              worst_residual <= 1e-10 && worst_oracle <= 1e-9 && spd,
              "max residual/||Q|| " + num(worst_residual) + ", max oracle gap " +
                  num(worst_oracle) + (spd ? "" : ", P not SPD"));
}

Result gradient_fidelity(int nets, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int k = 0; k < nets; ++k) {
    const Eigen::Index n = random_dim(rng, 1, 4);
    const Eigen::Index m = random_dim(rng, 1, 3);
    const FeatureNetwork net = random_network(rng, 3, 8, n, m);
    const Eigen::Index batch_size = random_dim(rng, 1, 4);
    const TrainBatch batch{random_matrix(n, batch_size, rng), random_matrix(m, batch_size, rng)};
    worst = std::max(worst, gradient_relative_error(batch_gradient(net, batch),
                                                    finite_difference_gradient(net, batch)));
  }
  return make("gradient matches central differences", worst <= 1e-5,
              "max relative error " + num(worst) + " over " + std::to_string(nets) + " nets");
}

Result buffer_capacity_and_separation(std::size_t insertions, std::uint64_t seed) {
  Rng rng(seed);
  const double zeta = 0.2;
  std::size_t admitted = 0;
  std::size_t checked = 0;
  for (std::size_t capacity : {1u, 5u, 20u}) {
    ReplayBuffer buffer(capacity, zeta);
    const Eigen::Index k = 4;
    for (std::size_t i = 0; i < insertions / 3; ++i) {
      // Clustered features so that admissions and rejections both occur.
      const Vec phi = Vec::Ones(k) + random_vector(k, rng, rng.uniform(0.05, 0.4));
      double oracle = std::numeric_limits<double>::infinity();
      for (const auto& e : buffer.entries()) {
        oracle = std::min(oracle, (phi - e.phi).squaredNorm() / phi.norm());
      }
      const std::size_t log_before = buffer.admission_log().size();
      const bool in = try_insert(buffer, BufferEntry{Vec::Zero(2), phi, Vec::Zero(1)});
      if (buffer.size() > capacity) {
        return make("buffer capacity and admission separation", false,
                    "size " + std::to_string(buffer.size()) + " exceeds " +
                        std::to_string(capacity));
      }
      if (in != (oracle >= zeta)) {
        return make("buffer capacity and admission separation", false,
                    "admission disagrees with the score oracle at insertion " + std::to_string(i));
      }
      if (in) {
        ++admitted;
        const AdmissionRecord& rec = buffer.admission_log().back();
        if (buffer.admission_log().size() != log_before + 1 || rec.score < zeta) {
          return make("buffer capacity and admission separation", false,
                      "log entry with score " + num(rec.score) + " < zeta_tol");
        }
      }
    }
    for (const auto& rec : buffer.admission_log()) {
      ++checked;
      if (rec.score < zeta) {
        return make("buffer capacity and admission separation", false, "log replay failed");
      }
    }
  }
  return make("buffer capacity and admission separation", true,
              std::to_string(insertions) + " insertions, " + std::to_string(admitted) +
                  " admitted, " + std::to_string(checked) + " log entries replayed");
}

Result eviction_oracle(int buffers, std::uint64_t seed) {
  Rng rng(seed);
  int agreed = 0;
  for (int b = 0; b < buffers; ++b) {
    const Eigen::Index k = random_dim(rng, 1, 6);
    const auto size = static_cast<std::size_t>(random_dim(rng, 1, 20));
    ReplayBuffer buffer(size, 0.2);
    std::vector<Vec> features;
    for (std::size_t i = 0; i < size; ++i) {
      // Every fifth buffer repeats rows to exercise exact ties.
      Vec phi = (b % 5 == 4 && i > 0 && rng.uniform(0.0, 1.0) < 0.3) ? features[rng.index(i)]
                                                                     : random_vector(k, rng);
      features.push_back(phi);
      buffer.append(BufferEntry{Vec::Zero(1), phi, Vec::Zero(1)});
    }
    const std::size_t expected = brute_force_eviction(features);
    const std::size_t got = evict_svd_max(buffer);
    if (got != expected || buffer.size() != size - 1) {
      return make("eviction matches brute-force oracle", false,
                  "buffer " + std::to_string(b) + ": removed " + std::to_string(got) +
                      ", oracle " + std::to_string(expected));
    }
    ++agreed;
  }
  // The hand example: the near-duplicate row goes.
  ReplayBuffer hand(3, 0.2);
  for (const auto& row : {vec2(1.0, 0.0), vec2(0.0, 1.0), vec2(1.0, 0.001)}) {
    hand.append(BufferEntry{Vec::Zero(1), row, Vec::Zero(1)});
  }
  const bool hand_ok = evict_svd_max(hand) == 2;
  return make("eviction matches brute-force oracle", hand_ok,
              std::to_string(agreed) + " random buffers agree" +
                  (hand_ok ? "" : "; hand example removed the wrong row"));
}

Result projection_boundedness(int sequences, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int s = 0; s < sequences; ++s) {
    const Eigen::Index n = random_dim(rng, 1, 3);
    const Eigen::Index m = random_dim(rng, 1, 2);
    const Eigen::Index k = random_dim(rng, 1, 5);
    GainSet gains;
    gains.P = random_spd(n, rng);
    gains.Gamma = rng.uniform(0.01, 50.0) * random_spd(k, rng);
    const Mat b = random_matrix(n, m, rng, 3.0);
    OuterWeights w{Mat::Zero(k, m), rng.uniform(0.1, 10.0), rng.uniform(0.01, 0.5)};
    for (int step = 0; step < 20; ++step) {
      const Vec phi = random_vector(k, rng, std::pow(10.0, rng.uniform(-2.0, 2.0)));
      const Vec e = random_vector(n, rng, std::pow(10.0, rng.uniform(-2.0, 2.0)));
      w = outer_step(w, phi, e, gains, b, rng.uniform(1e-3, 0.5));
      const double ratio = w.W.norm() / w.hard_limit();
      worst = std::max(worst, ratio);
      if (ratio > 1.0) {
        return make("projection keeps ||W|| within W_b(1 + eps)", false,
                    "sequence " + std::to_string(s) + " reached " + num(ratio) + " of the limit");
      }
    }
  }
  return make("projection keeps ||W|| within W_b(1 + eps)", true,
              std::to_string(sequences) + " sequences, max ||W||/limit " + num(worst));
}

Result bound_calculators(std::uint64_t seed) {
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  const Mat p = vec2(1.0, 2.0).asDiagonal();
  const Mat i2 = Mat::Identity(2, 2);
  expect(uub_radius(p, i2, 0.0) == 0.0, "uub radius at eps_bar 0");
  expect(uub_radius(p, i2, 0.1) == 0.4, "uub radius example 0.4");
  expect(generalization_tolerance(p, i2, 0.0) == 0.0, "generalization tolerance at 0");
  expect(generalization_tolerance(p, i2, 0.5) == 0.5, "generalization tolerance example 0.5");
  expect(sample_complexity(0.1, 0.05, 8, 10) == 5915, "sample complexity example 5915");
  expect(sample_complexity(0.3, 2.0, 8, 0) == 0, "sample complexity with N = 0, delta = 2");
  expect(lyapunov_value(vec2(1.0, 1.0), Mat::Constant(1, 1, 2.0), i2, Mat::Constant(1, 1, 2.0)) ==
             3.0,
         "lyapunov value example 3");

  Rng rng(seed);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = random_dim(rng, 1, 5);
    const Mat pp = random_spd(n, rng);
    const Mat qq = random_spd(n, rng);
    const double c = rng.uniform(0.1, 10.0);
    const double eb = rng.uniform(0.0, 2.0);
    const double r1 = uub_radius(pp, qq, eb);
    const double rc = uub_radius(c * pp, qq, eb);
    expect(std::abs(rc - c * r1) <= 1e-9 * std::max(1.0, c * r1), "uub radius homogeneity in P");
    expect(uub_radius(pp, qq, eb + rng.uniform(0.0, 1.0)) >= r1, "uub radius monotone in eps_bar");
    const double en = rng.uniform(0.0, 3.0);
    expect(generalization_tolerance(pp, qq, en + rng.uniform(0.0, 1.0)) >=
               generalization_tolerance(pp, qq, en),
           "generalization tolerance monotone in e_norm");

    const double eps = rng.uniform(0.01, 1.0);
    const double d1 = rng.uniform(1e-4, 2.0);
    const double d2 = rng.uniform(d1, 2.0);
    const auto kb = static_cast<std::uint64_t>(rng.index(33));
    const auto nw = static_cast<std::uint64_t>(rng.index(1000));
    const std::uint64_t base = sample_complexity(eps, d1, kb, nw);
    expect(sample_complexity(eps, d2, kb, nw) <= base, "sample complexity nonincreasing in delta");
    expect(sample_complexity(eps, d1, kb + 1 + rng.index(8), nw) >= base,
           "sample complexity nondecreasing in k_bits");
    expect(sample_complexity(eps, d1, kb, nw + 1 + rng.index(100)) >= base,
           "sample complexity nondecreasing in N_weights");
    const std::uint64_t half = sample_complexity(eps / 2.0, d1, kb, nw);
    expect(half + 4 >= 4 * base && half <= 4 * base + 1, "halving eps quadruples the bound");
  }
  std::sort(failures.begin(), failures.end());
  failures.erase(std::unique(failures.begin(), failures.end()), failures.end());
  std::string detail = failures.empty() ? "examples exact, 200 randomized sweeps monotone" : "";
  for (const auto& f : failures) detail += (detail.empty() ? "failed: " : ", ") + f;
  return make("bound calculators", failures.empty(), detail);
}

StructuredStats structured_stats(const ScenarioConfig& cfg) {
  ScenarioConfig c = cfg;
  c.dmrac.record_weights = true;
  const RunOutput out = run_configured(c);
  return stats_of(out.trace, make_closed_loop(c));
}

Result structured_stability() {
  const ScenarioConfig cfg = builtin_scenario("structured");
  const StructuredStats s = structured_stats(cfg);
  const bool ok = cfg.dmrac.dt == 0.005 && s.max_v_increase <= 1e-6 && s.rms_final < 1e-2 &&
                  s.max_vdot_residual <= 1e-3;
  return make("structured run: V non-increasing, error converges", ok,
              "max V increase " + num(s.max_v_increase) + ", final-quarter RMS ||e|| " +
                  num(s.rms_final) + ", max vdot residual " + num(s.max_vdot_residual) +
                  " at dt " + num(cfg.dmrac.dt));
}

Result uub_consistency(double eps_bar) {
  ScenarioConfig cfg = builtin_scenario("structured");
  cfg.uncertainty.disturbance = Vec::Constant(1, eps_bar);
  const RunOutput out = run_configured(cfg);
  const ClosedLoop loop = make_closed_loop(cfg);
  const double radius = uub_radius(loop.gains.P, loop.gains.Q, eps_bar);
  const std::size_t start = out.trace.rows.size() / 3;
  double worst = 0.0;
  for (std::size_t i = start; i < out.trace.rows.size(); ++i) {
    worst = std::max(worst, out.trace.rows[i].e.norm());
  }
  return make("tracking error stays within 2x the UUB radius", worst <= 2.0 * radius,
              "max ||e|| after the first third " + num(worst) + ", 2 x radius " +
                  num(2.0 * radius));
}

Result dmrac_efficacy() {
  ScenarioConfig cfg = builtin_scenario("desk-attitude");
  cfg.dmrac.mode = Mode::DmracAdaptive;
  const double adaptive = summarize(run_configured(cfg).trace, 0.0).rms_e_final;
  cfg.dmrac.mode = Mode::NoAdaptation;
  const double none = summarize(run_configured(cfg).trace, 0.0).rms_e_final;
  return make("DMRAC halves the final tracking error of no adaptation", adaptive <= 0.5 * none,
              "final-quarter RMS ||e||: dmrac-adaptive " + num(adaptive) + ", no-adaptation " +
                  num(none) + " (ratio " + num(adaptive / none) + ")");
}

Result retention() {
  ScenarioConfig cfg = builtin_scenario("retention");
  cfg.dmrac.mode = Mode::DmracAdaptive;
  try {
    const RunOutput trained = run_configured(cfg);
    const double adaptive = summarize(run_configured(cfg, true).trace, 0.0).rms_e;
    cfg.dmrac.mode = Mode::DmracFrozen;
    const double frozen = summarize(run_configured(cfg, true, trained.net).trace, 0.0).rms_e;
    return make("frozen network retains the shifted task", frozen <= 3.0 * adaptive,
                "RMS ||e|| on the shifted task: frozen " + num(frozen) + ", adaptive " +
                    num(adaptive) + " (ratio " + num(frozen / adaptive) + ")");
  } catch (const Error& e) {
    return make("frozen network retains the shifted task", false, e.what());
  }
}

Result determinism(const std::vector<std::string>& scenarios) {
  std::size_t bytes = 0;
  for (const auto& name : scenarios) {
    for (bool parallel : {false, true}) {
      ScenarioConfig cfg = builtin_scenario(name);
      if (parallel && cfg.dmrac.mode != Mode::DmracAdaptive) continue;
      cfg.dmrac.parallel_trainer = parallel;
      const std::string a = csv_of(run_configured(cfg).trace);
      const std::string b = csv_of(run_configured(cfg).trace);
      if (a != b) {
        return make("identical seeds give byte-identical traces", false,
                    name + (parallel ? " (parallel trainer)" : "") + " traces differ");
      }
      bytes += a.size();
    }
  }
  return make("identical seeds give byte-identical traces", true,
              std::to_string(scenarios.size()) + " scenarios, " + std::to_string(bytes) +
                  " bytes compared");
}

// ---------------------------------------------------------------------------
// Module invariant suite

std::vector<Check> module_invariants() {
  std::vector<Check> checks;
  auto add = [&](std::string name, std::function<Result()> fn) {
    checks.push_back(Check{std::move(name), std::move(fn)});
  };

  // numerics
  add("numerics.lyapunov_residual", [] { return lyapunov_solver(100, 11); });
  add("numerics.rayleigh_sandwich", [] {
    Rng rng(12);
    for (int t = 0; t < 20; ++t) {
      const Mat g = random_matrix(5, 5, rng);
      const Mat s = (g + g.transpose()) / 2.0;
      const auto b = sym_eig_bounds(s);
      for (int k = 0; k < 100; ++k) {
        const Vec v = random_vector(5, rng).normalized();
        const double rq = v.dot(s * v);
        const double slack = 1e-12 * s.norm();
        if (rq < b.min - slack || rq > b.max + slack) {
          return make("", false, "Rayleigh quotient " + num(rq) + " outside bounds");
        }
      }
    }
    return make("", true, "2000 Rayleigh quotients inside [lambda_min, lambda_max]");
  });
  add("numerics.rk4_order", [] {
    auto f = [](double, const Vec& x) -> Vec { return -x; };
    const Vec x0 = Vec::Ones(1);
    const double e1 = std::abs(rk4_step<double>(f, x0, 0.0, 0.1)(0) - std::exp(-0.1));
    const double e2 = std::abs(rk4_step<double>(f, x0, 0.0, 0.05)(0) - std::exp(-0.05));
    // One-step error is O(dt^5) for a fourth-order method.
    const double order = std::log2(e1 / e2) - 1.0;
    return make("", e1 <= 1e-7 && order >= 3.9,
                "one-step error " + num(e1) + ", observed order " + num(order));
  });
  add("numerics.seeded_noise", [] {
    Rng a(42), b(42);
    const bool same = gaussian_vector(a, 0.01, 16) == gaussian_vector(b, 0.01, 16);
    Rng rng(13);
    const Vec v = gaussian_vector(rng, 0.01, 100000);
    const double mean = v.mean();
    const double var = (v.array() - mean).square().sum() / static_cast<double>(v.size() - 1);
    return make("", same && var >= 0.0095 && var <= 0.0105,
                std::string(same ? "bit-reproducible" : "streams differ") +
                    ", sample variance " + num(var));
  });

  // plant
  add("plant.matched_pair_identity", [] {
    Rng rng(21);
    int accepted = 0;
    for (int t = 0; t < 100; ++t) {
      const Eigen::Index n = random_dim(rng, 1, 5);
      const Eigen::Index m = random_dim(rng, 1, 3);
      const Mat a = random_matrix(n, n, rng);
      const Mat b = random_matrix(n, m, rng);
      Mat k;
      try {
        // Place A - B K with a least-squares gain towards a stable target.
        const Mat target = random_hurwitz(n, rng);
        k = b.completeOrthogonalDecomposition().solve(a - target);
        const ReferenceModel ref = build_matched_pair(a, b, k, Mat::Identity(m, m));
        if ((a - b * k - ref.A_rm).cwiseAbs().maxCoeff() != 0.0 ||
            !is_hurwitz(ref.A_rm)) {
          return make("", false, "A - B K != A_rm or not Hurwitz");
        }
        ++accepted;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NotHurwitz) throw;
      }
    }
    return make("", accepted > 0,
                "A - B K - A_rm == 0 exactly on " + std::to_string(accepted) + " accepted pairs");
  });
  add("plant.closed_loop_equivalence", [] {
    Rng rng(22);
    double worst = 0.0;
    Mat k, k_r;
    second_order_gains(4.0, 0.5, k, k_r);
    Mat a(2, 2), b(2, 1);
    a << 0, 1, 0, 0;
    b << 0, 1;
    const ReferenceModel ref = build_matched_pair(a, b, k, k_r);
    const PlantModel plant{a, b, UncertaintySpec::zero(1)};
    for (int t = 0; t < 1000; ++t) {
      const Vec x = random_vector(2, rng, 5.0);
      const Vec lhs = plant_derivative(plant, x, -k * x);
      const Vec rhs = reference_derivative(ref, x, Vec::Zero(1));
      worst = std::max(worst, (lhs - rhs).norm() / std::max(1.0, lhs.norm()));
    }
    return make("", worst <= 1e-14, "max relative gap " + num(worst));
  });
  add("plant.uncertainty_deterministic", [] {
    Rng rng(23);
    const UncertaintySpec spec = builtin_scenario("desk-attitude").uncertainty;
    for (int t = 0; t < 1000; ++t) {
      const Vec x = random_vector(2, rng, 3.0);
      if (eval_uncertainty(spec, x) != eval_uncertainty(spec, x)) {
        return make("", false, "repeated evaluation differs");
      }
    }
    return make("", true, "1000 repeated evaluations bitwise equal");
  });

  // deepnet
  add("deepnet.gradient_check", [] { return gradient_fidelity(20, 31); });
  add("deepnet.small_step_descent", [] {
    Rng rng(32);
    double worst = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < 50; ++t) {
      const FeatureNetwork net = random_network(rng, 3, 8, 3, 2);
      const TrainBatch batch{random_matrix(3, 4, rng), random_matrix(2, 4, rng)};
      if (batch_gradient(net, batch).squared_norm() <= 1e-12) continue;
      const double rise = batch_loss(sgd_step(net, batch, 1e-4), batch) - batch_loss(net, batch);
      worst = std::max(worst, rise);
    }
    return make("", worst <= 1e-12, "max loss change after one step " + num(worst));
  });
  add("deepnet.feature_bound", [] {
    Rng rng(33);
    for (int t = 0; t < 200; ++t) {
      const FeatureNetwork net = random_network(rng, 3, 10, 3, 1);
      const Vec x = random_vector(3, rng, 100.0);
      const Vec phi = forward_features(net, x);
      if (phi.norm() > std::sqrt(static_cast<double>(phi.size()))) {
        return make("", false, "||Phi|| exceeds sqrt(k)");
      }
    }
    return make("", true, "||Phi(x)|| <= sqrt(k) on 200 random nets and inputs");
  });
  add("deepnet.determinism", [] {
    Rng rng(34);
    const FeatureNetwork net = random_network(rng, 3, 8, 2, 1);
    const TrainBatch batch{random_matrix(2, 4, rng), random_matrix(1, 4, rng)};
    const bool same = batch_loss(net, batch) == batch_loss(net, batch) &&
                      sgd_step(net, batch, 0.01) == sgd_step(net, batch, 0.01);
    return make("", same, same ? "loss and update bitwise repeatable" : "repeat differs");
  });
  add("deepnet.save_load_roundtrip", [] {
    Rng rng(35);
    const FeatureNetwork net = random_network(rng, 3, 8, 2, 1);
    const auto path = std::filesystem::temp_directory_path() /
                      ("dmrac_verify_" + std::to_string(rng.engine()()) + ".dmrn");
    save_network(net, path);
    const bool same = load_network(path) == net;
    std::filesystem::remove(path);
    return make("", same, same ? "reloaded network bitwise equal" : "reload differs");
  });

  // adaptive law
  add("adaptive_law.projection_bound", [] { return projection_boundedness(10000, 41); });
  add("adaptive_law.matched_cancellation", [] {
    Rng rng(42);
    const ScenarioConfig cfg = builtin_scenario("desk-attitude");
    const ClosedLoop loop = make_closed_loop(cfg);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
      const Vec x = random_vector(2, rng, 3.0);
      const Vec r = random_vector(1, rng, 2.0);
      const Vec u = total_control(loop.gains, x, r, eval_uncertainty(loop.plant.delta, x));
      const Vec lhs = plant_derivative(loop.plant, x, u);
      const Vec rhs = loop.ref.A_rm * x + loop.ref.B_rm * r;
      worst = std::max(worst, (lhs - rhs).norm() / std::max(1.0, rhs.norm()));
    }
    return make("", worst <= 1e-12, "max relative gap " + num(worst));
  });
  add("adaptive_law.lyapunov_decrease", [] {
    const StructuredStats s = structured_stats(builtin_scenario("structured"));
    return make("", s.max_v_increase <= 1e-6, "max V increase " + num(s.max_v_increase));
  });
  add("adaptive_law.uub_entry", [] { return uub_consistency(0.1); });

  // replay buffer
  add("replay_buffer.capacity_and_separation",
      [] { return buffer_capacity_and_separation(30000, 51); });
  add("replay_buffer.eviction_oracle", [] { return eviction_oracle(50, 52); });
  add("replay_buffer.order_invariance", [] {
    Rng rng(53);
    for (int t = 0; t < 50; ++t) {
      std::vector<Vec> rows;
      for (int i = 0; i < 10; ++i) rows.push_back(random_vector(4, rng));
      std::vector<std::size_t> order(rows.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng.engine());
      ReplayBuffer a(10, 0.2), b(10, 0.2);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        a.append(BufferEntry{Vec::Zero(1), rows[i], Vec::Zero(1)});
        b.append(BufferEntry{Vec::Zero(1), rows[order[i]], Vec::Zero(1)});
      }
      const Vec probe = random_vector(4, rng);
      if (kernel_score(probe, a) != kernel_score(probe, b)) {
        return make("", false, "score depends on buffer order");
      }
    }
    return make("", true, "50 permuted buffers give identical scores");
  });

  // dmrac loop
  add("dmrac.determinism", [] {
    return determinism({"desk-attitude", "structured", "retention"});
  });
  add("dmrac.mode_reduction_mrac", [] {
    ScenarioConfig cfg = shortened(builtin_scenario("desk-attitude"), 30.0);
    cfg.dmrac.train_every = 0;
    cfg.dmrac.w_bound = std::numeric_limits<double>::infinity();
    const ClosedLoop loop = make_closed_loop(cfg);
    const FeatureNetwork net = initial_network(cfg);
    Rng r1(cfg.dmrac.seed), r2(cfg.dmrac.seed);
    const SimTrace a = run_episode(cfg.dmrac, loop, net, r1).trace;
    DmracConfig base = cfg.dmrac;
    base.mode = Mode::MracFixedBasis;
    const SimTrace b = run_baseline(base, loop, net, r2);
    const bool same = same_rows(a, b);
    return make("", same, same ? "untrained, unbounded DMRAC equals MRAC on its features"
                               : "traces differ");
  });
  add("dmrac.mode_reduction_frozen", [] {
    ScenarioConfig cfg = shortened(builtin_scenario("desk-attitude"), 30.0);
    const ClosedLoop loop = make_closed_loop(cfg);
    const FeatureNetwork net = initial_network(cfg);
    Rng r1(cfg.dmrac.seed), r2(cfg.dmrac.seed);
    DmracConfig frozen = cfg.dmrac;
    frozen.mode = Mode::DmracFrozen;
    const SimTrace a = run_frozen(frozen, loop, net, r1);
    DmracConfig none = cfg.dmrac;
    none.mode = Mode::NoAdaptation;
    const SimTrace b = run_baseline(none, loop, cfg.baseline_basis, r2);
    const bool same = same_rows(a, b);
    return make("", same, same ? "zero-output frozen network equals no adaptation"
                               : "traces differ");
  });
  add("dmrac.boundedness", [] {
    std::string detail;
    for (auto name : builtin_scenario_names()) {
      const ScenarioConfig cfg = builtin_scenario(name);
      try {
        const RunOutput out = run_configured(cfg);
        if (!cfg.evaluation.components.empty()) {
          ScenarioConfig frozen = cfg;
          frozen.dmrac.mode = Mode::DmracFrozen;
          run_configured(frozen, true, out.net);
        }
      } catch (const Error& e) {
        return make("", false, std::string(name) + ": " + e.what());
      }
      detail += (detail.empty() ? "" : ", ") + std::string(name);
    }
    return make("", true, "no domain exit on " + detail);
  });
  add("dmrac.snapshot_safety", [] {
    ScenarioConfig cfg = builtin_scenario("desk-attitude");
    cfg.dmrac.parallel_trainer = true;
    cfg.dmrac.check_snapshots = true;
    const SimTrace trace = run_configured(cfg).trace;
    const bool ok = trace.snapshots_checked && trace.snapshot_violations == 0 &&
                    trace.rows.back().train_rounds > 0;
    return make("", ok,
                std::to_string(trace.snapshot_violations) + " violations over " +
                    std::to_string(trace.rows.size()) + " steps, " +
                    std::to_string(trace.rows.back().train_rounds) + " training rounds");
  });

  // bounds
  add("bounds.calculators", [] { return bound_calculators(61); });
  add("bounds.report_recompute", [] {
    const ClosedLoop loop = make_closed_loop(builtin_scenario("desk-attitude"));
    BoundInputs in;
    in.eps_bar = 0.37;
    in.e_norm = 0.21;
    in.eps = 0.1;
    in.delta = 0.05;
    in.k_bits = 8;
    in.n_weights = 10;
    const BoundReport rep = make_bound_report(loop.gains.P, loop.gains.Q, in);
    const bool ok = rep.uub_radius == uub_radius(loop.gains.P, loop.gains.Q, 0.37) &&
                    rep.generalization_tolerance ==
                        generalization_tolerance(loop.gains.P, loop.gains.Q, 0.21) &&
                    rep.sample_complexity == sample_complexity(0.1, 0.05, 8, 10);
    return make("", ok, ok ? "report fields recompute bitwise" : "report differs");
  });
  add("bounds.vdot_residual_structured", [] {
    const StructuredStats s = structured_stats(builtin_scenario("structured"));
    return make("", s.max_vdot_residual <= 1e-3,
                "max |vdot residual| " + num(s.max_vdot_residual));
  });

  // cli
  add("cli.csv_header", [] {
    const std::string expected =
        "t,x0,x1,xrm0,xrm1,e_norm,u0,nu_ad0,delta_true0,delta_gen0,W_fro,buf_size,train_loss,"
        "train_rounds";
    const bool ok = trace_csv_header(2, 1) == expected;
    return make("", ok, ok ? "header stable" : "header was " + trace_csv_header(2, 1));
  });
  add("cli.config_roundtrip", [] {
    for (auto name : builtin_scenario_names()) {
      const ScenarioConfig cfg = builtin_scenario(name);
      const std::string text = serialize_config(cfg);
      const ScenarioConfig back = parse_config(text);
      if (!(back == cfg) || serialize_config(back) != text) {
        return make("", false, std::string(name) + " does not round-trip");
      }
    }
    return make("", true, "all built-in scenarios round-trip");
  });

  return checks;
}

}  // namespace dmrac::check
