#include "dmrac/simulation.hpp"

#include <cmath>
#include <future>
#include <limits>
#include <memory>

namespace dmrac {

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::DmracAdaptive: return "dmrac-adaptive";
    case Mode::DmracFrozen: return "dmrac-frozen";
    case Mode::MracFixedBasis: return "mrac-fixed-basis";
    case Mode::NoAdaptation: return "no-adaptation";
  }
  return "dmrac-adaptive";
}

Mode parse_mode(std::string_view name) {
  if (name == "dmrac-adaptive") return Mode::DmracAdaptive;
  if (name == "dmrac-frozen") return Mode::DmracFrozen;
  if (name == "mrac-fixed-basis") return Mode::MracFixedBasis;
  if (name == "no-adaptation") return Mode::NoAdaptation;
  throw Error(ErrorCode::ValidationError, "unknown mode '" + std::string(name) + "'");
}

std::size_t DmracConfig::steps() const {
  return static_cast<std::size_t>(std::floor(T / dt + 1e-9));
}

void DmracConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::ValidationError, what);
  };
  need(dt > 0.0 && std::isfinite(dt), "dt must be positive");
  need(T >= dt && std::isfinite(T), "T must be at least dt");
  need(eta > 0.0, "eta must be positive");
  need(zeta_tol > 0.0, "ζ_tol must be positive");
  need(p_max > 0, "p_max must be positive");
  need(minibatch > 0, "minibatch must be positive");
  need(train_every == 0 || epochs_per_round > 0, "epochs_per_round must be positive");
  need(noise_variance >= 0.0, "noise variance must be nonnegative");
  need(w_bound > 0.0, "w_bound must be positive");
  need(eps_proj > 0.0 && std::isfinite(eps_proj), "eps_proj must be positive");
  need(!continuous_adaptation || mode == Mode::MracFixedBasis,
       "continuous adaptation is only available in mrac-fixed-basis mode");
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Vec basis_features(const BasisSpec& basis, const Vec& x) {
  return std::holds_alternative<BasisId>(basis) ? eval_basis(std::get<BasisId>(basis), x)
                                                : forward_features(std::get<FeatureNetwork>(basis), x);
}

/// Strategy producing the adaptive term and learning from each sample.
class Adapter {
 public:
  virtual ~Adapter() = default;
  /// nu_ad at state x; remembers whatever the learning step needs.
  virtual Vec control_term(const Vec& x) = 0;
  /// Fields describing the weights in effect for this row.
  virtual void describe(TraceRow& row, SimTrace& trace) = 0;
  /// Learning at step i; returns the generative estimate for the row.
  virtual Vec learn(std::size_t i, const Vec& x, const Vec& e) = 0;
  virtual void after_learn(TraceRow&) {}
  virtual void finish() {}
};

class NullAdapter final : public Adapter {
 public:
  explicit NullAdapter(Eigen::Index m) : m_(m) {}
  Vec control_term(const Vec&) override { return Vec::Zero(m_); }
  void describe(TraceRow& row, SimTrace&) override { row.w_fro = 0.0; }
  Vec learn(std::size_t, const Vec&, const Vec&) override { return Vec::Zero(m_); }
  void after_learn(TraceRow& row) override { row.train_loss = kNaN; }

 private:
  Eigen::Index m_;
};

class FrozenAdapter final : public Adapter {
 public:
  explicit FrozenAdapter(const FeatureNetwork& net) : net_(net) {}
  Vec control_term(const Vec& x) override {
    nu_ = forward_output(net_, x);
    return nu_;
  }
  void describe(TraceRow& row, SimTrace&) override { row.w_fro = net_.output_layer().norm(); }
  Vec learn(std::size_t, const Vec&, const Vec&) override { return nu_; }
  void after_learn(TraceRow& row) override { row.train_loss = kNaN; }

 private:
  const FeatureNetwork& net_;
  Vec nu_;
};

class FixedBasisAdapter final : public Adapter {
 public:
  FixedBasisAdapter(const BasisSpec& basis, const DmracConfig& cfg, const ClosedLoop& loop)
      : basis_(basis), cfg_(cfg), loop_(loop) {
    const Eigen::Index n = loop.plant.state_dim();
    const Eigen::Index k = std::holds_alternative<BasisId>(basis)
                               ? basis_dim(std::get<BasisId>(basis), n)
                               : std::get<FeatureNetwork>(basis).feature_dim();
    w_ = OuterWeights{Mat::Zero(k, loop.plant.input_dim()), cfg.w_bound, cfg.eps_proj};
  }
  Vec control_term(const Vec& x) override {
    phi_ = basis_features(basis_, x);
    return adaptive_term(w_, phi_);
  }
  void describe(TraceRow& row, SimTrace& trace) override {
    row.w_fro = w_.W.norm();
    if (cfg_.record_weights) trace.weights.push_back(w_.W);
  }
  Vec learn(std::size_t, const Vec&, const Vec& e) override {
    w_ = outer_step(w_, phi_, e, loop_.gains, loop_.plant.B, cfg_.dt);
    return w_.W.transpose() * phi_;
  }
  void after_learn(TraceRow& row) override { row.train_loss = kNaN; }

 private:
  const BasisSpec& basis_;
  const DmracConfig& cfg_;
  const ClosedLoop& loop_;
  OuterWeights w_;
  Vec phi_;
};

/// Controller-visible network plus the tag it was published with.
struct Snapshot {
  std::shared_ptr<const FeatureNetwork> net;
  std::uint64_t version = 0;
  std::uint64_t checksum = 0;
};

struct RoundResult {
  FeatureNetwork net;
  double loss;
};

RoundResult train_round(FeatureNetwork net, const ReplayBuffer& buffer, const DmracConfig& cfg,
                        Rng& rng) {
  const std::size_t per_epoch = (buffer.size() + cfg.minibatch - 1) / cfg.minibatch;
  for (std::size_t epoch = 0; epoch < cfg.epochs_per_round; ++epoch) {
    for (std::size_t s = 0; s < per_epoch; ++s) {
      net = sgd_step(net, sample_minibatch(buffer, cfg.minibatch, rng), cfg.eta);
    }
  }
  const double loss = batch_loss(net, as_batch(buffer));
  return {std::move(net), loss};
}

class DmracAdapter final : public Adapter {
 public:
  DmracAdapter(const FeatureNetwork& net, const DmracConfig& cfg, const ClosedLoop& loop,
               Rng& train_rng)
      : cfg_(cfg),
        loop_(loop),
        train_rng_(train_rng),
        buffer_(cfg.p_max, cfg.zeta_tol) {
    auto first = std::make_shared<const FeatureNetwork>(net);
    snap_ = Snapshot{first, 0, fingerprint(*first)};
    w_ = OuterWeights{Mat::Zero(net.feature_dim(), net.output_dim()), cfg.w_bound, cfg.eps_proj};
    buffer_.keep_log(false);
  }

  Vec control_term(const Vec& x) override {
    phi_ = forward_features(*snap_.net, x);
    return adaptive_term(w_, phi_);
  }

  void describe(TraceRow& row, SimTrace& trace) override {
    row.w_fro = w_.W.norm();
    row.feature_version = snap_.version;
    if (cfg_.check_snapshots) {
      trace.snapshots_checked = true;
      if (fingerprint(*snap_.net) != snap_.checksum) ++trace.snapshot_violations;
    }
    if (cfg_.record_weights) trace.weights.push_back(w_.W);
  }

  Vec learn(std::size_t i, const Vec& x, const Vec& e) override {
    w_ = outer_step(w_, phi_, e, loop_.gains, loop_.plant.B, cfg_.dt);
    Vec y = w_.W.transpose() * phi_;
    try {
      try_insert(buffer_, BufferEntry{x, phi_, y});
    } catch (const Error& err) {
      if (err.code() != ErrorCode::ZeroFeature) throw;
      buffer_.count_rejection();
    }
    if (cfg_.train_every > 0 && (i + 1) % cfg_.train_every == 0) train();
    return y;
  }

  void after_learn(TraceRow& row) override {
    row.buf_size = buffer_.size();
    row.train_loss = loss_;
    row.train_rounds = rounds_;
  }

  void finish() override {
    if (pending_.valid()) publish(pending_.get());
  }

  const ReplayBuffer& buffer() const { return buffer_; }
  FeatureNetwork result() const { return snap_.net->with_output_layer(w_.W); }

 private:
  void train() {
    if (cfg_.parallel_trainer) {
      if (pending_.valid()) publish(pending_.get());
      if (buffer_.size() < cfg_.minibatch) return;
      pending_ = std::async(std::launch::async,
                            [net = snap_.net->with_output_layer(w_.W), buffer = buffer_,
                             &cfg = cfg_, &rng = train_rng_]() mutable {
                              return train_round(std::move(net), buffer, cfg, rng);
                            });
      return;
    }
    if (buffer_.size() < cfg_.minibatch) return;
    publish(train_round(snap_.net->with_output_layer(w_.W), buffer_, cfg_, train_rng_));
  }

  // The control loop keeps W; only the hidden layers are adopted.
  void publish(RoundResult result) {
    auto next = std::make_shared<const FeatureNetwork>(
        swap_features(*snap_.net, result.net.inner_layers()));
    snap_ = Snapshot{next, snap_.version + 1, fingerprint(*next)};
    loss_ = result.loss;
    ++rounds_;
  }

  const DmracConfig& cfg_;
  const ClosedLoop& loop_;
  Rng& train_rng_;
  ReplayBuffer buffer_;
  Snapshot snap_;
  OuterWeights w_;
  Vec phi_;
  double loss_ = kNaN;
  std::size_t rounds_ = 0;
  std::future<RoundResult> pending_;
};

void check_dims(const ClosedLoop& loop) {
  loop.plant.validate();
  const Eigen::Index n = loop.plant.state_dim();
  const Eigen::Index m = loop.plant.input_dim();
  auto need = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::DimensionMismatch, what);
  };
  need(loop.ref.A_rm.rows() == n && loop.ref.A_rm.cols() == n, "reference model must be n x n");
  need(loop.ref.B_rm.rows() == n, "B_rm must have n rows");
  need(loop.signal.dim == loop.ref.reference_dim(), "reference signal dimension must match B_rm");
  need(loop.gains.K.rows() == m && loop.gains.K.cols() == n, "K must be m x n");
  need(loop.gains.K_r.rows() == m && loop.gains.K_r.cols() == loop.signal.dim, "K_r must be m x r");
  need(loop.gains.P.rows() == n && loop.gains.Q.rows() == n, "P and Q must be n x n");
}

SimTrace simulate(const DmracConfig& cfg, const ClosedLoop& loop, Adapter& adapter, Rng& rng) {
  const PlantModel& plant = loop.plant;
  const Eigen::Index n = plant.state_dim();
  const std::size_t steps = cfg.steps();
  const double dt = cfg.dt;
  const double noise_scale = std::sqrt(dt);

  Vec x = cfg.x0.size() ? cfg.x0 : Vec::Zero(n);
  if (x.size() != n) throw Error(ErrorCode::DimensionMismatch, "x0 must have n entries");
  if (cfg.domain.size() != 0 && cfg.domain.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "domain must have n entries");
  }
  Vec x_rm = x;

  SimTrace trace;
  trace.dt = dt;
  trace.rows.reserve(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) * dt;
    const Vec r = loop.signal(t);

    TraceRow row;
    row.t = t;
    const Vec nu = adapter.control_term(x);
    const Vec u = total_control(loop.gains, x, r, nu);
    row.x = x;
    row.x_rm = x_rm;
    row.e = tracking_error(x_rm, x);
    row.u = u;
    row.nu_ad = nu;
    row.delta_true = eval_uncertainty(plant.delta, x);
    adapter.describe(row, trace);
    row.delta_gen = adapter.learn(i, x, row.e);
    adapter.after_learn(row);
    trace.rows.push_back(std::move(row));
    if (i == steps) break;

    // Control and command are held over the step.
    x = rk4_step<double>([&](double, const Vec& xs) { return plant_derivative(plant, xs, u); },
                         x, t, dt);
    x_rm = rk4_step<double>(
        [&](double, const Vec& xs) { return reference_derivative(loop.ref, xs, r); }, x_rm, t,
        dt);
    if (cfg.noise_variance > 0.0) x += gaussian_vector(rng, cfg.noise_variance, n) * noise_scale;

    if (!all_finite(x)) {
      throw Error(ErrorCode::DomainExit, "state became non-finite at t=" + std::to_string(t + dt));
    }
    if (cfg.domain.size() != 0 && (x.array().abs() > 10.0 * cfg.domain.array()).any()) {
      throw Error(ErrorCode::DomainExit,
                  "state left the inflated operating box at t=" + std::to_string(t + dt));
    }
  }
  adapter.finish();
  return trace;
}


// Fixed-basis MRAC as one continuous-time system z = [x; x_rm; vec(W)].
SimTrace simulate_continuous(const DmracConfig& cfg, const ClosedLoop& loop,
                             const BasisSpec& basis, Rng& rng) {
  const PlantModel& plant = loop.plant;
  const GainSet& gains = loop.gains;
  const Eigen::Index n = plant.state_dim();
  const Eigen::Index m = plant.input_dim();
  const Eigen::Index k = basis_features(basis, Vec::Zero(n)).size();
  const std::size_t steps = cfg.steps();
  const double dt = cfg.dt;

  Vec x0 = cfg.x0.size() ? cfg.x0 : Vec::Zero(n);
  if (x0.size() != n) throw Error(ErrorCode::DimensionMismatch, "x0 must have n entries");
  Vec z = Vec::Zero(2 * n + k * m);
  z.head(n) = x0;
  z.segment(n, n) = x0;
  OuterWeights w{Mat::Zero(k, m), cfg.w_bound, cfg.eps_proj};

  auto weights_of = [&](const Vec& zs) {
    OuterWeights ws = w;
    ws.W = Eigen::Map<const Mat>(zs.data() + 2 * n, k, m);
    return ws;
  };
  auto deriv = [&](double t, const Vec& zs) {
    const Vec xs = zs.head(n);
    const Vec xrm = zs.segment(n, n);
    const OuterWeights ws = weights_of(zs);
    const Vec r = loop.signal(t);
    const Vec phi = basis_features(basis, xs);
    const Vec u = total_control(gains, xs, r, adaptive_term(ws, phi));
    const Vec e = tracking_error(xrm, xs);
    const Mat w_dot = gains.Gamma * project(ws, -raw_update_direction(phi, e, gains.P, plant.B));
    Vec dz(zs.size());
    dz.head(n) = plant_derivative(plant, xs, u);
    dz.segment(n, n) = reference_derivative(loop.ref, xrm, r);
    dz.tail(k * m) = Eigen::Map<const Vec>(w_dot.data(), k * m);
    return dz;
  };

  SimTrace trace;
  trace.dt = dt;
  trace.rows.reserve(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) * dt;
    const Vec x = z.head(n);
    const Vec x_rm = z.segment(n, n);
    const OuterWeights wi = weights_of(z);
    const Vec phi = basis_features(basis, x);
    TraceRow row;
    row.t = t;
    row.x = x;
    row.x_rm = x_rm;
    row.e = tracking_error(x_rm, x);
    row.nu_ad = adaptive_term(wi, phi);
    row.u = total_control(gains, x, loop.signal(t), row.nu_ad);
    row.delta_true = eval_uncertainty(plant.delta, x);
    row.delta_gen = row.nu_ad;
    row.w_fro = wi.W.norm();
    row.train_loss = kNaN;
    if (cfg.record_weights) trace.weights.push_back(wi.W);
    trace.rows.push_back(std::move(row));
    if (i == steps) break;

    z = rk4_step<double>(deriv, z, t, dt);
    Mat wz = Eigen::Map<const Mat>(z.data() + 2 * n, k, m);
    clamp_norm(wz, w.hard_limit());
    z.tail(k * m) = Eigen::Map<const Vec>(wz.data(), k * m);
    if (cfg.noise_variance > 0.0) {
      z.head(n) += gaussian_vector(rng, cfg.noise_variance, n) * std::sqrt(dt);
    }
    const Vec xn = z.head(n);
    if (!all_finite(xn) ||
        (cfg.domain.size() != 0 && (xn.array().abs() > 10.0 * cfg.domain.array()).any())) {
      throw Error(ErrorCode::DomainExit,
                  "state left the inflated operating box at t=" + std::to_string(t + dt));
    }
  }
  return trace;
}

// Every mode draws the trainer seed so that noise streams line up across modes.
Rng split_trainer_rng(Rng& rng) { return Rng(rng.engine()()); }

}  // namespace

EpisodeResult run_episode(const DmracConfig& config, const ClosedLoop& loop,
                          const FeatureNetwork& net, Rng& rng) {
  config.validate();
  check_dims(loop);
  if (net.input_dim() != loop.plant.state_dim() || net.output_dim() != loop.plant.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "network must map n states to m outputs");
  }
  Rng train_rng = split_trainer_rng(rng);
  DmracAdapter adapter(net, config, loop, train_rng);
  SimTrace trace = simulate(config, loop, adapter, rng);
  trace.admitted = adapter.buffer().admitted_count();
  trace.rejected = adapter.buffer().rejected_count();
  return EpisodeResult{std::move(trace), adapter.result(), adapter.buffer()};
}

SimTrace run_frozen(const DmracConfig& config, const ClosedLoop& loop, const FeatureNetwork& net,
                    Rng& rng) {
  config.validate();
  check_dims(loop);
  if (net.input_dim() != loop.plant.state_dim() || net.output_dim() != loop.plant.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "network must map n states to m outputs");
  }
  split_trainer_rng(rng);
  FrozenAdapter adapter(net);
  return simulate(config, loop, adapter, rng);
}

SimTrace run_baseline(const DmracConfig& config, const ClosedLoop& loop, const BasisSpec& basis,
                      Rng& rng) {
  config.validate();
  check_dims(loop);
  split_trainer_rng(rng);
  if (config.mode == Mode::NoAdaptation) {
    NullAdapter adapter(loop.plant.input_dim());
    return simulate(config, loop, adapter, rng);
  }
  if (const auto* net = std::get_if<FeatureNetwork>(&basis)) {
    if (net->input_dim() != loop.plant.state_dim()) {
      throw Error(ErrorCode::DimensionMismatch, "basis network input must have n entries");
    }
  }
  if (config.continuous_adaptation) return simulate_continuous(config, loop, basis, rng);
  FixedBasisAdapter adapter(basis, config, loop);
  return simulate(config, loop, adapter, rng);
}

EpisodeSummary summarize(const SimTrace& trace, double uub_radius) {
  if (trace.rows.empty()) throw Error(ErrorCode::EmptyTrace, "summarize: empty trace");
  EpisodeSummary s;
  const std::size_t len = trace.rows.size();
  const std::size_t tail_start = (len * 3) / 4;
  double sum = 0.0;
  double tail = 0.0;
  std::size_t inside = 0;
  for (std::size_t i = 0; i < len; ++i) {
    const double en = trace.rows[i].e.norm();
    sum += en * en;
    if (i >= tail_start) tail += en * en;
    s.max_e = std::max(s.max_e, en);
    if (en <= uub_radius) ++inside;
  }
  s.rms_e = std::sqrt(sum / static_cast<double>(len));
  s.rms_e_final = std::sqrt(tail / static_cast<double>(len - tail_start));
  s.uub_radius = uub_radius;
  s.fraction_inside = static_cast<double>(inside) / static_cast<double>(len);
  s.final_buffer_size = trace.rows.back().buf_size;
  s.admitted = trace.admitted;
  s.rejected = trace.rejected;
  return s;
}

std::optional<StructuredData> structured_data(const ClosedLoop& loop) {
  if (loop.plant.delta.kind != UncertaintySpec::Kind::LinearInBasis) return std::nullopt;
  return StructuredData{loop.plant.delta.ideal_weights, loop.gains.Gamma / 2.0};
}

}  // namespace dmrac
