#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dmrac/bounds.hpp"
#include "dmrac/config.hpp"
#include "dmrac/simulation.hpp"
#include "invariants.hpp"

using namespace dmrac;

namespace {

ClosedLoop double_integrator(UncertaintySpec delta, ReferenceSignal signal) {
  Mat a(2, 2), b(2, 1), k, kr;
  a << 0, 1, 0, 0;
  b << 0, 1;
  second_order_gains(4.0, 0.5, k, kr);
  ClosedLoop loop;
  loop.plant = PlantModel{a, b, std::move(delta)};
  loop.ref = build_matched_pair(a, b, k, kr);
  loop.gains = GainSet::make(loop.ref, k, kr, 0.5 * Mat::Identity(3, 3), Mat::Identity(2, 2));
  loop.signal = std::move(signal);
  return loop;
}

FeatureNetwork biased_network() {
  Rng rng(4);
  FeatureNetwork net = FeatureNetwork::initialize({2, 6, 3}, 1, rng);
  auto inner = net.inner_layers();
  for (auto& l : inner) l.bias.setConstant(0.3);
  return swap_features(net, inner);
}

DmracConfig short_config() {
  DmracConfig c;
  c.T = 10.0;
  c.noise_variance = 0.0;
  c.record_weights = true;
  return c;
}

std::string csv(const SimTrace& t) {
  std::ostringstream os;
  write_trace_csv(t, os);
  return os.str();
}

}  // namespace

TEST_CASE("perfect model keeps zero error and never adapts") {
  const ClosedLoop loop = double_integrator(UncertaintySpec::zero(1), ReferenceSignal{});
  Rng rng(1);
  const EpisodeResult res = run_episode(short_config(), loop, biased_network(), rng);
  for (const auto& row : res.trace.rows) REQUIRE(row.e.norm() == 0.0);
  for (const auto& w : res.trace.weights) REQUIRE(w.isZero());
  CHECK(res.buffer.size() <= 1);
  CHECK(res.trace.rows.size() == short_config().steps() + 1);
}

TEST_CASE("frozen net with zero output layer equals no adaptation") {
  ReferenceSignal sig;
  sig.components.push_back({SignalComponent::Kind::Sinusoid, 0, 1.0, 1.0, 0.0});
  const ClosedLoop loop = double_integrator(
      UncertaintySpec::polynomial_trig({parse_expression("0.5*sin(x0) + 0.2*x1")}), sig);
  DmracConfig cfg = short_config();
  cfg.noise_variance = 0.01;
  cfg.record_weights = false;
  Rng a(8), b(8);
  const SimTrace frozen = run_frozen(cfg, loop, biased_network(), a);
  cfg.mode = Mode::NoAdaptation;
  const SimTrace none = run_baseline(cfg, loop, BasisId::Linear, b);
  CHECK(csv(frozen) == csv(none));
}

TEST_CASE("no adaptation on a perfect model tracks up to the hold error") {
  ReferenceSignal sig;
  sig.components.push_back({SignalComponent::Kind::Sinusoid, 0, 1.0, 1.0, 0.0});
  const ClosedLoop loop = double_integrator(UncertaintySpec::zero(1), sig);
  auto worst = [&](double dt) {
    DmracConfig cfg = short_config();
    cfg.mode = Mode::NoAdaptation;
    cfg.dt = dt;
    Rng rng(3);
    double m = 0.0;
    for (const auto& row : run_baseline(cfg, loop, BasisId::Linear, rng).rows) {
      m = std::max(m, row.e.norm());
    }
    return m;
  };
  // Control is held over each step, so the mismatch is first order in dt.
  const double coarse = worst(0.05);
  const double fine = worst(0.025);
  CHECK(coarse / fine == doctest::Approx(2.0).epsilon(0.1));

  const ClosedLoop still = double_integrator(UncertaintySpec::zero(1), ReferenceSignal{});
  DmracConfig cfg = short_config();
  cfg.mode = Mode::NoAdaptation;
  Rng rng(3);
  for (const auto& row : run_baseline(cfg, still, BasisId::Linear, rng).rows) {
    REQUIRE(row.e.norm() == 0.0);
  }
}

TEST_CASE("default run length") {
  const ScenarioConfig cfg = builtin_scenario("desk-attitude");
  CHECK(cfg.dmrac.steps() + 1 == 3001);
}

TEST_CASE("structured case converges below the stated threshold") {
  const auto s = check::structured_stats(builtin_scenario("structured"));
  CHECK(s.rms_final < 1e-2);
  CHECK(s.max_v_increase <= 1e-6);
  CHECK(s.max_vdot_residual <= 1e-3);
}

TEST_CASE("fixed basis missing a component does worse than DMRAC") {
  ScenarioConfig cfg = builtin_scenario("desk-attitude");
  cfg.dmrac.mode = Mode::DmracAdaptive;
  const double dmrac = summarize(run_configured(cfg).trace, 0.0).rms_e_final;
  cfg.dmrac.mode = Mode::MracFixedBasis;
  cfg.baseline_basis = BasisId::Linear;
  const double linear = summarize(run_configured(cfg).trace, 0.0).rms_e_final;
  CHECK(linear > dmrac);
}

TEST_CASE("summarize examples") {
  SimTrace t;
  t.dt = 0.1;
  for (int i = 0; i < 8; ++i) {
    TraceRow r;
    r.e = Vec::Zero(2);
    t.rows.push_back(r);
  }
  auto s = summarize(t, 0.5);
  CHECK(s.rms_e == 0.0);
  CHECK(s.fraction_inside == 1.0);

  for (auto& r : t.rows) r.e = Vec::Constant(1, 0.4);
  s = summarize(t, 0.5);
  CHECK(s.rms_e == doctest::Approx(0.4));
  CHECK(s.fraction_inside == 1.0);

  CHECK_THROWS_AS(summarize(SimTrace{}, 0.5), Error);
}

TEST_CASE("config validation errors name the constraint") {
  DmracConfig c;
  c.zeta_tol = -1.0;
  try {
    c.validate();
    FAIL("expected ValidationError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ValidationError);
    CHECK(std::string(e.what()).find("ζ_tol must be positive") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_mode("bogus"), Error);
}

TEST_CASE("identical seeds give identical traces, serial and parallel") {
  ScenarioConfig cfg = builtin_scenario("desk-attitude");
  cfg.dmrac.T = 30.0;
  const std::string a = csv(run_configured(cfg).trace);
  CHECK(a == csv(run_configured(cfg).trace));
  cfg.dmrac.parallel_trainer = true;
  cfg.dmrac.check_snapshots = true;
  const RunOutput p1 = run_configured(cfg);
  CHECK(csv(p1.trace) == csv(run_configured(cfg).trace));
  CHECK(p1.trace.snapshot_violations == 0);
  cfg.dmrac.seed = 43;
  CHECK(csv(run_configured(cfg).trace) != a);
}

TEST_CASE("domain exit aborts the run") {
  ScenarioConfig cfg = builtin_scenario("desk-attitude");
  cfg.dmrac.mode = Mode::NoAdaptation;
  cfg.dmrac.domain = Vec::Constant(2, 1e-3);
  try {
    run_configured(cfg);
    FAIL("expected DomainExit");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DomainExit);
  }
}
