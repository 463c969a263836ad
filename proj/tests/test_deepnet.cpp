#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dmrac/deepnet.hpp"
#include "invariants.hpp"

using namespace dmrac;

namespace {

// One hidden unit reading x_0 only: Phi = tanh(x_0), f = theta * Phi.
FeatureNetwork single_unit(double theta) {
  DenseLayer l{Mat(1, 2), Vec::Zero(1)};
  l.weights << 1.0, 0.0;
  return FeatureNetwork({l}, Mat::Constant(1, 1, theta));
}

TrainBatch batch_of(std::initializer_list<std::pair<Vec, Vec>> pairs) {
  const auto& first = *pairs.begin();
  TrainBatch b{Mat(first.first.size(), static_cast<Eigen::Index>(pairs.size())),
               Mat(first.second.size(), static_cast<Eigen::Index>(pairs.size()))};
  Eigen::Index i = 0;
  for (const auto& [x, y] : pairs) {
    b.inputs.col(i) = x;
    b.targets.col(i++) = y;
  }
  return b;
}

Vec v2(double a, double b) {
  Vec x(2);
  x << a, b;
  return x;
}

Vec v1(double a) { return Vec::Constant(1, a); }

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("dmrac_test_" + name);
}

}  // namespace

TEST_CASE("forward_features examples") {
  Rng rng(3);
  FeatureNetwork net = FeatureNetwork::initialize({2, 5, 3}, 1, rng);
  std::vector<DenseLayer> zero = net.inner_layers();
  for (auto& l : zero) l.weights.setZero();
  const FeatureNetwork z = swap_features(net, zero);
  CHECK(forward_features(z, v2(4.0, -7.0)).isZero());

  const Vec phi = forward_features(single_unit(0.0), v2(0.5, 9.0));
  CHECK(phi(0) == doctest::Approx(0.46211716).epsilon(1e-8));
}

TEST_CASE("forward_output examples") {
  Rng rng(3);
  const FeatureNetwork net = FeatureNetwork::initialize({2, 5, 3}, 1, rng);
  CHECK(forward_output(net, v2(1.0, 2.0)).isZero());
  CHECK(forward_output(single_unit(2.0), v2(0.5, 9.0))(0) ==
        doctest::Approx(0.92423432).epsilon(1e-8));
}

TEST_CASE("batch_loss examples") {
  const FeatureNetwork net = single_unit(2.0);
  const Vec x = v2(0.5, 0.0);
  CHECK(batch_loss(net, batch_of({{x, forward_output(net, x)}})) == 0.0);

  const FeatureNetwork zero = single_unit(0.0);
  CHECK(batch_loss(zero, batch_of({{x, v1(1.0)}})) == doctest::Approx(1.0));
  CHECK(batch_loss(zero, batch_of({{x, v1(1.0)}, {x, v1(-2.0)}})) == doctest::Approx(2.5));
}

TEST_CASE("batch_gradient examples") {
  const FeatureNetwork net = single_unit(2.0);
  const Vec x = v2(0.5, 0.0);
  const NetworkGradient g = batch_gradient(net, batch_of({{x, forward_output(net, x)}}));
  CHECK(g.squared_norm() == 0.0);

  // Output layer is linear in Phi: dLoss/dtheta = 2 (theta Phi - y) Phi.
  const FeatureNetwork one = single_unit(1.0);
  const Vec x2 = v2(2.0, 0.0);
  const double phi = std::tanh(2.0);
  const NetworkGradient g2 = batch_gradient(one, batch_of({{x2, v1(0.0)}}));
  CHECK(g2.output(0, 0) == doctest::Approx(2.0 * phi * phi).epsilon(1e-14));
  // Through the hidden unit: dLoss/dw = 2 (theta Phi - y) theta (1 - Phi^2) x_0.
  CHECK(g2.inner[0].weights(0, 0) ==
        doctest::Approx(2.0 * phi * (1 - phi * phi) * 2.0).epsilon(1e-14));
  CHECK(g2.inner[0].weights(0, 1) == 0.0);
}

TEST_CASE("batch_gradient matches central differences") {
  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const FeatureNetwork net = check::random_network(rng, 3, 6, 3, 2);
    TrainBatch b{Mat::Random(3, 6), Mat::Random(2, 6)};
    const double err =
        check::gradient_relative_error(batch_gradient(net, b), check::finite_difference_gradient(net, b));
    CHECK(err <= 1e-5);
  }
}

TEST_CASE("batch_gradient rejects an empty batch") {
  try {
    batch_gradient(single_unit(1.0), TrainBatch{Mat(2, 0), Mat(1, 0)});
    FAIL("expected EmptyBatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyBatch);
  }
}

TEST_CASE("sgd_step examples") {
  const FeatureNetwork net = single_unit(2.0);
  const Vec x = v2(0.5, 0.0);
  const TrainBatch exact = batch_of({{x, forward_output(net, x)}});
  CHECK(sgd_step(net, exact, 0.1) == net);

  const FeatureNetwork one = single_unit(1.0);
  const TrainBatch b = batch_of({{v2(2.0, 0.0), v1(0.0)}});
  const double g = batch_gradient(one, b).output(0, 0);
  CHECK(sgd_step(one, b, 0.1).output_layer()(0, 0) == doctest::Approx(1.0 - 0.1 * g));
}

TEST_CASE("overfit check on ten pairs") {
  Rng rng(123);
  FeatureNetwork net = FeatureNetwork::initialize({2, 16, 8}, 1, rng);
  // Give the output layer a nonzero start so the hidden layers receive signal.
  net = net.with_output_layer(Mat::Constant(8, 1, 0.1));
  TrainBatch b{Mat(2, 10), Mat(1, 10)};
  for (Eigen::Index i = 0; i < 10; ++i) {
    b.inputs(0, i) = rng.uniform(-1, 1);
    b.inputs(1, i) = rng.uniform(-1, 1);
    b.targets(0, i) = rng.uniform(-1, 1);
  }
  for (int epoch = 0; epoch < 20000; ++epoch) net = sgd_step(net, b, 0.05);
  CHECK(batch_loss(net, b) <= 1e-3);
}

TEST_CASE("swap_features") {
  Rng rng(9);
  const FeatureNetwork net = FeatureNetwork::initialize({2, 4, 3}, 1, rng)
                                 .with_output_layer(Mat::Constant(3, 1, 0.7));
  const Vec x = v2(0.3, -0.2);
  CHECK(forward_features(swap_features(net, net.inner_layers()), x) == forward_features(net, x));

  Rng other(10);
  const FeatureNetwork fresh = FeatureNetwork::initialize({2, 4, 3}, 1, other);
  const FeatureNetwork swapped = swap_features(net, fresh.inner_layers());
  CHECK(forward_features(swapped, x) == forward_features(fresh, x));
  CHECK(swapped.output_layer() == net.output_layer());

  const FeatureNetwork wide = FeatureNetwork::initialize({2, 4, 5}, 1, other);
  try {
    swap_features(net, wide.inner_layers());
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("network file round trip") {
  Rng rng(21);
  const FeatureNetwork net = check::random_network(rng, 3, 7, 2, 2);
  const auto path = temp_file("roundtrip.dmrn");
  save_network(net, path);
  CHECK(load_network(path) == net);
  CHECK(fingerprint(load_network(path)) == fingerprint(net));
  std::filesystem::remove(path);
}

TEST_CASE("network file errors") {
  try {
    load_network(temp_file("does_not_exist.dmrn"));
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoError);
  }
  const auto path = temp_file("garbage.dmrn");
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE1234";
  }
  CHECK_THROWS_AS(load_network(path), Error);
  std::filesystem::remove(path);
}

TEST_CASE("debug gradient fault perturbs the gradient") {
  const FeatureNetwork one = single_unit(1.0);
  const TrainBatch b = batch_of({{v2(2.0, 0.0), v1(0.0)}});
  const double clean = batch_gradient(one, b).inner[0].weights(0, 0);
  debug::set_gradient_fault(true);
  const double broken = batch_gradient(one, b).inner[0].weights(0, 0);
  debug::set_gradient_fault(false);
  CHECK(broken != clean);
}
