#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dmrac/plant.hpp"

using namespace dmrac;

namespace {

Mat mat(Eigen::Index r, Eigen::Index c, std::initializer_list<double> v) {
  Mat m(r, c);
  auto it = v.begin();
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = *it++;
  return m;
}

Vec vec(std::initializer_list<double> v) {
  Vec x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x(i++) = d;
  return x;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("plant_derivative examples") {
  PlantModel p{Mat::Zero(1, 1), Mat::Identity(1, 1), UncertaintySpec::zero(1)};
  CHECK(plant_derivative(p, vec({1}), vec({2})) == vec({2}));

  PlantModel di{mat(2, 2, {0, 1, 0, 0}), mat(2, 1, {0, 1}),
                UncertaintySpec::polynomial_trig({parse_expression("0.5*x0")})};
  const Vec d = plant_derivative(di, vec({2, 0}), vec({0}));
  CHECK(d(0) == doctest::Approx(0.0));
  CHECK(d(1) == doctest::Approx(1.0));
}

TEST_CASE("reference_derivative examples") {
  ReferenceModel ref{mat(2, 2, {0, 1, -16, -4}), mat(2, 1, {0, 16})};
  CHECK(reference_derivative(ref, vec({0, 0}), vec({0})).isZero());
  CHECK(reference_derivative(ref, vec({1, 0}), vec({1})).isZero());
}

TEST_CASE("build_matched_pair examples") {
  const Mat a = mat(2, 2, {0, 1, 0, 0});
  const Mat b = mat(2, 1, {0, 1});
  const ReferenceModel ref = build_matched_pair(a, b, mat(1, 2, {16, 4}), mat(1, 1, {16}));
  CHECK(ref.A_rm == mat(2, 2, {0, 1, -16, -4}));
  CHECK(ref.B_rm == mat(2, 1, {0, 16}));

  const Mat stable = mat(2, 2, {-1, 0, 0, -2});
  CHECK(build_matched_pair(stable, b, Mat::Zero(1, 2), mat(1, 1, {1})).A_rm == stable);

  CHECK(code_of([&] { build_matched_pair(a, b, mat(1, 2, {0, 4}), mat(1, 1, {1})); }) ==
        ErrorCode::NotHurwitz);
}

TEST_CASE("second_order_gains matches wn and zeta") {
  Mat k, kr;
  second_order_gains(4.0, 0.5, k, kr);
  CHECK(k == mat(1, 2, {16, 4}));
  CHECK(kr == mat(1, 1, {16}));
}

TEST_CASE("eval_uncertainty examples") {
  CHECK(eval_uncertainty(UncertaintySpec::zero(1), vec({5, -3})).isZero());

  const auto lin = UncertaintySpec::linear_in_basis(BasisId::Linear, mat(2, 1, {1, -2}));
  CHECK(eval_uncertainty(lin, vec({3, 1}))(0) == doctest::Approx(1.0));

  const auto trig =
      UncertaintySpec::polynomial_trig({parse_expression("0.2 + 0.1*x0 + 0.5*sin(x0)")});
  CHECK(eval_uncertainty(trig, vec({0, 7}))(0) == doctest::Approx(0.2));

  auto dist = UncertaintySpec::zero(1);
  dist.disturbance = vec({0.1});
  CHECK(eval_uncertainty(dist, vec({1, 1}))(0) == doctest::Approx(0.1));
}

TEST_CASE("expression parsing and printing round trip") {
  const Expression e = parse_expression("0.2 + 0.1*x0 + 0.5*sin(x0) - 0.3*abs(x0)*x1^2 + cos(2*x1)");
  const Vec x = vec({0.7, -1.3});
  const double expect = 0.2 + 0.1 * 0.7 + 0.5 * std::sin(0.7) - 0.3 * 0.7 * 1.69 +
                        std::cos(2 * -1.3);
  CHECK(e.eval(x) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(e.max_index() == 1);
  CHECK(parse_expression(to_string(e)) == e);
}

TEST_CASE("expression parse errors") {
  CHECK(code_of([] { parse_expression("0.2 + * x0"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_expression("sin(x0"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_expression("y0"); }) == ErrorCode::ParseError);
}

TEST_CASE("basis dimensions and values") {
  const Vec x = vec({0.5, -2});
  for (BasisId id : {BasisId::Linear, BasisId::Affine, BasisId::Trig, BasisId::Poly2,
                     BasisId::WingRock}) {
    CHECK(eval_basis(id, x).size() == basis_dim(id, 2));
    CHECK(parse_basis_id(to_string(id)) == id);
  }
  CHECK(basis_dim(BasisId::Poly2, 2) == 6);
  const Vec t = eval_basis(BasisId::Trig, x);
  CHECK(t(2) == doctest::Approx(std::sin(0.5)));
  CHECK(t(3) == doctest::Approx(std::sin(-2.0)));
}

TEST_CASE("controllability check") {
  CHECK(is_controllable(mat(2, 2, {0, 1, 0, 0}), mat(2, 1, {0, 1})));
  CHECK_FALSE(is_controllable(mat(2, 2, {-1, 0, 0, -2}), mat(2, 1, {1, 0})));
  PlantModel p{mat(2, 2, {-1, 0, 0, -2}), mat(2, 1, {1, 0}), UncertaintySpec::zero(1)};
  CHECK(code_of([&] { p.validate(); }) == ErrorCode::ValidationError);
}

TEST_CASE("reference signal sums its components") {
  ReferenceSignal r;
  r.dim = 1;
  r.components.push_back({SignalComponent::Kind::Sinusoid, 0, 1.0, 1.0, 0.0});
  r.components.push_back({SignalComponent::Kind::Sinusoid, 0, 0.5, 2.3, 0.3});
  const double t = 1.7;
  CHECK(r(t)(0) == doctest::Approx(std::sin(t) + 0.5 * std::sin(2.3 * t + 0.3)));
}
