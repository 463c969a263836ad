#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dmrac/numerics.hpp"
#include "invariants.hpp"

using namespace dmrac;

namespace {

// Characteristic polynomial coefficients c_0..c_n of det(lambda I - S), c_n = 1,
// by the Faddeev-LeVerrier recursion.
std::vector<double> char_poly(const Mat& s) {
  const Eigen::Index n = s.rows();
  std::vector<double> c(static_cast<std::size_t>(n) + 1, 0.0);
  c[static_cast<std::size_t>(n)] = 1.0;
  Mat m = Mat::Zero(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    m = s * m + c[static_cast<std::size_t>(n - k + 1)] * Mat::Identity(n, n);
    c[static_cast<std::size_t>(n - k)] = -(s * m).trace() / static_cast<double>(k);
  }
  return c;
}

double horner(const std::vector<double>& c, double x) {
  double v = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
  return v;
}

// All real roots of the polynomial inside [-bound, bound] by a fine sign scan
// followed by bisection.
std::vector<double> real_roots(const std::vector<double>& c, double bound) {
  std::vector<double> roots;
  const int cells = 200000;
  double lo = -bound;
  double flo = horner(c, lo);
  for (int i = 1; i <= cells; ++i) {
    const double hi = -bound + 2.0 * bound * i / cells;
    const double fhi = horner(c, hi);
    if (flo == 0.0) roots.push_back(lo);
    if (flo * fhi < 0.0) {
      double a = lo, b = hi, fa = flo;
      for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
        const double mid = 0.5 * (a + b);
        const double fm = horner(c, mid);
        if (fa * fm <= 0.0) {
          b = mid;
        } else {
          a = mid;
          fa = fm;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    lo = hi;
    flo = fhi;
  }
  return roots;
}

}  // namespace

TEST_CASE("solve_lyapunov scalar example") {
  const Mat p = solve_lyapunov<double>(Mat::Constant(1, 1, -1.0), Mat::Constant(1, 1, 2.0));
  CHECK(p(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("solve_lyapunov decoupled example") {
  Mat a = Mat::Zero(2, 2);
  a.diagonal() << -1.0, -2.0;
  const Mat p = solve_lyapunov<double>(a, Mat::Identity(2, 2));
  CHECK(p(0, 0) == doctest::Approx(0.5));
  CHECK(p(1, 1) == doctest::Approx(0.25));
  CHECK(std::abs(p(0, 1)) < 1e-14);
}

TEST_CASE("solve_lyapunov matches the vectorized oracle on random 4x4 systems") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat a = check::random_hurwitz(4, rng);
    const Mat q = check::random_spd(4, rng);
    const Mat p = solve_lyapunov(a, q);
    const Mat oracle = check::lyapunov_oracle(a, q);
    CHECK((p - oracle).norm() <= 1e-9 * std::max(1.0, oracle.norm()));
    CHECK((a.transpose() * p + p * a + q).norm() <= 1e-10 * q.norm());
    CHECK(is_positive_definite(p));
  }
}

TEST_CASE("solve_lyapunov rejects bad inputs") {
  Mat unstable = Mat::Identity(2, 2);
  CHECK_THROWS_AS(solve_lyapunov(unstable, Mat(Mat::Identity(2, 2))), Error);
  try {
    solve_lyapunov(unstable, Mat(Mat::Identity(2, 2)));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotHurwitz);
  }
  Mat a = -Mat::Identity(2, 2);
  Mat q(2, 2);
  q << 1, 2, 0, 1;
  try {
    solve_lyapunov(a, q);
    FAIL("expected NotSymmetric");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotSymmetric);
  }
  try {
    solve_lyapunov(a, Mat(Mat::Identity(3, 3)));
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("sym_eig_bounds examples") {
  const auto id = sym_eig_bounds<double>(Mat::Identity(2, 2));
  CHECK(id.min == doctest::Approx(1.0));
  CHECK(id.max == doctest::Approx(1.0));
  Mat d = Mat::Zero(2, 2);
  d.diagonal() << 1.0, 4.0;
  const auto b = sym_eig_bounds(d);
  CHECK(b.min == doctest::Approx(1.0));
  CHECK(b.max == doctest::Approx(4.0));
}

TEST_CASE("sym_eig_bounds agrees with characteristic polynomial roots") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Mat g(5, 5);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
    const Mat s = (g + g.transpose()) / 2.0;
    const auto roots = real_roots(char_poly(s), s.norm() + 1.0);
    REQUIRE(roots.size() >= 2);
    const auto b = sym_eig_bounds(s);
    CHECK(b.min == doctest::Approx(roots.front()).epsilon(1e-8));
    CHECK(b.max == doctest::Approx(roots.back()).epsilon(1e-8));
  }
}

TEST_CASE("sym_eig_bounds rejects nonsymmetric input") {
  Mat s(2, 2);
  s << 1, 1, 0, 1;
  CHECK_THROWS_AS(sym_eig_bounds(s), Error);
}

TEST_CASE("rk4_step examples") {
  auto zero = [](double, const Vec& x) { return Vec(Vec::Zero(x.size())); };
  const Vec x3 = Vec::Constant(1, 3.0);
  CHECK(rk4_step<double>(zero, x3, 0.0, 0.05)(0) == 3.0);

  auto decay = [](double, const Vec& x) { return Vec(-x); };
  const Vec one = Vec::Constant(1, 1.0);
  CHECK(std::abs(rk4_step<double>(decay, one, 0.0, 0.1)(0) - std::exp(-0.1)) < 1e-7);

  const double e1 = std::abs(rk4_step<double>(decay, one, 0.0, 0.1)(0) - std::exp(-0.1));
  const double e2 = std::abs(rk4_step<double>(decay, one, 0.0, 0.05)(0) - std::exp(-0.05));
  // One-step local error is O(dt^5): the ratio should be near 32.
  CHECK(std::log2(e1 / e2) >= 3.9);
}

TEST_CASE("rk4_step rejects non-finite derivatives") {
  auto bad = [](double, const Vec& x) { return Vec(Vec::Constant(x.size(), NAN)); };
  try {
    rk4_step<double>(bad, Vec(Vec::Zero(1)), 0.0, 0.1);
    FAIL("expected NonFiniteDerivative");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteDerivative);
  }
}

TEST_CASE("gaussian_vector examples") {
  Rng rng(1);
  CHECK(gaussian_vector(rng, 0.0, 3).isZero());

  Rng a(42), b(42);
  CHECK(gaussian_vector(a, 1.0, 4) == gaussian_vector(b, 1.0, 4));

  Rng big(7);
  const Vec v = gaussian_vector(big, 0.01, 100000);
  const double mean = v.mean();
  const double var = (v.array() - mean).square().sum() / (v.size() - 1);
  CHECK(var >= 0.0095);
  CHECK(var <= 0.0105);

  try {
    gaussian_vector(rng, -1.0, 2);
    FAIL("expected NegativeVariance");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NegativeVariance);
  }
}
