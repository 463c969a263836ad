#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>

#include "dmrac/error.hpp"

namespace dmrac {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Mat = MatrixX<double>;
using Vec = VectorX<double>;

template <typename Scalar>
struct EigBounds {
  Scalar min;
  Scalar max;
};

namespace detail {

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& m, const char* who) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(who) + ": expected a nonempty square matrix, got " +
                    std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

}  // namespace detail

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.array().isFinite().all();
}

/// Symmetry up to a relative tolerance on the Frobenius norm.
template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& s,
                  typename Derived::Scalar rel_tol = 1e-10) {
  if (s.rows() != s.cols()) return false;
  using std::max;
  const auto scale = max(typename Derived::Scalar(1), s.norm());
  return (s - s.transpose()).norm() <= rel_tol * scale;
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// ascending. Sweeps stop once the off-diagonal Frobenius norm drops below
/// 1e-12 relative to the norm of the input.
template <typename Scalar>
VectorX<Scalar> jacobi_eigenvalues(const MatrixX<Scalar>& s) {
  detail::require_square(s, "jacobi_eigenvalues");
  if (!is_symmetric(s)) {
    throw Error(ErrorCode::NotSymmetric, "jacobi_eigenvalues: input is not symmetric");
  }
  using std::abs;
  using std::sqrt;
  const Eigen::Index n = s.rows();
  MatrixX<Scalar> a = (s + s.transpose()) / Scalar(2);
  const Scalar scale = std::max(a.norm(), std::numeric_limits<Scalar>::min());
  const Scalar tol = Scalar(1e-12) * scale;

  auto off_norm = [&]() {
    Scalar sum = 0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) sum += 2 * a(p, q) * a(p, q);
    return sqrt(sum);
  };

  for (int sweep = 0; sweep < 100 && off_norm() > tol; ++sweep) {
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        const Scalar theta = (a(q, q) - a(p, p)) / (2 * apq);
        const Scalar t = (theta >= 0 ? Scalar(1) : Scalar(-1)) /
                         (abs(theta) + sqrt(theta * theta + 1));
        const Scalar c = 1 / sqrt(t * t + 1);
        const Scalar sn = t * c;
        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = a(q, p) = 0;
        for (Eigen::Index r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const Scalar arp = a(r, p);
          const Scalar arq = a(r, q);
          a(r, p) = a(p, r) = c * arp - sn * arq;
          a(r, q) = a(q, r) = c * arq + sn * arp;
        }
      }
    }
  }
  VectorX<Scalar> eig = a.diagonal();
  std::sort(eig.data(), eig.data() + eig.size());
  return eig;
}

template <typename Scalar>
EigBounds<Scalar> sym_eig_bounds(const MatrixX<Scalar>& s) {
  const VectorX<Scalar> eig = jacobi_eigenvalues(s);
  return {eig(0), eig(eig.size() - 1)};
}

/// Largest real part over the spectrum of a general square matrix.
template <typename Scalar>
Scalar max_real_eigenvalue(const MatrixX<Scalar>& a) {
  detail::require_square(a, "max_real_eigenvalue");
  Eigen::EigenSolver<MatrixX<Scalar>> solver(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::NotHurwitz, "eigenvalue iteration did not converge");
  }
  return solver.eigenvalues().real().maxCoeff();
}

template <typename Scalar>
bool is_hurwitz(const MatrixX<Scalar>& a, Scalar margin = Scalar(1e-9)) {
  return max_real_eigenvalue(a) < -margin;
}

template <typename Scalar>
bool is_positive_definite(const MatrixX<Scalar>& s) {
  if (s.rows() != s.cols() || !is_symmetric(s)) return false;
  Eigen::LLT<MatrixX<Scalar>> llt(s);
  return llt.info() == Eigen::Success;
}

/// Solves A^T P + P A + Q = 0 for symmetric positive-definite P.
///
/// The n^2 x n^2 system (I (x) A^T + A^T (x) I) vec(P) = -vec(Q) is assembled
/// explicitly and factored by partial-pivot LU, which is fine for the small
/// state dimensions used here.
template <typename Scalar>
MatrixX<Scalar> solve_lyapunov(const MatrixX<Scalar>& a_rm, const MatrixX<Scalar>& q) {
  detail::require_square(a_rm, "solve_lyapunov");
  detail::require_square(q, "solve_lyapunov");
  if (a_rm.rows() != q.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "solve_lyapunov: A_rm and Q differ in size");
  }
  if (!is_symmetric(q)) throw Error(ErrorCode::NotSymmetric, "solve_lyapunov: Q");
  if (!is_positive_definite(q)) throw Error(ErrorCode::NotPositiveDefinite, "solve_lyapunov: Q");
  if (!is_hurwitz(a_rm)) {
    throw Error(ErrorCode::NotHurwitz, "solve_lyapunov: A_rm has an eigenvalue with real part >= 0");
  }

  const Eigen::Index n = a_rm.rows();
  const Eigen::Index nn = n * n;
  const MatrixX<Scalar> at = a_rm.transpose();
  MatrixX<Scalar> kron = MatrixX<Scalar>::Zero(nn, nn);
  // Column-major vec: P(i, j) lives at j * n + i.
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index row = j * n + i;
      // (A^T P)(i, j) = sum_k A^T(i, k) P(k, j)
      for (Eigen::Index k = 0; k < n; ++k) kron(row, j * n + k) += at(i, k);
      // (P A)(i, j) = sum_k P(i, k) A(k, j)
      for (Eigen::Index k = 0; k < n; ++k) kron(row, k * n + i) += a_rm(k, j);
    }
  }
  const VectorX<Scalar> rhs = -Eigen::Map<const VectorX<Scalar>>(q.data(), nn);
  const VectorX<Scalar> sol = Eigen::PartialPivLU<MatrixX<Scalar>>(kron).solve(rhs);
  MatrixX<Scalar> p = Eigen::Map<const MatrixX<Scalar>>(sol.data(), n, n);
  p = ((p + p.transpose()) / Scalar(2)).eval();
  if (!is_positive_definite(p)) {
    throw Error(ErrorCode::NotPositiveDefinite, "solve_lyapunov: solution lost definiteness");
  }
  return p;
}

/// One classical fourth-order Runge-Kutta step of dx/dt = f(t, x).
template <typename Scalar, typename F>
VectorX<Scalar> rk4_step(F&& f, const VectorX<Scalar>& x, Scalar t, Scalar dt) {
  if (!(dt > Scalar(0))) {
    throw Error(ErrorCode::NonFiniteDerivative, "rk4_step: dt must be positive");
  }
  auto checked = [&](Scalar ts, const VectorX<Scalar>& xs) {
    VectorX<Scalar> d = f(ts, xs);
    if (d.size() != x.size()) {
      throw Error(ErrorCode::DimensionMismatch, "rk4_step: derivative size differs from state");
    }
    if (!all_finite(d)) {
      throw Error(ErrorCode::NonFiniteDerivative, "rk4_step: derivative is not finite");
    }
    return d;
  };
  const Scalar half = dt / Scalar(2);
  const VectorX<Scalar> k1 = checked(t, x);
  const VectorX<Scalar> k2 = checked(t + half, x + half * k1);
  const VectorX<Scalar> k3 = checked(t + half, x + half * k2);
  const VectorX<Scalar> k4 = checked(t + dt, x + dt * k3);
  return x + (dt / Scalar(6)) * (k1 + 2 * k2 + 2 * k3 + k4);
}

/// Seeded source of randomness. Identical seeds give identical streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// i.i.d. zero-mean Gaussian samples with the given variance.
Vec gaussian_vector(Rng& rng, double variance, Eigen::Index dim);

}  // namespace dmrac
