#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dmrac/numerics.hpp"

namespace dmrac {

// ---------------------------------------------------------------------------
// Fixed feature bases
// ---------------------------------------------------------------------------

/// Named hand-designed feature maps used by the structured uncertainty and the
/// fixed-basis MRAC baseline.
///
///   linear    [x_0 .. x_{n-1}]
///   affine    [1, x_0 .. x_{n-1}]
///   trig      [x_0 .. x_{n-1}, sin x_0 .. sin x_{n-1}]
///   poly2     [1, x_i, x_i x_j (i <= j)]
///   wingrock  [x_0, x_1, |x_0| x_1, |x_1| x_1, x_0^3]   (n >= 2)
enum class BasisId { Linear, Affine, Trig, Poly2, WingRock };

BasisId parse_basis_id(std::string_view name);
std::string_view to_string(BasisId id);
Eigen::Index basis_dim(BasisId id, Eigen::Index n);
Vec eval_basis(BasisId id, const Vec& x);

// ---------------------------------------------------------------------------
// Polynomial / trigonometric expressions over state entries
// ---------------------------------------------------------------------------

struct Factor {
  enum class Kind { Power, Sin, Cos, Abs };
  Kind kind = Kind::Power;
  int index = 0;        // state entry x_index
  double param = 1.0;   // exponent for Power, angular multiplier for Sin/Cos

  bool operator==(const Factor&) const = default;
};

struct Term {
  double coef = 0.0;
  std::vector<Factor> factors;

  bool operator==(const Term&) const = default;
};

/// Sum of products, e.g. "0.2 + 0.1*x0 + 0.5*sin(x0) - 0.3*abs(x0)*x1^2".
struct Expression {
  std::vector<Term> terms;

  double eval(const Vec& x) const;
  int max_index() const;

  bool operator==(const Expression&) const = default;
};

Expression parse_expression(std::string_view text);
std::string to_string(const Expression& expr);

// ---------------------------------------------------------------------------
// Uncertainty Delta(x)
// ---------------------------------------------------------------------------

struct UncertaintySpec {
  enum class Kind { Zero, LinearInBasis, PolynomialTrig };

  Kind kind = Kind::Zero;
  Eigen::Index output_dim = 1;
  // LinearInBasis: Delta(x) = W*^T basis(x), W* is k x m.
  BasisId basis = BasisId::Linear;
  Mat ideal_weights;
  // PolynomialTrig: one expression per output channel.
  std::vector<Expression> channels;
  // Constant additive term (unmodelled disturbance); empty means zero.
  Vec disturbance;

  static UncertaintySpec zero(Eigen::Index m);
  static UncertaintySpec linear_in_basis(BasisId basis, Mat w_star);
  static UncertaintySpec polynomial_trig(std::vector<Expression> channels);
};

std::string_view to_string(UncertaintySpec::Kind kind);

Vec eval_uncertainty(const UncertaintySpec& spec, const Vec& x);

// ---------------------------------------------------------------------------
// Plant and reference model
// ---------------------------------------------------------------------------

/// dx/dt = A x + B (u + Delta(x))
struct PlantModel {
  Mat A;
  Mat B;
  UncertaintySpec delta;

  Eigen::Index state_dim() const { return A.rows(); }
  Eigen::Index input_dim() const { return B.cols(); }
  /// Throws ValidationError unless dimensions agree and (A, B) is controllable.
  void validate() const;
};

/// dx_rm/dt = A_rm x_rm + B_rm r
struct ReferenceModel {
  Mat A_rm;
  Mat B_rm;

  Eigen::Index state_dim() const { return A_rm.rows(); }
  Eigen::Index reference_dim() const { return B_rm.cols(); }
};

bool is_controllable(const Mat& a, const Mat& b);

Vec plant_derivative(const PlantModel& plant, const Vec& x, const Vec& u);
Vec reference_derivative(const ReferenceModel& ref, const Vec& x_rm, const Vec& r);

/// A_rm = A - B K, B_rm = B K_r. Throws NotHurwitz when A - B K is not stable.
ReferenceModel build_matched_pair(const Mat& a, const Mat& b, const Mat& k, const Mat& k_r);

/// Second-order attitude-axis gains from natural frequency and damping for the
/// double integrator: K = [wn^2, 2 zeta wn], K_r = [wn^2].
void second_order_gains(double omega_n, double zeta, Mat& k, Mat& k_r);

// ---------------------------------------------------------------------------
// Reference signal r(t)
// ---------------------------------------------------------------------------

struct SignalComponent {
  enum class Kind { Step, Sinusoid, Square, CircularPair };
  Kind kind = Kind::Sinusoid;
  int channel = 0;  // CircularPair writes channel and channel + 1
  double amplitude = 1.0;
  double frequency = 1.0;  // rad/s
  double phase = 0.0;      // rad
};

std::string_view to_string(SignalComponent::Kind kind);
SignalComponent::Kind parse_signal_kind(std::string_view name);

/// Componentwise sum of bounded, piecewise-continuous signals.
struct ReferenceSignal {
  Eigen::Index dim = 1;
  std::vector<SignalComponent> components;

  Vec operator()(double t) const;
};

}  // namespace dmrac
