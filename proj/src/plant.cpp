#include "dmrac/plant.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace dmrac {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::DimensionMismatch, what);
}

std::string fmt17(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Bases

BasisId parse_basis_id(std::string_view name) {
  if (name == "linear") return BasisId::Linear;
  if (name == "affine") return BasisId::Affine;
  if (name == "trig") return BasisId::Trig;
  if (name == "poly2") return BasisId::Poly2;
  if (name == "wingrock") return BasisId::WingRock;
  throw Error(ErrorCode::ValidationError, "unknown basis '" + std::string(name) + "'");
}

std::string_view to_string(BasisId id) {
  switch (id) {
    case BasisId::Linear: return "linear";
    case BasisId::Affine: return "affine";
    case BasisId::Trig: return "trig";
    case BasisId::Poly2: return "poly2";
    case BasisId::WingRock: return "wingrock";
  }
  return "linear";
}

Eigen::Index basis_dim(BasisId id, Eigen::Index n) {
  switch (id) {
    case BasisId::Linear: return n;
    case BasisId::Affine: return n + 1;
    case BasisId::Trig: return 2 * n;
    case BasisId::Poly2: return 1 + n + n * (n + 1) / 2;
    case BasisId::WingRock:
      if (n < 2) throw Error(ErrorCode::DimensionMismatch, "wingrock basis needs n >= 2");
      return 5;
  }
  return n;
}

Vec eval_basis(BasisId id, const Vec& x) {
  const Eigen::Index n = x.size();
  Vec phi(basis_dim(id, n));
  switch (id) {
    case BasisId::Linear:
      phi = x;
      break;
    case BasisId::Affine:
      phi << 1.0, x;
      break;
    case BasisId::Trig:
      phi << x, x.array().sin().matrix();
      break;
    case BasisId::Poly2: {
      Eigen::Index k = 0;
      phi(k++) = 1.0;
      for (Eigen::Index i = 0; i < n; ++i) phi(k++) = x(i);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) phi(k++) = x(i) * x(j);
      break;
    }
    case BasisId::WingRock:
      phi << x(0), x(1), std::abs(x(0)) * x(1), std::abs(x(1)) * x(1), x(0) * x(0) * x(0);
      break;
  }
  return phi;
}

// ---------------------------------------------------------------------------
// Expressions

double Expression::eval(const Vec& x) const {
  double sum = 0.0;
  for (const Term& term : terms) {
    double v = term.coef;
    for (const Factor& f : term.factors) {
      const double xi = x(f.index);
      switch (f.kind) {
        case Factor::Kind::Power: v *= std::pow(xi, f.param); break;
        case Factor::Kind::Sin: v *= std::sin(f.param * xi); break;
        case Factor::Kind::Cos: v *= std::cos(f.param * xi); break;
        case Factor::Kind::Abs: v *= std::abs(xi); break;
      }
    }
    sum += v;
  }
  return sum;
}

int Expression::max_index() const {
  int m = -1;
  for (const Term& t : terms)
    for (const Factor& f : t.factors) m = std::max(m, f.index);
  return m;
}

namespace {

class ExpressionParser {
 public:
  explicit ExpressionParser(std::string_view text) : s_(text) {}

  Expression parse() {
    Expression expr;
    skip();
    if (at_end()) fail("empty expression");
    double sign = 1.0;
    if (peek() == '+' || peek() == '-') {
      sign = peek() == '-' ? -1.0 : 1.0;
      ++pos_;
    }
    expr.terms.push_back(term(sign));
    while (true) {
      skip();
      if (at_end()) break;
      const char c = peek();
      if (c != '+' && c != '-') fail("expected '+' or '-'");
      ++pos_;
      expr.terms.push_back(term(c == '-' ? -1.0 : 1.0));
    }
    return expr;
  }

 private:
  Term term(double sign) {
    Term t;
    t.coef = sign;
    factor(t);
    while (true) {
      skip();
      if (at_end() || peek() != '*') break;
      ++pos_;
      factor(t);
    }
    return t;
  }

  void factor(Term& t) {
    skip();
    if (at_end()) fail("unexpected end of expression");
    const char c = peek();
    if (c == 'x') {
      Factor f{Factor::Kind::Power, variable(), 1.0};
      skip();
      if (!at_end() && peek() == '^') {
        ++pos_;
        const double p = number();
        if (p < 0 || p != std::floor(p)) fail("exponent must be a nonnegative integer");
        f.param = p;
      }
      t.factors.push_back(f);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::string name = identifier();
      Factor f;
      if (name == "sin") f.kind = Factor::Kind::Sin;
      else if (name == "cos") f.kind = Factor::Kind::Cos;
      else if (name == "abs") f.kind = Factor::Kind::Abs;
      else fail("unknown function '" + name + "'");
      expect('(');
      skip();
      if (peek() != 'x') {
        if (f.kind == Factor::Kind::Abs) fail("abs takes a bare state entry");
        f.param = number();
        expect('*');
        skip();
      }
      f.index = variable();
      expect(')');
      t.factors.push_back(f);
      return;
    }
    t.coef *= number();
  }

  int variable() {
    skip();
    if (at_end() || peek() != 'x') fail("expected state entry 'x<i>'");
    ++pos_;
    const std::size_t start = pos_;
    while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    if (start == pos_) fail("expected index after 'x'");
    return std::stoi(std::string(s_.substr(start, pos_ - start)));
  }

  std::string identifier() {
    const std::size_t start = pos_;
    while (!at_end() && std::isalpha(static_cast<unsigned char>(peek()))) ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }

  double number() {
    skip();
    const std::size_t start = pos_;
    if (!at_end() && (peek() == '-' || peek() == '+')) ++pos_;
    while (!at_end()) {
      const char c = peek();
      const bool exp_sign = (c == '-' || c == '+') && pos_ > start &&
                            (s_[pos_ - 1] == 'e' || s_[pos_ - 1] == 'E');
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == 'e' || c == 'E' ||
          exp_sign) {
        ++pos_;
      } else {
        break;
      }
    }
    const std::string tok(s_.substr(start, pos_ - start));
    if (tok.empty()) fail("expected a number");
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      fail("malformed number '" + tok + "'");
    }
    if (used != tok.size()) fail("malformed number '" + tok + "'");
    return v;
  }

  void expect(char c) {
    skip();
    if (at_end() || peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void skip() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
  }
  bool at_end() const { return pos_ >= s_.size(); }
  char peek() const { return s_[pos_]; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorCode::ParseError,
                "expression column " + std::to_string(pos_ + 1) + ": " + msg);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression parse_expression(std::string_view text) { return ExpressionParser(text).parse(); }

std::string to_string(const Expression& expr) {
  std::string out;
  for (std::size_t i = 0; i < expr.terms.size(); ++i) {
    const Term& t = expr.terms[i];
    if (i > 0) out += " + ";
    out += fmt17(t.coef);
    for (const Factor& f : t.factors) {
      const std::string var = "x" + std::to_string(f.index);
      switch (f.kind) {
        case Factor::Kind::Power:
          out += "*" + var;
          if (f.param != 1.0) out += "^" + fmt17(f.param);
          break;
        case Factor::Kind::Sin: out += "*sin(" + fmt17(f.param) + "*" + var + ")"; break;
        case Factor::Kind::Cos: out += "*cos(" + fmt17(f.param) + "*" + var + ")"; break;
        case Factor::Kind::Abs: out += "*abs(" + var + ")"; break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Uncertainty

UncertaintySpec UncertaintySpec::zero(Eigen::Index m) {
  UncertaintySpec s;
  s.kind = Kind::Zero;
  s.output_dim = m;
  return s;
}

UncertaintySpec UncertaintySpec::linear_in_basis(BasisId basis, Mat w_star) {
  UncertaintySpec s;
  s.kind = Kind::LinearInBasis;
  s.basis = basis;
  s.output_dim = w_star.cols();
  s.ideal_weights = std::move(w_star);
  return s;
}

UncertaintySpec UncertaintySpec::polynomial_trig(std::vector<Expression> channels) {
  UncertaintySpec s;
  s.kind = Kind::PolynomialTrig;
  s.output_dim = static_cast<Eigen::Index>(channels.size());
  s.channels = std::move(channels);
  return s;
}

std::string_view to_string(UncertaintySpec::Kind kind) {
  switch (kind) {
    case UncertaintySpec::Kind::Zero: return "zero";
    case UncertaintySpec::Kind::LinearInBasis: return "linear-in-basis";
    case UncertaintySpec::Kind::PolynomialTrig: return "polynomial-trig";
  }
  return "zero";
}

Vec eval_uncertainty(const UncertaintySpec& spec, const Vec& x) {
  Vec out;
  switch (spec.kind) {
    case UncertaintySpec::Kind::Zero:
      out = Vec::Zero(spec.output_dim);
      break;
    case UncertaintySpec::Kind::LinearInBasis:
      out = spec.ideal_weights.transpose() * eval_basis(spec.basis, x);
      break;
    case UncertaintySpec::Kind::PolynomialTrig:
      out.resize(spec.output_dim);
      for (Eigen::Index i = 0; i < spec.output_dim; ++i) out(i) = spec.channels[i].eval(x);
      break;
  }
  if (spec.disturbance.size() > 0) out += spec.disturbance;
  return out;
}

// ---------------------------------------------------------------------------
// Plant / reference

bool is_controllable(const Mat& a, const Mat& b) {
  const Eigen::Index n = a.rows();
  Mat ctrb(n, n * b.cols());
  Mat block = b;
  for (Eigen::Index i = 0; i < n; ++i) {
    ctrb.middleCols(i * b.cols(), b.cols()) = block;
    block = a * block;
  }
  Eigen::FullPivLU<Mat> lu(ctrb);
  lu.setThreshold(1e-10);
  return lu.rank() == n;
}

void PlantModel::validate() const {
  if (A.rows() != A.cols() || A.rows() == 0) {
    throw Error(ErrorCode::ValidationError, "plant A must be square");
  }
  if (B.rows() != A.rows() || B.cols() == 0) {
    throw Error(ErrorCode::ValidationError, "plant B must have as many rows as A");
  }
  if (!all_finite(A) || !all_finite(B)) {
    throw Error(ErrorCode::ValidationError, "plant matrices must be finite");
  }
  if (!is_controllable(A, B)) {
    throw Error(ErrorCode::ValidationError, "(A, B) is not controllable");
  }
  if (delta.output_dim != B.cols()) {
    throw Error(ErrorCode::ValidationError, "uncertainty output dimension must equal B columns");
  }
  if (delta.kind == UncertaintySpec::Kind::LinearInBasis &&
      delta.ideal_weights.rows() != basis_dim(delta.basis, A.rows())) {
    throw Error(ErrorCode::ValidationError, "ideal weights rows must equal basis dimension");
  }
  if (delta.kind == UncertaintySpec::Kind::PolynomialTrig) {
    for (const Expression& e : delta.channels) {
      if (e.max_index() >= A.rows()) {
        throw Error(ErrorCode::ValidationError, "uncertainty expression references x beyond n");
      }
    }
  }
  if (delta.disturbance.size() != 0 && delta.disturbance.size() != B.cols()) {
    throw Error(ErrorCode::ValidationError, "disturbance dimension must equal B columns");
  }
}

Vec plant_derivative(const PlantModel& plant, const Vec& x, const Vec& u) {
  require(x.size() == plant.A.rows(), "plant_derivative: state dimension");
  require(u.size() == plant.B.cols(), "plant_derivative: control dimension");
  return plant.A * x + plant.B * (u + eval_uncertainty(plant.delta, x));
}

Vec reference_derivative(const ReferenceModel& ref, const Vec& x_rm, const Vec& r) {
  require(x_rm.size() == ref.A_rm.rows(), "reference_derivative: state dimension");
  require(r.size() == ref.B_rm.cols(), "reference_derivative: reference dimension");
  return ref.A_rm * x_rm + ref.B_rm * r;
}

ReferenceModel build_matched_pair(const Mat& a, const Mat& b, const Mat& k, const Mat& k_r) {
  require(a.rows() == a.cols(), "build_matched_pair: A must be square");
  require(b.rows() == a.rows(), "build_matched_pair: B rows");
  require(k.rows() == b.cols() && k.cols() == a.rows(), "build_matched_pair: K must be m x n");
  require(k_r.rows() == b.cols(), "build_matched_pair: K_r must have m rows");
  ReferenceModel ref{a - b * k, b * k_r};
  if (!is_hurwitz(ref.A_rm)) {
    throw Error(ErrorCode::NotHurwitz, "A - B K has an eigenvalue with nonnegative real part");
  }
  return ref;
}

void second_order_gains(double omega_n, double zeta, Mat& k, Mat& k_r) {
  k.resize(1, 2);
  k << omega_n * omega_n, 2.0 * zeta * omega_n;
  k_r.resize(1, 1);
  k_r << omega_n * omega_n;
}

// ---------------------------------------------------------------------------
// Reference signal

std::string_view to_string(SignalComponent::Kind kind) {
  switch (kind) {
    case SignalComponent::Kind::Step: return "step";
    case SignalComponent::Kind::Sinusoid: return "sinusoid";
    case SignalComponent::Kind::Square: return "square";
    case SignalComponent::Kind::CircularPair: return "circular-pair";
  }
  return "sinusoid";
}

SignalComponent::Kind parse_signal_kind(std::string_view name) {
  if (name == "step") return SignalComponent::Kind::Step;
  if (name == "sinusoid") return SignalComponent::Kind::Sinusoid;
  if (name == "square") return SignalComponent::Kind::Square;
  if (name == "circular-pair") return SignalComponent::Kind::CircularPair;
  throw Error(ErrorCode::ValidationError, "unknown reference kind '" + std::string(name) + "'");
}

Vec ReferenceSignal::operator()(double t) const {
  Vec r = Vec::Zero(dim);
  for (const SignalComponent& c : components) {
    const double arg = c.frequency * t + c.phase;
    switch (c.kind) {
      case SignalComponent::Kind::Step: r(c.channel) += c.amplitude; break;
      case SignalComponent::Kind::Sinusoid: r(c.channel) += c.amplitude * std::sin(arg); break;
      case SignalComponent::Kind::Square:
        r(c.channel) += std::sin(arg) >= 0.0 ? c.amplitude : -c.amplitude;
        break;
      case SignalComponent::Kind::CircularPair:
        r(c.channel) += c.amplitude * std::sin(arg);
        r(c.channel + 1) += c.amplitude * std::cos(arg);
        break;
    }
  }
  return r;
}

}  // namespace dmrac
