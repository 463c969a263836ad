#include "dmrac/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

namespace dmrac {

namespace {

namespace pt = boost::property_tree;

// ---------------------------------------------------------------------------
// Value syntax

[[noreturn]] void bad_value(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::ParseError, where + ": " + what);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == ',') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double to_double(const std::string& where, std::string_view s) {
  const std::string t = trim(s);
  double v = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (t.empty() || ec != std::errc() || ptr != last) {
    bad_value(where, "expected a number, got '" + t + "'");
  }
  return v;
}

std::uint64_t to_uint(const std::string& where, std::string_view s) {
  const std::string t = trim(s);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    bad_value(where, "expected a nonnegative integer, got '" + t + "'");
  }
  return v;
}

bool to_bool(const std::string& where, std::string_view s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  bad_value(where, "expected true or false, got '" + t + "'");
}

Vec to_vector(const std::string& where, std::string_view s) {
  const auto tokens = split_tokens(s);
  Vec v(static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = to_double(where, tokens[i]);
  }
  return v;
}

// Rows separated by ';', entries by blanks or commas.
Mat to_matrix(const std::string& where, std::string_view s) {
  std::vector<Vec> rows;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t end = std::min(s.find(';', start), s.size());
    const std::string_view part = s.substr(start, end - start);
    if (!trim(part).empty()) rows.push_back(to_vector(where, part));
    start = end + 1;
  }
  if (rows.empty()) return Mat();
  Mat m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) bad_value(where, "matrix rows differ in length");
    m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return m;
}

std::vector<Eigen::Index> to_dims(const std::string& where, std::string_view s) {
  std::vector<Eigen::Index> out;
  for (const auto& tok : split_tokens(s)) out.push_back(static_cast<Eigen::Index>(to_uint(where, tok)));
  return out;
}

// "sinusoid channel=0 amplitude=1 frequency=1 phase=0"
SignalComponent to_signal(const std::string& where, std::string_view s) {
  const auto tokens = split_tokens(s);
  if (tokens.empty()) bad_value(where, "empty signal");
  SignalComponent c;
  try {
    c.kind = parse_signal_kind(tokens.front());
  } catch (const Error& e) {
    bad_value(where, e.what());
  }
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    const auto eq = tokens[i].find('=');
    if (eq == std::string::npos) bad_value(where, "expected key=value, got '" + tokens[i] + "'");
    const std::string key = tokens[i].substr(0, eq);
    const std::string val = tokens[i].substr(eq + 1);
    if (key == "channel") {
      c.channel = static_cast<int>(to_uint(where, val));
    } else if (key == "amplitude") {
      c.amplitude = to_double(where, val);
    } else if (key == "frequency") {
      c.frequency = to_double(where, val);
    } else if (key == "phase") {
      c.phase = to_double(where, val);
    } else {
      bad_value(where, "unknown signal field '" + key + "'");
    }
  }
  return c;
}

UncertaintySpec::Kind to_uncertainty_kind(const std::string& where, std::string_view s) {
  for (auto k : {UncertaintySpec::Kind::Zero, UncertaintySpec::Kind::LinearInBasis,
                 UncertaintySpec::Kind::PolynomialTrig}) {
    if (trim(s) == to_string(k)) return k;
  }
  bad_value(where, "unknown uncertainty kind '" + trim(s) + "'");
}

// Index suffix of keys like "signal3" or "delta0".
std::optional<std::size_t> indexed_key(std::string_view key, std::string_view prefix) {
  if (key.substr(0, prefix.size()) != prefix || key.size() == prefix.size()) return std::nullopt;
  std::size_t idx = 0;
  const auto rest = key.substr(prefix.size());
  const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), idx);
  if (ec != std::errc() || ptr != rest.data() + rest.size()) return std::nullopt;
  return idx;
}

// ---------------------------------------------------------------------------
// Formatting

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string fmt(const Vec& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? " " : "") + fmt(v(i));
  return out;
}

std::string fmt(const Mat& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (i) out += "; ";
    for (Eigen::Index j = 0; j < m.cols(); ++j) out += (j ? " " : "") + fmt(m(i, j));
  }
  return out;
}

std::string fmt(const SignalComponent& c) {
  return std::string(to_string(c.kind)) + " channel=" + std::to_string(c.channel) +
         " amplitude=" + fmt(c.amplitude) + " frequency=" + fmt(c.frequency) +
         " phase=" + fmt(c.phase);
}

bool same(const Mat& a, const Mat& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

bool same(const Vec& a, const Vec& b) {
  return a.size() == b.size() && (a.size() == 0 || a == b);
}

bool same(const std::vector<SignalComponent>& a, const std::vector<SignalComponent>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].kind != b[i].kind || a[i].channel != b[i].channel ||
        a[i].amplitude != b[i].amplitude || a[i].frequency != b[i].frequency ||
        a[i].phase != b[i].phase) {
      return false;
    }
  }
  return true;
}

bool same(const DmracConfig& a, const DmracConfig& b) {
  return a.dt == b.dt && a.T == b.T && a.eta == b.eta && a.zeta_tol == b.zeta_tol &&
         a.p_max == b.p_max && a.minibatch == b.minibatch && a.train_every == b.train_every &&
         a.epochs_per_round == b.epochs_per_round && a.noise_variance == b.noise_variance &&
         a.mode == b.mode && a.seed == b.seed && a.w_bound == b.w_bound &&
         a.eps_proj == b.eps_proj && same(a.x0, b.x0) && same(a.domain, b.domain) &&
         a.continuous_adaptation == b.continuous_adaptation &&
         a.record_weights == b.record_weights && a.parallel_trainer == b.parallel_trainer &&
         a.check_snapshots == b.check_snapshots;
}

// ---------------------------------------------------------------------------
// Built-in scenarios

Mat double_integrator_a() {
  Mat a(2, 2);
  a << 0.0, 1.0, 0.0, 0.0;
  return a;
}

Mat double_integrator_b() {
  Mat b(2, 1);
  b << 0.0, 1.0;
  return b;
}

ReferenceSignal two_sinusoids() {
  ReferenceSignal r;
  r.dim = 1;
  r.components = {{SignalComponent::Kind::Sinusoid, 0, 1.0, 1.0, 0.0},
                  {SignalComponent::Kind::Sinusoid, 0, 0.5, 2.3, 0.3}};
  return r;
}

double default_w_bound(const UncertaintySpec& delta) {
  if (delta.kind == UncertaintySpec::Kind::LinearInBasis && delta.ideal_weights.size() > 0) {
    return 10.0 * delta.ideal_weights.norm();
  }
  return 100.0;
}

ScenarioConfig desk_attitude() {
  ScenarioConfig c;
  c.name = "desk-attitude";
  c.A = double_integrator_a();
  c.B = double_integrator_b();
  c.gains.Q = 100.0 * Mat::Identity(2, 2);
  c.uncertainty =
      UncertaintySpec::polynomial_trig({parse_expression("2 + 3*x0 + 4*sin(x0) - 2*abs(x0)*x1")});
  c.reference = two_sinusoids();
  c.evaluation.dim = 1;
  c.dmrac.domain = Vec::Constant(2, 5.0);
  return c;
}

ScenarioConfig structured() {
  ScenarioConfig c;
  c.name = "structured";
  c.A = double_integrator_a();
  c.B = double_integrator_b();
  c.gains.gamma_scale = 20.0;
  c.gains.Q = 10.0 * Mat::Identity(2, 2);
  Mat w_star(4, 1);
  w_star << 1.0, -0.8, 2.0, 0.6;
  c.uncertainty = UncertaintySpec::linear_in_basis(BasisId::Trig, w_star);
  c.reference = two_sinusoids();
  c.evaluation.dim = 1;
  c.baseline_basis = BasisId::Trig;
  c.dmrac.dt = 0.005;
  c.dmrac.T = 80.0;
  c.dmrac.noise_variance = 0.0;
  c.dmrac.mode = Mode::MracFixedBasis;
  c.dmrac.continuous_adaptation = true;
  c.dmrac.w_bound = default_w_bound(c.uncertainty);
  c.dmrac.domain = Vec::Constant(2, 5.0);
  return c;
}

ScenarioConfig retention() {
  ScenarioConfig c = desk_attitude();
  c.name = "retention";
  c.evaluation = c.reference;
  for (auto& comp : c.evaluation.components) comp.phase += std::numbers::pi / 2.0;
  return c;
}

// ---------------------------------------------------------------------------
// Overlay of parsed keys onto a base scenario

using Setter = std::function<void(ScenarioConfig&, const std::string& where, const std::string& v)>;

const std::map<std::string, std::map<std::string, Setter>>& setters() {
  static const std::map<std::string, std::map<std::string, Setter>> table = {
      {"plant",
       {{"A", [](auto& c, auto& w, auto& v) { c.A = to_matrix(w, v); }},
        {"B", [](auto& c, auto& w, auto& v) { c.B = to_matrix(w, v); }}}},
      {"gains",
       {{"K", [](auto& c, auto& w, auto& v) { c.gains.K = to_matrix(w, v); }},
        {"K_r", [](auto& c, auto& w, auto& v) { c.gains.K_r = to_matrix(w, v); }},
        {"omega_n", [](auto& c, auto& w, auto& v) { c.gains.omega_n = to_double(w, v); }},
        {"zeta", [](auto& c, auto& w, auto& v) { c.gains.zeta = to_double(w, v); }},
        {"gamma_scale", [](auto& c, auto& w, auto& v) { c.gains.gamma_scale = to_double(w, v); }},
        {"Q", [](auto& c, auto& w, auto& v) { c.gains.Q = to_matrix(w, v); }}}},
      {"uncertainty",
       {{"kind", [](auto& c, auto& w, auto& v) { c.uncertainty.kind = to_uncertainty_kind(w, v); }},
        {"basis",
         [](auto& c, auto& w, auto& v) {
           try {
             c.uncertainty.basis = parse_basis_id(trim(v));
           } catch (const Error& e) {
             bad_value(w, e.what());
           }
         }},
        {"weights", [](auto& c, auto& w, auto& v) { c.uncertainty.ideal_weights = to_matrix(w, v); }},
        {"disturbance",
         [](auto& c, auto& w, auto& v) { c.uncertainty.disturbance = to_vector(w, v); }}}},
      {"reference",
       {{"dim", [](auto& c, auto& w, auto& v) {
          c.reference.dim = static_cast<Eigen::Index>(to_uint(w, v));
        }}}},
      {"evaluation",
       {{"dim", [](auto& c, auto& w, auto& v) {
          c.evaluation.dim = static_cast<Eigen::Index>(to_uint(w, v));
        }}}},
      {"network",
       {{"hidden", [](auto& c, auto& w, auto& v) { c.network.hidden = to_dims(w, v); }},
        {"init_seed", [](auto& c, auto& w, auto& v) { c.network.init_seed = to_uint(w, v); }}}},
      {"dmrac",
       {{"dt", [](auto& c, auto& w, auto& v) { c.dmrac.dt = to_double(w, v); }},
        {"T", [](auto& c, auto& w, auto& v) { c.dmrac.T = to_double(w, v); }},
        {"eta", [](auto& c, auto& w, auto& v) { c.dmrac.eta = to_double(w, v); }},
        {"zeta_tol", [](auto& c, auto& w, auto& v) { c.dmrac.zeta_tol = to_double(w, v); }},
        {"p_max", [](auto& c, auto& w, auto& v) { c.dmrac.p_max = to_uint(w, v); }},
        {"minibatch", [](auto& c, auto& w, auto& v) { c.dmrac.minibatch = to_uint(w, v); }},
        {"train_every", [](auto& c, auto& w, auto& v) { c.dmrac.train_every = to_uint(w, v); }},
        {"epochs_per_round",
         [](auto& c, auto& w, auto& v) { c.dmrac.epochs_per_round = to_uint(w, v); }},
        {"noise_variance",
         [](auto& c, auto& w, auto& v) { c.dmrac.noise_variance = to_double(w, v); }},
        {"mode",
         [](auto& c, auto& w, auto& v) {
           try {
             c.dmrac.mode = parse_mode(trim(v));
           } catch (const Error& e) {
             bad_value(w, e.what());
           }
         }},
        {"seed", [](auto& c, auto& w, auto& v) { c.dmrac.seed = to_uint(w, v); }},
        {"w_bound", [](auto& c, auto& w, auto& v) { c.dmrac.w_bound = to_double(w, v); }},
        {"eps_proj", [](auto& c, auto& w, auto& v) { c.dmrac.eps_proj = to_double(w, v); }},
        {"x0", [](auto& c, auto& w, auto& v) { c.dmrac.x0 = to_vector(w, v); }},
        {"domain", [](auto& c, auto& w, auto& v) { c.dmrac.domain = to_vector(w, v); }},
        {"adaptation",
         [](auto& c, auto& w, auto& v) {
           const std::string t = trim(v);
           if (t != "sampled" && t != "continuous") {
             bad_value(w, "expected sampled or continuous, got '" + t + "'");
           }
           c.dmrac.continuous_adaptation = t == "continuous";
         }},
        {"parallel_trainer",
         [](auto& c, auto& w, auto& v) { c.dmrac.parallel_trainer = to_bool(w, v); }},
        {"check_snapshots",
         [](auto& c, auto& w, auto& v) { c.dmrac.check_snapshots = to_bool(w, v); }}}},
      {"baseline",
       {{"basis",
         [](auto& c, auto& w, auto& v) {
           try {
             c.baseline_basis = parse_basis_id(trim(v));
           } catch (const Error& e) {
             bad_value(w, e.what());
           }
         }}}},
      {"bounds",
       {{"eps_bar", [](auto& c, auto& w, auto& v) { c.bounds.eps_bar = to_double(w, v); }},
        {"e_norm", [](auto& c, auto& w, auto& v) { c.bounds.e_norm = to_double(w, v); }},
        {"eps", [](auto& c, auto& w, auto& v) { c.bounds.eps = to_double(w, v); }},
        {"delta", [](auto& c, auto& w, auto& v) { c.bounds.delta = to_double(w, v); }},
        {"k_bits", [](auto& c, auto& w, auto& v) { c.bounds.k_bits = to_uint(w, v); }},
        {"n_weights", [](auto& c, auto& w, auto& v) { c.bounds.n_weights = to_uint(w, v); }}}},
      {"output",
       {{"trace", [](auto& c, auto&, auto& v) { c.output.trace = trim(v); }},
        {"summary", [](auto& c, auto&, auto& v) { c.output.summary = trim(v); }}}},
  };
  return table;
}

// Drops the fields the selected uncertainty kind does not use.
void normalize_uncertainty(ScenarioConfig& c) {
  UncertaintySpec& u = c.uncertainty;
  const Eigen::Index m = c.B.cols();
  if (u.kind != UncertaintySpec::Kind::LinearInBasis) {
    u.basis = BasisId::Linear;
    u.ideal_weights = Mat();
  }
  if (u.kind != UncertaintySpec::Kind::PolynomialTrig) u.channels.clear();
  switch (u.kind) {
    case UncertaintySpec::Kind::Zero: u.output_dim = m; break;
    case UncertaintySpec::Kind::LinearInBasis: u.output_dim = u.ideal_weights.cols(); break;
    case UncertaintySpec::Kind::PolynomialTrig:
      u.output_dim = static_cast<Eigen::Index>(u.channels.size());
      break;
  }
}

}  // namespace

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
  const auto& ua = a.uncertainty;
  const auto& ub = b.uncertainty;
  return a.name == b.name && same(a.A, b.A) && same(a.B, b.B) && same(a.gains.K, b.gains.K) &&
         same(a.gains.K_r, b.gains.K_r) && a.gains.omega_n == b.gains.omega_n &&
         a.gains.zeta == b.gains.zeta && a.gains.gamma_scale == b.gains.gamma_scale &&
         same(a.gains.Q, b.gains.Q) && ua.kind == ub.kind && ua.output_dim == ub.output_dim &&
         ua.basis == ub.basis && same(ua.ideal_weights, ub.ideal_weights) &&
         ua.channels == ub.channels && same(ua.disturbance, ub.disturbance) &&
         a.reference.dim == b.reference.dim &&
         same(a.reference.components, b.reference.components) &&
         a.evaluation.dim == b.evaluation.dim &&
         same(a.evaluation.components, b.evaluation.components) &&
         a.network.hidden == b.network.hidden && a.network.init_seed == b.network.init_seed &&
         a.baseline_basis == b.baseline_basis && same(a.dmrac, b.dmrac) &&
         a.bounds.eps_bar == b.bounds.eps_bar && a.bounds.e_norm == b.bounds.e_norm &&
         a.bounds.eps == b.bounds.eps && a.bounds.delta == b.bounds.delta &&
         a.bounds.k_bits == b.bounds.k_bits && a.bounds.n_weights == b.bounds.n_weights &&
         a.output.trace == b.output.trace && a.output.summary == b.output.summary;
}

std::vector<std::string_view> builtin_scenario_names() {
  return {"desk-attitude", "structured", "retention"};
}

ScenarioConfig builtin_scenario(std::string_view name) {
  if (name == "desk-attitude") return desk_attitude();
  if (name == "structured") return structured();
  if (name == "retention") return retention();
  throw Error(ErrorCode::ValidationError, "unknown scenario '" + std::string(name) + "'");
}

ScenarioConfig parse_config(std::string_view text) {
  pt::ptree tree;
  try {
    std::istringstream is{std::string(text)};
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(e.line()) + ": " + e.message());
  }

  std::string base = "desk-attitude";
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw Error(ErrorCode::ValidationError, "key '" + section + "' outside of a section");
    }
    if (section != "scenario") continue;
    for (const auto& [key, value] : body) {
      if (key != "name") {
        throw Error(ErrorCode::ValidationError, "unknown key [scenario] " + key);
      }
      base = trim(value.data());
    }
  }
  ScenarioConfig cfg = builtin_scenario(base);

  bool w_bound_given = false;
  std::map<std::size_t, Expression> deltas;
  std::map<std::size_t, SignalComponent> ref_signals;
  std::map<std::size_t, SignalComponent> eval_signals;
  const auto& table = setters();
  for (const auto& [section, body] : tree) {
    if (section == "scenario") continue;
    const auto sec = table.find(section);
    if (sec == table.end()) {
      throw Error(ErrorCode::ValidationError, "unknown section [" + section + "]");
    }
    for (const auto& [key, value] : body) {
      const std::string where = "[" + section + "] " + key;
      const std::string v = value.data();
      if (auto s = sec->second.find(key); s != sec->second.end()) {
        s->second(cfg, where, v);
        if (section == "dmrac" && key == "w_bound") w_bound_given = true;
      } else if (auto i = indexed_key(key, "delta"); i && section == "uncertainty") {
        try {
          deltas[*i] = parse_expression(v);
        } catch (const Error& e) {
          bad_value(where, e.what());
        }
      } else if (auto j = indexed_key(key, "signal"); j && section == "reference") {
        ref_signals[*j] = to_signal(where, v);
      } else if (auto k = indexed_key(key, "signal"); k && section == "evaluation") {
        eval_signals[*k] = to_signal(where, v);
      } else {
        throw Error(ErrorCode::ValidationError, "unknown key " + where);
      }
    }
  }

  auto dense = [](const auto& indexed, const char* what) {
    using T = typename std::decay_t<decltype(indexed)>::mapped_type;
    std::vector<T> out;
    for (const auto& [idx, item] : indexed) {
      if (idx != out.size()) {
        throw Error(ErrorCode::ValidationError,
                    std::string(what) + " indices must be consecutive from 0");
      }
      out.push_back(item);
    }
    return out;
  };
  if (!deltas.empty()) cfg.uncertainty.channels = dense(deltas, "delta");
  if (!ref_signals.empty()) cfg.reference.components = dense(ref_signals, "reference signal");
  if (!eval_signals.empty()) cfg.evaluation.components = dense(eval_signals, "evaluation signal");
  normalize_uncertainty(cfg);
  if (!w_bound_given) cfg.dmrac.w_bound = default_w_bound(cfg.uncertainty);

  validate(cfg);
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ScenarioConfig& c) {
  std::ostringstream os;
  os << "[scenario]\nname = " << c.name << "\n\n";
  os << "[plant]\nA = " << fmt(c.A) << "\nB = " << fmt(c.B) << "\n\n";

  os << "[gains]\n";
  if (c.gains.K.size() > 0) os << "K = " << fmt(c.gains.K) << "\nK_r = " << fmt(c.gains.K_r) << "\n";
  os << "omega_n = " << fmt(c.gains.omega_n) << "\nzeta = " << fmt(c.gains.zeta)
     << "\ngamma_scale = " << fmt(c.gains.gamma_scale) << "\nQ = " << fmt(c.gains.Q) << "\n\n";

  const UncertaintySpec& u = c.uncertainty;
  os << "[uncertainty]\nkind = " << to_string(u.kind) << "\n";
  if (u.kind == UncertaintySpec::Kind::LinearInBasis) {
    os << "basis = " << to_string(u.basis) << "\nweights = " << fmt(u.ideal_weights) << "\n";
  }
  for (std::size_t i = 0; i < u.channels.size(); ++i) {
    os << "delta" << i << " = " << to_string(u.channels[i]) << "\n";
  }
  os << "disturbance = " << fmt(u.disturbance) << "\n\n";

  auto signal_section = [&](const char* name, const ReferenceSignal& r) {
    os << "[" << name << "]\ndim = " << r.dim << "\n";
    for (std::size_t i = 0; i < r.components.size(); ++i) {
      os << "signal" << i << " = " << fmt(r.components[i]) << "\n";
    }
    os << "\n";
  };
  signal_section("reference", c.reference);
  signal_section("evaluation", c.evaluation);

  os << "[network]\nhidden =";
  for (auto h : c.network.hidden) os << " " << h;
  os << "\ninit_seed = " << c.network.init_seed << "\n\n";

  const DmracConfig& d = c.dmrac;
  os << "[dmrac]\n"
     << "dt = " << fmt(d.dt) << "\nT = " << fmt(d.T) << "\neta = " << fmt(d.eta)
     << "\nzeta_tol = " << fmt(d.zeta_tol) << "\np_max = " << d.p_max
     << "\nminibatch = " << d.minibatch << "\ntrain_every = " << d.train_every
     << "\nepochs_per_round = " << d.epochs_per_round
     << "\nnoise_variance = " << fmt(d.noise_variance) << "\nmode = " << to_string(d.mode)
     << "\nseed = " << d.seed << "\nw_bound = " << fmt(d.w_bound)
     << "\neps_proj = " << fmt(d.eps_proj) << "\nx0 = " << fmt(d.x0)
     << "\ndomain = " << fmt(d.domain)
     << "\nadaptation = " << (d.continuous_adaptation ? "continuous" : "sampled")
     << "\nparallel_trainer = " << (d.parallel_trainer ? "true" : "false")
     << "\ncheck_snapshots = " << (d.check_snapshots ? "true" : "false") << "\n\n";

  os << "[baseline]\nbasis = " << to_string(c.baseline_basis) << "\n\n";

  os << "[bounds]\n";
  if (c.bounds.eps_bar) os << "eps_bar = " << fmt(*c.bounds.eps_bar) << "\n";
  os << "e_norm = " << fmt(c.bounds.e_norm) << "\n";
  if (c.bounds.eps) os << "eps = " << fmt(*c.bounds.eps) << "\n";
  if (c.bounds.delta) os << "delta = " << fmt(*c.bounds.delta) << "\n";
  os << "k_bits = " << c.bounds.k_bits << "\nn_weights = " << c.bounds.n_weights << "\n\n";

  os << "[output]\ntrace = " << c.output.trace << "\nsummary = " << c.output.summary << "\n";
  return os.str();
}

Eigen::Index adaptive_feature_dim(const ScenarioConfig& cfg) {
  if (cfg.dmrac.mode == Mode::MracFixedBasis) return basis_dim(cfg.baseline_basis, cfg.A.rows());
  return cfg.network.hidden.back();
}

ClosedLoop make_closed_loop(const ScenarioConfig& cfg, bool evaluation) {
  Mat k = cfg.gains.K;
  Mat k_r = cfg.gains.K_r;
  if (k.size() == 0) second_order_gains(cfg.gains.omega_n, cfg.gains.zeta, k, k_r);
  PlantModel plant{cfg.A, cfg.B, cfg.uncertainty};
  ReferenceModel ref = build_matched_pair(cfg.A, cfg.B, k, k_r);
  const Eigen::Index dim = adaptive_feature_dim(cfg);
  GainSet gains = GainSet::make(ref, k, k_r, cfg.gains.gamma_scale * Mat::Identity(dim, dim),
                                cfg.gains.Q);
  return ClosedLoop{std::move(plant), std::move(ref), std::move(gains),
                    evaluation ? cfg.evaluation : cfg.reference};
}

FeatureNetwork initial_network(const ScenarioConfig& cfg) {
  std::vector<Eigen::Index> dims{cfg.A.rows()};
  dims.insert(dims.end(), cfg.network.hidden.begin(), cfg.network.hidden.end());
  Rng rng(cfg.network.init_seed);
  return FeatureNetwork::initialize(dims, cfg.B.cols(), rng);
}

RunOutput run_configured(const ScenarioConfig& cfg, bool evaluation,
                         const std::optional<FeatureNetwork>& net) {
  const ClosedLoop loop = make_closed_loop(cfg, evaluation);
  if (net && (net->input_dim() != cfg.A.rows() || net->output_dim() != cfg.B.cols())) {
    throw Error(ErrorCode::ValidationError, "network dimensions do not match the plant");
  }
  Rng rng(cfg.dmrac.seed);
  RunOutput out;
  switch (cfg.dmrac.mode) {
    case Mode::DmracAdaptive: {
      EpisodeResult res = run_episode(cfg.dmrac, loop, net ? *net : initial_network(cfg), rng);
      out.trace = std::move(res.trace);
      out.net = std::move(res.net);
      out.buffer = std::move(res.buffer);
      break;
    }
    case Mode::DmracFrozen:
      if (!net) throw Error(ErrorCode::ValidationError, "dmrac-frozen needs a trained network");
      out.trace = run_frozen(cfg.dmrac, loop, *net, rng);
      break;
    case Mode::MracFixedBasis:
    case Mode::NoAdaptation:
      out.trace = run_baseline(cfg.dmrac, loop, cfg.baseline_basis, rng);
      break;
  }
  return out;
}

void validate(const ScenarioConfig& cfg) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::ValidationError, what);
  };
  const Eigen::Index n = cfg.A.rows();
  const Eigen::Index m = cfg.B.cols();
  need(n > 0 && cfg.A.cols() == n, "A must be square and non-empty");
  need(cfg.B.rows() == n && m > 0, "B must have n rows");
  need(all_finite(cfg.A) && all_finite(cfg.B), "A and B must be finite");

  const UncertaintySpec& u = cfg.uncertainty;
  need(u.output_dim == m, "uncertainty output dimension must equal the number of inputs");
  if (u.kind == UncertaintySpec::Kind::LinearInBasis) {
    need(u.ideal_weights.rows() == basis_dim(u.basis, n),
         "uncertainty weights must have one row per basis function");
  }
  if (u.kind == UncertaintySpec::Kind::PolynomialTrig) {
    for (const auto& ch : u.channels) need(ch.max_index() < n, "uncertainty refers to x_i with i >= n");
  }
  need(u.disturbance.size() == 0 || u.disturbance.size() == m, "disturbance must have m entries");

  const GainSpec& g = cfg.gains;
  if (g.K.size() == 0) {
    need(n == 2 && m == 1, "omega_n/zeta shorthand needs a 2-state single-input plant");
    need(g.omega_n > 0.0 && g.zeta > 0.0, "omega_n and zeta must be positive");
    need(cfg.reference.dim == 1, "omega_n/zeta shorthand needs a scalar reference");
  } else {
    need(g.K.rows() == m && g.K.cols() == n, "K must be m x n");
    need(g.K_r.rows() == m && g.K_r.cols() == cfg.reference.dim, "K_r must be m x r");
  }
  need(g.gamma_scale > 0.0 && std::isfinite(g.gamma_scale), "gamma_scale must be positive");
  need(g.Q.rows() == n && g.Q.cols() == n, "Q must be n x n");
  need(is_symmetric(g.Q), "Q must be symmetric");
  need(is_positive_definite(g.Q), "Q must be positive definite");

  auto check_signal = [&](const ReferenceSignal& r, const char* what) {
    for (const auto& c : r.components) {
      const int last = c.channel + (c.kind == SignalComponent::Kind::CircularPair ? 1 : 0);
      need(c.channel >= 0 && last < r.dim, std::string(what) + " signal channel out of range");
      need(std::isfinite(c.amplitude) && std::isfinite(c.frequency) && std::isfinite(c.phase),
           std::string(what) + " signal parameters must be finite");
    }
  };
  need(cfg.reference.dim > 0, "reference dim must be positive");
  check_signal(cfg.reference, "reference");
  need(cfg.evaluation.components.empty() || cfg.evaluation.dim == cfg.reference.dim,
       "evaluation dim must equal reference dim");
  check_signal(cfg.evaluation, "evaluation");

  need(!cfg.network.hidden.empty(), "network needs at least one hidden layer");
  for (auto h : cfg.network.hidden) need(h > 0, "hidden widths must be positive");

  cfg.dmrac.validate();
  need(cfg.dmrac.x0.size() == 0 || cfg.dmrac.x0.size() == n, "x0 must have n entries");
  need(cfg.dmrac.domain.size() == 0 || cfg.dmrac.domain.size() == n, "domain must have n entries");
  need(cfg.dmrac.domain.size() == 0 || (cfg.dmrac.domain.array() > 0.0).all(),
       "domain half widths must be positive");

  if (cfg.bounds.eps_bar) need(*cfg.bounds.eps_bar >= 0.0, "eps_bar must be nonnegative");
  need(cfg.bounds.e_norm >= 0.0, "e_norm must be nonnegative");

  try {
    PlantModel{cfg.A, cfg.B, u}.validate();
    make_closed_loop(cfg);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ValidationError) throw;
    throw Error(ErrorCode::ValidationError, e.what());
  }
}

}  // namespace dmrac
