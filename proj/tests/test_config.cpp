#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dmrac/config.hpp"

using namespace dmrac;

namespace {

ErrorCode code_of(std::string_view text, std::string* message = nullptr) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  FAIL("config was accepted: " << text);
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("minimal config resolves to the built-in defaults") {
  const ScenarioConfig cfg = parse_config("[scenario]\nname = desk-attitude\n");
  CHECK(cfg == builtin_scenario("desk-attitude"));
  CHECK(cfg.dmrac.dt == 0.05);
  CHECK(cfg.dmrac.T == 150.0);
  CHECK(cfg.dmrac.eta == 0.01);
  CHECK(cfg.dmrac.zeta_tol == 0.2);
  CHECK(cfg.dmrac.p_max == 250);
  CHECK(cfg.dmrac.noise_variance == 0.01);
  CHECK(cfg.gains.gamma_scale == 0.5);
  CHECK(parse_config("") == builtin_scenario("desk-attitude"));
}

TEST_CASE("negative zeta_tol is rejected by name") {
  std::string msg;
  CHECK(code_of("[scenario]\nname = desk-attitude\n[dmrac]\nzeta_tol = -1\n", &msg) ==
        ErrorCode::ValidationError);
  CHECK(msg.find("ζ_tol must be positive") != std::string::npos);
}

TEST_CASE("serialize then parse is the identity for every built-in") {
  for (auto name : builtin_scenario_names()) {
    const ScenarioConfig cfg = builtin_scenario(name);
    const std::string text = serialize_config(cfg);
    const ScenarioConfig back = parse_config(text);
    CHECK(back == cfg);
    CHECK(serialize_config(back) == text);
  }
}

TEST_CASE("round trip preserves overridden values bit for bit") {
  const ScenarioConfig cfg = parse_config(
      "[scenario]\nname = structured\n"
      "[dmrac]\ndt = 0.0033333333333333335\nseed = 99\nx0 = 0.1 -0.2\n"
      "[gains]\nK = 9 6\nK_r = 9\n"
      "[bounds]\neps_bar = 0.123456789012345678\n");
  const ScenarioConfig back = parse_config(serialize_config(cfg));
  CHECK(back == cfg);
  CHECK(back.dmrac.dt == 0.0033333333333333335);
  CHECK(*back.bounds.eps_bar == 0.123456789012345678);
}

TEST_CASE("unknown sections and keys are rejected") {
  CHECK(code_of("[dmrac]\nbogus = 1\n") == ErrorCode::ValidationError);
  CHECK(code_of("[nonsense]\na = 1\n") == ErrorCode::ValidationError);
  CHECK(code_of("[scenario]\nname = moon-landing\n") == ErrorCode::ValidationError);
}

TEST_CASE("malformed values report a parse error with their position") {
  std::string msg;
  CHECK(code_of("[dmrac]\ndt = fast\n", &msg) == ErrorCode::ParseError);
  CHECK(msg.find("[dmrac] dt") != std::string::npos);
  CHECK(code_of("[plant]\nA = 0 1; 0\n") == ErrorCode::ParseError);
  CHECK(code_of("[uncertainty]\nkind = polynomial-trig\ndelta0 = 1 + * x0\n") ==
        ErrorCode::ParseError);
  CHECK(code_of("[dmrac\ndt = 1\n", &msg) == ErrorCode::ParseError);
  CHECK(msg.find("line") != std::string::npos);
}

TEST_CASE("unstable or indefinite closed loops are rejected") {
  CHECK(code_of("[gains]\nK = 0 4\nK_r = 1\n") == ErrorCode::ValidationError);
  CHECK(code_of("[gains]\nQ = 1 0; 0 -1\n") == ErrorCode::ValidationError);
}

TEST_CASE("unknown enumerations are parse errors") {
  CHECK(code_of("[dmrac]\nmode = frozen-solid\n") == ErrorCode::ParseError);
  CHECK(code_of("[baseline]\nbasis = wavelets\n") == ErrorCode::ParseError);
}

TEST_CASE("w_bound defaults to ten times the ideal weights for known bases") {
  const ScenarioConfig s = builtin_scenario("structured");
  CHECK(s.dmrac.w_bound == doctest::Approx(10.0 * s.uncertainty.ideal_weights.norm()));
  const ScenarioConfig explicit_bound = parse_config("[scenario]\nname = structured\n[dmrac]\nw_bound = 7\n");
  CHECK(explicit_bound.dmrac.w_bound == 7.0);
}

TEST_CASE("make_closed_loop honours explicit gains") {
  const ScenarioConfig cfg = parse_config("[gains]\nK = 9 6\nK_r = 9\nQ = 1 0; 0 1\n");
  const ClosedLoop loop = make_closed_loop(cfg);
  CHECK(loop.ref.A_rm(1, 0) == -9.0);
  CHECK(loop.ref.A_rm(1, 1) == -6.0);
  CHECK(loop.ref.B_rm(1, 0) == 9.0);
}

TEST_CASE("evaluation reference is required for evaluation runs") {
  const ScenarioConfig desk = builtin_scenario("desk-attitude");
  CHECK(desk.evaluation.components.empty());
  CHECK_FALSE(builtin_scenario("retention").evaluation.components.empty());
}

TEST_CASE("load_config reads files and reports missing ones") {
  const auto path = std::filesystem::temp_directory_path() / "dmrac_test_config.ini";
  {
    std::ofstream os(path);
    os << serialize_config(builtin_scenario("retention"));
  }
  CHECK(load_config(path) == builtin_scenario("retention"));
  std::filesystem::remove(path);
  try {
    load_config(path);
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoError);
  }
}
