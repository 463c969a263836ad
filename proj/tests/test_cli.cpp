#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "dmrac/config.hpp"

using namespace dmrac::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "dmrac_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::size_t line_count(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

SimulateOptions desk_adaptive(const fs::path& out) {
  SimulateOptions o;
  o.source.scenario = "desk-attitude";
  o.mode = "dmrac-adaptive";
  o.seed = 42;
  o.out = out.string();
  return o;
}

}  // namespace

TEST_CASE("simulate writes a header and one row per step") {
  spdlog::set_level(spdlog::level::err);
  std::ostringstream out, err;
  const fs::path path = scratch("t.csv");
  REQUIRE(cmd_simulate(desk_adaptive(path), out, err) == kExitOk);
  const std::string csv = slurp(path);
  CHECK(line_count(csv) == 3001 + 1);
  CHECK(csv.rfind("t,x0,x1,xrm0,xrm1,e_norm,u0,nu_ad0,delta_true0,delta_gen0,W_fro,buf_size,"
                  "train_loss,train_rounds\n",
                  0) == 0);
  const auto summary = nlohmann::json::parse(out.str());
  CHECK(summary["steps"] == 3000);
  CHECK(summary["scenario"] == "desk-attitude");
}

TEST_CASE("simulate is deterministic") {
  std::ostringstream out, err;
  const fs::path a = scratch("a.csv"), b = scratch("b.csv");
  REQUIRE(cmd_simulate(desk_adaptive(a), out, err) == kExitOk);
  REQUIRE(cmd_simulate(desk_adaptive(b), out, err) == kExitOk);
  CHECK(slurp(a) == slurp(b));
}

TEST_CASE("frozen mode with a missing network is an I/O error") {
  SimulateOptions o = desk_adaptive(scratch("frozen.csv"));
  o.mode = "dmrac-frozen";
  o.net = scratch("missing.dmrn").string();
  fs::remove(o.net);
  std::ostringstream out, err;
  CHECK(cmd_simulate(o, out, err) == kExitIo);
  CHECK(out.str().empty());
  CHECK(err.str().find("missing.dmrn") != std::string::npos);
}

TEST_CASE("trained network can be frozen and replayed") {
  SimulateOptions train = desk_adaptive(scratch("train.csv"));
  train.source.scenario = "retention";
  train.net_out = scratch("trained.dmrn").string();
  std::ostringstream out, err;
  REQUIRE(cmd_simulate(train, out, err) == kExitOk);
  SimulateOptions frozen = train;
  frozen.mode = "dmrac-frozen";
  frozen.net = train.net_out;
  frozen.net_out.clear();
  frozen.evaluation = true;
  frozen.out = scratch("frozen_eval.csv").string();
  CHECK(cmd_simulate(frozen, out, err) == kExitOk);
}

TEST_CASE("bounds with eps_bar zero gives radius zero") {
  BoundsOptions o;
  o.source.scenario = "desk-attitude";
  o.eps_bar = 0.0;
  std::ostringstream out, err;
  REQUIRE(cmd_bounds(o, out, err) == kExitOk);
  CHECK(nlohmann::json::parse(out.str())["uub_radius"] == 0.0);
}

TEST_CASE("bounds prints the sample complexity") {
  BoundsOptions o;
  o.eps = 0.1;
  o.delta = 0.05;
  o.k_bits = 8;
  o.n_weights = 10;
  std::ostringstream out, err;
  REQUIRE(cmd_bounds(o, out, err) == kExitOk);
  CHECK(out.str().find("5915") != std::string::npos);
  CHECK(nlohmann::json::parse(out.str())["sample_complexity"] == 5915);
}

TEST_CASE("bounds without eps_bar fails with a named error") {
  BoundsOptions o;
  std::ostringstream out, err;
  CHECK(cmd_bounds(o, out, err) == kExitConfig);
  CHECK(out.str().empty());
  CHECK(err.str().find("eps_bar is required") != std::string::npos);
}

TEST_CASE("bounds can calibrate eps_bar from a trace") {
  std::ostringstream out, err;
  const fs::path trace = scratch("calib.csv");
  REQUIRE(cmd_simulate(desk_adaptive(trace), out, err) == kExitOk);
  BoundsOptions o;
  o.calibration_trace = trace.string();
  std::ostringstream bout;
  REQUIRE(cmd_bounds(o, bout, err) == kExitOk);
  const auto j = nlohmann::json::parse(bout.str());
  CHECK(j["eps_bar_empirical"] == true);
  CHECK(j["uub_radius"].get<double>() > 0.0);
}

TEST_CASE("bad configurations exit with the config code") {
  const fs::path cfg = scratch("bad.ini");
  {
    std::ofstream os(cfg);
    os << "[dmrac]\nzeta_tol = -1\n";
  }
  SimulateOptions o;
  o.source.config_path = cfg.string();
  std::ostringstream out, err;
  CHECK(cmd_simulate(o, out, err) == kExitConfig);
  CHECK(err.str().find("ζ_tol must be positive") != std::string::npos);

  SimulateOptions m = desk_adaptive(scratch("x.csv"));
  m.mode = "warp-drive";
  CHECK(cmd_simulate(m, out, err) == kExitConfig);

  SimulateOptions eval = desk_adaptive(scratch("x.csv"));
  eval.evaluation = true;
  CHECK(cmd_simulate(eval, out, err) == kExitConfig);
}

TEST_CASE("unwritable output is an I/O error") {
  SimulateOptions o = desk_adaptive(fs::path("/nonexistent-dir/t.csv"));
  std::ostringstream out, err;
  CHECK(cmd_simulate(o, out, err) == kExitIo);
}

TEST_CASE("dump-buffer writes the final buffer") {
  DumpBufferOptions o;
  o.source.scenario = "desk-attitude";
  std::ostringstream out, err;
  REQUIRE(cmd_dump_buffer(o, out, err) == kExitOk);
  const std::string csv = out.str();
  CHECK(csv.rfind("index,x0,x1,phi0,", 0) == 0);
  CHECK(line_count(csv) > 2);
  CHECK(line_count(csv) <= 251);
}
