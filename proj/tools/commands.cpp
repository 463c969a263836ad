#include "commands.hpp"

#include <chrono>
#include <fstream>
#include <ostream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "dmrac/bounds.hpp"
#include "dmrac/config.hpp"
#include "dmrac/trace.hpp"
#include "invariants.hpp"

namespace dmrac::cli {

namespace {

using Json = nlohmann::ordered_json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError: return kExitIo;
    case ErrorCode::DomainExit:
    case ErrorCode::NonFiniteDerivative:
    case ErrorCode::ZeroFeature:
    case ErrorCode::InsufficientData:
    case ErrorCode::EmptyBatch:
    case ErrorCode::EmptyBuffer:
    case ErrorCode::EmptyTrace: return kExitDivergence;
    default: return kExitConfig;
  }
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDivergence;
  }
}

ScenarioConfig load(const ScenarioSource& src) {
  if (!src.config_path.empty()) return load_config(src.config_path);
  return builtin_scenario(src.scenario.empty() ? "desk-attitude" : src.scenario);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  return os;
}

void finish(std::ofstream& os, const std::string& path) {
  os.flush();
  if (!os) throw Error(ErrorCode::IoError, "write to '" + path + "' failed");
}

Json summary_json(const ScenarioConfig& cfg, const SimTrace& trace, double eps_bar,
                  bool empirical, double radius) {
  const EpisodeSummary s = summarize(trace, radius);
  const TraceRow& last = trace.rows.back();
  Json j;
  j["scenario"] = cfg.name;
  j["mode"] = std::string(to_string(cfg.dmrac.mode));
  j["seed"] = cfg.dmrac.seed;
  j["steps"] = trace.rows.size() - 1;
  j["dt"] = trace.dt;
  j["rms_e"] = s.rms_e;
  j["rms_e_final"] = s.rms_e_final;
  j["max_e"] = s.max_e;
  j["eps_bar"] = eps_bar;
  j["eps_bar_empirical"] = empirical;
  j["uub_radius"] = s.uub_radius;
  j["fraction_inside"] = s.fraction_inside;
  j["final_w_fro"] = last.w_fro;
  j["final_buffer_size"] = last.buf_size;
  j["admitted"] = trace.admitted;
  j["rejected"] = trace.rejected;
  j["train_rounds"] = last.train_rounds;
  j["snapshot_violations"] = trace.snapshot_violations;
  return j;
}

}  // namespace

int cmd_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ScenarioConfig cfg = load(opt.source);
    if (opt.mode) {
      cfg.dmrac.mode = parse_mode(*opt.mode);
      // Joint integration only exists for the fixed-basis controller.
      if (cfg.dmrac.mode != Mode::MracFixedBasis) cfg.dmrac.continuous_adaptation = false;
    }
    if (opt.seed) cfg.dmrac.seed = *opt.seed;
    if (opt.parallel_trainer) cfg.dmrac.parallel_trainer = true;
    validate(cfg);
    if (!opt.net_out.empty() && cfg.dmrac.mode != Mode::DmracAdaptive) {
      throw Error(ErrorCode::ValidationError, "--net-out needs mode dmrac-adaptive");
    }
    if (opt.evaluation && cfg.evaluation.components.empty()) {
      throw Error(ErrorCode::ValidationError, "scenario has no [evaluation] reference");
    }
    std::optional<FeatureNetwork> net;
    if (!opt.net.empty()) net = load_network(opt.net);

    spdlog::info("simulate {} mode={} seed={} steps={}", cfg.name, to_string(cfg.dmrac.mode),
                 cfg.dmrac.seed, cfg.dmrac.steps());
    const auto t0 = std::chrono::steady_clock::now();
    const RunOutput run = run_configured(cfg, opt.evaluation, net);
    spdlog::info("finished in {:.3f} s",
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

    const std::string trace_path = opt.out.empty() ? cfg.output.trace : opt.out;
    if (!trace_path.empty()) {
      auto os = open_out(trace_path);
      write_trace_csv(run.trace, os);
      finish(os, trace_path);
    }
    if (!opt.net_out.empty()) save_network(*run.net, opt.net_out);

    const bool empirical = !cfg.bounds.eps_bar.has_value();
    const double eps_bar = empirical ? empirical_eps_bar(run.trace) : *cfg.bounds.eps_bar;
    const ClosedLoop loop = make_closed_loop(cfg, opt.evaluation);
    const double radius = uub_radius(loop.gains.P, loop.gains.Q, eps_bar);
    const std::string summary = summary_json(cfg, run.trace, eps_bar, empirical, radius).dump(2);
    const std::string summary_path = opt.summary.empty() ? cfg.output.summary : opt.summary;
    if (!summary_path.empty()) {
      auto os = open_out(summary_path);
      os << summary << "\n";
      finish(os, summary_path);
    }
    out << summary << "\n";
    return kExitOk;
  });
}

int cmd_bounds(const BoundsOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ScenarioConfig cfg = load(opt.source);
    const ClosedLoop loop = make_closed_loop(cfg);

    std::optional<double> eps_bar = opt.eps_bar ? opt.eps_bar : cfg.bounds.eps_bar;
    bool empirical = false;
    if (!opt.eps_bar && !opt.calibration_trace.empty()) {
      std::ifstream is(opt.calibration_trace);
      if (!is) throw Error(ErrorCode::IoError, "cannot open '" + opt.calibration_trace + "'");
      eps_bar = empirical_eps_bar(read_csv(is));
      empirical = true;
    }
    BoundInputs in;
    in.eps = opt.eps ? opt.eps : cfg.bounds.eps;
    in.delta = opt.delta ? opt.delta : cfg.bounds.delta;
    in.k_bits = opt.k_bits.value_or(cfg.bounds.k_bits);
    in.n_weights = opt.n_weights.value_or(cfg.bounds.n_weights);
    in.e_norm = opt.e_norm.value_or(cfg.bounds.e_norm);
    if (!eps_bar && !in.eps) {
      throw Error(ErrorCode::ValidationError,
                  "eps_bar is required: pass --eps-bar or --calibration-trace");
    }
    in.eps_bar = eps_bar.value_or(0.0);
    in.eps_bar_empirical = empirical;
    const BoundReport rep = make_bound_report(loop.gains.P, loop.gains.Q, in);

    Json j;
    j["scenario"] = cfg.name;
    j["p_lambda_min"] = rep.p_lambda_min;
    j["p_lambda_max"] = rep.p_lambda_max;
    j["q_lambda_min"] = rep.q_lambda_min;
    j["q_lambda_max"] = rep.q_lambda_max;
    if (eps_bar) {
      j["eps_bar"] = rep.eps_bar;
      j["eps_bar_empirical"] = rep.eps_bar_empirical;
      j["uub_radius"] = rep.uub_radius;
    }
    j["e_norm"] = rep.e_norm;
    j["generalization_tolerance"] = rep.generalization_tolerance;
    if (rep.sample_complexity) {
      j["eps"] = rep.eps;
      j["delta"] = rep.delta;
      j["k_bits"] = rep.k_bits;
      j["n_weights"] = rep.n_weights;
      j["sample_complexity"] = *rep.sample_complexity;
    }
    out << j.dump(2) << "\n";
    return kExitOk;
  });
}

int cmd_verify(const VerifyOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!opt.inject_fault.empty() && opt.inject_fault != "gradient") {
      throw Error(ErrorCode::ValidationError, "unknown fault '" + opt.inject_fault + "'");
    }
    struct Reset {
      ~Reset() { debug::set_gradient_fault(false); }
    } reset;
    debug::set_gradient_fault(opt.inject_fault == "gradient");

    std::size_t passed = 0;
    const auto checks = check::module_invariants();
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& c : checks) {
      const auto start = std::chrono::steady_clock::now();
      check::Result r;
      try {
        r = c.run();
      } catch (const std::exception& e) {
        r = check::Result{c.name, false, std::string("threw: ") + e.what()};
      }
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      passed += r.pass ? 1 : 0;
      out << (r.pass ? "PASS " : "FAIL ") << c.name << " - " << r.detail << " ("
          << static_cast<int>(secs * 1000.0) << " ms)\n";
    }
    const double total =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out << passed << "/" << checks.size() << " invariants passed in " << total << " s\n";
    return passed == checks.size() ? kExitOk : kExitDivergence;
  });
}

int cmd_dump_buffer(const DumpBufferOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ScenarioConfig cfg = load(opt.source);
    cfg.dmrac.mode = Mode::DmracAdaptive;
    cfg.dmrac.continuous_adaptation = false;
    if (opt.seed) cfg.dmrac.seed = *opt.seed;
    validate(cfg);
    const RunOutput run = run_configured(cfg);
    if (opt.out.empty()) {
      write_buffer_csv(*run.buffer, out);
    } else {
      auto os = open_out(opt.out);
      write_buffer_csv(*run.buffer, os);
      finish(os, opt.out);
    }
    return kExitOk;
  });
}

}  // namespace dmrac::cli
