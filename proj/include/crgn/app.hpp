#pragma once

// Run configuration, single runs, direct/coupled comparison and the output
// formats (trajectory CSV, JSON summary) behind the command-line tool.

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "crgn/error.hpp"
#include "crgn/flow.hpp"
#include "crgn/gallery.hpp"
#include "crgn/integrator.hpp"
#include "crgn/schedule.hpp"
#include "crgn/theory.hpp"

namespace crgn {

enum class ExitCode : int {
  ok = 0,
  config_error = 1,
  ball_exit = 2,
  diverged = 3,
  verify_failed = 4,
};

inline int exit_code_for(Termination t) {
  switch (t) {
    case Termination::horizon_reached: return static_cast<int>(ExitCode::ok);
    case Termination::ball_exit: return static_cast<int>(ExitCode::ball_exit);
    case Termination::divergence:
    case Termination::numerical_error: return static_cast<int>(ExitCode::diverged);
  }
  return static_cast<int>(ExitCode::diverged);
}

struct RunConfig {
  std::string problem = "compliant-affine-8";
  /// direct | coupled
  std::string method = "coupled";
  InitialInverse b0_mode = InitialInverse::exact_inverse;

  /// power_law: c0 (c1 + t)^(-a). constant: eps0 forever (test mode).
  /// instance: the certified schedule of a compliant-* problem.
  std::string schedule_kind = "power_law";
  double c0 = 0.1;
  double c1 = 1.0;
  double a = 1.0;
  /// Overrides c0 so that eps(0) = eps0 under the current c1, a.
  std::optional<double> eps0;

  Method integrator_method = Method::rk4;
  double h = 0.01;
  double T = 10.0;
  int record_every = 1;
  double gain = 1.0;

  std::uint64_t seed = 1;
  /// default | xhat
  std::string x0_mode = "default";
  /// Added to every component of x0.
  double x0_shift = 0.0;
  double noise = 0.0;
  bool certify = false;

  /// auto | on | off. auto enables the ball monitor for certified instance runs.
  std::string ball_monitor = "auto";
  std::optional<double> monitor_R;
  bool divergence_monitor = true;

  std::string csv_path = "trajectory.csv";
  std::string summary_path = "summary.json";
  std::string data_dir;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: '" + key + "' expects true/false, got '" + v + "'");
}

inline std::string one_of(const std::string& key, const std::string& v,
                          std::initializer_list<std::string_view> allowed) {
  for (std::string_view a : allowed) {
    if (v == a) return v;
  }
  std::string list;
  for (std::string_view a : allowed) list += (list.empty() ? "" : "|") + std::string(a);
  throw ConfigError("config: '" + key + "' must be one of " + list + ", got '" + v + "'");
}

inline std::string num(double v) { return fmt::format("{}", v); }

}  // namespace detail

/// Applies one key = value setting. Unknown keys are errors.
inline void set_key(RunConfig& c, const std::string& key, const std::string& raw) {
  using namespace detail;
  const std::string v = trim(raw);
  if (key == "problem") c.problem = v;
  else if (key == "method") c.method = one_of(key, v, {"direct", "coupled"});
  else if (key == "b0_mode") {
    c.b0_mode = one_of(key, v, {"exact_inverse", "scaled_identity"}) == "exact_inverse"
                    ? InitialInverse::exact_inverse
                    : InitialInverse::scaled_identity;
  } else if (key == "schedule.kind") c.schedule_kind = one_of(key, v, {"power_law", "constant", "instance"});
  else if (key == "schedule.c0") c.c0 = parse_double(key, v);
  else if (key == "schedule.c1") c.c1 = parse_double(key, v);
  else if (key == "schedule.a") c.a = parse_double(key, v);
  else if (key == "schedule.eps0") {
    if (v.empty()) c.eps0.reset();
    else c.eps0 = parse_double(key, v);
  } else if (key == "integrator.method") {
    try {
      c.integrator_method = parse_method(v);
    } catch (const DomainError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  } else if (key == "integrator.h") c.h = parse_double(key, v);
  else if (key == "integrator.T") c.T = parse_double(key, v);
  else if (key == "integrator.record_every") c.record_every = parse_int<int>(key, v);
  else if (key == "integrator.gain") c.gain = parse_double(key, v);
  else if (key == "seed") c.seed = parse_int<std::uint64_t>(key, v);
  else if (key == "x0") c.x0_mode = one_of(key, v, {"default", "xhat"});
  else if (key == "x0.shift") c.x0_shift = parse_double(key, v);
  else if (key == "noise") c.noise = parse_double(key, v);
  else if (key == "certify") c.certify = parse_bool(key, v);
  else if (key == "monitor.ball") c.ball_monitor = one_of(key, v, {"auto", "on", "off"});
  else if (key == "monitor.R") {
    if (v.empty()) c.monitor_R.reset();
    else c.monitor_R = parse_double(key, v);
  } else if (key == "monitor.divergence") c.divergence_monitor = parse_bool(key, v);
  else if (key == "output.csv") c.csv_path = v;
  else if (key == "output.summary") c.summary_path = v;
  else if (key == "data_dir") c.data_dir = v;
  else throw ConfigError("config: unknown key '" + key + "'");
}

/// "key=value" as accepted on the command line.
inline void set_assignment(RunConfig& c, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("config: expected key=value, got '" + std::string(assignment) + "'");
  }
  set_key(c, detail::trim(assignment.substr(0, eq)), std::string(assignment.substr(eq + 1)));
}

/// Config text: one `key = value` per line, '#' starts a comment.
inline void apply_config_text(RunConfig& c, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (detail::trim(line).empty()) continue;
    try {
      set_assignment(c, line);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline void apply_config_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    apply_config_text(c, ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Every setting as (key, value) in a fixed order; the reproducibility echo.
inline std::vector<std::pair<std::string, std::string>> config_echo(const RunConfig& c) {
  using detail::num;
  return {
      {"problem", c.problem},
      {"method", c.method},
      {"b0_mode", c.b0_mode == InitialInverse::exact_inverse ? "exact_inverse" : "scaled_identity"},
      {"schedule.kind", c.schedule_kind},
      {"schedule.c0", num(c.c0)},
      {"schedule.c1", num(c.c1)},
      {"schedule.a", num(c.a)},
      {"schedule.eps0", c.eps0 ? num(*c.eps0) : ""},
      {"integrator.method", std::string(to_string(c.integrator_method))},
      {"integrator.h", num(c.h)},
      {"integrator.T", num(c.T)},
      {"integrator.record_every", std::to_string(c.record_every)},
      {"integrator.gain", num(c.gain)},
      {"seed", std::to_string(c.seed)},
      {"x0", c.x0_mode},
      {"x0.shift", num(c.x0_shift)},
      {"noise", num(c.noise)},
      {"certify", c.certify ? "true" : "false"},
      {"monitor.ball", c.ball_monitor},
      {"monitor.R", c.monitor_R ? num(*c.monitor_R) : ""},
      {"monitor.divergence", c.divergence_monitor ? "true" : "false"},
      {"output.csv", c.csv_path},
      {"output.summary", c.summary_path},
      {"data_dir", c.data_dir},
  };
}

/// Everything a run needs, resolved from a RunConfig.
struct PreparedRun {
  RunConfig config;
  GalleryEntry entry;
  /// entry.problem, or its noisy version
  NonlinearProblem problem;
  Schedule schedule;
  SolverState initial;
  IntegratorConfig integrator;
  std::optional<double> R;
  std::optional<Certificate> certificate;
  std::string certificate_error;
};

inline Schedule resolve_schedule(const RunConfig& c, const std::optional<CompliantInstance>& inst) {
  try {
    if (c.schedule_kind == "instance") {
      if (!inst) throw ConfigError("config: schedule.kind=instance needs a compliant-* problem");
      return inst->schedule;
    }
    if (c.schedule_kind == "constant") return Schedule::constant(c.eps0.value_or(c.c0));
    const double c0 = c.eps0 ? *c.eps0 * std::pow(c.c1, c.a) : c.c0;
    return Schedule::power_law(c0, c.c1, c.a);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

/// Resolves problem, schedule, x0, B0, certificate and monitors. Throws
/// ConfigError for anything the user has to fix.
inline PreparedRun prepare(const RunConfig& c) {
  PreparedRun run;
  run.config = c;
  if (!(c.h > 0.0) || !(c.T >= c.h) || c.record_every < 1) {
    throw ConfigError("config: need integrator.h > 0, integrator.T >= integrator.h, record_every >= 1");
  }
  if (!(c.noise >= 0.0)) throw ConfigError("config: noise must be nonnegative");

  std::optional<CompliantInstance> inst;
  try {
    const ParsedLabel pl = parse_label(c.problem);
    if (is_compliant_label(c.problem)) {
      inst = compliant_instance(pl.n, c.seed, compliant_kind(pl.family));
      run.entry = inst->entry;
    } else {
      run.entry = c.data_dir.empty() ? make_entry(c.problem, c.seed) : make_entry(c.problem, c.seed, c.data_dir);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("problem '") + c.problem + "': " + e.what());
  }
  run.schedule = resolve_schedule(c, inst);

  Vector x0 = c.x0_mode == "xhat" ? run.entry.xhat : run.entry.default_x0;
  x0.array() += c.x0_shift;
  run.problem = with_data_noise(run.entry.problem, c.noise, c.seed);
  const double eps0 = run.schedule.eps(0.0);

  run.initial = SolverState{0.0, x0, std::nullopt};
  std::optional<Operator> B0;
  try {
    if (c.method == "coupled") {
      B0 = initial_inverse(run.problem, x0, eps0, c.b0_mode);
      run.initial.B = B0;
    }
  } catch (const Error& e) {
    throw ConfigError(std::string("initial inverse: ") + e.what());
  }

  const bool wants_ball = c.ball_monitor == "on" ||
                          (c.ball_monitor == "auto" && c.schedule_kind == "instance");
  if (c.certify || (wants_ball && !c.monitor_R)) {
    // The certificate speaks about the noiseless problem and the exact B0 it
    // would start from under the direct flow.
    const bool reuse = inst && c.schedule_kind == "instance" && c.x0_mode == "default" &&
                       c.x0_shift == 0.0 && c.noise == 0.0 && c.method == "coupled" &&
                       c.b0_mode == InitialInverse::exact_inverse;
    if (reuse) {
      run.certificate = inst->certificate;
      run.R = inst->R;
    } else {
      try {
        const Operator B0c = B0 ? *B0 : initial_inverse(run.entry.problem, x0, eps0, InitialInverse::exact_inverse);
        CanonicalCertificate cc =
            certify_canonical(run.entry.problem, run.entry.xhat, x0, run.schedule, B0c, 32, c.seed + 17);
        run.R = cc.R;
        run.certificate = std::move(cc.certificate);
      } catch (const Error& e) {
        run.certificate_error = e.what();
      }
    }
  }
  if (c.monitor_R) run.R = c.monitor_R;

  run.integrator.method = c.integrator_method;
  run.integrator.step_h = c.h;
  run.integrator.horizon_T = c.T;
  run.integrator.record_every = c.record_every;
  run.integrator.inverse_gain = c.gain;
  run.integrator.monitors.divergence = c.divergence_monitor;
  if (c.ball_monitor == "on") {
    if (!run.R) throw ConfigError("config: monitor.ball=on needs a radius: " + run.certificate_error);
    run.integrator.monitors.ball_exit = true;
  } else if (c.ball_monitor == "auto") {
    run.integrator.monitors.ball_exit =
        c.schedule_kind == "instance" && run.R && run.certificate && run.certificate->overall;
  }
  return run;
}

struct RunOutcome {
  PreparedRun prepared;
  Trajectory trajectory;
  int exit_code = 0;
};

inline RunOutcome execute(const RunConfig& c) {
  RunOutcome out;
  out.prepared = prepare(c);
  const PreparedRun& p = out.prepared;
  out.trajectory = integrate(p.problem, p.schedule, p.initial, p.integrator, p.entry.xhat, p.R);
  out.exit_code = exit_code_for(out.trajectory.termination);
  return out;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline constexpr std::string_view kTrajectoryHeader =
    "t,eps,residual_norm,err_norm,B_norm,lambda_norm,inverse_residual,D_norm";

namespace detail {

inline std::string g17(double v) { return fmt::format("{:.17g}", v); }
inline std::string g17(const std::optional<double>& v) { return v ? g17(*v) : std::string(); }

inline nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace detail

/// Header plus one line per record, 17 significant digits; optional columns
/// are left blank when the quantity is unavailable.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  using detail::g17;
  out << kTrajectoryHeader << '\n';
  for (const Record& r : traj.records) {
    const FlowDiagnostics& d = r.diag;
    out << g17(r.state.t) << ',' << g17(d.eps) << ',' << g17(d.residual_norm) << ',' << g17(d.err_norm)
        << ',' << g17(d.B_norm) << ',' << g17(d.lambda_norm) << ',' << g17(d.inverse_residual) << ','
        << g17(d.D_norm) << '\n';
  }
}

inline nlohmann::ordered_json certificate_json(const Certificate& c) {
  nlohmann::ordered_json j;
  j["N1"] = c.N1;
  j["N2"] = c.N2;
  j["b"] = c.b;
  j["eps0"] = c.eps0;
  j["B0_norm"] = c.B0_norm;
  j["Lambda0_norm"] = c.Lambda0_norm;
  j["k"] = c.k;
  j["R"] = c.R;
  j["lambda"] = c.lambda;
  j["w_norm"] = c.w_norm;
  j["source_residual"] = c.source_residual;
  j["x0_distance"] = c.x0_distance;
  j["bound_samples"] = c.bound_samples;
  j["bound_inflation"] = c.bound_inflation;
  j["checks"] = {{"contraction", c.checks.contraction},
                 {"radius_lower", c.checks.radius_lower},
                 {"source_size", c.checks.source_size},
                 {"initial_distance", c.checks.initial_distance},
                 {"source_range", c.checks.source_range},
                 {"bounds_cover_ball", c.checks.bounds_cover_ball}};
  j["overall"] = c.overall;
  j["notes"] = c.notes;
  return j;
}

inline nlohmann::ordered_json config_json(const RunConfig& c) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config_echo(c)) j[k] = v;
  return j;
}

inline nlohmann::ordered_json summary_json(const RunOutcome& o) {
  nlohmann::ordered_json j;
  const Trajectory& tr = o.trajectory;
  j["termination"] = std::string(to_string(tr.termination));
  j["exit_code"] = o.exit_code;
  j["message"] = tr.message;
  j["records"] = tr.records.size();
  const Record& last = tr.records.back();
  j["final"] = {{"t", last.state.t},
                {"eps", last.diag.eps},
                {"residual_norm", last.diag.residual_norm},
                {"err_norm", detail::opt_json(last.diag.err_norm)},
                {"B_norm", detail::opt_json(last.diag.B_norm)},
                {"lambda_norm", detail::opt_json(last.diag.lambda_norm)},
                {"inverse_residual", detail::opt_json(last.diag.inverse_residual)},
                {"D_norm", detail::opt_json(last.diag.D_norm)}};
  j["ball_monitor"] = tr.config.monitors.ball_exit;
  j["R"] = detail::opt_json(o.prepared.R);
  j["config"] = config_json(o.prepared.config);
  j["certificate"] = o.prepared.certificate ? certificate_json(*o.prepared.certificate)
                                            : nlohmann::ordered_json(nullptr);
  if (!o.prepared.certificate_error.empty()) j["certificate_error"] = o.prepared.certificate_error;
  j["problem_notes"] = o.prepared.entry.notes;
  return j;
}

namespace detail {

inline std::ofstream open_output(const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  return f;
}

inline void write_json(const std::string& path, const nlohmann::ordered_json& j) {
  std::ofstream f = open_output(path);
  f << j.dump(2) << '\n';
  if (!f) throw ConfigError("write failed: '" + path + "'");
}

}  // namespace detail

/// Executes one configuration and writes its CSV and summary. Returns the
/// process exit code; configuration problems are reported on `err`.
inline int run(const RunConfig& c, std::ostream& err = std::cerr) {
  try {
    const RunOutcome o = execute(c);
    {
      std::ofstream f = detail::open_output(c.csv_path);
      write_trajectory_csv(f, o.trajectory);
      if (!f) throw ConfigError("write failed: '" + c.csv_path + "'");
    }
    detail::write_json(c.summary_path, summary_json(o));
    return o.exit_code;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::config_error);
  }
}

// ---------------------------------------------------------------------------
// Direct vs coupled
// ---------------------------------------------------------------------------

inline constexpr std::string_view kCompareHeader = "t,err_direct,err_coupled,resid_direct,resid_coupled";

struct Comparison {
  RunOutcome direct;
  RunOutcome coupled;
  /// sup over shared records of ||x_direct - x_coupled||
  double max_x_difference = 0.0;
  std::optional<double> final_error_ratio;
  int exit_code = 0;
};

/// The two configurations must agree on everything except the method and the
/// output paths, and name direct and coupled respectively.
inline void validate_pair(const RunConfig& d, const RunConfig& c) {
  if (d.method != "direct" || c.method != "coupled") {
    throw ConfigError("compare: the first configuration must be direct and the second coupled");
  }
  const auto ed = config_echo(d);
  const auto ec = config_echo(c);
  for (std::size_t i = 0; i < ed.size(); ++i) {
    const std::string& key = ed[i].first;
    if (key == "method" || key == "b0_mode" || key.starts_with("output.")) continue;
    if (ed[i].second != ec[i].second) {
      throw ConfigError("compare: configurations differ in '" + key + "' (" + ed[i].second + " vs " +
                        ec[i].second + ")");
    }
  }
}

inline Comparison compare_runs(const RunConfig& direct_cfg, const RunConfig& coupled_cfg) {
  validate_pair(direct_cfg, coupled_cfg);
  Comparison cmp;
  cmp.direct = execute(direct_cfg);
  cmp.coupled = execute(coupled_cfg);
  const auto& rd = cmp.direct.trajectory.records;
  const auto& rc = cmp.coupled.trajectory.records;
  const std::size_t n = std::min(rd.size(), rc.size());
  for (std::size_t i = 0; i < n; ++i) {
    cmp.max_x_difference = std::max(cmp.max_x_difference, (rd[i].state.x - rc[i].state.x).norm());
  }
  const auto& fd = rd.back().diag.err_norm;
  const auto& fc = rc.back().diag.err_norm;
  if (fd && fc && *fd > 0.0) cmp.final_error_ratio = *fc / *fd;
  cmp.exit_code = std::max(cmp.direct.exit_code, cmp.coupled.exit_code);
  return cmp;
}

inline void write_compare_csv(std::ostream& out, const Comparison& cmp) {
  using detail::g17;
  out << kCompareHeader << '\n';
  const auto& rd = cmp.direct.trajectory.records;
  const auto& rc = cmp.coupled.trajectory.records;
  const std::size_t n = std::min(rd.size(), rc.size());
  for (std::size_t i = 0; i < n; ++i) {
    out << g17(rd[i].state.t) << ',' << g17(rd[i].diag.err_norm) << ',' << g17(rc[i].diag.err_norm) << ','
        << g17(rd[i].diag.residual_norm) << ',' << g17(rc[i].diag.residual_norm) << '\n';
  }
}

/// Writes the side-by-side CSV and a summary holding both run summaries and
/// the final error ratio (coupled / direct). Reporting only.
inline int compare(const RunConfig& direct_cfg, const RunConfig& coupled_cfg, const std::string& csv_path,
                   const std::string& summary_path, std::ostream& err = std::cerr) {
  try {
    const Comparison cmp = compare_runs(direct_cfg, coupled_cfg);
    {
      std::ofstream f = detail::open_output(csv_path);
      write_compare_csv(f, cmp);
    }
    nlohmann::ordered_json j;
    j["final_error_ratio_coupled_over_direct"] = detail::opt_json(cmp.final_error_ratio);
    j["max_x_difference"] = cmp.max_x_difference;
    j["exit_code"] = cmp.exit_code;
    j["direct"] = summary_json(cmp.direct);
    j["coupled"] = summary_json(cmp.coupled);
    detail::write_json(summary_path, j);
    return cmp.exit_code;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::config_error);
  }
}

}  // namespace crgn
