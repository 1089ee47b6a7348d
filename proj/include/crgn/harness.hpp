#pragma once

// Experiment batteries: parameter sweeps with optional data noise, and the
// verification suites behind `crgn verify`.

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "crgn/app.hpp"

namespace crgn {

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepPlan {
  RunConfig base;
  /// Any config key, e.g. schedule.eps0.
  std::string parameter = "schedule.eps0";
  std::vector<std::string> values;
  std::vector<std::uint64_t> seeds{1};
  /// Data-noise level applied to every run; overrides base.noise when set.
  std::optional<double> noise;
};

/// The eps(0) range reported as giving the best results.
inline std::vector<std::string> eps0_preset() { return {"0.001", "0.01", "0.1"}; }

struct SweepRow {
  std::string param_value;
  std::uint64_t seed = 0;
  /// NaN when unavailable.
  double final_err = std::numeric_limits<double>::quiet_NaN();
  double final_residual = std::numeric_limits<double>::quiet_NaN();
  /// A Termination tag, or config_error when the run could not start.
  std::string termination;
  double wall_ms = 0.0;
  std::string message;
};

namespace detail {

inline SweepRow sweep_one(const SweepPlan& plan, const std::string& value, std::uint64_t seed) {
  SweepRow row;
  row.param_value = value;
  row.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    RunConfig c = plan.base;
    c.seed = seed;
    if (plan.noise) c.noise = *plan.noise;
    set_key(c, plan.parameter, value);
    const RunOutcome o = execute(c);
    const Record& last = o.trajectory.records.back();
    row.final_err = last.diag.err_norm.value_or(std::numeric_limits<double>::quiet_NaN());
    row.final_residual = last.diag.residual_norm;
    row.termination = std::string(to_string(o.trajectory.termination));
    row.message = o.trajectory.message;
  } catch (const Error& e) {
    row.termination = "config_error";
    row.message = e.what();
  }
  row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return row;
}

}  // namespace detail

/// One row per value x seed, in that nesting order regardless of how the runs
/// were scheduled. A failing run becomes a row, never an exception.
inline std::vector<SweepRow> sweep(const SweepPlan& plan, unsigned max_parallel = 0) {
  if (plan.values.empty()) throw DomainError("sweep: empty value list");
  if (plan.seeds.empty()) throw DomainError("sweep: empty seed list");
  if (plan.noise && !(*plan.noise >= 0.0)) throw DomainError("sweep: noise must be nonnegative");
  if (max_parallel == 0) max_parallel = std::max(1u, std::thread::hardware_concurrency());

  struct Job {
    std::string value;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const std::string& v : plan.values) {
    for (std::uint64_t s : plan.seeds) jobs.push_back({v, s});
  }
  std::vector<SweepRow> rows(jobs.size());
  for (std::size_t first = 0; first < jobs.size(); first += max_parallel) {
    const std::size_t last = std::min(jobs.size(), first + max_parallel);
    std::vector<std::future<SweepRow>> batch;
    for (std::size_t i = first; i < last; ++i) {
      batch.push_back(std::async(std::launch::async, detail::sweep_one, std::cref(plan), jobs[i].value,
                                 jobs[i].seed));
    }
    for (std::size_t i = first; i < last; ++i) rows[i] = batch[i - first].get();
  }
  return rows;
}

inline constexpr std::string_view kSweepHeader = "param_value,seed,final_err,final_residual,termination,wall_ms";

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kSweepHeader << '\n';
  for (const SweepRow& r : rows) {
    out << r.param_value << ',' << r.seed << ',' << (std::isnan(r.final_err) ? "" : detail::g17(r.final_err))
        << ',' << (std::isnan(r.final_residual) ? "" : detail::g17(r.final_residual)) << ',' << r.termination
        << ',' << fmt::format("{:.3f}", r.wall_ms) << '\n';
  }
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw DomainError("median: empty input");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

struct NoiseProbe {
  std::vector<SweepRow> clean;
  std::vector<SweepRow> noisy;
  double median_clean = 0.0;
  double median_noisy = 0.0;
};

/// Final errors without and with data noise delta, per seed.
inline NoiseProbe noise_probe(const RunConfig& base, double delta, const std::vector<std::uint64_t>& seeds) {
  SweepPlan plan;
  plan.base = base;
  plan.parameter = "noise";
  plan.seeds = seeds;
  plan.values = {"0", fmt::format("{}", delta)};
  const std::vector<SweepRow> rows = sweep(plan);
  NoiseProbe probe;
  std::vector<double> ec, en;
  for (const SweepRow& r : rows) {
    (r.param_value == "0" ? probe.clean : probe.noisy).push_back(r);
    (r.param_value == "0" ? ec : en).push_back(r.final_err);
  }
  probe.median_clean = median(ec);
  probe.median_noisy = median(en);
  return probe;
}

// ---------------------------------------------------------------------------
// Verification suites
// ---------------------------------------------------------------------------

struct VerifyRow {
  std::string name;
  double value = 0.0;
  /// Human-readable acceptance condition on `value`.
  std::string limit;
  bool pass = false;
};

struct VerifyReport {
  std::string suite;
  std::vector<VerifyRow> rows;

  bool all_pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const VerifyRow& r) { return r.pass; });
  }
};

inline void print_report(std::ostream& out, const VerifyReport& rep) {
  std::size_t width = 4;
  for (const VerifyRow& r : rep.rows) width = std::max(width, r.name.size());
  out << fmt::format("{:<{}}  {:>14}  {:<22}  {}\n", "check", width, "value", "limit", "result");
  for (const VerifyRow& r : rep.rows) {
    out << fmt::format("{:<{}}  {:>14.6g}  {:<22}  {}\n", r.name, width, r.value, r.limit,
                       r.pass ? "PASS" : "FAIL");
  }
  out << fmt::format("{}: {}\n", rep.suite, rep.all_pass() ? "PASS" : "FAIL");
}

/// Random symmetric operator with eigenvalues in [lo, hi].
inline Operator random_spd(Index n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector d(n);
  for (Index i = 0; i < n; ++i) d[i] = u(rng);
  const Operator Q = detail::random_orthogonal(n, rng);
  return Q * d.asDiagonal() * Q.transpose();
}

struct GronwallCase {
  double violation = 0.0;
  Index n = 0;
};

/// A(t) interpolating linearly between two random SPD operators on [0, T],
/// G = 0, gamma from coercivity_profile.
inline GronwallCase random_gronwall_case(std::uint64_t seed, double T = 2.0, double h = 0.01) {
  std::mt19937_64 rng(seed);
  const Index n = 2 + static_cast<Index>(seed % 7);
  const Operator S0 = random_spd(n, 0.2, 2.0, rng);
  const Operator S1 = random_spd(n, 0.2, 2.0, rng);
  const Operator V0 = Operator::NullaryExpr(n, n, [&] { return std::normal_distribution<double>()(rng); });
  const auto A = [=](double t) -> Operator { return (1.0 - t / T) * S0 + (t / T) * S1; };
  const auto G = [n](double) -> Operator { return Operator::Zero(n, n); };
  const auto gamma = coercivity_profile(A, T, 200);
  return {gronwall_check(A, G, V0, gamma, T, h), n};
}

inline VerifyReport verify_lemmas() {
  VerifyReport rep{"lemmas", {}};
  {
    const double gamma = 0.7;
    const Index n = 4;
    std::mt19937_64 rng(3);
    const Operator V0 = Operator::NullaryExpr(n, n, [&] { return std::normal_distribution<double>()(rng); });
    const double v = gronwall_check([=](double) -> Operator { return gamma * identity(n); },
                                    [=](double) -> Operator { return Operator::Zero(n, n); }, V0,
                                    [=](double) { return gamma; }, 5.0, 0.01);
    rep.rows.push_back({"gronwall constant gamma I saturates", std::abs(v), "|violation| <= 1e-8", std::abs(v) <= 1e-8});
  }
  double worst = -std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) worst = std::max(worst, random_gronwall_case(seed).violation);
  rep.rows.push_back({"gronwall 20 random SPD paths", worst, "max violation <= 1e-6", worst <= kGronwallTolerance});
  {
    const Index n = 3;
    const double v = gronwall_check([=](double) -> Operator { return identity(n); },
                                    [=](double) -> Operator { return Operator::Zero(n, n); },
                                    Operator::Zero(n, n), [](double) { return 1.0; }, 1.0, 0.01);
    rep.rows.push_back({"gronwall V0 = 0, G = 0", v, "violation <= 0", v <= 0.0});
  }
  {
    std::vector<TimedValue> samples;
    double margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 1000; ++i) {
      const double t = 0.01 * i;
      samples.push_back({t, 0.5 * std::exp(-t)});
      margin = std::min(margin, std::exp(-t / 2) - 0.5 * std::exp(-t));
    }
    const bool ok = riccati_envelope_check(samples, [](double t) { return std::exp(t / 2); });
    rep.rows.push_back({"riccati closed form v=0.5e^-t", margin, "min(1/mu - v) > 0", ok});
  }
  return rep;
}

struct CompliantRunCheck {
  std::string label;
  bool certified = false;
  Termination termination = Termination::numerical_error;
  /// max over records of ||x - xhat|| / (R eps)
  double max_ball_ratio = 0.0;
  /// max over records of ||B|| - (1/eps + ||B0||)
  double max_B_excess = 0.0;
  double B_tolerance = 0.0;
  /// max over records of ||Lambda|| - k
  double max_Lambda_excess = 0.0;
  bool riccati = false;
  std::size_t records = 0;
};

/// Builds the compliant instance, integrates the coupled flow with the ball
/// monitor on and measures every trajectory bound of the convergence theorem.
inline CompliantRunCheck check_compliant_run(CompliantKind kind, Index n, std::uint64_t seed, double T,
                                             double h = 0.01, int record_every = 10) {
  const CompliantInstance inst = compliant_instance(n, seed, kind);
  CompliantRunCheck out;
  out.label = inst.entry.problem.label;
  out.certified = inst.certificate.overall;
  IntegratorConfig cfg;
  cfg.method = Method::rk4;
  cfg.step_h = h;
  cfg.horizon_T = T;
  cfg.record_every = record_every;
  cfg.monitors.ball_exit = true;
  const Trajectory tr = integrate(inst.entry.problem, inst.schedule,
                                  SolverState{0.0, inst.entry.default_x0, inst.B0}, cfg, inst.entry.xhat, inst.R);
  out.termination = tr.termination;
  out.records = tr.records.size();
  const Certificate& c = inst.certificate;
  out.B_tolerance = 1e-6 / inst.schedule.eps(T);
  out.max_ball_ratio = 0.0;
  out.max_B_excess = -std::numeric_limits<double>::infinity();
  out.max_Lambda_excess = -std::numeric_limits<double>::infinity();
  std::vector<TimedValue> v;
  for (const Record& r : tr.records) {
    const FlowDiagnostics& d = r.diag;
    out.max_ball_ratio = std::max(out.max_ball_ratio, *d.err_norm / (inst.R * d.eps));
    out.max_B_excess = std::max(out.max_B_excess, *d.B_norm - (1.0 / d.eps + c.B0_norm));
    out.max_Lambda_excess = std::max(out.max_Lambda_excess, *d.lambda_norm - c.k);
    v.push_back({r.state.t, *d.err_norm});
  }
  const Schedule s = inst.schedule;
  out.riccati = riccati_envelope_check(v, [&](double t) { return c.lambda / s.eps(t); });
  return out;
}

struct CompliantCase {
  CompliantKind kind;
  Index n;
};

inline std::vector<CompliantCase> default_compliant_cases() {
  std::vector<CompliantCase> cases;
  for (CompliantKind k : {CompliantKind::identity, CompliantKind::affine, CompliantKind::quadratic}) {
    for (Index n : {2, 4, 8}) cases.push_back({k, n});
  }
  return cases;
}

inline VerifyReport verify_certificate(double T = 50.0) {
  VerifyReport rep{"certificate", {}};
  for (const CompliantCase& cc : default_compliant_cases()) {
    CompliantRunCheck r;
    try {
      r = check_compliant_run(cc.kind, cc.n, 1, T);
    } catch (const Error& e) {
      rep.rows.push_back({fmt::format("compliant-{}-{} construct", to_string(cc.kind), cc.n), 0.0, e.what(), false});
      continue;
    }
    rep.rows.push_back({r.label + " certified", r.certified ? 1.0 : 0.0, "overall = true", r.certified});
    rep.rows.push_back({r.label + " horizon", static_cast<double>(r.termination == Termination::horizon_reached),
                        "no ball exit", r.termination == Termination::horizon_reached});
    rep.rows.push_back({r.label + " err/(R eps)", r.max_ball_ratio, "< 1", r.max_ball_ratio < 1.0});
    rep.rows.push_back({r.label + " B excess", r.max_B_excess, fmt::format("<= {:.3g}", r.B_tolerance),
                        r.max_B_excess <= r.B_tolerance});
    rep.rows.push_back({r.label + " Lambda excess", r.max_Lambda_excess, "<= 1e-6", r.max_Lambda_excess <= 1e-6});
    rep.rows.push_back({r.label + " riccati", r.riccati ? 1.0 : 0.0, "v < eps/lambda", r.riccati});
  }
  return rep;
}

/// Endpoint-error ratios e(h) / e(h/2) of a smooth affine flow: the coupled
/// system on compliant-affine-4 from x0 = xhat + 0.5, B(0) = scaled identity.
inline std::vector<double> order_ratios(Method method, const std::vector<double>& steps = {0.1, 0.05, 0.025},
                                        double T = 2.0) {
  const GalleryEntry e = make_entry("compliant-affine-4", 1);
  Vector x0 = e.xhat;
  x0.array() += 0.5;
  const Schedule s;
  const SolverState st0{0.0, x0, initial_inverse(e.problem, x0, s.eps(0.0), InitialInverse::scaled_identity)};
  IntegratorConfig cfg;
  cfg.method = method;
  cfg.horizon_T = T;
  const std::vector<OrderSample> samples = convergence_order(e.problem, s, st0, cfg, steps);
  std::vector<double> ratios;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    ratios.push_back(samples[i - 1].endpoint_error / samples[i].endpoint_error);
  }
  return ratios;
}

inline VerifyReport verify_order() {
  VerifyReport rep{"order", {}};
  for (const auto& [m, lo, hi] : {std::tuple{Method::rk4, 14.0, 18.0}, std::tuple{Method::euler, 1.8, 2.2}}) {
    const std::vector<double> r = order_ratios(m);
    for (std::size_t i = 0; i < r.size(); ++i) {
      rep.rows.push_back({fmt::format("{} ratio h{}/h{}", to_string(m), i, i + 1), r[i],
                          fmt::format("in [{}, {}]", lo, hi), r[i] >= lo && r[i] <= hi});
    }
  }
  return rep;
}

inline VerifyReport verify_suite(std::string_view suite) {
  if (suite == "lemmas") return verify_lemmas();
  if (suite == "certificate") return verify_certificate();
  if (suite == "order") return verify_order();
  throw ConfigError("verify: unknown suite '" + std::string(suite) + "' (lemmas|certificate|order)");
}

}  // namespace crgn
