// Command-line front end: run, compare, verify, sweep.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "crgn/app.hpp"
#include "crgn/harness.hpp"

namespace {

using crgn::RunConfig;

/// File first, then --set assignments, then the dedicated flags: flags win.
struct ConfigSources {
  std::string file;
  std::vector<std::string> sets;
  std::optional<std::string> problem, method, out, summary;
  std::optional<std::uint64_t> seed;
  std::optional<double> T, h, eps0;

  void attach(CLI::App* app, bool outputs) {
    app->add_option("-c,--config", file, "key = value config file");
    app->add_option("-s,--set", sets, "key=value override (repeatable)");
    app->add_option("--problem", problem, "gallery label, e.g. compliant-affine-8");
    app->add_option("--seed", seed, "gallery and noise seed");
    app->add_option("-T,--horizon", T, "integration horizon");
    app->add_option("--step", h, "integration step");
    app->add_option("--eps0", eps0, "eps(0); sets c0 under the current c1, a");
    if (outputs) {
      app->add_option("--method", method, "direct | coupled");
      app->add_option("-o,--out", out, "trajectory CSV path");
      app->add_option("--summary", summary, "JSON summary path");
    }
  }

  void apply(RunConfig& c) const {
    if (!file.empty()) crgn::apply_config_file(c, file);
    for (const std::string& s : sets) crgn::set_assignment(c, s);
    if (problem) c.problem = *problem;
    if (method) crgn::set_key(c, "method", *method);
    if (out) c.csv_path = *out;
    if (summary) c.summary_path = *summary;
    if (seed) c.seed = *seed;
    if (T) c.T = *T;
    if (h) c.h = *h;
    if (eps0) c.eps0 = *eps0;
  }
};

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int do_run(const ConfigSources& src) {
  RunConfig c;
  src.apply(c);
  return crgn::run(c);
}

int do_compare(const ConfigSources& src, const std::vector<std::string>& direct_sets,
               const std::vector<std::string>& coupled_sets, const std::string& out, const std::string& summary) {
  RunConfig base;
  src.apply(base);
  RunConfig d = base;
  RunConfig c = base;
  d.method = "direct";
  c.method = "coupled";
  for (const std::string& s : direct_sets) crgn::set_assignment(d, s);
  for (const std::string& s : coupled_sets) crgn::set_assignment(c, s);
  return crgn::compare(d, c, out, summary);
}

int do_verify(const std::string& suite) {
  bool ok = true;
  const std::vector<std::string> suites =
      suite == "all" ? std::vector<std::string>{"lemmas", "certificate", "order"} : std::vector<std::string>{suite};
  for (const std::string& s : suites) {
    const crgn::VerifyReport rep = crgn::verify_suite(s);
    crgn::print_report(std::cout, rep);
    ok = ok && rep.all_pass();
  }
  return ok ? 0 : static_cast<int>(crgn::ExitCode::verify_failed);
}

int do_sweep(const ConfigSources& src, const std::string& param, const std::string& values,
             const std::string& preset, const std::string& seeds, std::optional<double> noise,
             const std::string& out, unsigned jobs) {
  crgn::SweepPlan plan;
  src.apply(plan.base);
  plan.parameter = param;
  if (preset == "eps0") {
    plan.parameter = "schedule.eps0";
    plan.values = crgn::eps0_preset();
  } else if (!preset.empty()) {
    throw crgn::ConfigError("sweep: unknown preset '" + preset + "' (eps0)");
  }
  if (!values.empty()) plan.values = split_commas(values);
  plan.seeds.clear();
  for (const std::string& s : split_commas(seeds)) {
    plan.seeds.push_back(crgn::detail::parse_int<std::uint64_t>("seeds", s));
  }
  plan.noise = noise;
  if (plan.values.empty()) throw crgn::ConfigError("sweep: give --values or --preset");
  // Reject bad parameter names before any run starts.
  RunConfig probe = plan.base;
  crgn::set_key(probe, plan.parameter, plan.values.front());

  const std::vector<crgn::SweepRow> rows = crgn::sweep(plan, jobs);
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw crgn::ConfigError("cannot write '" + out + "'");
  crgn::write_sweep_csv(f, rows);
  crgn::write_sweep_csv(std::cout, rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous regularized Gauss-Newton flows: run, compare, verify, sweep"};
  app.require_subcommand(1);

  ConfigSources run_src;
  CLI::App* run = app.add_subcommand("run", "integrate one configuration, write CSV and summary");
  run_src.attach(run, true);

  ConfigSources cmp_src;
  std::vector<std::string> direct_sets, coupled_sets;
  std::string cmp_out = "compare.csv", cmp_summary = "compare.json";
  CLI::App* cmp = app.add_subcommand("compare", "direct and coupled flows side by side");
  cmp_src.attach(cmp, false);
  cmp->add_option("--direct-set", direct_sets, "key=value for the direct run only");
  cmp->add_option("--coupled-set", coupled_sets, "key=value for the coupled run only");
  cmp->add_option("-o,--out", cmp_out, "side-by-side CSV path");
  cmp->add_option("--summary", cmp_summary, "JSON summary path");

  std::string suite = "all";
  CLI::App* ver = app.add_subcommand("verify", "run a verification battery");
  ver->add_option("suite", suite, "lemmas | certificate | order | all")
      ->check(CLI::IsMember({"lemmas", "certificate", "order", "all"}));

  ConfigSources sw_src;
  std::string param = "schedule.eps0", values, preset, seeds = "1", sw_out = "sweep.csv";
  std::optional<double> noise;
  unsigned jobs = 0;
  CLI::App* sw = app.add_subcommand("sweep", "one run per value x seed, results as CSV");
  sw_src.attach(sw, false);
  sw->add_option("--param", param, "config key to sweep");
  sw->add_option("--values", values, "comma-separated values");
  sw->add_option("--preset", preset, "named value list: eps0 = 0.001,0.01,0.1");
  sw->add_option("--seeds", seeds, "comma-separated seeds");
  sw->add_option("--noise", noise, "data-noise level for every run");
  sw->add_option("-o,--out", sw_out, "sweep CSV path");
  sw->add_option("-j,--jobs", jobs, "concurrent runs (0 = hardware threads)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(crgn::ExitCode::config_error);
  }

  try {
    if (*run) return do_run(run_src);
    if (*cmp) return do_compare(cmp_src, direct_sets, coupled_sets, cmp_out, cmp_summary);
    if (*ver) return do_verify(suite);
    if (*sw) return do_sweep(sw_src, param, values, preset, seeds, noise, sw_out, jobs);
  } catch (const crgn::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(crgn::ExitCode::config_error);
  }
  return static_cast<int>(crgn::ExitCode::config_error);
}
