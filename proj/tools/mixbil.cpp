#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "mixbil/experiment.hpp"
#include "mixbil/verify_suite.hpp"

namespace fs = std::filesystem;
using namespace mixbil;

namespace {

enum Exit { kOk = 0, kUsage = 1, kNumerical = 2, kVerify = 3 };

struct Options {
  std::string config;
  std::string profile;
  std::string out;
  std::string bundle;
  std::string method;
  std::string level = "quick";
  std::uint64_t seed = 0;
  double lambda = 0.0;
  std::size_t threads = 0;
  std::size_t restarts = 0;
};

bool given(CLI::App* sub, const std::string& name) {
  const CLI::Option* opt = sub->get_option_no_throw(name);
  return opt && opt->count() > 0;
}

ExperimentConfig resolve(const Options& o, CLI::App* sub) {
  ExperimentConfig c = o.config.empty() ? profile_defaults(o.profile.empty() ? "desk" : o.profile)
                                        : load_config(o.config, o.profile);
  if (given(sub, "--out")) c.out = o.out;
  if (given(sub, "--method") && o.method != "both") c.method = parse_method(o.method);
  if (given(sub, "--threads")) c.threads = o.threads;
  if (given(sub, "--restarts")) c.restarts = o.restarts;
  if (given(sub, "--seed")) c.seeds = {o.seed};
  c.validate();
  return c;
}

TaskBundle bundle_for(const Options& o, const ExperimentConfig& c, std::uint64_t seed) {
  if (!o.bundle.empty()) return load_bundle(o.bundle);
  GenConfig g = c.data;
  g.seed = seed;
  return generate(g);
}

int cmd_generate(const Options& o, CLI::App* sub) {
  const ExperimentConfig c = resolve(o, sub);
  GenConfig g = c.data;
  g.seed = c.seeds.front();
  const fs::path path = given(sub, "--out") ? fs::path(o.out) : fs::path(c.out) / "bundle.json";
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_bundle(generate(g), path);
  std::cout << path.string() << '\n';
  return kOk;
}

int cmd_run(const Options& o, CLI::App* sub) {
  const ExperimentConfig c = resolve(o, sub);
  const std::uint64_t seed = c.seeds.front();
  const TaskBundle b = bundle_for(o, c, seed);
  const RunRecord r = run_cell(c, b, c.method, o.lambda, seed);
  const fs::path path = record_path(c.out, c.method, o.lambda, seed);
  write_json(path, record_to_json(r, c));
  std::printf("%s  validation %.6g  test %.6g  recon %.6g%s\n", path.string().c_str(),
              r.validation_error, r.metrics.test_error, r.metrics.reconstruction_error,
              r.result.forced_snap ? "  (forced snap)" : "");
  return kOk;
}

int cmd_grid(const Options& o, CLI::App* sub) {
  const ExperimentConfig c = resolve(o, sub);
  std::vector<Method> methods{Method::mib, Method::bilevel};
  if (given(sub, "--method") && o.method != "both") methods = {c.method};
  const std::size_t threads = resolve_threads(c.threads);
  const GridResult g = run_grid(c, c.out, threads, methods);
  for (const auto& r : g.summary)
    std::printf("%-8s lambda=%-10.4g val=%.5f +- %.5f (%zu runs)%s\n", method_name(r.method),
                r.lambda, r.val_mean, r.val_std, r.runs, r.selected ? "  <- selected" : "");
  if (g.failed_cells) std::printf("%zu cells failed (recorded as failed)\n", g.failed_cells);
  return kOk;
}

int cmd_landscape(const Options& o, CLI::App* sub) {
  const ExperimentConfig c = resolve(o, sub);
  const auto& s = c.landscape;
  ToyObjective toy = make_toy(s.seed, s.tasks, s.n);
  toy.lambda = s.lambda;
  toy.eta = s.eta;
  toy.q = s.q;
  const auto cells = landscape_grid(toy, s.eps, s.resolution);
  fs::create_directories(c.out);
  const fs::path path = fs::path(c.out) / "landscape.csv";
  std::ofstream os(path);
  if (!os) throw Error(Errc::io, "cannot write " + path.string());
  write_landscape_csv(os, cells);
  const auto& a = grid_argmin(cells, false);
  const auto& p = grid_argmin(cells, true);
  std::printf("%s\nargmin G        at (%.3f, %.3f)\nargmin G+phi/eps at (%.3f, %.3f)\n",
              path.string().c_str(), a.t11, a.t21, p.t11, p.t21);
  return kOk;
}

int cmd_verify(const Options& o) {
  if (o.level != "quick" && o.level != "full")
    throw Error(Errc::config, "--level: expected quick or full");
  bool ok = true;
  for (const auto& r : suite::run(o.level == "full" ? suite::Level::full : suite::Level::quick)) {
    std::printf("%s %-28s %7.1fs  %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.seconds,
                r.detail.c_str());
    std::fflush(stdout);
    ok &= r.passed;
  }
  return ok ? kOk : kVerify;
}

int cmd_report(const Options& o, CLI::App* sub) {
  const fs::path dir = given(sub, "--out") ? fs::path(o.out) : fs::path("out");
  const auto rows = build_report(dir);
  write_report_csv(std::cout, rows);
  std::ofstream os(dir / "report.csv");
  if (!os) throw Error(Errc::io, "cannot write report.csv");
  write_report_csv(os, rows);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-binary bilevel group-structure estimation"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
    s->add_option("--profile", o.profile, "Parameter profile")->check(CLI::IsMember({"paper", "desk"}));
    s->add_option("--out", o.out, "Output directory (bundle file for generate)");
    s->add_option("--seed", o.seed, "Seed (replaces the config's seed list)");
  };
  auto* gen = app.add_subcommand("generate", "Write a synthetic task bundle");
  common(gen);
  auto* run = app.add_subcommand("run", "One (method, lambda, seed) run");
  common(run);
  run->add_option("--lambda", o.lambda, "Regularization weight")->required()->check(CLI::PositiveNumber);
  run->add_option("--method", o.method)->check(CLI::IsMember({"mib", "bilevel"}));
  run->add_option("--bundle", o.bundle, "Use a saved bundle instead of generating")->check(CLI::ExistingFile);
  run->add_option("--restarts", o.restarts)->check(CLI::PositiveNumber);
  auto* grid = app.add_subcommand("grid", "Lambda x seed x method sweep");
  common(grid);
  grid->add_option("--method", o.method)->check(CLI::IsMember({"mib", "bilevel", "both"}));
  grid->add_option("--threads", o.threads)->check(CLI::PositiveNumber);
  grid->add_option("--restarts", o.restarts)->check(CLI::PositiveNumber);
  auto* land = app.add_subcommand("landscape", "Two-feature loss landscape CSV");
  common(land);
  auto* ver = app.add_subcommand("verify", "Run the oracle suites");
  ver->add_option("--level", o.level)->check(CLI::IsMember({"quick", "full"}));
  auto* rep = app.add_subcommand("report", "Test/reconstruction summary at the cross-validated lambda");
  rep->add_option("--out", o.out, "Records directory written by grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_generate(o, gen);
    if (*run) return cmd_run(o, run);
    if (*grid) return cmd_grid(o, grid);
    if (*land) return cmd_landscape(o, land);
    if (*ver) return cmd_verify(o);
    if (*rep) return cmd_report(o, rep);
  } catch (const Error& e) {
    std::fprintf(stderr, "mixbil: %s\n", e.what());
    return e.is_numerical() ? kNumerical : kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mixbil: %s\n", e.what());
    return kUsage;
  }
  return kUsage;
}
