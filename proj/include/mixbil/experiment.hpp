#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "mixbil/config.hpp"
#include "mixbil/data.hpp"
#include "mixbil/outer.hpp"

namespace mixbil {

inline constexpr int kRecordSchemaVersion = 1;

/// Runs one (method, λ, seed) cell on `bundle`, keeping the restart with the
/// lowest validation error.
inline RunRecord run_cell(const ExperimentConfig& cfg, const TaskBundle& bundle, Method method,
                          double lambda, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  std::optional<RunRecord> best;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    GroupLassoObjective obj(bundle, lambda, cfg.lower);
    const CounterRng run = CounterRng(seed).substream("run", r);
    CounterRng init = run.substream("init");
    CounterRng batches = run.substream("batches");
    GroupAssignment theta0 = initial_assignment(bundle.d(), bundle.groups(), init);

    RunRecord rec;
    rec.method = method;
    rec.seed = seed;
    rec.lambda = lambda;
    rec.restart = r;
    rec.result = method == Method::mib
                     ? penalty_loop(obj, cfg.continuation, std::move(theta0), batches)
                     : relax_round_baseline(obj, cfg.continuation.stage,
                                            cfg.continuation.matched_budget(), std::move(theta0),
                                            batches);
    const auto ws = obj.final_weights(rec.result.theta);
    for (std::size_t t = 0; t < ws.size(); ++t)
      rec.validation_error += validation_loss(bundle.tasks[t].validation, ws[t]);
    rec.validation_error /= static_cast<double>(ws.size());
    rec.metrics = metrics(bundle, ws);
    if (!best || rec.validation_error < best->validation_error) best = std::move(rec);
  }
  best->wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return std::move(*best);
}

inline Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < m.rows(); ++r)
    rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  return rows;
}

inline Matrix matrix_from_json(const Json& j) {
  const std::size_t rows = j.size(), cols = rows ? j[0].size() : 0;
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  return m;
}

inline Json vec_with_inf(const std::vector<double>& xs) {
  Json a = Json::array();
  for (double x : xs) a.push_back(eps_to_json(x));
  return a;
}

inline Json record_to_json(const RunRecord& r, const ExperimentConfig& cfg) {
  const auto& t = r.result.trace;
  std::vector<std::size_t> groups(r.result.theta.rows());
  for (std::size_t j = 0; j < groups.size(); ++j) {
    const auto row = r.result.theta.row(j);
    groups[j] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return Json{
      {"schema_version", kRecordSchemaVersion},
      {"status", "ok"},
      {"method", method_name(r.method)},
      {"seed", r.seed},
      {"lambda", r.lambda},
      {"restart", r.restart},
      {"theta", matrix_to_json(r.result.theta)},
      {"groups", groups},
      {"relaxed_theta", matrix_to_json(r.result.relaxed_theta)},
      {"forced_snap", r.result.forced_snap},
      {"trace",
       {{"stage_eps", vec_with_inf(t.stage_eps)},
        {"stage_loss", t.stage_loss},
        {"stage_dist", t.stage_dist},
        {"stage_epochs", t.stage_epochs},
        {"epoch_loss", t.epoch_loss},
        {"epoch_dist", t.epoch_dist}}},
      {"pre_round_loss", r.result.pre_round_loss},
      {"post_round_loss", r.result.post_round_loss},
      {"validation_error", r.validation_error},
      {"test_error", r.metrics.test_error},
      {"reconstruction_error", r.metrics.reconstruction_error},
      {"wall_clock_seconds", r.wall_clock_seconds},
      {"config", config_to_json(cfg)},
  };
}

inline Json failure_to_json(Method m, double lambda, std::uint64_t seed, const std::string& error,
                            const ExperimentConfig& cfg) {
  return Json{{"schema_version", kRecordSchemaVersion},
              {"status", "failed"},
              {"method", method_name(m)},
              {"seed", seed},
              {"lambda", lambda},
              {"error", error},
              {"config", config_to_json(cfg)}};
}

inline std::string lambda_dirname(double lambda) {
  std::ostringstream os;
  os << std::setprecision(6) << lambda;
  return os.str();
}

inline std::filesystem::path record_path(const std::filesystem::path& out, Method m, double lambda,
                                         std::uint64_t seed) {
  return out / method_name(m) / lambda_dirname(lambda) / (std::to_string(seed) + ".json");
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error(Errc::io, "cannot write " + path.string());
  os << j.dump(1) << '\n';
}

inline Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::io, path.string() + ": " + e.what());
  }
}

/// Runs `jobs` indices on a pool of `threads` workers. Each index is
/// processed exactly once; callers store results by index.
template <class Fn>
void parallel_for(std::size_t jobs, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, jobs));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < jobs;) fn(i);
  };
  if (threads == 1) {
    worker();
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
}

inline std::size_t resolve_threads(std::size_t requested) {
  if (const char* env = std::getenv("MIXBIL_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (...) {
    }
    throw Error(Errc::config, "MIXBIL_THREADS must be a positive integer");
  }
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// One row of the per-λ validation summary.
struct SummaryRow {
  Method method;
  double lambda;
  double val_mean, val_std;
  std::size_t runs;
  bool selected;
};

struct GridResult {
  std::vector<double> lambdas;
  std::map<Method, LambdaSelection> selection;
  std::vector<SummaryRow> summary;
  std::size_t failed_cells = 0;
};

inline std::vector<TaskBundle> bundles_for(const ExperimentConfig& cfg) {
  std::vector<TaskBundle> bundles;
  for (auto seed : cfg.seeds) {
    GenConfig g = cfg.data;
    g.seed = seed;
    bundles.push_back(generate(g));
  }
  return bundles;
}

inline void write_groups_csv(const std::filesystem::path& path, const GroupAssignment& oracle,
                             const std::vector<std::pair<std::string, GroupAssignment>>& rows) {
  std::ofstream os(path);
  if (!os) throw Error(Errc::io, "cannot write " + path.string());
  os.precision(17);
  os << "row,feature,group,value\n";
  auto emit = [&](const std::string& name, const GroupAssignment& th) {
    for (std::size_t j = 0; j < th.rows(); ++j)
      for (std::size_t l = 0; l < th.cols(); ++l)
        os << name << ',' << j << ',' << l << ',' << th(j, l) << '\n';
  };
  emit("oracle", oracle);
  for (const auto& [name, th] : rows) emit(name, th);
}

/// Full λ × seed × method sweep. Writes one record per cell, summary.csv
/// (validation error per λ and method) and groups.csv (oracle, relaxed
/// baseline, rounded baseline and MIB assignments at each method's selected
/// λ, first seed).
inline GridResult run_grid(const ExperimentConfig& cfg, const std::filesystem::path& out,
                           std::size_t threads, std::vector<Method> methods = {Method::mib,
                                                                               Method::bilevel}) {
  cfg.validate();
  GridResult g;
  g.lambdas = cfg.lambda_grid.values();
  const auto bundles = bundles_for(cfg);
  const std::size_t nl = g.lambdas.size(), ns = cfg.seeds.size();
  const std::size_t per_method = nl * ns;
  const std::size_t jobs = methods.size() * per_method;

  std::vector<std::optional<RunRecord>> records(jobs);
  std::vector<std::string> errors(jobs);
  parallel_for(jobs, threads, [&](std::size_t i) {
    const Method m = methods[i / per_method];
    const std::size_t li = (i % per_method) / ns, si = i % ns;
    try {
      records[i] = run_cell(cfg, bundles[si], m, g.lambdas[li], cfg.seeds[si]);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });

  for (std::size_t i = 0; i < jobs; ++i) {
    const Method m = methods[i / per_method];
    const std::size_t li = (i % per_method) / ns, si = i % ns;
    const auto path = record_path(out, m, g.lambdas[li], cfg.seeds[si]);
    if (records[i]) {
      write_json(path, record_to_json(*records[i], cfg));
    } else {
      ++g.failed_cells;
      write_json(path, failure_to_json(m, g.lambdas[li], cfg.seeds[si], errors[i], cfg));
    }
  }

  std::vector<std::pair<std::string, GroupAssignment>> group_rows;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    std::vector<CellOutcome> cells;
    for (std::size_t k = 0; k < per_method; ++k) {
      const auto& rec = records[mi * per_method + k];
      CellOutcome c{k / ns, k % ns, std::nullopt, errors[mi * per_method + k]};
      if (rec) c.validation_error = rec->validation_error;
      cells.push_back(c);
    }
    const LambdaSelection sel = select_lambda(nl, cells);
    for (std::size_t li = 0; li < nl; ++li)
      g.summary.push_back({methods[mi], g.lambdas[li], sel.mean_error[li], sel.std_error[li],
                           sel.survivors[li], li == sel.index});
    const auto& first = records[mi * per_method + sel.index * ns];
    if (first) {
      if (methods[mi] == Method::bilevel) {
        group_rows.emplace_back("bilevel_relaxed", first->result.relaxed_theta);
        group_rows.emplace_back("bilevel_rounded", first->result.theta);
      } else {
        group_rows.emplace_back("mib", first->result.theta);
      }
    }
    g.selection[methods[mi]] = sel;
  }

  std::filesystem::create_directories(out);
  {
    std::ofstream os(out / "summary.csv");
    if (!os) throw Error(Errc::io, "cannot write summary.csv");
    os.precision(10);
    os << "method,lambda,val_mean,val_std,runs,selected\n";
    for (const auto& r : g.summary)
      os << method_name(r.method) << ',' << r.lambda << ',' << r.val_mean << ',' << r.val_std
         << ',' << r.runs << ',' << (r.selected ? 1 : 0) << '\n';
  }
  std::sort(group_rows.begin(), group_rows.end(), [](const auto& a, const auto& b) {
    auto rank = [](const std::string& s) { return s == "mib" ? 2 : s == "bilevel_rounded" ? 1 : 0; };
    return rank(a.first) < rank(b.first);
  });
  write_groups_csv(out / "groups.csv", bundles.front().oracle_assignment(), group_rows);
  return g;
}

struct ReportRow {
  std::string method;  // "MIB" or "Bilevel"
  double lambda = 0.0;
  std::size_t runs = 0;
  double test_mean = 0.0, test_std = 0.0;
  double recon_mean = 0.0, recon_std = 0.0;
};

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return {m, xs.size() > 1 ? std::sqrt(v / static_cast<double>(xs.size() - 1)) : 0.0};
}

/// Reads every record under `dir`, cross-validates λ per method on mean
/// validation error, and summarizes test and reconstruction error across
/// seeds at the selected λ.
inline std::vector<ReportRow> build_report(const std::filesystem::path& dir) {
  struct Cell {
    double val, test, recon;
  };
  std::map<std::string, std::map<double, std::vector<Cell>>> by_method;
  std::map<std::string, std::set<double>> all_lambdas;
  if (!std::filesystem::is_directory(dir)) throw Error(Errc::io, "no records directory " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const Json j = read_json(f);
    if (!j.contains("method") || !j.contains("lambda") || !j.contains("status")) continue;
    const std::string m = j["method"];
    const double lambda = j["lambda"];
    all_lambdas[m].insert(lambda);
    if (j["status"] != "ok") continue;
    by_method[m][lambda].push_back(
        {j["validation_error"], j["test_error"], j["reconstruction_error"]});
  }
  std::vector<ReportRow> rows;
  for (const char* m : {"mib", "bilevel"}) {
    if (!all_lambdas.count(m)) continue;
    const auto& cols = by_method[m];
    for (double l : all_lambdas[m])
      if (!cols.count(l))
        throw Error(Errc::stage_diverged, std::string("report: every ") + m +
                                              " run failed at lambda " + lambda_dirname(l));
    double best = std::numeric_limits<double>::infinity(), best_l = 0.0;
    for (const auto& [l, cells] : cols) {
      std::vector<double> v;
      for (const auto& c : cells) v.push_back(c.val);
      const double mean = mean_std(v).first;
      if (mean < best) best = mean, best_l = l;
    }
    std::vector<double> test, recon;
    for (const auto& c : cols.at(best_l)) test.push_back(c.test), recon.push_back(c.recon);
    ReportRow r;
    r.method = std::string(m) == "mib" ? "MIB" : "Bilevel";
    r.lambda = best_l;
    r.runs = test.size();
    std::tie(r.test_mean, r.test_std) = mean_std(test);
    std::tie(r.recon_mean, r.recon_std) = mean_std(recon);
    rows.push_back(r);
  }
  return rows;
}

inline void write_report_csv(std::ostream& os, const std::vector<ReportRow>& rows) {
  os.precision(6);
  os << "method,lambda,runs,test_error_mean,test_error_std,recon_mean,recon_std\n";
  for (const auto& r : rows)
    os << r.method << ',' << r.lambda << ',' << r.runs << ',' << r.test_mean << ',' << r.test_std
       << ',' << r.recon_mean << ',' << r.recon_std << '\n';
}

}  // namespace mixbil
