#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mixbil/bundle_io.hpp"
#include "mixbil/json_util.hpp"
#include "mixbil/outer.hpp"

namespace mixbil {

inline constexpr int kConfigSchemaVersion = 1;

struct LambdaGridSpec {
  double min = 1e-3;
  double max = 10.0;
  std::size_t count = 10;
  bool log_spaced = true;

  std::vector<double> values() const { return lambda_grid(min, max, count, log_spaced); }
};

/// Settings for the two-feature landscape experiment.
struct LandscapeSpec {
  double eps = 1e-2;
  std::size_t resolution = 101;
  double lambda = 0.3;
  double eta = 0.1;
  std::size_t q = 2000;
  std::uint64_t seed = 7;
  std::size_t tasks = 6;
  std::size_t n = 10;
};

struct ExperimentConfig {
  std::string profile = "desk";
  Method method = Method::mib;
  GenConfig data;
  LowerSettings lower;
  ContinuationConfig continuation;  // continuation.stage.adam holds the Adam settings
  LambdaGridSpec lambda_grid;
  std::vector<std::uint64_t> seeds;
  std::size_t restarts = 1;
  std::string out = "out";
  std::size_t threads = 0;  // 0: one per hardware thread
  LandscapeSpec landscape;

  void validate() const {
    data.validate();
    continuation.validate();
    if (!(lower.eta > 0.0)) throw Error(Errc::config, "lower.eta: must be > 0");
    if (lower.q < 1 || lower.final_q < 1) throw Error(Errc::config, "lower.q: must be >= 1");
    if (continuation.stage.batch_size < 1)
      throw Error(Errc::config, "continuation.batch_size: must be >= 1");
    if (seeds.empty()) throw Error(Errc::config, "seeds: must be nonempty");
    if (restarts < 1) throw Error(Errc::config, "restarts: must be >= 1");
    lambda_grid.values();
  }
};

/// Documented parameter sets. `paper` reproduces the full experiment,
/// `desk` is a scaled-down version that runs in minutes.
inline ExperimentConfig profile_defaults(const std::string& name) {
  ExperimentConfig c;
  c.profile = name;
  auto& st = c.continuation.stage;
  if (name == "paper") {
    c.data = GenConfig{100, 10, 50, 50, 0.1, 0};
    c.lower = LowerSettings{1e-3, 500, 5000, true};
    st.epochs = 500;
    c.continuation.K = 10;
    c.lambda_grid = LambdaGridSpec{1e-3, 10.0, 10, true};
    c.seeds = {0, 1, 2, 3, 4};
  } else if (name == "desk") {
    c.data = GenConfig{30, 5, 12, 20, 0.1, 0};
    c.lower = LowerSettings{1e-3, 100, 1000, true};
    st.epochs = 100;
    c.continuation.K = 6;
    c.lambda_grid = LambdaGridSpec{1e-3, 10.0, 5, true};
    c.seeds = {0, 1, 2};
  } else {
    throw Error(Errc::config, "profile: expected 'paper' or 'desk', got '" + name + "'");
  }
  c.continuation.eps0 = kInfiniteEps;
  c.continuation.eps1 = 1e3;
  c.continuation.beta = 0.5;
  st.batch_size = 10;
  st.adam = AdamSettings{1e-2, 0.9, 0.999, 1e-8};
  return c;
}

inline Method parse_method(const std::string& s) {
  if (s == "mib") return Method::mib;
  if (s == "bilevel") return Method::bilevel;
  throw Error(Errc::config, "method: expected 'mib' or 'bilevel', got '" + s + "'");
}

inline Json eps_to_json(double eps) { return std::isinf(eps) ? Json(nullptr) : Json(eps); }

inline Json config_to_json(const ExperimentConfig& c) {
  const auto& k = c.continuation;
  const auto& a = k.stage.adam;
  return Json{
      {"schema_version", kConfigSchemaVersion},
      {"profile", c.profile},
      {"method", method_name(c.method)},
      {"data", gen_config_to_json(c.data)},
      {"lower",
       {{"eta", c.lower.eta}, {"q", c.lower.q}, {"final_q", c.lower.final_q},
        {"warm_start", c.lower.warm_start}}},
      {"adam",
       {{"step", a.step}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"stability", a.stability}}},
      {"continuation",
       {{"eps0", eps_to_json(k.eps0)},
        {"eps1", k.eps1},
        {"beta", k.beta},
        {"K", k.K},
        {"epochs_per_stage", k.stage.epochs},
        {"batch_size", k.stage.batch_size},
        {"tau_bin", k.tau_bin},
        {"reset_moments", k.reset_moments},
        {"early_exit_window", k.stage.early_exit_window},
        {"early_exit_tol", k.stage.early_exit_tol},
        {"tangent_gradient", k.stage.tangent_gradient}}},
      {"lambda_grid",
       {{"min", c.lambda_grid.min}, {"max", c.lambda_grid.max}, {"count", c.lambda_grid.count},
        {"log_spaced", c.lambda_grid.log_spaced}}},
      {"seeds", c.seeds},
      {"restarts", c.restarts},
      {"out", c.out},
      {"threads", c.threads},
      {"landscape",
       {{"eps", c.landscape.eps}, {"resolution", c.landscape.resolution},
        {"lambda", c.landscape.lambda}, {"eta", c.landscape.eta}, {"q", c.landscape.q},
        {"seed", c.landscape.seed}, {"tasks", c.landscape.tasks}, {"n", c.landscape.n}}},
  };
}

/// Parses a config document. Values not given fall back to the named
/// profile (`profile_override` wins over the document's own "profile").
inline ExperimentConfig config_from_json(const Json& j, const std::string& profile_override = "") {
  StrictObject root(j, "");
  std::string profile = "desk";
  root.optional("profile", profile);
  if (!profile_override.empty()) profile = profile_override;
  ExperimentConfig c = profile_defaults(profile);

  int version = kConfigSchemaVersion;
  root.optional("schema_version", version);
  if (version != kConfigSchemaVersion)
    throw Error(Errc::schema_version_mismatch, "config schema_version must be 1");

  std::string method = method_name(c.method);
  root.optional("method", method);
  c.method = parse_method(method);
  if (root.has("data")) c.data = gen_config_from_json(root.at("data"), "data", c.data);
  if (root.has("lower")) {
    StrictObject o(root.at("lower"), "lower");
    o.optional("eta", c.lower.eta);
    o.optional("q", c.lower.q);
    o.optional("final_q", c.lower.final_q);
    o.optional("warm_start", c.lower.warm_start);
    o.finish();
  }
  if (root.has("adam")) {
    auto& a = c.continuation.stage.adam;
    StrictObject o(root.at("adam"), "adam");
    o.optional("step", a.step);
    o.optional("beta1", a.beta1);
    o.optional("beta2", a.beta2);
    o.optional("stability", a.stability);
    o.finish();
  }
  if (root.has("continuation")) {
    auto& k = c.continuation;
    StrictObject o(root.at("continuation"), "continuation");
    if (o.has("eps0")) {
      const Json& e = o.at("eps0");
      if (e.is_null()) k.eps0 = kInfiniteEps;
      else if (e.is_number()) k.eps0 = e.get<double>();
      else throw Error(Errc::config, "continuation.eps0: expected a number or null (infinite)");
    }
    o.optional("eps1", k.eps1);
    o.optional("beta", k.beta);
    o.optional("K", k.K);
    o.optional("epochs_per_stage", k.stage.epochs);
    o.optional("batch_size", k.stage.batch_size);
    o.optional("tau_bin", k.tau_bin);
    o.optional("reset_moments", k.reset_moments);
    o.optional("early_exit_window", k.stage.early_exit_window);
    o.optional("early_exit_tol", k.stage.early_exit_tol);
    o.optional("tangent_gradient", k.stage.tangent_gradient);
    o.finish();
  }
  if (root.has("lambda_grid")) {
    StrictObject o(root.at("lambda_grid"), "lambda_grid");
    o.optional("min", c.lambda_grid.min);
    o.optional("max", c.lambda_grid.max);
    o.optional("count", c.lambda_grid.count);
    o.optional("log_spaced", c.lambda_grid.log_spaced);
    o.finish();
  }
  root.optional("seeds", c.seeds);
  root.optional("restarts", c.restarts);
  root.optional("out", c.out);
  root.optional("threads", c.threads);
  if (root.has("landscape")) {
    auto& l = c.landscape;
    StrictObject o(root.at("landscape"), "landscape");
    o.optional("eps", l.eps);
    o.optional("resolution", l.resolution);
    o.optional("lambda", l.lambda);
    o.optional("eta", l.eta);
    o.optional("q", l.q);
    o.optional("seed", l.seed);
    o.optional("tasks", l.tasks);
    o.optional("n", l.n);
    o.finish();
  }
  root.finish();
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path,
                                    const std::string& profile_override = "") {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::config, path.string() + ": " + e.what());
  }
  return config_from_json(j, profile_override);
}

}  // namespace mixbil
