#pragma once

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "advgen/checkpoint.hpp"
#include "advgen/csv.hpp"
#include "advgen/data.hpp"
#include "advgen/models.hpp"
#include "advgen/schema.hpp"
#include "advgen/textutil.hpp"

namespace advgen {

/// One structured run-configuration file drives every pipeline command; the
/// attack block's backbone/mode/alpha/beta/lr fields accept a scalar or an
/// array and expand to a Cartesian grid of training runs.
struct RunConfig {
  std::string dataset;
  std::string schema_path;
  std::string label_column;
  std::string constraints;  // empty = unconstrained run
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> ordering_seed;
  std::size_t bench_repeats = 5;
  SplitSpec split;
  TargetArch target;
  AdvConfig base;  // shared attack fields; grids below override per point
  std::vector<std::string> backbone_grid;
  std::vector<std::string> mode_grid;
  std::vector<double> alpha_grid;
  std::vector<double> beta_grid;
  std::vector<double> lr_grid;
  std::vector<double> eps_grid = {0.3, 0.4, 0.5};
  std::vector<double> p_grid = {0.01, 0.05, 0.1};

  struct GridPoint {
    AdvConfig config;
    std::string tag;  // e.g. "wgan-C-a10-b1-lr0.005", stable across runs
  };

  std::vector<GridPoint> grid_points() const {
    std::vector<GridPoint> out;
    for (const std::string& backbone : backbone_grid)
      for (const std::string& mode : mode_grid)
        for (double alpha : alpha_grid)
          for (double beta : beta_grid)
            for (double lr : lr_grid) {
              GridPoint p;
              p.config = base;
              p.config.backbone = backbone;
              p.config.mode = mode_from_name(mode);
              p.config.alpha = alpha;
              p.config.beta = beta;
              p.config.lr = lr;
              p.config.eps_eval = eps_grid.back();
              p.tag = backbone + "-" + mode + "-a" + format_double(alpha) + "-b" +
                      format_double(beta) + "-lr" + format_double(lr);
              out.push_back(p);
            }
    return out;
  }

  void validate() const {
    if (dataset.empty() || schema_path.empty() || label_column.empty())
      throw ValidationError("config: dataset, schema and label are required");
    for (const std::string& path : {dataset, schema_path})
      if (!std::filesystem::exists(path))
        throw ValidationError("config: no such file: " + path);
    if (!constraints.empty() && !std::filesystem::exists(constraints))
      throw ValidationError("config: no such file: " + constraints);
    if (backbone_grid.empty() || mode_grid.empty() || alpha_grid.empty() ||
        beta_grid.empty() || lr_grid.empty() || eps_grid.empty() || p_grid.empty())
      throw ValidationError("config: grids must be non-empty");
    for (double eps : eps_grid)
      if (!(eps > 0.0)) throw ValidationError("config: eps grid entries must be positive");
    for (double p : p_grid)
      if (!(p > 0.0) || p > 1.0)
        throw ValidationError("config: p grid entries must be in (0, 1]");
    if (bench_repeats < 1)
      throw ValidationError("config: bench_repeats must be >= 1");
    split.validate();
    for (const GridPoint& point : grid_points()) point.config.validate();
  }

  /// Canonical JSON of the parsed fields. Loading resolves relative paths
  /// against the config file first, so the run id reflects resolved paths.
  nlohmann::json normalized() const {
    nlohmann::json j;
    j["dataset"] = dataset;
    j["schema"] = schema_path;
    j["label"] = label_column;
    j["constraints"] = constraints;
    j["seed"] = seed;
    if (ordering_seed) j["ordering_seed"] = *ordering_seed;
    j["bench_repeats"] = bench_repeats;
    j["split"] = {{"train", split.train},
                  {"val", split.val},
                  {"test", split.test},
                  {"stratify", split.stratify},
                  {"seed", split.seed}};
    j["target"] = {{"hidden", target.hidden},
                   {"lr", target.lr},
                   {"epochs", target.epochs},
                   {"batch_size", target.batch_size},
                   {"seed", target.seed}};
    j["attack"] = advconfig_to_json(base);
    j["attack"]["backbone"] = backbone_grid;
    j["attack"]["mode"] = mode_grid;
    j["attack"]["alpha"] = alpha_grid;
    j["attack"]["beta"] = beta_grid;
    j["attack"]["lr"] = lr_grid;
    j["eps_grid"] = eps_grid;
    j["p_grid"] = p_grid;
    return j;
  }

  /// Run id: fingerprint of the normalized config. Artifact names embed it so
  /// a report can never silently mix runs from different configs.
  std::string run_id() const { return to_hex(fnv1a64(normalized().dump())); }

  std::string artifact(const std::string& suffix) const {
    return (std::filesystem::path(output_dir) / (run_id() + "_" + suffix)).string();
  }
  std::string target_checkpoint() const { return artifact("target.json"); }
  std::string model_checkpoint(const std::string& tag) const {
    return artifact(tag + "_model.json");
  }
  std::string examples_artifact(const std::string& tag) const {
    return artifact(tag + "_examples.json");
  }
};

namespace detail {

/// Scalar-or-array field: [1, 2] and 2 both parse; strings likewise.
template <typename T>
std::vector<T> grid_field(const nlohmann::json& j, const std::string& key,
                          std::vector<T> fallback) {
  if (!j.contains(key)) return fallback;
  const nlohmann::json& v = j.at(key);
  if (v.is_array()) {
    std::vector<T> out = v.get<std::vector<T>>();
    if (out.empty()) throw ValidationError("config: empty grid for '" + key + "'");
    return out;
  }
  return {v.get<T>()};
}

inline std::string resolve_path(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return p;
  std::filesystem::path path(p);
  if (path.is_absolute()) return p;
  return (base / path).lexically_normal().string();
}

}  // namespace detail

inline RunConfig parse_runconfig(const nlohmann::json& j) {
  RunConfig cfg;
  cfg.dataset = j.value("dataset", "");
  cfg.schema_path = j.value("schema", "");
  cfg.label_column = j.value("label", "");
  cfg.constraints = j.value("constraints", "");
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("ordering_seed"))
    cfg.ordering_seed = j.at("ordering_seed").get<std::uint64_t>();
  cfg.bench_repeats = j.value("bench_repeats", cfg.bench_repeats);

  cfg.split.seed = cfg.seed;
  if (j.contains("split")) {
    const nlohmann::json& s = j.at("split");
    cfg.split.train = s.value("train", cfg.split.train);
    cfg.split.val = s.value("val", cfg.split.val);
    cfg.split.test = s.value("test", cfg.split.test);
    cfg.split.stratify = s.value("stratify", cfg.split.stratify);
    cfg.split.seed = s.value("seed", cfg.split.seed);
  }

  cfg.target.seed = cfg.seed;
  if (j.contains("target")) {
    const nlohmann::json& t = j.at("target");
    cfg.target.hidden = t.value("hidden", cfg.target.hidden);
    cfg.target.lr = t.value("lr", cfg.target.lr);
    cfg.target.epochs = t.value("epochs", cfg.target.epochs);
    cfg.target.batch_size = t.value("batch_size", cfg.target.batch_size);
    cfg.target.seed = t.value("seed", cfg.target.seed);
  }

  nlohmann::json attack = j.value("attack", nlohmann::json::object());
  // The five grid keys may be arrays; parse the shared scalars without them.
  nlohmann::json shared = attack;
  for (const char* key : {"backbone", "mode", "alpha", "beta", "lr"})
    shared.erase(key);
  cfg.base = advconfig_from_json(shared);
  if (!attack.contains("seed")) cfg.base.seed = cfg.seed;
  cfg.backbone_grid =
      detail::grid_field<std::string>(attack, "backbone", {cfg.base.backbone});
  cfg.mode_grid = detail::grid_field<std::string>(attack, "mode",
                                                 {mode_name(cfg.base.mode)});
  cfg.alpha_grid = detail::grid_field<double>(attack, "alpha", {cfg.base.alpha});
  cfg.beta_grid = detail::grid_field<double>(attack, "beta", {cfg.base.beta});
  cfg.lr_grid = detail::grid_field<double>(attack, "lr", {cfg.base.lr});

  cfg.eps_grid = detail::grid_field<double>(j, "eps_grid", cfg.eps_grid);
  cfg.p_grid = detail::grid_field<double>(j, "p_grid", cfg.p_grid);
  return cfg;
}

/// Loads a config file; relative paths resolve against the file's directory,
/// and ADVGEN_OUT overrides the output root when set.
inline RunConfig load_runconfig(const std::string& path) {
  std::string text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config " + path + ": not valid JSON: " + e.what());
  }
  RunConfig cfg = parse_runconfig(j);
  std::filesystem::path base = std::filesystem::path(path).parent_path();
  cfg.dataset = detail::resolve_path(base, cfg.dataset);
  cfg.schema_path = detail::resolve_path(base, cfg.schema_path);
  cfg.constraints = detail::resolve_path(base, cfg.constraints);
  if (const char* root = std::getenv("ADVGEN_OUT"))
    cfg.output_dir = root;
  else
    cfg.output_dir = detail::resolve_path(base, cfg.output_dir);
  return cfg;
}

}  // namespace advgen
