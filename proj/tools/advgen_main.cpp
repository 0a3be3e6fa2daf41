// advgen: pipeline driver for constrained adversarial generation on tabular
// data. Subcommands cover constraint tooling, model training, attack
// generation, metric evaluation and report aggregation; all pipeline stages
// are keyed by a single run-configuration file so reruns are reproducible.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "advgen/checkpoint.hpp"
#include "advgen/constraints.hpp"
#include "advgen/csv.hpp"
#include "advgen/data.hpp"
#include "advgen/metrics.hpp"
#include "advgen/models.hpp"
#include "advgen/report.hpp"
#include "advgen/runconfig.hpp"
#include "advgen/schema.hpp"

namespace {

using namespace advgen;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;       // validation / parse errors
constexpr int kExitInfeasible = 3;  // constraint system cannot be satisfied
constexpr int kExitMissing = 4;     // upstream artifact not found

FeatureSchema load_schema_file(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("schema " + path + ": not valid JSON: " + e.what());
  }
  return schema_from_json(j);
}

ConstraintSet load_constraints_file(const std::string& path,
                                    const FeatureSchema& schema) {
  ConstraintSet set = parse_constraints(read_file(path), schema);
  for (const std::string& w : set.warnings)
    std::cerr << "warning: " << w << "\n";
  return set;
}

/// Everything the pipeline commands share, loaded once per invocation.
struct PipelineContext {
  RunConfig cfg;
  FeatureSchema schema;
  Dataset data;
  SplitResult parts;
  std::optional<ConstraintSet> set;

  const ConstraintSet* set_ptr() const { return set ? &*set : nullptr; }
};

PipelineContext load_context(const std::string& config_path) {
  PipelineContext ctx;
  ctx.cfg = load_runconfig(config_path);
  ctx.cfg.validate();
  ctx.schema = load_schema_file(ctx.cfg.schema_path);
  ctx.data = load_csv(ctx.cfg.dataset, ctx.schema, ctx.cfg.label_column);
  ctx.parts = split(ctx.data, ctx.cfg.split);
  if (!ctx.cfg.constraints.empty())
    ctx.set = load_constraints_file(ctx.cfg.constraints, ctx.schema);
  std::filesystem::create_directories(ctx.cfg.output_dir);
  return ctx;
}

std::vector<RunConfig::GridPoint> selected_points(const RunConfig& cfg,
                                                  const std::string& tag) {
  std::vector<RunConfig::GridPoint> points = cfg.grid_points();
  if (tag.empty()) return points;
  for (const RunConfig::GridPoint& p : points)
    if (p.tag == tag) return {p};
  throw ValidationError("no grid point with tag '" + tag + "'");
}

double elapsed_seconds(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// ---------------------------------------------------------------------------
// constraints-check

int cmd_constraints_check(const std::string& cons_path,
                          const std::string& schema_path) {
  FeatureSchema schema = load_schema_file(schema_path);
  ConstraintSet set = load_constraints_file(cons_path, schema);
  std::string name = std::filesystem::path(cons_path).stem().string();
  std::cout << stats_table(name, constraint_stats(set));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// repair

int cmd_repair(const std::string& csv_path, const std::string& cons_path,
               const std::string& schema_path, std::uint64_t ordering_seed,
               const std::string& out_path) {
  FeatureSchema schema = load_schema_file(schema_path);
  ConstraintSet set = load_constraints_file(cons_path, schema);
  std::string label = schema.label ? schema.label->column : "label";
  Dataset data = load_csv(csv_path, schema, label);

  RepairPlan plan = compile_plan(set, random_ordering(set, ordering_seed));
  std::vector<std::map<std::string, double>> before;
  before.reserve(data.size());
  for (const Record& r : data.rows) before.push_back(value_map(schema, r));
  std::printf("pre-repair violation rate: %s\n",
              format_fixed(violation_rate(set, before), 4).c_str());

  Dataset repaired = data;
  std::vector<std::map<std::string, double>> after;
  bool any_infeasible = false;
  for (std::size_t i = 0; i < data.size(); ++i) {
    RepairOutcome out = repair(plan, before[i]);
    if (!out.infeasible.empty()) {
      any_infeasible = true;
      // Same row numbering as the loader: the header is file row 1.
      std::string ids;
      for (const std::string& id : out.infeasible)
        ids += (ids.empty() ? "" : ", ") + id;
      std::printf("row %zu infeasible: %s\n", i + 2, ids.c_str());
      continue;
    }
    for (std::size_t f = 0; f < schema.features.size(); ++f)
      if (schema.features[f].continuous())
        repaired.rows[i].values[f] = out.repaired.at(schema.features[f].name);
    after.push_back(out.repaired);
  }
  if (any_infeasible) return kExitInfeasible;

  std::printf("post-repair violation rate: %s\n",
              format_fixed(violation_rate(set, after), 4).c_str());
  if (!out_path.empty()) {
    write_file(out_path, dataset_to_csv(repaired));
    std::printf("wrote %s\n", out_path.c_str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train-target

int cmd_train_target(const std::string& config_path) {
  PipelineContext ctx = load_context(config_path);
  TargetClassifier h = train_target(ctx.parts.train, ctx.parts.val, ctx.cfg.target);
  h.clean_error = error_rate(h, ctx.parts.test);
  save_target_checkpoint(ctx.cfg.target_checkpoint(), h);
  std::printf("target: val accuracy %s, test error %s\n",
              format_fixed(h.val_accuracy.back(), 4).c_str(),
              format_fixed(h.clean_error, 4).c_str());
  std::printf("wrote %s\n", ctx.cfg.target_checkpoint().c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train-attack

int cmd_train_attack(const std::string& config_path, const std::string& tag) {
  PipelineContext ctx = load_context(config_path);
  TargetClassifier target = load_target_checkpoint(ctx.cfg.target_checkpoint());

  std::optional<RepairOrdering> ordering;
  if (ctx.set && ctx.cfg.ordering_seed)
    ordering = random_ordering(*ctx.set, *ctx.cfg.ordering_seed);

  for (const RunConfig::GridPoint& point : selected_points(ctx.cfg, tag)) {
    auto t0 = std::chrono::steady_clock::now();
    AdvGenerator model =
        train_advdgm(ctx.parts.train, &target, ctx.set_ptr(),
                     ordering ? &*ordering : nullptr, point.config);
    double secs = elapsed_seconds(t0);
    save_adv_checkpoint(ctx.cfg.model_checkpoint(point.tag), model, secs);
    std::printf("%s: trained in %ss, final l_dgm %s\n", point.tag.c_str(),
                format_fixed(secs, 2).c_str(),
                format_fixed(model.history.back().l_dgm, 4).c_str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// attack

int cmd_attack(const std::string& config_path, const std::string& tag) {
  PipelineContext ctx = load_context(config_path);
  TargetClassifier target = load_target_checkpoint(ctx.cfg.target_checkpoint());

  for (const RunConfig::GridPoint& point : selected_points(ctx.cfg, tag)) {
    AdvCheckpoint ckpt =
        load_adv_checkpoint(ctx.cfg.model_checkpoint(point.tag), ctx.set_ptr());
    std::vector<AttackExample> examples =
        generate(ckpt.model, target, ctx.parts.test);

    ExamplesArtifact art;
    art.tag = point.tag;
    art.backbone = point.config.backbone;
    art.mode = mode_name(point.config.mode);
    art.alpha = point.config.alpha;
    art.beta = point.config.beta;
    art.lr = point.config.lr;
    art.clean_error = target.clean_error;
    art.train_seconds = ckpt.train_seconds;
    art.examples = examples;
    save_examples_artifact(ctx.cfg.examples_artifact(point.tag), art);

    double mean_norm = 0.0;
    for (const AttackExample& ex : examples) mean_norm += ex.delta_norm;
    mean_norm /= examples.empty() ? 1.0 : static_cast<double>(examples.size());
    std::printf("%s: %zu examples, mean |delta| %s\n", point.tag.c_str(),
                examples.size(), format_fixed(mean_norm, 4).c_str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

int cmd_evaluate(const std::string& config_path, const std::string& tag) {
  PipelineContext ctx = load_context(config_path);
  TargetClassifier target = load_target_checkpoint(ctx.cfg.target_checkpoint());

  std::vector<AttackReport> attack_reports;
  BoundaryReport boundary;
  RuntimeReport runtime;

  for (const RunConfig::GridPoint& point : selected_points(ctx.cfg, tag)) {
    ExamplesArtifact art =
        load_examples_artifact(ctx.cfg.examples_artifact(point.tag));

    AttackReport rep =
        make_attack_report(art.examples, ctx.set_ptr(), ctx.cfg.eps_grid,
                           art.clean_error, art.backbone, art.mode);
    rep.alpha = art.alpha;
    rep.beta = art.beta;
    rep.lr = art.lr;
    attack_reports.push_back(rep);

    if (ctx.set) {
      std::vector<std::map<std::string, double>> recs;
      recs.reserve(art.examples.size());
      for (const AttackExample& ex : art.examples)
        recs.push_back(value_map(ctx.schema, ex.adversarial));
      BoundaryReport part = boundary_report(recs, *ctx.set, ctx.cfg.p_grid);
      for (BoundaryReport::Row& row : part.rows) {
        row.tag = point.tag;
        boundary.rows.push_back(row);
      }
    }

    AdvCheckpoint ckpt =
        load_adv_checkpoint(ctx.cfg.model_checkpoint(point.tag), ctx.set_ptr());
    BenchResult sample = runtime_bench(
        [&] { generate(ckpt.model, target, ctx.parts.test); },
        ctx.cfg.bench_repeats);
    runtime.rows.push_back({point.tag, art.backbone, art.mode, "train",
                            art.train_seconds, art.train_seconds,
                            art.train_seconds, 1});
    runtime.rows.push_back({point.tag, art.backbone, art.mode, "sample",
                            sample.median, sample.min, sample.max,
                            ctx.cfg.bench_repeats});

    std::printf("%s: ASR(eps=%s) %s, violation rate %s\n", point.tag.c_str(),
                format_double(ctx.cfg.eps_grid.back()).c_str(),
                format_fixed(rep.asr_values.back(), 4).c_str(),
                format_fixed(rep.violation_rate, 4).c_str());
  }

  write_file(ctx.cfg.artifact("asr.csv"), render_asr_csv(attack_reports));
  write_file(ctx.cfg.artifact("asr.md"), render_asr_markdown(attack_reports));
  write_file(ctx.cfg.artifact("boundary.csv"), render_boundary_csv(boundary));
  write_file(ctx.cfg.artifact("runtime.csv"), render_runtime_csv(runtime));
  std::printf("wrote %s\n", ctx.cfg.artifact("asr.csv").c_str());
  std::printf("wrote %s\n", ctx.cfg.artifact("asr.md").c_str());
  std::printf("wrote %s\n", ctx.cfg.artifact("boundary.csv").c_str());
  std::printf("wrote %s\n", ctx.cfg.artifact("runtime.csv").c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report

std::string csv_to_markdown(const std::string& csv) {
  std::vector<std::vector<std::string>> rows = parse_csv(csv);
  if (rows.empty()) return "";
  std::string out = "|";
  for (const std::string& cell : rows[0]) out += " " + cell + " |";
  out += "\n|";
  for (std::size_t i = 0; i < rows[0].size(); ++i) out += " --- |";
  out += "\n";
  for (std::size_t r = 1; r < rows.size(); ++r) {
    out += "|";
    for (const std::string& cell : rows[r])
      out += " " + (cell.empty() ? std::string("—") : cell) + " |";
    out += "\n";
  }
  return out;
}

/// Rebuilds AttackReports from an `_asr.csv` written by cmd_evaluate.
std::vector<AttackReport> parse_asr_csv(const std::string& csv) {
  std::vector<std::vector<std::string>> rows = parse_csv(csv);
  std::vector<AttackReport> out;
  if (rows.size() < 2) return out;
  const std::vector<std::string>& header = rows[0];
  for (std::size_t r = 1; r < rows.size(); ++r) {
    AttackReport rep;
    const std::vector<std::string>& row = rows[r];
    for (std::size_t c = 0; c < header.size() && c < row.size(); ++c) {
      const std::string& key = header[c];
      const std::string& cell = row[c];
      if (key == "model") rep.model = cell;
      else if (key == "mode") rep.mode = cell;
      else if (key == "alpha") rep.alpha = std::stod(cell);
      else if (key == "beta") rep.beta = std::stod(cell);
      else if (key == "lr") rep.lr = std::stod(cell);
      else if (key == "clean_error") rep.clean_error = std::stod(cell);
      else if (key == "violation_rate") rep.violation_rate = std::stod(cell);
      else if (key == "examples") rep.n_examples = std::stoul(cell);
      else if (key == "flips") rep.n_flips = std::stoul(cell);
      else if (key == "satisfied") rep.n_satisfied = std::stoul(cell);
      else if (key.rfind("asr_eps_", 0) == 0 && !cell.empty()) {
        rep.eps_grid.push_back(std::stod(key.substr(8)));
        rep.asr_values.push_back(std::stod(cell));
      } else if (key.rfind("asr_valid_eps_", 0) == 0 && !cell.empty()) {
        rep.asr_valid_only.push_back(std::stod(cell));
      }
    }
    out.push_back(rep);
  }
  return out;
}

int cmd_report(const std::string& config_path, const std::string& dir_flag) {
  std::string dir = dir_flag;
  if (dir.empty()) {
    RunConfig cfg = load_runconfig(config_path);
    dir = cfg.output_dir;
  }
  if (!std::filesystem::is_directory(dir))
    throw ValidationError("report: no such directory: " + dir);

  auto collect = [&](const std::string& suffix) {
    std::vector<std::string> paths;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      std::string name = entry.path().filename().string();
      if (name.size() > suffix.size() &&
          name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
        paths.push_back(entry.path().string());
    }
    std::sort(paths.begin(), paths.end());
    return paths;
  };

  std::vector<AttackReport> reports;
  for (const std::string& path : collect("_asr.csv"))
    for (AttackReport& rep : parse_asr_csv(read_file(path)))
      reports.push_back(rep);
  if (reports.empty())
    throw MissingArtifactError("missing artifact: no *_asr.csv under " + dir +
                               " (run evaluate first)");

  std::string md = "# Attack success rate\n\n" + render_asr_markdown(reports);
  std::string boundary_md, runtime_md;
  for (const std::string& path : collect("_boundary.csv"))
    boundary_md += csv_to_markdown(read_file(path));
  for (const std::string& path : collect("_runtime.csv"))
    runtime_md += csv_to_markdown(read_file(path));
  if (!boundary_md.empty())
    md += "\n# Constraint boundary occupancy\n\n" + boundary_md;
  if (!runtime_md.empty()) md += "\n# Runtime\n\n" + runtime_md;

  std::cout << md;
  std::string out_path =
      (std::filesystem::path(dir) / "report.md").string();
  write_file(out_path, md);
  std::cerr << "wrote " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"constrained adversarial generation for tabular data"};
  app.require_subcommand(1);

  std::string cons_path, schema_path, csv_path, config_path, out_path, tag, dir;
  std::uint64_t ordering_seed = 0;

  CLI::App* check = app.add_subcommand(
      "constraints-check", "Parse a constraint file and print its statistics");
  check->add_option("constraints", cons_path, "constraint DSL file")->required();
  check->add_option("schema", schema_path, "feature schema JSON")->required();

  CLI::App* rep = app.add_subcommand(
      "repair", "Repair a CSV against a constraint set and report violation rates");
  rep->add_option("data", csv_path, "input CSV")->required();
  rep->add_option("constraints", cons_path, "constraint DSL file")->required();
  rep->add_option("schema", schema_path, "feature schema JSON")->required();
  rep->add_option("--ordering-seed", ordering_seed,
                  "seed for the random repair ordering (default 0)");
  rep->add_option("--out", out_path, "write the repaired CSV here");

  CLI::App* tt = app.add_subcommand(
      "train-target", "Train the target classifier declared in a run config");
  tt->add_option("config", config_path, "run configuration JSON")->required();

  CLI::App* ta = app.add_subcommand(
      "train-attack", "Train the adversarial generator grid of a run config");
  ta->add_option("config", config_path, "run configuration JSON")->required();
  ta->add_option("--tag", tag, "train only this grid point");

  CLI::App* at = app.add_subcommand(
      "attack", "Generate adversarial examples from trained checkpoints");
  at->add_option("config", config_path, "run configuration JSON")->required();
  at->add_option("--tag", tag, "attack only this grid point");

  CLI::App* ev = app.add_subcommand(
      "evaluate", "Compute ASR/boundary/runtime reports for generated examples");
  ev->add_option("config", config_path, "run configuration JSON")->required();
  ev->add_option("--tag", tag, "evaluate only this grid point");

  CLI::App* rp = app.add_subcommand(
      "report", "Aggregate every evaluated run in a directory into one report");
  rp->add_option("config", config_path, "run configuration JSON");
  rp->add_option("--dir", dir, "aggregate this directory instead");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exits 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (check->parsed()) return cmd_constraints_check(cons_path, schema_path);
    if (rep->parsed())
      return cmd_repair(csv_path, cons_path, schema_path, ordering_seed, out_path);
    if (tt->parsed()) return cmd_train_target(config_path);
    if (ta->parsed()) return cmd_train_attack(config_path, tag);
    if (at->parsed()) return cmd_attack(config_path, tag);
    if (ev->parsed()) return cmd_evaluate(config_path, tag);
    if (rp->parsed()) {
      if (config_path.empty() && dir.empty())
        throw ValidationError("report: pass a config or --dir");
      return cmd_report(config_path, dir);
    }
  } catch (const MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissing;
  } catch (const InfeasibleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.message << " at line " << e.line << ", col "
              << e.column << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}
