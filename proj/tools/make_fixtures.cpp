// Regenerates the bundled fixtures/ directory: the 2-Gaussian toy dataset,
// its schema, three constraint sets (pure linear, mixed linear+conditional,
// deliberately infeasible) and a ready-to-run pipeline config. Everything is
// seeded, so reruns reproduce the files byte for byte.

#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "advgen/constraints.hpp"
#include "advgen/csv.hpp"
#include "advgen/data.hpp"
#include "advgen/repair.hpp"
#include "advgen/rng.hpp"
#include "advgen/schema.hpp"

namespace {

using namespace advgen;

// One constraint per line; ids are assigned c1, c2, ... in file order.
const char* kLinearCons =
    "# pure linear: the class boundary band lives above the diagonal\n"
    "x2 >= x1\n";

// Feasible for every x1 in [-6, 7]: after clamping x1, the x2 bounds
// (including any triggered conditional) always leave a non-empty interval.
const char* kMixedCons =
    "# mixed linear + conditional set, 10 constraints\n"
    "x1 >= -6\n"
    "x1 <= 7\n"
    "x2 >= x1\n"
    "x2 <= x1 + 9\n"
    "x2 >= -7.5\n"
    "x2 <= 7.5\n"
    "if x1 >= 5 then x2 >= 2\n"
    "if x1 <= -5 then x2 <= 3\n"
    "if x1 >= 5 and x1 <= 7 then x2 >= 1\n"
    "x2 > x1 - 9\n";

// x1 cannot be >= 1 and <= 0 at once; every record repairs to an empty
// interval, which the repair pass reports as infeasible.
const char* kInfeasibleCons =
    "# deliberately infeasible\n"
    "x1 >= 1\n"
    "x1 <= 0\n";

FeatureSchema toy_schema() {
  FeatureSchema schema;
  Feature x1;
  x1.name = "x1";
  x1.min = -8.0;
  x1.max = 8.0;
  Feature x2 = x1;
  x2.name = "x2";
  schema.features = {x1, x2};
  schema.label = LabelSpec{"label", {"0", "1"}};
  return schema;
}

/// A second, typed dataset exercising every feature kind the pipeline
/// supports: categorical one-hots and immutable columns alongside the
/// continuous ones. Used by the transform round-trip checks.
FeatureSchema mixed_schema() {
  Feature x1;
  x1.name = "x1";
  x1.min = -5.0;
  x1.max = 5.0;
  Feature color;
  color.name = "color";
  color.kind = FeatureKind::categorical;
  color.categories = {"red", "green", "blue"};
  Feature size;
  size.name = "size";
  size.kind = FeatureKind::categorical;
  size.categories = {"s", "m", "l"};
  size.is_mutable = false;
  Feature x2;
  x2.name = "x2";
  x2.min = 0.0;
  x2.max = 10.0;
  x2.is_mutable = false;
  FeatureSchema schema;
  schema.features = {x1, color, size, x2};
  schema.label = LabelSpec{"label", {"0", "1"}};
  return schema;
}

Dataset mixed_dataset(const FeatureSchema& schema, std::size_t rows, std::uint64_t seed) {
  Dataset ds;
  ds.schema = schema;
  ds.name = "mixed";
  ds.label_names = schema.label->classes;
  Rng rng(seed);
  for (std::size_t i = 0; i < rows; ++i) {
    int label = static_cast<int>(i % 2);
    double x1;
    do {
      x1 = rng.normal(label == 0 ? -1.2 : 1.2, 0.8);
    } while (x1 < -5.0 || x1 > 5.0);
    Record r;
    r.values = {x1, static_cast<double>(rng.index(3)),
                static_cast<double>(rng.index(3)), rng.uniform(0.0, 10.0)};
    ds.rows.push_back(std::move(r));
    ds.labels.push_back(label);
  }
  ds.validate();
  return ds;
}

/// Two well-separated Gaussian blobs, one per class, resampled until every
/// row satisfies both feasible constraint sets so the dataset doubles as the
/// "already clean" input of the repair examples.
Dataset toy_dataset(const FeatureSchema& schema, const ConstraintSet& linear,
                    const ConstraintSet& mixed, std::size_t per_class,
                    std::uint64_t seed) {
  Dataset ds;
  ds.schema = schema;
  ds.name = "toy";
  ds.label_names = schema.label->classes;

  const double centers[2][2] = {{-1.5, 1.0}, {1.5, 3.0}};
  const double sigma = 0.3;
  Rng rng(seed);
  auto satisfies = [&](const std::map<std::string, double>& rec) {
    return violation_rate(linear, {rec}) == 0.0 && violation_rate(mixed, {rec}) == 0.0;
  };
  for (int label = 0; label < 2; ++label) {
    for (std::size_t i = 0; i < per_class; ++i) {
      Record r;
      std::map<std::string, double> rec;
      do {
        r.values = {rng.normal(centers[label][0], sigma),
                    rng.normal(centers[label][1], sigma)};
        rec = {{"x1", r.values[0]}, {"x2", r.values[1]}};
      } while (!satisfies(rec));
      ds.rows.push_back(r);
      ds.labels.push_back(label);
    }
  }
  ds.validate();
  return ds;
}

nlohmann::json toy_run_config() {
  nlohmann::json j;
  j["dataset"] = "toy.csv";
  j["schema"] = "toy_schema.json";
  j["label"] = "label";
  j["constraints"] = "toy_linear.cons";
  j["output_dir"] = "out";
  j["seed"] = 7;
  j["ordering_seed"] = 0;
  j["split"] = {{"train", 0.6}, {"val", 0.2}, {"test", 0.2}};
  j["target"] = {{"hidden", {16}}, {"epochs", 40}, {"lr", 0.01}};
  j["attack"] = {{"backbone", "wgan"},
                 {"mode", {"none", "P", "C"}},
                 {"alpha", 50},
                 {"beta", 1},
                 {"lr", 0.005},
                 {"epochs", 10},
                 {"delta_cap", 0.3}};
  j["eps_grid"] = {0.3, 0.4, 0.5};
  j["p_grid"] = {0.01, 0.05, 0.1};
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  std::filesystem::path dir = argc > 1 ? argv[1] : "fixtures";
  std::filesystem::create_directories(dir);
  auto emit = [&](const std::string& name, const std::string& content) {
    std::string path = (dir / name).string();
    write_file(path, content);
    std::printf("wrote %s\n", path.c_str());
  };

  FeatureSchema schema = toy_schema();
  emit("toy_schema.json", schema_to_json(schema).dump(2) + "\n");
  emit("toy_linear.cons", kLinearCons);
  emit("toy_mixed.cons", kMixedCons);
  emit("toy_infeasible.cons", kInfeasibleCons);

  ConstraintSet linear = parse_constraints(kLinearCons, schema);
  ConstraintSet mixed = parse_constraints(kMixedCons, schema);
  Dataset ds = toy_dataset(schema, linear, mixed, 300, 20212223);
  emit("toy.csv", dataset_to_csv(ds));

  emit("toy_run.json", toy_run_config().dump(2) + "\n");

  FeatureSchema mschema = mixed_schema();
  emit("mixed_schema.json", schema_to_json(mschema).dump(2) + "\n");
  emit("mixed.csv", dataset_to_csv(mixed_dataset(mschema, 80, 31415926)));
  return 0;
}
