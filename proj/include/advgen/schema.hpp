#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "advgen/textutil.hpp"

namespace advgen {

/// Input data that fails a schema or format contract (exit code 2 territory).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class FeatureKind { continuous, categorical };

struct Feature {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  double min = 0.0;                     // continuous domain
  double max = 0.0;
  std::vector<std::string> categories;  // categorical domain
  bool is_mutable = true;

  bool continuous() const { return kind == FeatureKind::continuous; }
};

/// Optional label column: not a feature, but carried by the schema so CSV
/// loading and classifiers agree on the class list.
struct LabelSpec {
  std::string column;
  std::vector<std::string> classes;
};

struct FeatureSchema {
  std::vector<Feature> features;
  std::optional<LabelSpec> label;

  std::size_t feature_count() const { return features.size(); }

  const Feature* find(const std::string& name) const {
    for (const Feature& f : features)
      if (f.name == name) return &f;
    return nullptr;
  }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < features.size(); ++i)
      if (features[i].name == name) return i;
    throw ValidationError("schema: unknown feature '" + name + "'");
  }

  void validate() const {
    if (features.empty()) throw ValidationError("schema: no features");
    std::set<std::string> seen;
    for (const Feature& f : features) {
      if (f.name.empty()) throw ValidationError("schema: empty feature name");
      if (!seen.insert(f.name).second)
        throw ValidationError("schema: duplicate feature '" + f.name + "'");
      if (f.continuous()) {
        if (!(f.min <= f.max))
          throw ValidationError("schema: feature '" + f.name + "' has min > max");
      } else {
        std::set<std::string> cats(f.categories.begin(), f.categories.end());
        if (cats.size() < 2 || cats.size() != f.categories.size())
          throw ValidationError("schema: feature '" + f.name +
                                "' needs >= 2 distinct categories");
      }
    }
    if (label) {
      if (label->column.empty()) throw ValidationError("schema: empty label column");
      if (seen.count(label->column))
        throw ValidationError("schema: label column collides with feature '" +
                              label->column + "'");
      std::set<std::string> cls(label->classes.begin(), label->classes.end());
      if (cls.size() < 2 || cls.size() != label->classes.size())
        throw ValidationError("schema: label needs >= 2 distinct classes");
    }
  }
};

inline nlohmann::json schema_to_json(const FeatureSchema& schema) {
  nlohmann::json features = nlohmann::json::array();
  for (const Feature& f : schema.features) {
    nlohmann::json jf;
    jf["name"] = f.name;
    jf["mutable"] = f.is_mutable;
    if (f.continuous()) {
      jf["kind"] = "continuous";
      jf["min"] = f.min;
      jf["max"] = f.max;
    } else {
      jf["kind"] = "categorical";
      jf["categories"] = f.categories;
    }
    features.push_back(std::move(jf));
  }
  nlohmann::json j;
  j["features"] = std::move(features);
  if (schema.label) {
    j["label"] = {{"column", schema.label->column}, {"classes", schema.label->classes}};
  }
  return j;
}

inline FeatureSchema schema_from_json(const nlohmann::json& j) {
  FeatureSchema schema;
  if (!j.is_object() || !j.contains("features") || !j["features"].is_array())
    throw ValidationError("schema: expected object with a 'features' array");
  for (const auto& jf : j["features"]) {
    Feature f;
    f.name = jf.at("name").get<std::string>();
    f.is_mutable = jf.value("mutable", true);
    std::string kind = jf.at("kind").get<std::string>();
    if (kind == "continuous") {
      f.kind = FeatureKind::continuous;
      f.min = jf.at("min").get<double>();
      f.max = jf.at("max").get<double>();
    } else if (kind == "categorical") {
      f.kind = FeatureKind::categorical;
      f.categories = jf.at("categories").get<std::vector<std::string>>();
    } else {
      throw ValidationError("schema: feature '" + f.name + "' has unknown kind '" + kind +
                            "'");
    }
    schema.features.push_back(std::move(f));
  }
  if (j.contains("label")) {
    LabelSpec l;
    l.column = j["label"].at("column").get<std::string>();
    l.classes = j["label"].at("classes").get<std::vector<std::string>>();
    schema.label = std::move(l);
  }
  schema.validate();
  return schema;
}

/// Stable fingerprint over the canonical JSON form; checkpoints embed it so a
/// model can refuse data from a different schema.
inline std::string schema_fingerprint(const FeatureSchema& schema) {
  return to_hex(fnv1a64(schema_to_json(schema).dump()));
}

}  // namespace advgen
