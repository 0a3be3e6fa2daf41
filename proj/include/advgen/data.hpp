#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "advgen/csv.hpp"
#include "advgen/rng.hpp"
#include "advgen/schema.hpp"
#include "advgen/textutil.hpp"

namespace advgen {

/// One row of feature values in schema order. Continuous features hold their
/// raw value; categorical features hold the category index.
struct Record {
  std::vector<double> values;
};

struct Dataset {
  FeatureSchema schema;
  std::vector<Record> rows;
  std::vector<int> labels;          // index into label_names, aligned to rows
  std::vector<std::string> label_names;
  std::string name;

  std::size_t size() const { return rows.size(); }

  void validate() const {
    schema.validate();
    if (rows.size() != labels.size())
      throw ValidationError("dataset: row/label count mismatch");
    for (const Record& r : rows)
      if (r.values.size() != schema.feature_count())
        throw ValidationError("dataset: row width does not match schema");
  }
};

/// Continuous feature values of one record, keyed by name -- the record form
/// the constraint evaluator consumes.
inline std::map<std::string, double> value_map(const FeatureSchema& schema,
                                               const Record& record) {
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < schema.features.size(); ++i)
    if (schema.features[i].continuous()) out[schema.features[i].name] = record.values[i];
  return out;
}

inline std::string category_of(const Feature& f, double stored_index) {
  auto idx = static_cast<std::size_t>(stored_index);
  if (!f.continuous() && idx < f.categories.size()) return f.categories[idx];
  throw ValidationError("record: bad category index for feature '" + f.name + "'");
}

// ---------------------------------------------------------------------------
// CSV ingestion

inline Dataset load_csv(const std::string& path, const FeatureSchema& schema,
                        const std::string& label_column) {
  schema.validate();
  if (!schema.label || schema.label->column != label_column)
    throw ValidationError("load_csv: schema declares no label column '" + label_column +
                          "'");
  std::vector<std::vector<std::string>> cells = parse_csv(read_file(path));
  if (cells.empty()) throw ValidationError("load_csv: empty file " + path);

  const std::vector<std::string>& header = cells[0];
  std::map<std::string, std::size_t> col_of;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!col_of.emplace(header[i], i).second)
      throw ValidationError("load_csv: duplicate column '" + header[i] + "'");
  }
  for (const Feature& f : schema.features)
    if (!col_of.count(f.name))
      throw ValidationError("load_csv: missing column '" + f.name + "'");
  if (!col_of.count(label_column))
    throw ValidationError("load_csv: missing label column '" + label_column + "'");

  Dataset ds;
  ds.schema = schema;
  ds.label_names = schema.label->classes;
  ds.name = path;

  for (std::size_t r = 1; r < cells.size(); ++r) {
    const std::vector<std::string>& row = cells[r];
    // 1-based file rows: the header is row 1.
    std::string where = "row " + std::to_string(r + 1);
    if (row.size() != header.size())
      throw ValidationError("load_csv: " + where + " has " + std::to_string(row.size()) +
                            " cells, expected " + std::to_string(header.size()));
    Record rec;
    for (const Feature& f : schema.features) {
      const std::string& cell = row[col_of.at(f.name)];
      if (f.continuous()) {
        try {
          std::size_t used = 0;
          double v = std::stod(cell, &used);
          if (used != cell.size()) throw std::invalid_argument("trailing text");
          rec.values.push_back(v);
        } catch (const std::exception&) {
          throw ValidationError("load_csv: " + where + ", column '" + f.name +
                                "': cannot parse '" + cell + "' as a number");
        }
      } else {
        auto it = std::find(f.categories.begin(), f.categories.end(), cell);
        if (it == f.categories.end())
          throw ValidationError("load_csv: " + where + ", column '" + f.name +
                                "': category '" + cell + "' not in schema");
        rec.values.push_back(static_cast<double>(it - f.categories.begin()));
      }
    }
    const std::string& label_cell = row[col_of.at(label_column)];
    auto lit = std::find(ds.label_names.begin(), ds.label_names.end(), label_cell);
    if (lit == ds.label_names.end())
      throw ValidationError("load_csv: " + where + ": label '" + label_cell +
                            "' not in declared classes");
    ds.rows.push_back(std::move(rec));
    ds.labels.push_back(static_cast<int>(lit - ds.label_names.begin()));
  }
  ds.validate();
  return ds;
}

inline std::string dataset_to_csv(const Dataset& ds) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header;
  for (const Feature& f : ds.schema.features) header.push_back(f.name);
  header.push_back(ds.schema.label ? ds.schema.label->column : "label");
  cells.push_back(header);
  for (std::size_t r = 0; r < ds.rows.size(); ++r) {
    std::vector<std::string> row;
    for (std::size_t i = 0; i < ds.schema.features.size(); ++i) {
      const Feature& f = ds.schema.features[i];
      row.push_back(f.continuous() ? format_double(ds.rows[r].values[i])
                                   : category_of(f, ds.rows[r].values[i]));
    }
    row.push_back(ds.label_names[static_cast<std::size_t>(ds.labels[r])]);
    cells.push_back(std::move(row));
  }
  return write_csv(cells);
}

// ---------------------------------------------------------------------------
// Splits

struct SplitSpec {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  bool stratify = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (train <= 0.0 || val <= 0.0 || test <= 0.0)
      throw ValidationError("split: fractions must be positive");
    if (std::abs(train + val + test - 1.0) > 1e-9)
      throw ValidationError("split: fractions must sum to 1");
  }
};

struct SplitResult {
  Dataset train;
  Dataset val;
  Dataset test;
};

namespace detail {

/// Largest-remainder allocation of n items to the three fractions; ties go
/// train > val > test so the result is deterministic.
inline std::array<std::size_t, 3> allocate(std::size_t n, const SplitSpec& spec) {
  double exact[3] = {n * spec.train, n * spec.val, n * spec.test};
  std::array<std::size_t, 3> out{};
  double rem[3];
  std::size_t used = 0;
  for (int i = 0; i < 3; ++i) {
    out[i] = static_cast<std::size_t>(exact[i]);
    rem[i] = exact[i] - static_cast<double>(out[i]);
    used += out[i];
  }
  while (used < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (rem[i] > rem[best]) best = i;
    out[best] += 1;
    rem[best] = -1.0;
    ++used;
  }
  return out;
}

}  // namespace detail

inline SplitResult split(const Dataset& ds, const SplitSpec& spec) {
  spec.validate();
  ds.validate();
  if (ds.size() < 3) throw ValidationError("split: need at least 3 rows");

  // Group indices by class when stratifying; one pooled group otherwise.
  std::vector<std::vector<std::size_t>> groups;
  if (spec.stratify) {
    groups.resize(ds.label_names.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
      groups[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  } else {
    groups.emplace_back();
    for (std::size_t i = 0; i < ds.size(); ++i) groups[0].push_back(i);
  }

  Rng rng(spec.seed);
  std::vector<std::size_t> idx[3];
  for (std::vector<std::size_t>& group : groups) {
    rng.shuffle(group);
    auto sizes = detail::allocate(group.size(), spec);
    std::size_t off = 0;
    for (int part = 0; part < 3; ++part) {
      for (std::size_t k = 0; k < sizes[part]; ++k) idx[part].push_back(group[off + k]);
      off += sizes[part];
    }
  }

  SplitResult out;
  Dataset* parts[3] = {&out.train, &out.val, &out.test};
  const char* suffix[3] = {"/train", "/val", "/test"};
  for (int part = 0; part < 3; ++part) {
    if (idx[part].empty())
      throw ValidationError("split: fraction yields an empty split");
    std::sort(idx[part].begin(), idx[part].end());  // original order within parts
    parts[part]->schema = ds.schema;
    parts[part]->label_names = ds.label_names;
    parts[part]->name = ds.name + suffix[part];
    for (std::size_t i : idx[part]) {
      parts[part]->rows.push_back(ds.rows[i]);
      parts[part]->labels.push_back(ds.labels[i]);
    }
  }
  return out;
}

}  // namespace advgen
