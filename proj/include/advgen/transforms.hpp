#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "advgen/data.hpp"
#include "advgen/graph.hpp"
#include "advgen/schema.hpp"
#include "advgen/tensor.hpp"

namespace advgen {

/// Min-max + one-hot feature map between record space and model space.
/// Model-space layout, in schema order: one column per continuous feature
/// (scaled so fitted min -> 0, max -> 1), a block of |categories| columns per
/// categorical feature. The map and its inverse are affine per column, so
/// both directions are differentiable with constant Jacobian.
class TransformPipeline {
 public:
  TransformPipeline() = default;

  static TransformPipeline fit(const Dataset& ds, std::string kind = "generator") {
    if (ds.size() == 0) throw ValidationError("pipeline fit: empty dataset");
    ds.validate();
    TransformPipeline p;
    p.kind_ = std::move(kind);
    p.schema_ = ds.schema;
    std::size_t col = 0;
    for (std::size_t i = 0; i < ds.schema.features.size(); ++i) {
      const Feature& f = ds.schema.features[i];
      Column c;
      c.feature_index = i;
      c.first_col = col;
      if (f.continuous()) {
        c.width = 1;
        c.min = c.max = ds.rows[0].values[i];
        for (const Record& r : ds.rows) {
          c.min = std::min(c.min, r.values[i]);
          c.max = std::max(c.max, r.values[i]);
        }
      } else {
        c.width = f.categories.size();
      }
      col += c.width;
      p.columns_.push_back(c);
    }
    p.width_ = col;
    p.fitted_ = true;
    return p;
  }

  bool fitted() const { return fitted_; }
  std::size_t width() const { return width_; }
  const FeatureSchema& schema() const { return schema_; }
  const std::string& kind() const { return kind_; }

  /// Records -> model-space tensor [n, width].
  Tensor transform(const std::vector<Record>& records) const {
    require_fitted();
    Tensor out({records.size(), width_});
    for (std::size_t r = 0; r < records.size(); ++r) {
      if (records[r].values.size() != schema_.feature_count())
        throw ValidationError("pipeline: record width mismatch");
      for (const Column& c : columns_) {
        double v = records[r].values[c.feature_index];
        if (c.width == 1 && schema_.features[c.feature_index].continuous()) {
          out.at(r, c.first_col) = c.constant() ? 0.5 : (v - c.min) / (c.max - c.min);
        } else {
          auto idx = static_cast<std::size_t>(v);
          if (idx >= c.width)
            throw ValidationError("pipeline: bad category index in record");
          out.at(r, c.first_col + idx) = 1.0;
        }
      }
    }
    return out;
  }

  Tensor transform(const Record& record) const { return transform(std::vector<Record>{record}); }

  /// Model-space tensor -> records. One-hot blocks invert by argmax (lowest
  /// index wins ties); continuous columns un-scale without clamping.
  std::vector<Record> inverse_transform(const Tensor& t) const {
    require_fitted();
    if (t.cols() != width_)
      throw ValidationError("pipeline: tensor width " + std::to_string(t.cols()) +
                            ", expected " + std::to_string(width_));
    std::vector<Record> out(t.rows());
    for (std::size_t r = 0; r < t.rows(); ++r) {
      out[r].values.resize(schema_.feature_count());
      for (const Column& c : columns_) {
        if (c.width == 1 && schema_.features[c.feature_index].continuous()) {
          double v = t.at(r, c.first_col);
          out[r].values[c.feature_index] = c.constant() ? c.min : v * (c.max - c.min) + c.min;
        } else {
          std::size_t best = 0;
          for (std::size_t k = 1; k < c.width; ++k)
            if (t.at(r, c.first_col + k) > t.at(r, c.first_col + best)) best = k;
          out[r].values[c.feature_index] = static_cast<double>(best);
        }
      }
    }
    return out;
  }

  /// Graph op: model space -> original data space. Continuous columns
  /// un-scale; one-hot blocks pass through unchanged (repair ignores them).
  Var to_raw(Var model) const {
    require_fitted();
    auto [scale, offset] = raw_affine();
    return col_affine(model, scale, offset);
  }

  /// Graph op: original data space -> model space (the differentiable f).
  Var to_model(Var raw) const {
    require_fitted();
    std::vector<double> scale(width_, 1.0), offset(width_, 0.0);
    for (const Column& c : columns_) {
      if (c.width != 1 || !schema_.features[c.feature_index].continuous()) continue;
      if (c.constant()) {
        scale[c.first_col] = 0.0;
        offset[c.first_col] = 0.5;
      } else {
        scale[c.first_col] = 1.0 / (c.max - c.min);
        offset[c.first_col] = -c.min / (c.max - c.min);
      }
    }
    return col_affine(raw, scale, offset);
  }

  /// Model-space column of each continuous feature (repair plan layout).
  std::map<std::string, std::size_t> continuous_columns() const {
    require_fitted();
    std::map<std::string, std::size_t> out;
    for (const Column& c : columns_)
      if (c.width == 1 && schema_.features[c.feature_index].continuous())
        out[schema_.features[c.feature_index].name] = c.first_col;
    return out;
  }

  /// One-hot block extents, in schema order, for categorical heads.
  struct Block {
    std::size_t feature_index;
    std::size_t first_col;
    std::size_t width;
  };
  std::vector<Block> categorical_blocks() const {
    require_fitted();
    std::vector<Block> out;
    for (const Column& c : columns_)
      if (!schema_.features[c.feature_index].continuous())
        out.push_back({c.feature_index, c.first_col, c.width});
    return out;
  }

  struct FittedRange {
    double min;
    double max;
  };
  FittedRange range_of(const std::string& feature) const {
    require_fitted();
    for (const Column& c : columns_)
      if (schema_.features[c.feature_index].name == feature &&
          schema_.features[c.feature_index].continuous())
        return {c.min, c.max};
    throw ValidationError("pipeline: no continuous feature '" + feature + "'");
  }

  // Serialization hooks for checkpoints (full fidelity, see checkpoint.hpp).
  struct Column {
    std::size_t feature_index = 0;
    std::size_t first_col = 0;
    std::size_t width = 1;
    double min = 0.0;
    double max = 0.0;
    bool constant() const { return min == max; }
  };
  const std::vector<Column>& columns() const { return columns_; }
  static TransformPipeline restore(FeatureSchema schema, std::string kind,
                                   std::vector<Column> columns) {
    TransformPipeline p;
    p.schema_ = std::move(schema);
    p.kind_ = std::move(kind);
    p.columns_ = std::move(columns);
    p.width_ = 0;
    for (const Column& c : p.columns_) p.width_ += c.width;
    p.fitted_ = true;
    return p;
  }

 private:
  void require_fitted() const {
    if (!fitted_) throw ValidationError("pipeline: used before fit");
  }

  std::pair<std::vector<double>, std::vector<double>> raw_affine() const {
    std::vector<double> scale(width_, 1.0), offset(width_, 0.0);
    for (const Column& c : columns_) {
      if (c.width != 1 || !schema_.features[c.feature_index].continuous()) continue;
      if (c.constant()) {
        scale[c.first_col] = 0.0;
        offset[c.first_col] = c.min;
      } else {
        scale[c.first_col] = c.max - c.min;
        offset[c.first_col] = c.min;
      }
    }
    return {scale, offset};
  }

  FeatureSchema schema_;
  std::string kind_ = "generator";
  std::vector<Column> columns_;
  std::size_t width_ = 0;
  bool fitted_ = false;
};

}  // namespace advgen
