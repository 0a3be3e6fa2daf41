#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "advgen/constraints.hpp"
#include "advgen/models.hpp"
#include "advgen/repair.hpp"
#include "advgen/schema.hpp"

namespace advgen {

// ---------------------------------------------------------------------------
// Attack success rate

struct ExampleMetrics {
  bool flip = false;            // prediction changed vs the original input
  double delta_norm = 0.0;      // L2 of the f-space perturbation
  bool satisfied = false;       // all constraints hold on the adversarial record
  bool within_budget = false;   // delta_norm < eps (strict), at the default eps
};

struct AttackReport {
  std::string model;            // backbone name
  std::string mode;             // none | P | C
  double alpha = 0.0;           // grid-point hyperparameters, for table rows
  double beta = 0.0;
  double lr = 0.0;
  std::vector<double> eps_grid;
  std::vector<double> asr_values;      // per grid entry, all-originals denominator
  std::vector<double> asr_valid_only;  // denominator: correctly classified originals
  double clean_error = 0.0;
  double violation_rate = 0.0;  // raw generated set, before any success filter
  std::size_t n_examples = 0;
  std::size_t n_flips = 0;
  std::size_t n_satisfied = 0;
  std::vector<ExampleMetrics> examples;
};

namespace detail {

/// Same tolerance as violation_rate, so repaired records always count as
/// satisfied even when a slack lands a few ulps below zero.
inline bool record_satisfied(const ConstraintSet& set,
                             const std::map<std::string, double>& record) {
  for (const LinearConstraint& c : set.linear)
    if (evaluate(c, record).slack < -kSlackTolerance) return false;
  for (const ConditionalConstraint& c : set.conditional)
    if (evaluate(c, record).slack < -kSlackTolerance) return false;
  return true;
}

inline std::vector<bool> satisfied_flags(const std::vector<AttackExample>& examples,
                                         const ConstraintSet* set) {
  std::vector<bool> out(examples.size(), true);
  if (!set) return out;
  for (std::size_t i = 0; i < examples.size(); ++i)
    out[i] = record_satisfied(*set, value_map(set->schema, examples[i].adversarial));
  return out;
}

}  // namespace detail

/// Success = flipped prediction AND constraints satisfied AND ||delta|| < eps
/// (strict), counted over all original examples.
inline double asr(const std::vector<AttackExample>& examples,
                  const ConstraintSet* set, double eps) {
  if (examples.empty()) throw ValidationError("asr: empty example list");
  if (!(eps > 0.0)) throw ValidationError("asr: eps must be positive");
  std::vector<bool> sat = detail::satisfied_flags(examples, set);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const AttackExample& ex = examples[i];
    if (ex.pred_after != ex.pred_before && sat[i] && ex.delta_norm < eps) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

inline double asr(const std::vector<AttackExample>& examples,
                  const ConstraintSet& set, double eps) {
  return asr(examples, &set, eps);
}

/// Same conjunction restricted to originals the target classified correctly.
inline double asr_valid_only(const std::vector<AttackExample>& examples,
                             const ConstraintSet* set, double eps) {
  if (examples.empty()) throw ValidationError("asr: empty example list");
  if (!(eps > 0.0)) throw ValidationError("asr: eps must be positive");
  std::vector<bool> sat = detail::satisfied_flags(examples, set);
  std::size_t hits = 0, valid = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const AttackExample& ex = examples[i];
    if (ex.pred_before != ex.label) continue;
    ++valid;
    if (ex.pred_after != ex.pred_before && sat[i] && ex.delta_norm < eps) ++hits;
  }
  if (valid == 0) return 0.0;
  return static_cast<double>(hits) / static_cast<double>(valid);
}

inline double asr_valid_only(const std::vector<AttackExample>& examples,
                             const ConstraintSet& set, double eps) {
  return asr_valid_only(examples, &set, eps);
}

inline AttackReport make_attack_report(const std::vector<AttackExample>& examples,
                                       const ConstraintSet* set,
                                       const std::vector<double>& eps_grid,
                                       double clean_error,
                                       const std::string& model,
                                       const std::string& mode) {
  if (examples.empty()) throw ValidationError("attack report: empty example list");
  if (eps_grid.empty()) throw ValidationError("attack report: empty eps grid");
  AttackReport rep;
  rep.model = model;
  rep.mode = mode;
  rep.eps_grid = eps_grid;
  rep.clean_error = clean_error;
  rep.n_examples = examples.size();

  std::vector<bool> sat = detail::satisfied_flags(examples, set);
  double default_eps = eps_grid.back();
  std::size_t violations = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const AttackExample& ex = examples[i];
    ExampleMetrics m;
    m.flip = ex.pred_after != ex.pred_before;
    m.delta_norm = ex.delta_norm;
    m.satisfied = sat[i];
    m.within_budget = ex.delta_norm < default_eps;
    rep.examples.push_back(m);
    rep.n_flips += m.flip;
    rep.n_satisfied += m.satisfied;
    violations += !m.satisfied;
  }
  rep.violation_rate =
      static_cast<double>(violations) / static_cast<double>(examples.size());
  for (double eps : eps_grid) {
    rep.asr_values.push_back(asr(examples, set, eps));
    rep.asr_valid_only.push_back(asr_valid_only(examples, set, eps));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Constraint-boundary occupancy

/// Diagonal width of the p-scaled feature-range rectangle.
inline double band_width(double r1, double r2, double p) {
  if (r1 < 0.0 || r2 < 0.0)
    throw ValidationError("band_width: ranges must be non-negative");
  if (!(p > 0.0) || p > 1.0)
    throw ValidationError("band_width: p must be in (0, 1]");
  return std::sqrt(r1 * p * r1 * p + r2 * p * r2 * p);
}

/// Percentage of records within perpendicular distance w/2 of the constraint
/// line w1*x1 + w2*x2 + b = 0. Feature ranges come from the schema domains.
inline double boundary_occupancy(const std::vector<std::map<std::string, double>>& records,
                                 const LinearConstraint& constraint,
                                 const FeatureSchema& schema, double p) {
  if (records.empty()) throw ValidationError("boundary occupancy: empty records");
  if (constraint.coefficients.size() != 2)
    throw ValidationError("boundary occupancy: constraint must involve exactly 2 features, got " +
                          std::to_string(constraint.coefficients.size()));
  auto it = constraint.coefficients.begin();
  const std::string& f1 = it->first;
  double w1 = it->second;
  ++it;
  const std::string& f2 = it->first;
  double w2 = it->second;

  auto range_of = [&](const std::string& name) {
    const Feature* f = schema.find(name);
    if (!f || !f->continuous())
      throw ValidationError("boundary occupancy: no continuous feature '" + name + "'");
    return f->max - f->min;
  };
  double w = band_width(range_of(f1), range_of(f2), p);
  double norm = std::sqrt(w1 * w1 + w2 * w2);
  if (norm == 0.0)
    throw ValidationError("boundary occupancy: constraint has zero coefficients");

  std::size_t inside = 0;
  for (const auto& rec : records) {
    auto v1 = rec.find(f1), v2 = rec.find(f2);
    if (v1 == rec.end() || v2 == rec.end())
      throw ValidationError("boundary occupancy: record is missing a feature");
    double dist =
        std::abs(w1 * v1->second + w2 * v2->second + constraint.bias) / norm;
    if (dist <= w / 2.0) ++inside;
  }
  return 100.0 * static_cast<double>(inside) / static_cast<double>(records.size());
}

struct BoundaryReport {
  struct Row {
    std::string tag;  // grid-point tag; empty outside pipeline runs
    std::string constraint_id;
    double p = 0.0;
    double width = 0.0;
    double occupancy = 0.0;  // percent
  };
  std::vector<Row> rows;
};

/// Occupancy for every 2-feature linear constraint in the set over a p grid;
/// constraints of other arity are skipped (the band geometry is only defined
/// for 2-feature boundaries).
inline BoundaryReport boundary_report(const std::vector<std::map<std::string, double>>& records,
                                      const ConstraintSet& set,
                                      const std::vector<double>& p_grid) {
  if (p_grid.empty()) throw ValidationError("boundary report: empty p grid");
  BoundaryReport rep;
  for (const LinearConstraint& c : set.linear) {
    if (c.coefficients.size() != 2) continue;
    auto it = c.coefficients.begin();
    double r1 = set.schema.find(it->first)->max - set.schema.find(it->first)->min;
    ++it;
    double r2 = set.schema.find(it->first)->max - set.schema.find(it->first)->min;
    for (double p : p_grid) {
      BoundaryReport::Row row;
      row.constraint_id = c.id;
      row.p = p;
      row.width = band_width(r1, r2, p);
      row.occupancy = boundary_occupancy(records, c, set.schema, p);
      rep.rows.push_back(std::move(row));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Runtime benchmarking

struct BenchResult {
  std::vector<double> seconds;  // one entry per repeat, in run order
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Times a task with a wall clock, serially. Task exceptions propagate and
/// discard partial timings.
inline BenchResult runtime_bench(const std::function<void()>& task,
                                 std::size_t repeats) {
  if (repeats < 1) throw ValidationError("runtime_bench: repeats must be >= 1");
  BenchResult out;
  for (std::size_t i = 0; i < repeats; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    task();
    auto t1 = std::chrono::steady_clock::now();
    out.seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::vector<double> sorted = out.seconds;
  std::sort(sorted.begin(), sorted.end());
  out.min = sorted.front();
  out.max = sorted.back();
  std::size_t n = sorted.size();
  out.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return out;
}

struct RuntimeReport {
  struct Row {
    std::string tag;  // grid-point tag; empty outside pipeline runs
    std::string model;
    std::string mode;
    std::string phase;  // train | sample
    double median = 0.0;
    double min = 0.0;
    double max = 0.0;
    std::size_t repeats = 0;
  };
  std::vector<Row> rows;
};

}  // namespace advgen
