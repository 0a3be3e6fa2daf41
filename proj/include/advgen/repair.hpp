#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "advgen/constraints.hpp"
#include "advgen/rng.hpp"
#include "advgen/schema.hpp"
#include "advgen/textutil.hpp"

namespace advgen {

/// A constraint system (or ordering search) with no solution.
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kSlackTolerance = 1e-6;
inline constexpr double kNumericTolerance = 1e-9;

struct RepairOrdering {
  std::vector<std::string> order;
  std::optional<std::uint64_t> seed;  // set when randomly generated

  std::size_t position(const std::string& name) const {
    for (std::size_t i = 0; i < order.size(); ++i)
      if (order[i] == name) return i;
    throw ValidationError("ordering: feature '" + name + "' not present");
  }
};

struct BoundTerm {
  std::string feature;
  double coef = 0.0;
};

/// One compiled inequality: feature >=/<= constant + sum coef*earlier.
struct BoundAssignment {
  enum class Kind { lower, upper };
  Kind kind = Kind::lower;
  double constant = 0.0;
  std::vector<BoundTerm> terms;          // all strictly earlier in the ordering
  std::vector<LinearConstraint> gate;    // antecedent conjunction; empty = always on
  std::string source;                    // originating constraint id
};

struct RepairPlan {
  RepairOrdering ordering;
  std::map<std::string, std::vector<BoundAssignment>> assignments;
  std::map<std::string, std::size_t> columns;  // feature -> column for tensor use
  double tau = 0.0;
};

struct RepairOutcome {
  std::map<std::string, double> repaired;
  bool changed = false;
  std::map<std::string, double> deltas;      // per ordered feature, x' - x
  std::vector<std::string> infeasible;       // conflicting constraint ids
  /// Smallest distance to any clamp/gate switching surface met during the
  /// pass; tests use it to resample away from kinks before gradient checks.
  double min_switch_margin = std::numeric_limits<double>::infinity();
};

// ---------------------------------------------------------------------------
// Compilation

namespace detail {

inline std::vector<std::string> constrained_features(const ConstraintSet& set) {
  std::set<std::string> names;
  auto add = [&](const LinearConstraint& c) {
    for (const auto& [name, w] : c.coefficients) names.insert(name);
  };
  for (const LinearConstraint& c : set.linear) add(c);
  for (const ConditionalConstraint& c : set.conditional) {
    for (const LinearConstraint& a : c.antecedent) add(a);
    for (const LinearConstraint& q : c.consequent) add(q);
  }
  // Schema order keeps the default deterministic and readable.
  std::vector<std::string> out;
  for (const Feature& f : set.schema.features)
    if (names.count(f.name)) out.push_back(f.name);
  return out;
}

inline void validate_ordering(const ConstraintSet& set, const RepairOrdering& ordering) {
  std::vector<std::string> needed = constrained_features(set);
  std::set<std::string> have(ordering.order.begin(), ordering.order.end());
  if (have.size() != ordering.order.size())
    throw ValidationError("ordering: duplicate feature");
  for (const std::string& name : needed)
    if (!have.count(name))
      throw ValidationError("ordering: missing constrained feature '" + name + "'");
}

inline std::string last_in_ordering(const LinearConstraint& c,
                                    const std::map<std::string, std::size_t>& pos) {
  std::string best;
  std::size_t best_pos = 0;
  for (const auto& [name, w] : c.coefficients) {
    std::size_t p = pos.at(name);
    if (best.empty() || p > best_pos) {
      best = name;
      best_pos = p;
    }
  }
  return best;
}

inline BoundAssignment make_assignment(const LinearConstraint& c, const std::string& attach,
                                       double tau, std::vector<LinearConstraint> gate,
                                       const std::string& source) {
  double wj = c.coefficients.at(attach);
  BoundAssignment a;
  a.kind = wj > 0 ? BoundAssignment::Kind::lower : BoundAssignment::Kind::upper;
  double target = c.strict ? tau : 0.0;  // strict repaired as >= tau
  a.constant = (target - c.bias) / wj;
  for (const auto& [name, w] : c.coefficients)
    if (name != attach) a.terms.push_back({name, -w / wj});
  a.gate = std::move(gate);
  a.source = source;
  return a;
}

}  // namespace detail

/// Compiles the set against an ordering. Each linear constraint becomes one
/// bound on its ordering-last participating feature; conditional consequents
/// are gated by their antecedent, which must be fully ordered before the
/// feature any consequent bound attaches to (otherwise the gate would read
/// values that are not yet repaired).
inline RepairPlan compile_plan(const ConstraintSet& set, const RepairOrdering& ordering,
                               double tau = 0.0,
                               std::map<std::string, std::size_t> columns = {}) {
  detail::validate_ordering(set, ordering);
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < ordering.order.size(); ++i) pos[ordering.order[i]] = i;

  RepairPlan plan;
  plan.ordering = ordering;
  plan.tau = tau;

  for (const LinearConstraint& c : set.linear) {
    std::string attach = detail::last_in_ordering(c, pos);
    plan.assignments[attach].push_back(detail::make_assignment(c, attach, tau, {}, c.id));
  }
  for (const ConditionalConstraint& c : set.conditional) {
    std::size_t antecedent_last = 0;
    for (const LinearConstraint& a : c.antecedent)
      for (const auto& [name, w] : a.coefficients)
        antecedent_last = std::max(antecedent_last, pos.at(name));
    for (const LinearConstraint& q : c.consequent) {
      std::string attach = detail::last_in_ordering(q, pos);
      if (pos.at(attach) <= antecedent_last)
        throw ValidationError(
            "compile_plan: constraint " + c.id + " attaches a consequent bound to '" +
            attach + "' before its antecedent is fully ordered");
      plan.assignments[attach].push_back(
          detail::make_assignment(q, attach, tau, c.antecedent, c.id));
    }
  }

  if (columns.empty())
    for (std::size_t i = 0; i < set.schema.features.size(); ++i)
      columns[set.schema.features[i].name] = i;
  for (const std::string& name : ordering.order)
    if (!columns.count(name))
      throw ValidationError("compile_plan: no column for feature '" + name + "'");
  plan.columns = std::move(columns);
  return plan;
}

/// Seeded permutation of the constrained features, resampled until the
/// conditional precedence rule admits it.
inline RepairOrdering random_ordering(const ConstraintSet& set, std::uint64_t seed,
                                      int retry_budget = 1000) {
  std::vector<std::string> features = detail::constrained_features(set);
  if (features.empty()) throw ValidationError("random_ordering: empty constraint set");
  Rng rng(seed);
  for (int attempt = 0; attempt < retry_budget; ++attempt) {
    RepairOrdering ordering;
    ordering.order = features;
    ordering.seed = seed;
    rng.shuffle(ordering.order);
    try {
      compile_plan(set, ordering);
      return ordering;
    } catch (const ValidationError&) {
      // precedence violated; draw the next permutation
    }
  }
  throw InfeasibleError("random_ordering: no valid ordering in " +
                        std::to_string(retry_budget) + " attempts (conditional cycle?)");
}

// ---------------------------------------------------------------------------
// Repair core (shared by record repair and the differentiable node so both
// paths are arithmetically identical)

namespace detail {

/// Per-feature clamp decision recorded for the backward pass.
struct RepairStep {
  enum class State { interior, lower, upper };
  State state = State::interior;
  int binding = -1;  // index into the feature's assignment list when clamped
};

template <class Read>
double bound_value(const BoundAssignment& a, const Read& read) {
  double v = a.constant;
  for (const BoundTerm& t : a.terms) v += t.coef * read(t.feature);
  return v;
}

template <class Read>
bool gate_active(const BoundAssignment& a, const Read& read, double* min_margin) {
  bool active = true;
  for (const LinearConstraint& g : a.gate) {
    double s = g.bias;
    for (const auto& [name, w] : g.coefficients) s += w * read(name);
    if (min_margin) *min_margin = std::min(*min_margin, std::abs(s));
    active = active && (g.strict ? s > 0.0 : s >= 0.0);
  }
  return active;
}

/// Processes one record/row in ordering order. Read/write go through the
/// callbacks; steps (when given) receive one entry per ordered feature.
template <class Read, class Write>
void repair_pass(const RepairPlan& plan, const Read& read, const Write& write,
                 std::vector<RepairStep>* steps, std::vector<std::string>* infeasible,
                 double* min_margin) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  for (const std::string& feature : plan.ordering.order) {
    RepairStep step;
    auto it = plan.assignments.find(feature);
    if (it != plan.assignments.end()) {
      double lower = -kInf, upper = kInf;
      int binding_lower = -1, binding_upper = -1;
      for (std::size_t i = 0; i < it->second.size(); ++i) {
        const BoundAssignment& a = it->second[i];
        if (!gate_active(a, read, min_margin)) continue;
        double v = bound_value(a, read);
        if (a.kind == BoundAssignment::Kind::lower) {
          if (min_margin && binding_lower >= 0)
            *min_margin = std::min(*min_margin, std::abs(v - lower));
          if (v > lower) {  // ties keep the first active bound
            lower = v;
            binding_lower = static_cast<int>(i);
          }
        } else {
          if (min_margin && binding_upper >= 0)
            *min_margin = std::min(*min_margin, std::abs(v - upper));
          if (v < upper) {
            upper = v;
            binding_upper = static_cast<int>(i);
          }
        }
      }
      double x = read(feature);
      if (min_margin) {
        if (binding_lower >= 0) *min_margin = std::min(*min_margin, std::abs(x - lower));
        if (binding_upper >= 0) *min_margin = std::min(*min_margin, std::abs(x - upper));
        if (binding_lower >= 0 && binding_upper >= 0)
          *min_margin = std::min(*min_margin, std::abs(lower - upper));
      }
      if (binding_lower >= 0 && binding_upper >= 0 &&
          lower > upper + kNumericTolerance) {
        if (infeasible) {
          infeasible->push_back(it->second[binding_lower].source);
          infeasible->push_back(it->second[binding_upper].source);
        }
        // Lower-bound preference keeps batched use total.
        step.state = RepairStep::State::lower;
        step.binding = binding_lower;
        write(feature, lower);
      } else if (x < lower) {
        step.state = RepairStep::State::lower;
        step.binding = binding_lower;
        write(feature, lower);
      } else if (x > upper) {
        step.state = RepairStep::State::upper;
        step.binding = binding_upper;
        write(feature, upper);
      }
      // Interior (ties included): the value is already in place, untouched.
    }
    if (steps) steps->push_back(step);
  }
}

}  // namespace detail

inline RepairOutcome repair(const RepairPlan& plan,
                            const std::map<std::string, double>& record) {
  RepairOutcome out;
  out.repaired = record;
  for (const std::string& feature : plan.ordering.order)
    if (!record.count(feature))
      throw ValidationError("repair: record missing feature '" + feature + "'");

  auto read = [&](const std::string& name) { return out.repaired.at(name); };
  auto write = [&](const std::string& name, double v) { out.repaired[name] = v; };
  detail::repair_pass(plan, read, write, nullptr, &out.infeasible,
                      &out.min_switch_margin);

  for (const std::string& feature : plan.ordering.order) {
    double d = out.repaired.at(feature) - record.at(feature);
    out.deltas[feature] = d;
    if (out.repaired.at(feature) != record.at(feature)) out.changed = true;
  }
  std::sort(out.infeasible.begin(), out.infeasible.end());
  out.infeasible.erase(std::unique(out.infeasible.begin(), out.infeasible.end()),
                       out.infeasible.end());
  return out;
}

/// Fraction of records violating at least one constraint (slack < -1e-6).
/// Strictness is immaterial at this tolerance, by design.
inline double violation_rate(const ConstraintSet& set,
                             const std::vector<std::map<std::string, double>>& records) {
  if (records.empty()) throw ValidationError("violation_rate: empty record list");
  std::size_t violated = 0;
  for (const auto& record : records) {
    bool bad = false;
    for (const LinearConstraint& c : set.linear)
      bad = bad || evaluate(c, record).slack < -kSlackTolerance;
    for (const ConditionalConstraint& c : set.conditional)
      bad = bad || evaluate(c, record).slack < -kSlackTolerance;
    if (bad) ++violated;
  }
  return static_cast<double>(violated) / static_cast<double>(records.size());
}

/// Stable human-readable plan listing for golden-file tests.
inline std::string plan_dump(const RepairPlan& plan) {
  std::string out = "ordering:";
  for (const std::string& f : plan.ordering.order) out += " " + f;
  out += "\n";
  for (const std::string& feature : plan.ordering.order) {
    auto it = plan.assignments.find(feature);
    if (it == plan.assignments.end()) continue;
    out += feature + ":\n";
    for (const BoundAssignment& a : it->second) {
      out += a.kind == BoundAssignment::Kind::lower ? "  lower " : "  upper ";
      out += format_double(a.constant);
      for (const BoundTerm& t : a.terms)
        out += " + " + format_double(t.coef) + "*" + t.feature;
      if (!a.gate.empty()) {
        out += " when ";
        for (std::size_t i = 0; i < a.gate.size(); ++i) {
          if (i) out += " and ";
          out += render(a.gate[i]);
        }
      }
      out += "  [" + a.source + "]\n";
    }
  }
  return out;
}

}  // namespace advgen
