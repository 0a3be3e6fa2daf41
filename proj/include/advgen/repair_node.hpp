#pragma once

#include <stdexcept>
#include <vector>

#include "advgen/graph.hpp"
#include "advgen/repair.hpp"

namespace advgen {

/// Differentiable batched repair. Forward runs the same pass as repair() per
/// row (so the two agree bitwise); backward replays the recorded clamp
/// decisions in reverse ordering order: an interior feature passes its
/// gradient to the input, a clamped feature routes it into the binding bound
/// expression (gates are hard 0/1 and carry no gradient of their own).
inline Var repair_node(Var x, const RepairPlan& plan) {
  Graph& g = *x.graph;
  const Tensor& xv = g.value(x);
  std::size_t n = xv.rows(), m = xv.cols();
  for (const auto& [name, col] : plan.columns)
    if (col >= m)
      throw std::invalid_argument("repair_node: column " + std::to_string(col) +
                                  " for feature '" + name + "' outside batch width " +
                                  std::to_string(m));

  Tensor out = xv;
  // One steps vector per row, one entry per ordered feature.
  auto traces = std::make_shared<std::vector<std::vector<detail::RepairStep>>>();
  traces->reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    auto read = [&](const std::string& name) {
      return out.data[r * m + plan.columns.at(name)];
    };
    auto write = [&](const std::string& name, double v) {
      out.data[r * m + plan.columns.at(name)] = v;
    };
    std::vector<detail::RepairStep> steps;
    detail::repair_pass(plan, read, write, &steps, nullptr, nullptr);
    traces->push_back(std::move(steps));
  }

  std::size_t xi = x.id;
  const RepairPlan* plan_ptr = &plan;  // plans outlive their graphs by contract
  return g.emit(std::move(out), {x}, [xi, n, m, traces, plan_ptr](Graph& gr,
                                                                 std::size_t id) {
    const Tensor& d = gr.grad_ref(id);
    Tensor& dx = gr.grad_ref(xi);
    const RepairPlan& p = *plan_ptr;
    std::vector<double> work(m);
    for (std::size_t r = 0; r < n; ++r) {
      // Gradient with respect to the repaired value of each column.
      for (std::size_t c = 0; c < m; ++c) work[c] = d.data[r * m + c];
      const std::vector<detail::RepairStep>& steps = (*traces)[r];
      for (std::size_t k = p.ordering.order.size(); k-- > 0;) {
        const std::string& feature = p.ordering.order[k];
        std::size_t col = p.columns.at(feature);
        double grad = work[col];
        work[col] = 0.0;
        if (steps[k].state == detail::RepairStep::State::interior) {
          dx.data[r * m + col] += grad;
        } else if (grad != 0.0) {
          const BoundAssignment& a = p.assignments.at(feature)[steps[k].binding];
          for (const BoundTerm& t : a.terms) work[p.columns.at(t.feature)] += grad * t.coef;
        }
      }
      // Columns not named in the ordering pass straight through.
      for (std::size_t c = 0; c < m; ++c)
        if (work[c] != 0.0) dx.data[r * m + c] += work[c];
    }
  });
}

}  // namespace advgen
