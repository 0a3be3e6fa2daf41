#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "advgen/csv.hpp"
#include "advgen/metrics.hpp"
#include "advgen/textutil.hpp"

namespace advgen {

namespace detail {

/// Sorted union of every report's eps grid, deduplicated on exact value.
inline std::vector<double> union_eps_grid(const std::vector<AttackReport>& reports) {
  std::vector<double> grid;
  for (const AttackReport& r : reports)
    for (double eps : r.eps_grid) grid.push_back(eps);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

/// Index of eps in the report's own grid, or npos when the report lacks it.
inline std::size_t eps_index(const AttackReport& r, double eps) {
  for (std::size_t i = 0; i < r.eps_grid.size(); ++i)
    if (r.eps_grid[i] == eps) return i;
  return static_cast<std::size_t>(-1);
}

}  // namespace detail

/// Machine-readable ASR table: one row per (model, mode), full precision.
inline std::string render_asr_csv(const std::vector<AttackReport>& reports) {
  if (reports.empty()) throw ValidationError("render: no attack reports");
  std::vector<double> grid = detail::union_eps_grid(reports);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header = {"model",       "mode",           "alpha",
                                     "beta",        "lr",             "clean_error",
                                     "violation_rate", "examples",    "flips",
                                     "satisfied"};
  for (double eps : grid) header.push_back("asr_eps_" + format_double(eps));
  for (double eps : grid) header.push_back("asr_valid_eps_" + format_double(eps));
  rows.push_back(header);
  for (const AttackReport& r : reports) {
    std::vector<std::string> row = {r.model,
                                    r.mode,
                                    format_double(r.alpha),
                                    format_double(r.beta),
                                    format_double(r.lr),
                                    format_double(r.clean_error),
                                    format_double(r.violation_rate),
                                    std::to_string(r.n_examples),
                                    std::to_string(r.n_flips),
                                    std::to_string(r.n_satisfied)};
    for (double eps : grid) {
      std::size_t i = detail::eps_index(r, eps);
      row.push_back(i == static_cast<std::size_t>(-1)
                        ? std::string()
                        : format_double(r.asr_values[i]));
    }
    for (double eps : grid) {
      std::size_t i = detail::eps_index(r, eps);
      row.push_back(i == static_cast<std::size_t>(-1)
                        ? std::string()
                        : format_double(r.asr_valid_only[i]));
    }
    rows.push_back(row);
  }
  return write_csv(rows);
}

/// ASR summary table: a "-" row carrying the clean error rate of the target
/// on original data, then one row per (model, mode). 3 decimals.
inline std::string render_asr_markdown(const std::vector<AttackReport>& reports) {
  if (reports.empty()) throw ValidationError("render: no attack reports");
  std::vector<double> grid = detail::union_eps_grid(reports);
  std::string out = "| Model | Mode | Alpha | Beta | LR | Violation |";
  for (double eps : grid) out += " ASR (eps = " + format_double(eps) + ") |";
  out += "\n| --- | --- | --- | --- | --- | --- |";
  for (std::size_t i = 0; i < grid.size(); ++i) out += " --- |";
  out += "\n| - | - | - | - | - | - |";
  for (std::size_t i = 0; i < grid.size(); ++i)
    out += " " + format_fixed(reports.front().clean_error, 3) + " |";
  out += "\n";
  for (const AttackReport& r : reports) {
    out += "| " + r.model + " | " + r.mode + " | " + format_double(r.alpha) +
           " | " + format_double(r.beta) + " | " + format_double(r.lr) + " | " +
           format_fixed(r.violation_rate, 3) + " |";
    for (double eps : grid) {
      std::size_t i = detail::eps_index(r, eps);
      out += i == static_cast<std::size_t>(-1)
                 ? std::string(" — |")
                 : " " + format_fixed(r.asr_values[i], 3) + " |";
    }
    out += "\n";
  }
  return out;
}

inline std::string render_boundary_csv(const BoundaryReport& rep) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"tag", "constraint", "p", "width", "occupancy_percent"});
  for (const BoundaryReport::Row& r : rep.rows)
    rows.push_back({r.tag, r.constraint_id, format_double(r.p),
                    format_double(r.width), format_double(r.occupancy)});
  return write_csv(rows);
}

inline std::string render_runtime_csv(const RuntimeReport& rep) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back(
      {"tag", "model", "mode", "phase", "repeats", "median_s", "min_s", "max_s"});
  for (const RuntimeReport::Row& r : rep.rows)
    rows.push_back({r.tag, r.model, r.mode, r.phase, std::to_string(r.repeats),
                    format_double(r.median), format_double(r.min),
                    format_double(r.max)});
  return write_csv(rows);
}

}  // namespace advgen
