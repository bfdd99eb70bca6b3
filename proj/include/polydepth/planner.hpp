#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace polydepth {

/// Real-valued optimal group sizes for the k-layer product tree and a rounded
/// integer plan.
struct DepthPlan {
  double n = 0;
  std::size_t k = 0;
  std::vector<double> b;
  std::vector<std::size_t> integer_b;
  double predicted_count = 0;       // continuous tree count at b
  double integer_count = 0;         // neurons of the integer layout
  double recursion_residual = 0;    // max_i |b_i - b_{i-1} - log2(b_{i-1} - 1/ln 2)| / b_i
  double constraint_residual = 0;   // |prod b - n| / n
  double stationarity_residual = 0; // spread of b_i * df/db_i relative to its mean
};

/// Smallest b_1 the recursion accepts.
double recursion_floor();

/// b_1, ..., b_k from the stationarity recursion starting at b1.
std::vector<double> group_recursion(double b1, std::size_t k);

DepthPlan solve_optimal_groups(double n, std::size_t k);

/// sum_i (n / prod_{j<=i} b_j) 2^{b_i}; equals the exact tree count when prod b = n.
double continuous_tree_count(double n, std::span<const double> b);

/// Exact tree count sum_i (prod_{j>i} b_j) 2^{b_i}; requires prod b = n.
std::uint64_t tree_count(std::size_t n, std::span<const std::size_t> b);

/// Hidden neurons of the tree layout for n factors: full groups use 2^{b_i}
/// neurons, a short group of size g uses 2^g (or one carry neuron when g = 1).
double tree_layout_count(std::size_t n, std::span<const std::size_t> b);

/// Floor/ceil rounding of the real plan with the last group restoring
/// coverage; the layout with the fewest neurons wins.
std::vector<std::size_t> integer_group_plan(std::size_t n, std::size_t k);

/// n^{(k-1)/k} 2^{n^{1/k}}.
double asymptotic_width(double n, std::size_t k);

/// Smallest k with n^{1/k} <= log2(width_cap).
std::size_t depth_rule_of_thumb(double n, std::size_t width_cap);

struct SweepRow {
  double n;
  std::size_t k;
  std::size_t i;
  double b;
  double ratio;  // b_i / n^{1/k}
};

/// Rows for every (n, k) pair the recursion accepts, grid order n-major.
std::vector<SweepRow> plan_sweep(std::span<const std::size_t> ks, std::span<const double> ns);

/// "log:A..B[:count]" (log-spaced, default 25 points) or a comma list.
std::vector<double> parse_n_grid(const std::string& spec);

}  // namespace polydepth
