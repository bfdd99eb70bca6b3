#include "polydepth/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "polydepth/error.hpp"

namespace polydepth {

namespace {

constexpr double kInvLn2 = 1.0 / std::numbers::ln2;

double log_product(const std::vector<double>& b) {
  double s = 0.0;
  for (double v : b) s += std::log(v);
  return s;
}

}  // namespace

DepthPlan solve_real(double n, std::size_t k);

double recursion_floor() { return 1.0 + kInvLn2; }

std::vector<double> group_recursion(double b1, std::size_t k) {
  std::vector<double> b{b1};
  for (std::size_t i = 1; i < k; ++i) {
    const double prev = b.back();
    require(prev > kInvLn2, ErrorCode::Domain, "recursion left its domain");
    b.push_back(prev + std::log2(prev - kInvLn2));
  }
  return b;
}

double continuous_tree_count(double n, std::span<const double> b) {
  double total = 0.0, prod = 1.0;
  for (double bi : b) {
    prod *= bi;
    total += n / prod * std::exp2(bi);
  }
  return total;
}

DepthPlan solve_real(double n, std::size_t k) {
  require(n > 1.0, ErrorCode::InvalidArgument, "planner needs n > 1");
  require(k >= 1, ErrorCode::InvalidArgument, "planner needs k >= 1");
  DepthPlan plan;
  plan.n = n;
  plan.k = k;
  if (k == 1) {
    plan.b = {n};
  } else {
    const double lo_b = recursion_floor();
    const double min_n = std::pow(lo_b, static_cast<double>(k));
    require(n > min_n, ErrorCode::Domain,
            "n=" + std::to_string(n) + " is below the smallest product the recursion reaches for k=" +
                std::to_string(k) + " (" + std::to_string(min_n) + ", b_1 > 1 + 1/ln 2 = " +
                std::to_string(lo_b) + ")");
    // prod b increases with b_1; shoot on b_1.
    const double target = std::log(n);
    double lo = lo_b, hi = n;
    for (int it = 0; it < 400 && hi - lo > 4 * std::numeric_limits<double>::epsilon() * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (log_product(group_recursion(mid, k)) < target)
        lo = mid;
      else
        hi = mid;
    }
    plan.b = group_recursion(0.5 * (lo + hi), k);
  }

  double prod = 1.0;
  for (double bi : plan.b) prod *= bi;
  plan.constraint_residual = std::abs(prod - n) / n;
  for (std::size_t i = 1; i < k; ++i) {
    const double prev = plan.b[i - 1];
    const double want = prev + std::log2(prev - kInvLn2);
    plan.recursion_residual =
        std::max(plan.recursion_residual, std::abs(plan.b[i] - want) / plan.b[i]);
  }
  plan.predicted_count = continuous_tree_count(n, plan.b);

  // Lagrange stationarity: b_i * df/db_i is the same for every i.
  if (k > 1) {
    std::vector<double> lambda(k);
    for (std::size_t i = 0; i < k; ++i) {
      auto up = plan.b, down = plan.b;
      const double h = 1e-6 * plan.b[i];
      up[i] += h;
      down[i] -= h;
      const double g = (continuous_tree_count(n, up) - continuous_tree_count(n, down)) / (2 * h);
      lambda[i] = g * plan.b[i] / n;
    }
    const auto [mn, mx] = std::minmax_element(lambda.begin(), lambda.end());
    double mean = 0.0;
    for (double l : lambda) mean += l / static_cast<double>(k);
    plan.stationarity_residual = (*mx - *mn) / std::abs(mean);
  }

  return plan;
}

DepthPlan solve_optimal_groups(double n, std::size_t k) {
  auto plan = solve_real(n, k);
  if (n <= 1e15 && n == std::floor(n)) {
    plan.integer_b = integer_group_plan(static_cast<std::size_t>(n), k);
    plan.integer_count = tree_layout_count(static_cast<std::size_t>(n), plan.integer_b);
  }
  return plan;
}

std::uint64_t tree_count(std::size_t n, std::span<const std::size_t> b) {
  require(!b.empty(), ErrorCode::InvalidArgument, "tree count needs at least one group size");
  unsigned __int128 prod = 1;
  for (std::size_t bi : b) {
    require(bi >= 1 && bi < 64, ErrorCode::InvalidArgument, "group sizes must lie in 1..63");
    prod *= bi;
    require(prod <= n, ErrorCode::InvalidArgument, "group sizes overshoot n");
  }
  require(prod == n, ErrorCode::InvalidArgument,
          "group sizes multiply to " + std::to_string(static_cast<std::uint64_t>(prod)) +
              ", not n=" + std::to_string(n));
  unsigned __int128 total = 0, suffix = 1;
  for (std::size_t i = b.size(); i-- > 0;) {
    total += suffix * (static_cast<unsigned __int128>(1) << b[i]);
    suffix *= b[i];
  }
  require(total <= std::numeric_limits<std::uint64_t>::max(), ErrorCode::Numeric,
          "tree count overflows 64 bits");
  return static_cast<std::uint64_t>(total);
}

double tree_layout_count(std::size_t n, std::span<const std::size_t> b) {
  double total = 0.0;
  std::size_t count = n;
  for (std::size_t bi : b) {
    require(bi >= 1, ErrorCode::InvalidArgument, "group sizes must be positive");
    const std::size_t full = count / bi, rest = count % bi;
    total += static_cast<double>(full) * (bi == 1 ? 1.0 : std::exp2(static_cast<double>(bi)));
    if (rest == 1) total += 1.0;
    if (rest >= 2) total += std::exp2(static_cast<double>(rest));
    count = full + (rest ? 1 : 0);
  }
  require(count == 1, ErrorCode::InvalidArgument, "group sizes do not cover n");
  return total;
}

std::vector<std::size_t> integer_group_plan(std::size_t n, std::size_t k) {
  require(n >= 1 && k >= 1, ErrorCode::InvalidArgument, "integer plan needs n, k >= 1");
  if (k == 1 || n == 1) return {n};
  if (!(static_cast<double>(n) > std::pow(recursion_floor(), static_cast<double>(k)))) {
    // No real optimum exists this small; search all group sizes directly.
    std::vector<std::size_t> best, b(k - 1, 2);
    double best_count = INFINITY;
    while (true) {
      std::size_t prod = 1;
      for (std::size_t v : b) prod *= v;
      auto full = b;
      full.push_back(std::max<std::size_t>(1, (n + prod - 1) / prod));
      const double c = tree_layout_count(n, full);
      if (c < best_count) {
        best_count = c;
        best = full;
      }
      std::size_t i = 0;
      while (i < b.size() && ++b[i] > n) b[i++] = 2;
      if (i == b.size()) break;
    }
    return best;
  }
  const auto real = solve_real(static_cast<double>(n), k);
  std::vector<std::size_t> best;
  double best_count = INFINITY;
  for (std::size_t mask = 0; mask < (std::size_t{1} << (k - 1)); ++mask) {
    std::vector<std::size_t> b;
    std::size_t prod = 1;
    for (std::size_t i = 0; i + 1 < k; ++i) {
      const double v = (mask >> i) & 1 ? std::ceil(real.b[i]) : std::floor(real.b[i]);
      b.push_back(std::max<std::size_t>(2, static_cast<std::size_t>(v)));
      prod *= b.back();
    }
    b.push_back(std::max<std::size_t>(1, (n + prod - 1) / prod));
    const double c = tree_layout_count(n, b);
    if (c < best_count) {
      best_count = c;
      best = b;
    }
  }
  return best;
}

double asymptotic_width(double n, std::size_t k) {
  require(n >= 1 && k >= 1, ErrorCode::InvalidArgument, "asymptotic width needs n, k >= 1");
  const double kk = static_cast<double>(k);
  return std::pow(n, (kk - 1) / kk) * std::exp2(std::pow(n, 1.0 / kk));
}

std::size_t depth_rule_of_thumb(double n, std::size_t width_cap) {
  require(width_cap >= 2, ErrorCode::InvalidArgument, "width cap must be at least 2");
  require(n >= 1, ErrorCode::InvalidArgument, "depth rule needs n >= 1");
  const double L = std::log2(static_cast<double>(width_cap));
  if (n <= L * (1 + 1e-12)) return 1;
  require(L > 1.0, ErrorCode::Domain, "width cap 2 admits no depth for n > 1");
  std::size_t k = 1;
  double reach = L;
  while (n > reach * (1 + 1e-12)) {
    reach *= L;
    ++k;
  }
  return k;
}

std::vector<SweepRow> plan_sweep(std::span<const std::size_t> ks, std::span<const double> ns) {
  std::vector<SweepRow> rows;
  for (double n : ns) {
    for (std::size_t k : ks) {
      if (k > 1 && !(n > std::pow(recursion_floor(), static_cast<double>(k)))) continue;
      if (n <= 1) continue;
      const auto plan = solve_optimal_groups(n, k);
      const double root = std::pow(n, 1.0 / static_cast<double>(k));
      for (std::size_t i = 0; i < k; ++i) rows.push_back({n, k, i + 1, plan.b[i], plan.b[i] / root});
    }
  }
  return rows;
}

std::vector<double> parse_n_grid(const std::string& spec) {
  std::vector<double> out;
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == s.size() && !s.empty(), ErrorCode::Parse, "bad number '" + s + "' in n grid");
    return v;
  };
  if (spec.rfind("log:", 0) == 0) {
    const auto body = spec.substr(4);
    const auto dots = body.find("..");
    require(dots != std::string::npos, ErrorCode::Parse, "log grid needs 'log:A..B'");
    std::string hi_s = body.substr(dots + 2);
    std::size_t count = 25;
    if (const auto colon = hi_s.find(':'); colon != std::string::npos) {
      count = static_cast<std::size_t>(number(hi_s.substr(colon + 1)));
      hi_s = hi_s.substr(0, colon);
    }
    const double lo = number(body.substr(0, dots)), hi = number(hi_s);
    require(lo > 0 && hi >= lo && count >= 1, ErrorCode::InvalidArgument, "bad log grid range");
    for (std::size_t i = 0; i < count; ++i) {
      const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
      out.push_back(std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))));
    }
    out.front() = lo;
    out.back() = hi;
    return out;
  }
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(number(item));
  require(!out.empty(), ErrorCode::Parse, "empty n grid");
  return out;
}

}  // namespace polydepth
