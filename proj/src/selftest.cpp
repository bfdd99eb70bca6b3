#include "polydepth/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "polydepth/bounds.hpp"
#include "polydepth/constructors.hpp"
#include "polydepth/error.hpp"
#include "polydepth/planner.hpp"
#include "polydepth/rng.hpp"
#include "polydepth/trainer.hpp"
#include "polydepth/verifier.hpp"

namespace polydepth {

namespace {

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// All exponent vectors of length n with entries in [lo, hi], first entry fastest.
std::vector<ExponentVector> exponent_box(std::size_t n, Exponent lo, Exponent hi) {
  std::vector<ExponentVector> out;
  ExponentVector r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = lo;
  while (true) {
    out.push_back(r);
    std::size_t i = 0;
    while (i < n && r[i] == hi) r[i++] = lo;
    if (i == n) break;
    ++r[i];
  }
  return out;
}

std::uint64_t cells(const ExponentVector& r) {
  std::uint64_t c = 1;
  for (auto e : r.values()) c *= e + 1;
  return c;
}

const Nonlinearity kExp(Activation::Exp);

CriterionResult taylor_suite() {
  CriterionResult res{1, "taylor exactness", true, "", 0, 60, ""};
  std::ostringstream art;
  art << "r,shallow_neurons,shallow_dev,deep_neurons,deep_dev\n";
  double worst_shallow = 0, worst_deep = 0;
  std::size_t cases = 0, count_miss = 0;
  for (std::size_t n = 1; n <= 4; ++n)
    for (const auto& r : exponent_box(n, 0, 3)) {
      const unsigned d = r.degree();
      if (d == 0 || d > 8) continue;
      ++cases;
      const auto p = SparsePolynomial::monomial(r);
      const auto shallow = shallow_monomial(r, kExp);
      const auto deep = deep_monomial(r, kExp);
      const double ds = check_taylor(shallow, p), dd = check_taylor(deep, p);
      worst_shallow = std::max(worst_shallow, ds);
      worst_deep = std::max(worst_deep, dd);
      if (shallow.neuron_count() != cells(r)) ++count_miss;
      art << '"' << r.to_string() << '"' << fmt(",%zu,%.17g,%zu,%.17g\n", shallow.neuron_count(), ds,
                                                deep.neuron_count(), dd);
    }
  res.passed = worst_shallow < 1e-9 && worst_deep < 1e-9 && count_miss == 0;
  res.detail = fmt("%zu exponent vectors; max dev shallow %.2e deep %.2e; count mismatches %zu",
                   cases, worst_shallow, worst_deep, count_miss);
  res.artifact = art.str();
  return res;
}

CriterionResult deep_power_suite() {
  CriterionResult res{2, "deep power", true, "", 0, 30, ""};
  std::ostringstream art;
  art << "d,neurons,bound,dev\n";
  double worst = 0;
  std::size_t over = 0;
  for (unsigned d = 2; d <= 64; ++d) {
    const auto net = deep_power(d, kExp);
    const double dev = check_taylor(net, SparsePolynomial::monomial(ExponentVector{d}));
    const std::size_t bound = 7 * ceil_log2(d);
    worst = std::max(worst, dev);
    if (net.neuron_count() > bound) ++over;
    art << fmt("%u,%zu,%zu,%.17g\n", d, net.neuron_count(), bound, dev);
  }
  res.passed = worst < 1e-9 && over == 0;
  res.detail = fmt("d=2..64; max dev %.2e; over 7ceil(log2 d): %zu", worst, over);
  res.artifact = art.str();
  return res;
}

CriterionResult epsilon_suite() {
  CriterionResult res{3, "epsilon approximation", true, "", 0, 30, ""};
  const auto p = SparsePolynomial::parse("x1*x2*x3");
  const double eps = 1e-3, radius = 1.0;
  const auto net = build_polynomial_network(p, kExp, BuildMode::Shallow);
  const auto out = epsilonize(net, p, eps, radius, 100000, 0);
  // Fresh points: a seed the search and its confirmation never used.
  const auto replay = sup_error(out.network, p, radius, 100000, 0x7e57);
  res.passed = replay.max_abs_error < eps;
  res.detail = fmt("delta %.6g; replayed sup error %.3e over %zu points + %zu corners", out.certificate.delta,
                   replay.max_abs_error, replay.samples, replay.corners);
  res.artifact = out.certificate.to_json() + out.network.to_json() +
                 fmt("replay_sup_error=%.17g\n", replay.max_abs_error);
  return res;
}

CriterionResult rank_suite() {
  CriterionResult res{4, "derivative matrix rank", true, "", 0, 10, ""};
  std::ostringstream art;
  art << "r,rows,rank\n";
  std::size_t cases = 0, deficient = 0;
  for (std::size_t n = 1; n <= 5; ++n)
    for (const auto& r : exponent_box(n, 1, static_cast<Exponent>((32u >> (n - 1)) - 1))) {
      if (cells(r) > 32) continue;
      ++cases;
      const auto net = shallow_monomial(r, kExp);
      const auto rep = derivative_matrix_rank(net, r);
      if (rep.rank != cells(r) || rep.rows != cells(r)) ++deficient;
      art << '"' << r.to_string() << '"' << fmt(",%zu,%zu\n", rep.rows, rep.rank);
    }
  res.passed = deficient == 0;
  res.detail = fmt("%zu exponent vectors with prod(r_i+1) <= 32; rank deficient: %zu", cases, deficient);
  res.artifact = art.str();
  return res;
}

CriterionResult bounds_suite() {
  CriterionResult res{5, "bounds", true, "", 0, 5, ""};
  std::ostringstream art;
  art << "r,d,prod,max_coeff\n";
  std::size_t broken = 0, single = 0;
  for (std::uint64_t t = 0; t < 200; ++t) {
    const std::size_t n = 1 + counter_hash(5, 1, t) % 6;
    ExponentVector r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = static_cast<Exponent>(counter_hash(5, 2, t * 8 + i) % 7);
    if (r.degree() == 0) r[0] = 1;
    const BigInt prod = shallow_exact(r);
    const BigInt mc = max_coefficient_bound(r);
    if (prod > mc * r.degree() || mc > prod) {
      ++broken;
      std::size_t used = 0;
      for (auto e : r.values()) used += e > 0;
      single += used == 1;
    }
    art << '"' << r.to_string() << '"' << ',' << r.degree() << ',' << to_string(prod) << ','
        << to_string(mc) << '\n';
  }
  std::size_t crossover_miss = 0;
  art << "n,deep_upper,shallow_exact\n";
  for (std::size_t n = 5; n <= 20; ++n) {
    ExponentVector ones(n);
    for (std::size_t i = 0; i < n; ++i) ones[i] = 1;
    const auto deep = deep_upper_bound(ones);
    const BigInt shallow = shallow_exact(ones);
    if (!(deep == 4 * n && BigInt(deep) < shallow)) ++crossover_miss;
    art << n << ',' << deep << ',' << to_string(shallow) << '\n';
  }
  res.passed = broken == 0 && crossover_miss == 0;
  res.detail = fmt("200 random r, chain violations %zu (%zu with a single variable); 4n < 2^n "
                   "misses for n=5..20: %zu",
                   broken, single, crossover_miss);
  res.artifact = art.str();
  return res;
}

double worst_ratio_gap(const DepthPlan& plan) {
  double g = 0;
  for (double b : plan.b) g = std::max(g, std::abs(b / std::pow(plan.n, 1.0 / plan.k) - 1));
  return g;
}

CriterionResult planner_suite() {
  CriterionResult res{6, "planner", true, "", 0, 5, ""};
  std::ostringstream art;
  art << "n,k,b,recursion_residual,constraint_residual\n";
  double worst_res = 0;
  std::size_t nonmono = 0;
  for (std::size_t k = 1; k <= 3; ++k)
    for (double n : {1e2, 1e4, 1e6}) {
      const auto plan = solve_optimal_groups(n, k);
      worst_res = std::max({worst_res, plan.recursion_residual, plan.constraint_residual});
      for (std::size_t i = 1; i < plan.b.size(); ++i)
        if (!(plan.b[i] > plan.b[i - 1])) ++nonmono;
      art << fmt("%g,%zu,", n, k);
      for (std::size_t i = 0; i < plan.b.size(); ++i) art << fmt(i ? ";%.12g" : "%.12g", plan.b[i]);
      art << fmt(",%.3e,%.3e\n", plan.recursion_residual, plan.constraint_residual);
    }
  std::size_t trend_miss = 0;
  std::string trend;
  for (std::size_t k : {2, 3}) {
    const double small = worst_ratio_gap(solve_optimal_groups(1e3, k));
    const double large = worst_ratio_gap(solve_optimal_groups(1e6, k));
    if (!(large < small)) ++trend_miss;
    trend += fmt("; k=%zu gap %.3f -> %.3f", k, small, large);
  }
  const std::size_t b44[] = {4, 4}, b8[] = {8};
  const auto t16 = tree_count(16, b44), t8 = tree_count(8, b8);
  art << "tree_count(16;4,4)=" << t16 << "\ntree_count(8;8)=" << t8 << '\n';
  res.passed = worst_res < 1e-6 && nonmono == 0 && trend_miss == 0 && t16 == 80 && t8 == 256;
  res.detail = fmt("max residual %.2e; non-increasing plans %zu", worst_res, nonmono) + trend +
               fmt("; tree counts %llu, %llu", static_cast<unsigned long long>(t16),
                   static_cast<unsigned long long>(t8));
  res.artifact = art.str();
  return res;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

CriterionResult training_suite(std::size_t threads) {
  CriterionResult res{7, "training", true, "", 0, 900, ""};
  TrainConfig small;
  small.n = 6;
  small.depth = 2;
  small.width = 8;
  const double gc = gradient_check(small);

  GridConfig grid;
  grid.n = 6;
  grid.depths = {1, 3};
  grid.widths = {20};
  grid.seeds = {0, 1, 2};
  grid.steps = 30000;
  grid.batch_size = 64;
  grid.threads = threads;
  const auto rows = experiment_grid(grid);
  std::vector<double> shallow, deep;
  std::string art = csv_header();
  for (const auto& r : rows) {
    art += csv_row(r, false);
    (r.config.depth == 1 ? shallow : deep).push_back(r.final_test_err);
  }
  const double ms = median(shallow), md = median(deep);
  res.passed = gc < 1e-5 && md < 0.05 && md < 0.5 * ms;
  res.detail = fmt("gradient check %.2e; median test error depth 3 %.4f (bound 0.05), depth 1 %.4f "
                   "(ratio %.3f, bound 0.5)",
                   gc, md, ms, md / ms);
  res.artifact = fmt("gradient_check=%.17g\n", gc) + art;
  return res;
}

CriterionResult run_one(int id, std::size_t threads) {
  switch (id) {
    case 1: return taylor_suite();
    case 2: return deep_power_suite();
    case 3: return epsilon_suite();
    case 4: return rank_suite();
    case 5: return bounds_suite();
    case 6: return planner_suite();
    case 7: return training_suite(threads);
  }
  fail(ErrorCode::InvalidArgument, "unknown criterion " + std::to_string(id));
}

CriterionResult timed(int id, std::size_t threads) {
  const auto start = std::chrono::steady_clock::now();
  CriterionResult r;
  try {
    r = run_one(id, threads);
  } catch (const std::exception& e) {
    r.id = id;
    r.title = "criterion " + std::to_string(id);
    r.passed = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (r.passed && r.time_limit_s > 0 && r.seconds > r.time_limit_s) {
    r.passed = false;
    r.detail += fmt("; over time limit %.0f s", r.time_limit_s);
  }
  return r;
}

}  // namespace

std::vector<CriterionResult> run_selftest(const SelftestOptions& options,
                                          const std::function<void(const CriterionResult&)>& on_result) {
  std::vector<int> ids = options.criteria;
  if (ids.empty()) ids = {1, 2, 3, 4, 5, 6, 7, 8};
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  for (int id : ids)
    require(id >= 1 && id <= 8, ErrorCode::InvalidArgument, "criteria are numbered 1 to 8");

  std::vector<CriterionResult> out;
  for (int id : ids) {
    if (id == 8) continue;
    out.push_back(timed(id, options.threads));
    if (on_result) on_result(out.back());
  }
  if (ids.back() == 8) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<CriterionResult> first = out;
    if (first.empty())
      for (int id = 1; id <= 7; ++id) first.push_back(timed(id, options.threads));
    CriterionResult det{8, "determinism", true, "", 0, 0, ""};
    std::string differing;
    std::size_t bytes = 0;
    for (const auto& a : first) {
      const auto b = timed(a.id, options.threads);
      bytes += a.artifact.size();
      if (a.artifact.empty() || a.artifact != b.artifact) differing += " " + std::to_string(a.id);
    }
    det.passed = differing.empty();
    det.detail = differing.empty()
                     ? fmt("%zu criteria repeated, %zu artifact bytes identical", first.size(), bytes)
                     : "artifacts differ for criteria" + differing;
    det.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.push_back(det);
    if (on_result) on_result(out.back());
  }
  return out;
}

std::string format_result(const CriterionResult& r) {
  return fmt("%s  %d  %-24s %s  (%.1f s)", r.passed ? "PASS" : "FAIL", r.id, r.title.c_str(),
             r.detail.c_str(), r.seconds);
}

}  // namespace polydepth
