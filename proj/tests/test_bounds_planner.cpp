#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "polydepth/bounds.hpp"
#include "polydepth/error.hpp"
#include "polydepth/planner.hpp"
#include "polydepth/rng.hpp"

using namespace polydepth;

TEST_SUITE("bounds") {
  TEST_CASE("monomial bounds") {
    const auto b = monomial_bounds({1, 1, 1, 1});
    CHECK(b.shallow_exact == 16);
    CHECK(b.thm5_max_coeff == 6);
    CHECK(b.thm5_simple == doctest::Approx(4.0));

    const auto b22 = monomial_bounds({2, 2});
    CHECK(b22.thm5_max_coeff == 3);
    CHECK(b22.shallow_exact == 9);

    const auto b1 = monomial_bounds({1});
    CHECK(b1.shallow_exact == 2);
    CHECK(b1.deep_upper == 4);

    const auto b5 = monomial_bounds({1, 1, 1, 1, 1});
    CHECK(b5.shallow_exact == 32);
    CHECK(b5.deep_upper == 20);
  }

  TEST_CASE("max coefficient against sub-multiset counting") {
    for (std::uint64_t t = 0; t < 60; ++t) {
      const std::size_t n = 1 + counter_hash(3, 1, t) % 5;
      std::vector<unsigned> r(n);
      ExponentVector e(n);
      for (std::size_t i = 0; i < n; ++i) e[i] = r[i] = counter_hash(3, 2, t * 8 + i) % 6;
      const auto sizes = oracle::submultiset_sizes(r);
      const auto want = *std::max_element(sizes.begin(), sizes.end());
      CHECK(max_coefficient_bound(e) == want);
      std::uint64_t total = 0;
      for (auto s : sizes) total += s;
      CHECK(shallow_exact(e) == total);
    }
  }

  TEST_CASE("simple bound holds once two variables appear") {
    for (std::uint64_t t = 0; t < 100; ++t) {
      ExponentVector r{static_cast<Exponent>(1 + t % 7), static_cast<Exponent>(1 + (t / 7) % 5),
                       static_cast<Exponent>(t % 3)};
      CHECK(shallow_exact(r) <= max_coefficient_bound(r) * r.degree());
      CHECK(max_coefficient_bound(r) <= shallow_exact(r));
    }
    // A single variable has coefficients all 1, below (d + 1) / d.
    const auto single = monomial_bounds({4});
    CHECK(single.thm5_max_coeff == 1);
    CHECK(single.thm5_simple == doctest::Approx(1.25));
  }

  TEST_CASE("exact integers where 64 bits overflow") {
    ExponentVector r(70);
    for (std::size_t i = 0; i < 70; ++i) r[i] = 1;
    CHECK(to_string(shallow_exact(r)) == "1180591620717411303424");
    CHECK(max_coefficient_bound(r) > BigInt(std::numeric_limits<std::uint64_t>::max()));
  }

  TEST_CASE("deep upper bound") {
    CHECK(ceil_log2(1) == 0);
    CHECK(ceil_log2(5) == 3);
    CHECK(ceil_log2(64) == 6);
    CHECK(deep_upper_bound({2, 3}) == 29);
    CHECK(deep_upper_bound({1, 0, 1}) == 8);
  }

  TEST_CASE("sparse bounds") {
    const auto sb = sparse_bounds(SparsePolynomial::parse("x1*x2*x3 + x4"));
    CHECK(sb.sparse_lower == doctest::Approx(4.0));
    CHECK(sb.sparse_upper == 16);
    CHECK(sb.monomials[sb.sparse_lower_argmax].r == ExponentVector{1, 1, 1, 0});

    const auto one = sparse_bounds(SparsePolynomial::parse("x1^2*x2"));
    CHECK(one.sparse_lower == doctest::Approx(6.0));

    const auto ties = sparse_bounds(SparsePolynomial::parse("x1*x2 + x3*x4"));
    CHECK(ties.sparse_lower == doctest::Approx(2.0));
    CHECK(ties.sparse_lower_argmax < 2);
  }

  TEST_CASE("tree counts in monomial bounds") {
    const auto b = monomial_bounds(ExponentVector{16});
    REQUIRE(b.tree_counts.size() == 3);
    CHECK(b.tree_counts[0].count == doctest::Approx(65536.0));
    CHECK(b.tree_counts[1].b == std::vector<std::size_t>{4, 4});
    CHECK(b.tree_counts[1].count == doctest::Approx(80.0));
  }
}

TEST_SUITE("planner") {
  TEST_CASE("tree count") {
    const std::size_t b44[] = {4, 4}, b8[] = {8}, b222[] = {2, 2, 2};
    CHECK(tree_count(16, b44) == 80);
    CHECK(tree_count(8, b8) == 256);
    CHECK(tree_count(8, b222) == 28);
    const std::size_t bad[] = {3, 3};
    CHECK_THROWS_AS(tree_count(8, bad), Error);
  }

  TEST_CASE("single group") {
    for (double n : {3.0, 50.0, 1e5}) {
      const auto plan = solve_optimal_groups(n, 1);
      REQUIRE(plan.b.size() == 1);
      CHECK(plan.b[0] == doctest::Approx(n));
    }
  }

  TEST_CASE("two groups for n = 64") {
    const auto plan = solve_optimal_groups(64, 2);
    CHECK(plan.b[0] == doctest::Approx(6.9).epsilon(0.01));
    CHECK(plan.b[1] == doctest::Approx(9.3).epsilon(0.01));
    CHECK(plan.b[0] * plan.b[1] == doctest::Approx(64.0));
    CHECK(plan.recursion_residual < 1e-6);
    CHECK(plan.stationarity_residual < 1e-6);

    // Independent check of the recursion b2 = b1 + log2(b1 - 1/ln 2).
    CHECK(plan.b[1] == doctest::Approx(plan.b[0] + std::log2(plan.b[0] - 1 / std::log(2.0))));
  }

  TEST_CASE("convergence toward n^(1/k)") {
    const auto big = solve_optimal_groups(1e6, 3), small = solve_optimal_groups(1e3, 3);
    double gb = 0, gs = 0;
    for (double b : big.b) {
      CHECK(std::abs(b / 100.0 - 1) < 0.2);
      gb = std::max(gb, std::abs(b / 100.0 - 1));
    }
    for (double b : small.b) gs = std::max(gs, std::abs(b / 10.0 - 1));
    CHECK(gb < gs);
  }

  TEST_CASE("plans are local minima") {
    for (std::size_t k : {2, 3})
      for (double n : {1e3, 1e5}) {
        const auto plan = solve_optimal_groups(n, k);
        const double f0 = continuous_tree_count(n, plan.b);
        for (std::size_t i = 0; i < k; ++i)
          for (double s : {0.99, 1.01}) {
            auto b = plan.b;
            b[i] *= s;
            // Renormalize the others so the product stays n.
            const double fix = std::pow(1.0 / s, 1.0 / static_cast<double>(k - 1));
            for (std::size_t j = 0; j < k; ++j)
              if (j != i) b[j] *= fix;
            CHECK(continuous_tree_count(n, b) >= f0 * (1 - 1e-6));
          }
      }
  }

  TEST_CASE("integer plans never beat the continuous count") {
    for (std::size_t k : {1, 2, 3})
      for (std::size_t n : {16, 64, 100, 1000, 10000}) {
        const auto plan = solve_optimal_groups(static_cast<double>(n), k);
        CHECK(plan.integer_count >= plan.predicted_count * (1 - 1e-12));
        CHECK(plan.recursion_residual < 1e-6);
        CHECK(plan.constraint_residual < 1e-6);
        for (std::size_t i = 1; i < plan.b.size(); ++i) CHECK(plan.b[i] > plan.b[i - 1]);
      }
  }

  TEST_CASE("asymptotic width") {
    CHECK(asymptotic_width(20, 1) == doctest::Approx(1048576.0));
    CHECK(asymptotic_width(20, 2) == doctest::Approx(std::sqrt(20.0) * std::pow(2.0, std::sqrt(20.0))));
    CHECK(asymptotic_width(20, 2) == doctest::Approx(99.3).epsilon(0.001));
    for (std::size_t k = 1; k <= 6; ++k) CHECK(asymptotic_width(1, k) == doctest::Approx(2.0));
  }

  TEST_CASE("depth rule of thumb") {
    CHECK(depth_rule_of_thumb(1000, 1024) == 3);
    CHECK(depth_rule_of_thumb(10, 1024) == 1);
    CHECK(depth_rule_of_thumb(2, 4) == 1);
  }

  TEST_CASE("sweep and grids") {
    const auto ns = parse_n_grid("log:10..1e6");
    CHECK(ns.size() == 25);
    CHECK(ns.front() == doctest::Approx(10.0));
    CHECK(ns.back() == doctest::Approx(1e6));
    CHECK(parse_n_grid("log:10..1000:3")[1] == doctest::Approx(100.0));
    CHECK(parse_n_grid("5,7").size() == 2);
    CHECK_THROWS_AS(parse_n_grid("log:10"), Error);

    const std::size_t ks[] = {1, 2, 3};
    const double grid[] = {1e3};
    const auto rows = plan_sweep(ks, grid);
    CHECK(rows.size() == 6);
    CHECK(rows[0].ratio == doctest::Approx(1.0));
  }
}
