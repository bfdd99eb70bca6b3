#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "polydepth/polynomial.hpp"

namespace polydepth {

using BigInt = boost::multiprecision::cpp_int;

struct TreeCount {
  std::size_t k;
  std::vector<std::size_t> b;
  double count;
  bool exact;  // prod b equals the degree
};

struct MonomialBounds {
  ExponentVector r;
  unsigned degree = 0;
  BigInt shallow_exact;        // prod (r_i + 1)
  std::uint64_t deep_upper = 0;  // sum over r_i > 0 of 7 ceil(log2 r_i) + 4
  BigInt thm5_max_coeff;       // max coefficient of prod (1 + y + ... + y^{r_i})
  double thm5_simple = 0;      // prod (r_i + 1) / d
  std::vector<TreeCount> tree_counts;
};

struct SparseBounds {
  SparsePolynomial p;
  std::vector<MonomialBounds> monomials;  // non-constant monomials only
  double sparse_lower = 0;                // max_j shallow_exact(q_j) / c
  std::size_t sparse_lower_argmax = 0;
  std::uint64_t sparse_upper = 0;         // sum_j deep_upper(q_j)
};

unsigned ceil_log2(std::uint64_t v);

std::uint64_t deep_upper_bound(const ExponentVector& r);
BigInt shallow_exact(const ExponentVector& r);
BigInt max_coefficient_bound(const ExponentVector& r);

MonomialBounds monomial_bounds(const ExponentVector& r, std::size_t max_tree_k = 3);
SparseBounds sparse_bounds(const SparsePolynomial& p);

std::string to_string(const BigInt& v);

}  // namespace polydepth
