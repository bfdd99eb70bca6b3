#include "polydepth/bounds.hpp"

#include <algorithm>
#include <bit>

#include "polydepth/error.hpp"
#include "polydepth/planner.hpp"

namespace polydepth {

unsigned ceil_log2(std::uint64_t v) {
  require(v >= 1, ErrorCode::InvalidArgument, "ceil_log2 of 0");
  return v == 1 ? 0u : static_cast<unsigned>(std::bit_width(v - 1));
}

std::uint64_t deep_upper_bound(const ExponentVector& r) {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < r.size(); ++i)
    if (r[i] > 0) total += 7u * ceil_log2(r[i]) + 4u;
  return total;
}

BigInt shallow_exact(const ExponentVector& r) {
  BigInt p = 1;
  for (std::size_t i = 0; i < r.size(); ++i) p *= BigInt(r[i]) + 1;
  return p;
}

BigInt max_coefficient_bound(const ExponentVector& r) {
  std::vector<BigInt> poly{1};
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] == 0) continue;
    // Multiply by 1 + y + ... + y^{r_i} with a running window sum.
    std::vector<BigInt> next(poly.size() + r[i], 0);
    BigInt window = 0;
    for (std::size_t m = 0; m < next.size(); ++m) {
      if (m < poly.size()) window += poly[m];
      if (m > r[i] && m - r[i] - 1 < poly.size()) window -= poly[m - r[i] - 1];
      next[m] = window;
    }
    poly = std::move(next);
  }
  return *std::max_element(poly.begin(), poly.end());
}

MonomialBounds monomial_bounds(const ExponentVector& r, std::size_t max_tree_k) {
  MonomialBounds out;
  out.r = r;
  out.degree = r.degree();
  require(out.degree >= 1, ErrorCode::InvalidArgument, "bounds need some r_i > 0");
  out.shallow_exact = shallow_exact(r);
  out.deep_upper = deep_upper_bound(r);
  out.thm5_max_coeff = max_coefficient_bound(r);
  out.thm5_simple = out.shallow_exact.convert_to<double>() / out.degree;
  for (std::size_t k = 1; k <= max_tree_k; ++k) {
    if (out.degree < 2 && k > 1) break;
    const auto b = integer_group_plan(out.degree, k);
    std::size_t prod = 1;
    for (std::size_t v : b) prod *= v;
    const bool exact = prod == out.degree;
    out.tree_counts.push_back(
        {k, b, exact ? static_cast<double>(tree_count(out.degree, b)) : tree_layout_count(out.degree, b),
         exact});
  }
  return out;
}

SparseBounds sparse_bounds(const SparsePolynomial& p) {
  require(!p.is_zero(), ErrorCode::InvalidArgument, "bounds need a nonzero polynomial");
  SparseBounds out{p, {}, 0.0, 0, 0};
  for (const auto& m : p.monomials())
    if (m.exponents.degree() > 0) out.monomials.push_back(monomial_bounds(m.exponents));
  require(!out.monomials.empty(), ErrorCode::InvalidArgument,
          "bounds need a non-constant polynomial");
  const double c = static_cast<double>(p.sparsity());
  for (std::size_t j = 0; j < out.monomials.size(); ++j) {
    const double v = out.monomials[j].shallow_exact.convert_to<double>() / c;
    if (v > out.sparse_lower) {
      out.sparse_lower = v;
      out.sparse_lower_argmax = j;
    }
    out.sparse_upper += out.monomials[j].deep_upper;
  }
  return out;
}

std::string to_string(const BigInt& v) { return v.str(); }

}  // namespace polydepth
