#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polydepth/series.hpp"

namespace polydepth {

struct Monomial {
  double coefficient;
  ExponentVector exponents;
};

/// Target polynomial as a list of monomials. Canonical form: exponent vectors
/// distinct and in graded-lex order, coefficients nonzero.
class SparsePolynomial {
 public:
  explicit SparsePolynomial(std::size_t n) : n_(n) {}
  SparsePolynomial(std::size_t n, std::vector<Monomial> monomials);

  static SparsePolynomial monomial(const ExponentVector& r, double coefficient = 1.0);

  /// Parses e.g. "3*x1^2*x2 - x3 + 0.5". n = 0 infers the variable count from
  /// the largest index used.
  static SparsePolynomial parse(std::string_view text, std::size_t n = 0);

  std::size_t variables() const noexcept { return n_; }
  const std::vector<Monomial>& monomials() const noexcept { return monomials_; }
  std::size_t sparsity() const noexcept { return monomials_.size(); }
  unsigned degree() const;
  bool is_zero() const noexcept { return monomials_.empty(); }
  bool is_homogeneous() const;
  double constant_term() const;

  double evaluate(std::span<const double> x) const;
  std::string to_string() const;

  friend bool operator==(const SparsePolynomial&, const SparsePolynomial&);

 private:
  std::size_t n_;
  std::vector<Monomial> monomials_;
};

/// Exact conversion; requires cap >= deg(p).
TruncatedSeries series_from_polynomial(const SparsePolynomial& p, unsigned cap);
SparsePolynomial polynomial_from_series(const TruncatedSeries& s);

}  // namespace polydepth
