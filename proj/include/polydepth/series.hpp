#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace polydepth {

class Nonlinearity;

using Exponent = std::uint32_t;

/// Exponents (r_1, ..., r_n) of a monomial x_1^r_1 ... x_n^r_n.
class ExponentVector {
 public:
  ExponentVector() = default;
  explicit ExponentVector(std::size_t n) : e_(n, 0) {}
  ExponentVector(std::initializer_list<Exponent> e) : e_(e) {}
  explicit ExponentVector(std::vector<Exponent> e) : e_(std::move(e)) {}

  std::size_t size() const noexcept { return e_.size(); }
  Exponent operator[](std::size_t i) const { return e_[i]; }
  Exponent& operator[](std::size_t i) { return e_[i]; }
  std::span<const Exponent> values() const noexcept { return e_; }

  unsigned degree() const noexcept;
  std::string to_string() const;  // "e1,e2,...,en"

  friend bool operator==(const ExponentVector&, const ExponentVector&) = default;

 private:
  std::vector<Exponent> e_;
};

/// Graded-lexicographic order: lower total degree first, then larger leading
/// exponents first (x1^2 < x1*x2 < x2^2 among degree-2 terms).
bool graded_lex_less(std::span<const Exponent> a, std::span<const Exponent> b);

/// Position of an exponent vector in graded-lex order among all monomials in n
/// variables. Stable across caps.
std::uint64_t graded_lex_rank(std::span<const Exponent> e);
ExponentVector graded_lex_unrank(std::uint64_t rank, std::size_t n);

/// Multivariate power series truncated at total degree `cap`.
///
/// Terms are stored sparsely in graded-lex order; exact zeros are pruned.
/// Values are immutable in the sense that every operation returns a new series.
class TruncatedSeries {
 public:
  struct Term {
    ExponentVector exponents;
    double coefficient;
  };

  TruncatedSeries(std::size_t n, unsigned cap);

  static TruncatedSeries constant(std::size_t n, unsigned cap, double value);
  static TruncatedSeries variable(std::size_t n, unsigned cap, std::size_t index);
  static TruncatedSeries from_terms(std::size_t n, unsigned cap, const std::vector<Term>& terms);

  std::size_t variables() const noexcept { return n_; }
  unsigned cap() const noexcept { return cap_; }
  std::size_t size() const noexcept { return coeffs_.size(); }
  bool empty() const noexcept { return coeffs_.empty(); }

  double coefficient(const ExponentVector& e) const;
  double constant_term() const;
  std::vector<Term> terms() const;
  Term term(std::size_t i) const;
  std::span<const Exponent> exponents_of(std::size_t i) const {
    return {exps_.data() + i * n_, n_};
  }
  double coefficient_at(std::size_t i) const { return coeffs_[i]; }
  unsigned degree_at(std::size_t i) const;

  /// Lowest total degree among stored terms whose degree is > 0; cap+1 if none.
  unsigned min_positive_degree() const;
  unsigned max_degree() const;

  TruncatedSeries truncated(unsigned new_cap) const;
  TruncatedSeries homogeneous_part(unsigned degree) const;
  TruncatedSeries scaled(double factor) const;
  TruncatedSeries shifted(double constant) const;  // adds to the constant term

  double evaluate(std::span<const double> x) const;

  /// Largest |coefficient| difference over the union of supports.
  double max_abs_difference(const TruncatedSeries& other) const;

  /// One line per term, `e1,...,en : c` with c printed to 17 significant digits.
  std::string to_text() const;
  static TruncatedSeries from_text(std::size_t n, unsigned cap, const std::string& text);

  friend TruncatedSeries series_add(const TruncatedSeries& a, const TruncatedSeries& b);
  friend TruncatedSeries series_mul(const TruncatedSeries& a, const TruncatedSeries& b);
  friend TruncatedSeries linear_combination(std::span<const TruncatedSeries* const> parts,
                                            std::span<const double> weights, double bias,
                                            std::size_t n, unsigned cap);

 private:
  class Accumulator;
  void check_compatible(const TruncatedSeries& other) const;

  std::size_t n_;
  unsigned cap_;
  std::vector<std::uint64_t> keys_;  // graded-lex ranks, strictly increasing
  std::vector<Exponent> exps_;       // size() * n_
  std::vector<double> coeffs_;
};

TruncatedSeries series_add(const TruncatedSeries& a, const TruncatedSeries& b);
TruncatedSeries series_mul(const TruncatedSeries& a, const TruncatedSeries& b);
TruncatedSeries series_sub(const TruncatedSeries& a, const TruncatedSeries& b);

/// sum_i weights[i] * parts[i] + bias, all parts sharing (n, cap).
TruncatedSeries linear_combination(std::span<const TruncatedSeries* const> parts,
                                   std::span<const double> weights, double bias, std::size_t n,
                                   unsigned cap);

/// Taylor expansion of sigma(inner), truncated at inner's cap. sigma is expanded
/// about inner's constant term and composed with the non-constant remainder.
TruncatedSeries series_compose(const Nonlinearity& sigma, const TruncatedSeries& inner);

}  // namespace polydepth
