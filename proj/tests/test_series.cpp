#include "doctest.h"
#include "oracles.hpp"
#include "polydepth/error.hpp"
#include "polydepth/nonlinearity.hpp"
#include "polydepth/polynomial.hpp"
#include "polydepth/series.hpp"

using namespace polydepth;

namespace {

TruncatedSeries var(std::size_t n, unsigned cap, std::size_t i) { return TruncatedSeries::variable(n, cap, i); }

TruncatedSeries make(std::size_t n, unsigned cap, std::vector<TruncatedSeries::Term> terms) {
  return TruncatedSeries::from_terms(n, cap, terms);
}

}  // namespace

TEST_SUITE("series") {
  TEST_CASE("addition") {
    const auto x = var(2, 2, 0), y = var(2, 2, 1);
    const auto s = series_add(x, y);
    CHECK(s.size() == 2);
    CHECK(s.coefficient({1, 0}) == 1.0);
    CHECK(s.coefficient({0, 1}) == 1.0);

    CHECK(series_sub(s, s).empty());

    const auto a = make(1, 4, {{{0}, 1.0}, {{2}, 1.0}});
    const auto b = make(1, 4, {{{2}, 1.0}});
    const auto c = series_add(a, b);
    CHECK(c.size() == 2);
    CHECK(c.coefficient({2}) == 2.0);
  }

  TEST_CASE("multiplication against schoolbook expansion") {
    const auto one = TruncatedSeries::constant(2, 2, 1.0);
    const auto x = var(2, 2, 0), y = var(2, 2, 1);
    const auto p = series_mul(series_add(one, x), series_add(one, y));
    CHECK(p.size() == 4);
    CHECK(p.coefficient({1, 1}) == 1.0);

    const auto s = series_add(x, y);
    const auto sq = series_mul(s, s);
    oracle::Poly o{{{1, 0}, 1.0}, {{0, 1}, 1.0}};
    const auto want = oracle::multiply(o, o, 2);
    CHECK(sq.size() == want.size());
    for (const auto& [m, c] : want) CHECK(sq.coefficient(ExponentVector(std::vector<Exponent>(m.begin(), m.end()))) == c);

    CHECK(series_mul(var(1, 1, 0), var(1, 1, 0)).empty());
  }

  TEST_CASE("random products match the schoolbook oracle") {
    // (1 + 2x - y + 0.5xz)(3 - z + x^2 y), n = 3, cap 4
    const std::vector<TruncatedSeries::Term> ta{{{0, 0, 0}, 1}, {{1, 0, 0}, 2}, {{0, 1, 0}, -1}, {{1, 0, 1}, 0.5}};
    const std::vector<TruncatedSeries::Term> tb{{{0, 0, 0}, 3}, {{0, 0, 1}, -1}, {{2, 1, 0}, 1}};
    oracle::Poly oa, ob;
    for (const auto& t : ta) oa[{t.exponents[0], t.exponents[1], t.exponents[2]}] = t.coefficient;
    for (const auto& t : tb) ob[{t.exponents[0], t.exponents[1], t.exponents[2]}] = t.coefficient;
    for (unsigned cap : {2u, 3u, 4u}) {
      const auto got = series_mul(make(3, cap, ta), make(3, cap, tb));
      auto want = oracle::multiply(oa, ob, cap);
      std::erase_if(want, [](const auto& kv) { return kv.second == 0.0; });
      CHECK(got.size() == want.size());
      for (const auto& [m, c] : want)
        CHECK(got.coefficient(ExponentVector{m[0], m[1], m[2]}) == doctest::Approx(c));
    }
  }

  TEST_CASE("composition") {
    const Nonlinearity e(Activation::Exp);
    const auto s = series_compose(e, series_add(var(2, 2, 0), var(2, 2, 1)));
    CHECK(s.constant_term() == doctest::Approx(1.0));
    CHECK(s.coefficient({1, 0}) == doctest::Approx(1.0));
    CHECK(s.coefficient({2, 0}) == doctest::Approx(0.5));
    CHECK(s.coefficient({1, 1}) == doctest::Approx(1.0));
    CHECK(s.coefficient({0, 2}) == doctest::Approx(0.5));
    CHECK(s.size() == 6);

    const auto c = series_compose(e, TruncatedSeries(1, 3));
    CHECK(c.size() == 1);
    CHECK(c.constant_term() == doctest::Approx(1.0));

    const auto t = series_compose(Nonlinearity(Activation::Tanh), var(1, 3, 0));
    CHECK(t.coefficient({1}) == doctest::Approx(1.0));
    CHECK(t.coefficient({2}) == doctest::Approx(0.0));
    CHECK(t.coefficient({3}) == doctest::Approx(-1.0 / 3.0));
  }

  TEST_CASE("composition about a nonzero center") {
    // exp(1 + x) = e * (1 + x + x^2/2 + x^3/6)
    const auto inner = series_add(TruncatedSeries::constant(1, 3, 1.0), var(1, 3, 0));
    const auto s = series_compose(Nonlinearity(Activation::Exp), inner);
    for (unsigned k = 0; k <= 3; ++k)
      CHECK(s.coefficient({k}) == doctest::Approx(std::exp(1.0) / std::tgamma(k + 1.0)));
  }

  TEST_CASE("graded-lex order and ranks") {
    const std::vector<Exponent> a{2, 0}, b{1, 1}, c{0, 2}, d{0, 1};
    CHECK(graded_lex_less(a, b));
    CHECK(graded_lex_less(b, c));
    CHECK(graded_lex_less(d, a));
    for (std::uint64_t r = 0; r < 200; ++r) {
      const auto e = graded_lex_unrank(r, 3);
      CHECK(graded_lex_rank(e.values()) == r);
    }
  }

  TEST_CASE("text round trip") {
    const auto s = make(2, 3, {{{0, 0}, 0.1}, {{2, 1}, -1.0 / 3.0}});
    const auto back = TruncatedSeries::from_text(2, 3, s.to_text());
    CHECK(back.max_abs_difference(s) == 0.0);
  }

  TEST_CASE("mismatched operands are rejected") {
    CHECK_THROWS_AS(series_add(var(2, 2, 0), var(3, 2, 0)), Error);
  }
}

TEST_SUITE("nonlinearity") {
  TEST_CASE("known Taylor coefficients") {
    const auto sig = Nonlinearity(Activation::Sigmoid).taylor(0.0, 6);
    CHECK(sig[0] == doctest::Approx(0.5));
    CHECK(sig[1] == doctest::Approx(0.25));
    CHECK(sig[2] == doctest::Approx(0.0));
    CHECK(sig[3] == doctest::Approx(-1.0 / 48));
    CHECK(sig[5] == doctest::Approx(1.0 / 480));

    const auto th = Nonlinearity(Activation::Tanh).taylor(0.0, 6);
    CHECK(th[3] == doctest::Approx(-1.0 / 3));
    CHECK(th[5] == doctest::Approx(2.0 / 15));

    const auto sp = Nonlinearity(Activation::Softplus).taylor(0.0, 5);
    CHECK(sp[0] == doctest::Approx(std::log(2.0)));
    CHECK(sp[1] == doctest::Approx(0.5));
    CHECK(sp[2] == doctest::Approx(0.125));
    CHECK(sp[4] == doctest::Approx(-1.0 / 192));
  }

  TEST_CASE("coefficients agree with finite differences away from zero") {
    for (auto id : {Activation::Sigmoid, Activation::Tanh, Activation::Softplus, Activation::Exp}) {
      const Nonlinearity s(id);
      const double c = 0.7, h = 1e-3;
      const auto t = s.taylor(c, 3);
      CHECK(t[0] == doctest::Approx(s.eval(c)));
      CHECK(t[1] == doctest::Approx((s.eval(c + h) - s.eval(c - h)) / (2 * h)).epsilon(1e-6));
      CHECK(t[2] == doctest::Approx((s.eval(c + h) - 2 * s.eval(c) + s.eval(c - h)) / (2 * h * h)).epsilon(1e-5));
    }
  }

  TEST_CASE("relu has no expansion at its kink") {
    CHECK_THROWS_AS(Nonlinearity(Activation::Relu).taylor(0.0, 2), Error);
    CHECK_THROWS_AS(Nonlinearity::from_name("swish"), Error);
  }
}

TEST_SUITE("polynomial") {
  TEST_CASE("parse and print") {
    const auto p = SparsePolynomial::parse("3*x1^2*x2 - x3 + 0.5");
    CHECK(p.variables() == 3);
    CHECK(p.sparsity() == 3);
    CHECK(p.degree() == 3);
    CHECK_FALSE(p.is_homogeneous());
    CHECK(p.constant_term() == 0.5);
    const double x[] = {2.0, -1.0, 4.0};
    CHECK(p.evaluate(x) == doctest::Approx(3 * 4 * -1.0 - 4 + 0.5));
    CHECK(SparsePolynomial::parse(p.to_string()) == p);
    CHECK(SparsePolynomial::parse("x1*x2 + x2*x1").sparsity() == 1);
    CHECK(SparsePolynomial::parse("x1 - x1").is_zero());
  }

  TEST_CASE("malformed input") {
    CHECK_THROWS_AS(SparsePolynomial::parse("x1 +"), Error);
    CHECK_THROWS_AS(SparsePolynomial::parse("y1"), Error);
    CHECK_THROWS_AS(SparsePolynomial::parse("x3", 2), Error);
  }

  TEST_CASE("series conversion") {
    const auto s = series_from_polynomial(SparsePolynomial::parse("x1*x2"), 2);
    CHECK(s.size() == 1);
    CHECK(s.coefficient({1, 1}) == 1.0);
    CHECK(series_from_polynomial(SparsePolynomial::parse("3*x1^2 - x2"), 4).size() == 2);
    CHECK(series_from_polynomial(SparsePolynomial(2), 3).empty());
    const auto p = SparsePolynomial::parse("2*x1^3 - x2 + 1");
    CHECK(polynomial_from_series(series_from_polynomial(p, 5)) == p);
    CHECK_THROWS_AS(series_from_polynomial(p, 2), Error);
  }
}
