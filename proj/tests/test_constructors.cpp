#include "doctest.h"
#include "oracles.hpp"
#include "polydepth/bounds.hpp"
#include "polydepth/constructors.hpp"
#include "polydepth/error.hpp"
#include "polydepth/verifier.hpp"

using namespace polydepth;

namespace {

const Nonlinearity kExp(Activation::Exp);

// lim t->0 N(t x) / t^d, measured by evaluation only.
double leading(const FeedforwardNetwork& net, std::vector<double> x, unsigned d) {
  const double c = net.eval1(std::vector<double>(x.size(), 0.0));
  return oracle::leading_value(
      [&](double t) {
        std::vector<double> tx(x);
        for (auto& v : tx) v *= t;
        return net.eval1(tx) - c;
      },
      d);
}

}  // namespace

TEST_SUITE("constructors") {
  TEST_CASE("sign-pattern gadgets") {
    const auto g1 = shallow_product_gadget(1, kExp);
    CHECK(g1.neuron_count() == 2);
    const auto t1 = taylor_expand(g1, 2);
    CHECK(t1.constant_term() == 0.0);
    CHECK(t1.coefficient({1}) == doctest::Approx(1.0));

    const auto g2 = shallow_product_gadget(2, kExp);
    CHECK(g2.neuron_count() == 4);
    // Output weights +-1/(8 sigma_2) with sigma_2 = 1/2.
    const auto& out = g2.layers().back();
    for (double w : out.weights) CHECK(std::abs(w) == doctest::Approx(0.25));
    CHECK(sign_pattern_scale(kExp, 2) == doctest::Approx(0.25));
    const auto t2 = taylor_expand(g2, 2);
    CHECK(t2.size() == 1);
    CHECK(t2.coefficient({1, 1}) == doctest::Approx(1.0));

    const auto t3 = taylor_expand(shallow_product_gadget(3, kExp), 3);
    CHECK(t3.size() == 1);
    CHECK(t3.coefficient({1, 1, 1}) == doctest::Approx(1.0));
  }

  TEST_CASE("shallow monomials") {
    CHECK(shallow_monomial({1, 1, 1}, kExp).neuron_count() == 8);
    const auto n21 = shallow_monomial({2, 1}, kExp);
    CHECK(n21.neuron_count() == 6);
    CHECK(check_taylor(n21, SparsePolynomial::parse("x1^2*x2")) < 1e-12);
    const auto n20 = shallow_monomial({2, 0}, kExp);
    CHECK(n20.neuron_count() == 3);
    CHECK(check_taylor(n20, SparsePolynomial::parse("x1^2", 2)) < 1e-12);
    CHECK(shallow_monomial({2, 2, 1}, kExp).neuron_count() == 18);
  }

  TEST_CASE("shallow monomial leading term by evaluation") {
    const auto net = shallow_monomial({2, 1}, kExp);
    const std::vector<double> x{0.7, -1.3};
    CHECK(leading(net, x, 3) == doctest::Approx(0.49 * -1.3).epsilon(1e-6));
  }

  TEST_CASE("gates") {
    NetworkBuilder b(2, kExp);
    auto s = b.square(b.input(0));
    auto i = b.identity(b.input(1));
    b.next_layer();
    auto p = b.product(s, i);
    b.next_layer();
    const auto net = b.finish(p);
    const auto t = taylor_expand(net, 3);
    CHECK(t.coefficient({2, 1}) == doctest::Approx(1.0));
    CHECK(t.size() == 1);

    NetworkBuilder c(1, kExp);
    auto id = c.identity(c.input(0));
    c.next_layer();
    const auto tid = taylor_expand(c.finish(id), 2);
    CHECK(tid.coefficient({1}) == doctest::Approx(1.0));
    CHECK(tid.constant_term() == doctest::Approx(0.0));
  }

  TEST_CASE("deep powers") {
    const auto d2 = deep_power(2, kExp);
    CHECK(d2.neuron_count() == 3);
    CHECK(d2.depth() == 1);
    const auto d5 = deep_power(5, kExp);
    CHECK(d5.neuron_count() <= 21);
    CHECK(check_taylor(d5, SparsePolynomial::parse("x1^5")) < 1e-12);
    const auto d1 = deep_power(1, kExp);
    CHECK(d1.neuron_count() == 0);
    CHECK(check_taylor(d1, SparsePolynomial::parse("x1")) == 0.0);
    for (unsigned d : {7u, 16u, 33u, 63u, 64u}) {
      const auto net = deep_power(d, kExp);
      CHECK(net.neuron_count() <= 7 * ceil_log2(d));
      CHECK(check_taylor(net, SparsePolynomial::monomial(ExponentVector{d})) < 1e-9);
    }
    CHECK(leading(deep_power(4, kExp), {0.9}, 4) == doctest::Approx(std::pow(0.9, 4)).epsilon(1e-4));
  }

  TEST_CASE("deep monomials") {
    const auto n11 = deep_monomial({1, 1}, kExp);
    CHECK(n11.neuron_count() <= 8);
    CHECK(check_taylor(n11, SparsePolynomial::parse("x1*x2")) < 1e-12);
    const auto n23 = deep_monomial({2, 3}, kExp);
    CHECK(n23.neuron_count() <= 29);
    CHECK(check_taylor(n23, SparsePolynomial::parse("x1^2*x2^3")) < 1e-12);
    const auto n400 = deep_monomial({4, 0, 0}, kExp);
    CHECK(n400.neuron_count() == deep_power(4, kExp).neuron_count());
    CHECK(check_taylor(n400, SparsePolynomial::parse("x1^4", 3)) < 1e-12);
  }

  TEST_CASE("tree products") {
    const std::vector<std::size_t> b22{2, 2};
    const auto t4 = tree_product(4, TreePlan::make(4, b22), kExp);
    CHECK(t4.neuron_count() == 12);
    CHECK(check_taylor(t4, SparsePolynomial::parse("x1*x2*x3*x4")) < 1e-12);

    const std::vector<std::size_t> b44{4, 4};
    const auto t16 = tree_product(16, TreePlan::make(16, b44), kExp);
    CHECK(t16.neuron_count() == 80);

    const std::vector<std::size_t> b3{3};
    const auto t3 = tree_product(3, TreePlan::make(3, b3), kExp);
    CHECK(t3.neuron_count() == 8);
    CHECK(t3 == shallow_product_gadget(3, kExp));

    CHECK_THROWS_AS(TreePlan::make(16, {2, 2}), Error);
    const auto uneven = TreePlan::make(5, {2, 3});
    CHECK_FALSE(uneven.exact());
    const auto t5 = tree_product(5, uneven, kExp);
    CHECK(check_taylor(t5, SparsePolynomial::parse("x1*x2*x3*x4*x5")) < 1e-12);
  }

  TEST_CASE("vandermonde") {
    const auto lin = univariate_network(SparsePolynomial::parse("x1"), kExp);
    CHECK(lin.network.neuron_count() == 2);
    CHECK(check_taylor(lin.network, SparsePolynomial::parse("x1")) < 1e-9);

    const auto cubic = univariate_network(SparsePolynomial::parse("x1^3 - x1"), kExp);
    CHECK(cubic.network.neuron_count() == 4);
    CHECK(check_taylor(cubic.network, SparsePolynomial::parse("x1^3 - x1")) < 1e-9);
    CHECK(cubic.condition < 1e12);

    const auto five = univariate_network(SparsePolynomial::parse("5", 1), kExp);
    CHECK(five.network.neuron_count() == 1);
    CHECK(five.network.layers().front().w(0, 0) == 0.0);
    CHECK(five.network.eval1(std::vector<double>{0.3}) == doctest::Approx(5.0));

    CHECK_THROWS_AS(univariate_network(SparsePolynomial::parse("x1*x2"), kExp), Error);
  }

  TEST_CASE("polynomial networks") {
    const auto p = SparsePolynomial::parse("x1*x2 + x3");
    const auto shallow = build_polynomial_network(p, kExp, BuildMode::Shallow);
    CHECK(shallow.neuron_count() == 6);
    CHECK(shallow.padding_count() == 0);
    for (auto mode : {BuildMode::Shallow, BuildMode::Deep, BuildMode::Tree})
      CHECK(check_taylor(build_polynomial_network(p, kExp, mode), p) < 1e-9);

    const auto m = SparsePolynomial::parse("x1^2*x2");
    CHECK(build_polynomial_network(m, kExp, BuildMode::Shallow) == shallow_monomial({2, 1}, kExp));

    const auto q = SparsePolynomial::parse("x1^3*x2 - 2*x2^5 + x1*x3 + 0.5");
    for (auto mode : {BuildMode::Shallow, BuildMode::Deep, BuildMode::Tree})
      CHECK(check_taylor(build_polynomial_network(q, kExp, mode), q) < 1e-9);

    const auto deep = build_polynomial_network(q, kExp, BuildMode::Deep, 0, false);
    std::uint64_t bound = 0;
    for (const auto& mono : q.monomials())
      if (mono.exponents.degree() > 0) bound += deep_upper_bound(mono.exponents);
    CHECK(deep.neuron_count() - deep.padding_count() <= bound);
  }

  TEST_CASE("other activations") {
    const auto p = SparsePolynomial::parse("x1*x2*x3 + x2^3");
    // sigmoid: sigma_3 != 0 but sigma_2 = 0. softplus: the reverse.
    const Nonlinearity sig(Activation::Sigmoid), sp(Activation::Softplus);
    CHECK(check_taylor(build_polynomial_network(p, sig, BuildMode::Shallow), p) < 1e-9);
    CHECK(check_taylor(build_polynomial_network(p, sp, BuildMode::Deep), p) < 1e-9);
    CHECK_THROWS_AS(build_polynomial_network(p, sig, BuildMode::Deep), Error);
    CHECK_THROWS_AS(build_polynomial_network(p, sp, BuildMode::Shallow), Error);
  }

  TEST_CASE("gates need the matching Taylor coefficient") {
    // tanh has sigma_2 = 0, so no square gate.
    CHECK_THROWS_AS(deep_power(2, Nonlinearity(Activation::Tanh)), Error);
    CHECK_THROWS_AS(shallow_monomial({1, 1}, Nonlinearity(Activation::Relu)), Error);
  }

  TEST_CASE("mode names") {
    for (auto m : {BuildMode::Shallow, BuildMode::Deep, BuildMode::Tree, BuildMode::Vandermonde})
      CHECK(build_mode_from_string(to_string(m)) == m);
    CHECK_THROWS_AS(build_mode_from_string("wide"), Error);
  }
}
