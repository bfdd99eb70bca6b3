#include "doctest.h"
#include "oracles.hpp"
#include "polydepth/constructors.hpp"
#include "polydepth/error.hpp"
#include "polydepth/network.hpp"
#include "polydepth/verifier.hpp"

using namespace polydepth;

namespace {

const Nonlinearity kExp(Activation::Exp);

FeedforwardNetwork square_net() {
  NetworkBuilder b(1, kExp);
  auto v = b.square(b.input(0));
  b.next_layer();
  return b.finish(v);
}

FeedforwardNetwork product_net() {
  NetworkBuilder b(2, kExp);
  auto v = b.product(b.input(0), b.input(1));
  b.next_layer();
  return b.finish(v);
}

}  // namespace

TEST_SUITE("network") {
  TEST_CASE("affine identity without hidden layers") {
    AffineLayer id(2, 2);
    id.w(0, 0) = id.w(1, 1) = 1.0;
    const FeedforwardNetwork net(2, kExp, {id});
    CHECK(net.depth() == 0);
    CHECK(net.neuron_count() == 0);
    const double x[] = {1.0, 2.0};
    const auto y = net.eval(x);
    CHECK(y == std::vector<double>{1.0, 2.0});
    const auto t = taylor_expand_all(net, 3);
    CHECK(t[0].size() == 1);
    CHECK(t[1].coefficient({0, 1}) == 1.0);
  }

  TEST_CASE("hand-built network evaluates as written") {
    AffineLayer h(2, 2), out(1, 2);
    h.w(0, 0) = 0.5;
    h.w(0, 1) = -1.0;
    h.bias[0] = 0.25;
    h.w(1, 1) = 2.0;
    out.w(0, 0) = 3.0;
    out.w(0, 1) = -1.0;
    out.bias[0] = 0.1;
    const FeedforwardNetwork net(2, Nonlinearity(Activation::Tanh), {h, out});
    const double x[] = {0.3, -0.7};
    const double want = 3.0 * std::tanh(0.5 * 0.3 + 0.7 + 0.25) - std::tanh(-1.4) + 0.1;
    CHECK(net.eval1(x) == doctest::Approx(want));
  }

  TEST_CASE("value at the origin equals the series constant") {
    for (const auto& net : {square_net(), product_net(), deep_power(5, kExp)}) {
      const std::vector<double> zero(net.inputs(), 0.0);
      CHECK(net.eval1(zero) == doctest::Approx(taylor_expand(net, 4).constant_term()).epsilon(1e-12));
    }
  }

  TEST_CASE("square gate expansion") {
    const auto t2 = taylor_expand(square_net(), 2);
    CHECK(t2.size() == 1);
    CHECK(t2.coefficient({2}) == doctest::Approx(1.0));
    // cosh-based: e^x + e^-x - 2 = x^2 + x^4/12 + ...
    const auto t4 = taylor_expand(square_net(), 4);
    CHECK(t4.coefficient({4}) == doctest::Approx(1.0 / 12));
    CHECK(t4.coefficient({3}) == 0.0);
  }

  TEST_CASE("product gate near (0.5, 0.5)") {
    const auto net = product_net();
    const double x[] = {0.5, 0.5};
    const auto t6 = taylor_expand(net, 6);
    const double series_value = t6.evaluate(x);
    CHECK(net.eval1(x) == doctest::Approx(0.25).epsilon(0.05));
    // Degree <= 6 series explains the gap to the exact product.
    CHECK(std::abs(net.eval1(x) - series_value) < std::abs(net.eval1(x) - 0.25));
  }

  TEST_CASE("json round trip preserves everything") {
    const auto net = build_polynomial_network(SparsePolynomial::parse("x1*x2 + x3"), kExp, BuildMode::Deep);
    const auto back = FeedforwardNetwork::from_json(net.to_json());
    CHECK(back == net);
    CHECK(back.to_json() == net.to_json());
    CHECK_THROWS_AS(FeedforwardNetwork::from_json("{\"inputs\": 2}"), Error);
    CHECK_THROWS_AS(FeedforwardNetwork::from_json("not json"), Error);
  }

  TEST_CASE("annotations without a block field default to block 0") {
    auto text = product_net().to_json();
    const auto pos = text.find(", \"block\": 0");
    if (pos != std::string::npos) text.erase(pos, 12);
    const auto back = FeedforwardNetwork::from_json(text);
    CHECK(back.block_count() == 1);
  }

  TEST_CASE("sum of a network with itself") {
    const auto net = product_net();
    const FeedforwardNetwork parts[] = {net, net};
    const auto two = sum_networks(parts);
    CHECK(two.neuron_count() == 2 * net.neuron_count());
    const double x[] = {0.3, -0.2};
    CHECK(two.eval1(x) == doctest::Approx(2 * net.eval1(x)));
    CHECK(two.block_count() == 2);
    CHECK_THROWS_AS(sum_networks(std::span<const FeedforwardNetwork>{}), Error);
  }

  TEST_CASE("depth-matched sum of x1*x2 and x3") {
    NetworkBuilder b(3, kExp);
    auto x3 = b.identity(b.input(2));
    b.next_layer();
    const FeedforwardNetwork parts[] = {
        [] {
          NetworkBuilder p(3, kExp);
          auto v = p.product(p.input(0), p.input(1));
          p.next_layer();
          return p.finish(v);
        }(),
        b.finish(x3)};
    const auto sum = sum_networks(parts);
    const auto t = taylor_expand(sum, 2);
    CHECK(t.coefficient({1, 1, 0}) == doctest::Approx(1.0));
    CHECK(t.coefficient({0, 0, 1}) == doctest::Approx(1.0));
  }

  TEST_CASE("pad_depth keeps the leading terms") {
    const auto net = square_net();
    const auto deep = pad_depth(net, 3);
    CHECK(deep.depth() == 3);
    CHECK(deep.padding_count() == 2);
    CHECK(taylor_expand(deep, 2).coefficient({2}) == doctest::Approx(1.0));
    CHECK(taylor_expand(deep, 2).coefficient({1}) == 0.0);
  }

  TEST_CASE("rescale") {
    const auto net = product_net();
    CHECK(rescale_network(net, 2, 1.0) == net);

    const auto scaled = rescale_network(net, 2, 0.1);
    const double x[] = {0.4, -0.9};
    const double dx[] = {0.04, -0.09};
    CHECK(scaled.eval1(x) == doctest::Approx(net.eval1(dx) / 0.01));

    const auto a = taylor_expand(net, 4), b = taylor_expand(scaled, 4);
    CHECK(b.coefficient({1, 1}) == doctest::Approx(1.0));
    for (const ExponentVector& e : {ExponentVector{3, 1}, ExponentVector{1, 3}})
      CHECK(b.coefficient(e) == doctest::Approx(a.coefficient(e) * 0.01));

    CHECK_THROWS_AS(rescale_network(net, 2, 0.0), Error);
    CHECK_THROWS_AS(rescale_network(net, 2, 1.5), Error);
  }

  TEST_CASE("rescaled square gate is closer on (-1, 1)") {
    const auto net = square_net();
    const auto scaled = rescale_network(net, 2, 0.5);
    double before = 0, after = 0;
    for (int i = 0; i <= 200; ++i) {
      const double x[] = {-0.999 + i * 0.00999};
      before = std::max(before, std::abs(net.eval1(x) - x[0] * x[0]));
      after = std::max(after, std::abs(scaled.eval1(x) - x[0] * x[0]));
    }
    CHECK(after < before);
  }

  TEST_CASE("evaluation rejects bad input") {
    const auto net = product_net();
    const double x[] = {1.0};
    CHECK_THROWS_AS(net.eval(x), Error);
    const double big[] = {1000.0, 1000.0};
    CHECK_THROWS_AS(net.eval(big), Error);
  }

  TEST_CASE("block sub-networks") {
    const auto net = build_polynomial_network(SparsePolynomial::parse("x1*x2 + x3"), kExp, BuildMode::Shallow);
    CHECK(net.block_count() == 2);
    const auto b0 = block_subnetwork(net, 0), b1 = block_subnetwork(net, 1);
    CHECK(b0.neuron_count() + b1.neuron_count() == net.neuron_count());
    const double x[] = {0.1, 0.2, 0.3};
    CHECK(b0.eval1(x) + b1.eval1(x) + net.layers().back().bias[0] == doctest::Approx(net.eval1(x)));
  }
}
