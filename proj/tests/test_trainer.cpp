#include <cmath>
#include <set>

#include "doctest.h"
#include "polydepth/error.hpp"
#include "polydepth/planner.hpp"
#include "polydepth/trainer.hpp"

using namespace polydepth;

namespace {

TrainConfig small(std::size_t depth = 1, std::size_t width = 8) {
  TrainConfig c;
  c.n = 2;
  c.depth = depth;
  c.width = width;
  c.steps = 2000;
  c.eval_samples = 5000;
  return c;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("parameter count and init") {
    auto c = small();
    const auto net = init_mlp(c);
    // 2*8 + 8 + 8 + 1
    CHECK(net.parameter_count() == 33);
    for (double b : net.b[0]) CHECK(b == 0.0);
    const double limit = std::sqrt(6.0 / (2 + 8));
    CHECK(net.W[0].cwiseAbs().maxCoeff() <= limit);
    c.width = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    CHECK_THROWS_AS(train(c), Error);
  }

  TEST_CASE("training is deterministic") {
    auto c = small();
    c.steps = 500;
    const auto a = train(c), b = train(c);
    CHECK(a.final_test_err == b.final_test_err);
    CHECK(a.final_train_err == b.final_train_err);
    c.seed = 1;
    CHECK(train(c).final_test_err != a.final_test_err);
  }

  TEST_CASE("gradients agree with finite differences") {
    auto c = small(2, 8);
    c.n = 6;
    CHECK(gradient_check(c) < 1e-5);
    c.activation = Activation::Relu;
    CHECK(gradient_check(c) < 1e-4);
    // All-zero weights give zero gradients everywhere except the output bias.
    auto z = small();
    auto net = init_mlp(z);
    for (auto& W : net.W) W.setZero();
    CHECK(gradient_check(net, z) < 1e-6);
  }

  TEST_CASE("training improves on the untrained network") {
    auto c = small();
    c.steps = 0;
    const auto base = train(c);
    CHECK(std::isfinite(base.final_test_err));
    CHECK(base.err_history.empty());
    c.steps = 3000;
    const auto trained = train(c);
    CHECK(trained.final_test_err < 0.5 * base.final_test_err);
    CHECK(trained.err_history.size() == 3);
    CHECK(product_mae(init_mlp(c), c, 3, 1000) == doctest::Approx(base.final_test_err).epsilon(0.2));
  }

  TEST_CASE("csv rows") {
    const auto h = csv_header();
    CHECK(h.rfind("n,depth,width,", 0) == 0);
    TrainResult r;
    r.config = small();
    r.final_train_err = 0.1;
    r.final_test_err = 0.25;
    r.wallclock_s = 3.5;
    const auto row = csv_row(r, false);
    CHECK(row.rfind("2,1,8,", 0) == 0);
    CHECK(row.find("0.25") != std::string::npos);
    CHECK(row.find("3.5") == std::string::npos);
    CHECK(csv_row(r, true).find("3.5") != std::string::npos);
    std::size_t commas_h = 0, commas_r = 0;
    for (char ch : h) commas_h += ch == ',';
    for (char ch : row) commas_r += ch == ',';
    CHECK(commas_h == commas_r);
  }

  TEST_CASE("grid runs in order") {
    GridConfig g;
    g.n = 2;
    g.depths = {1, 2};
    g.widths = {4};
    g.seeds = {0, 1};
    g.steps = 200;
    g.eval_samples = 1000;
    g.threads = 2;
    std::vector<std::pair<std::size_t, std::uint64_t>> order;
    const auto rows = experiment_grid(g, [&](const TrainResult& r) { order.emplace_back(r.config.depth, r.config.seed); });
    REQUIRE(rows.size() == 4);
    const std::vector<std::pair<std::size_t, std::uint64_t>> want{{1, 0}, {1, 1}, {2, 0}, {2, 1}};
    CHECK(order == want);
    for (const auto& r : rows) {
      CHECK_FALSE(r.error.has_value());
      CHECK(r.theory_width == doctest::Approx(asymptotic_width(2, r.config.depth)));
    }
    g.threads = 1;
    const auto again = experiment_grid(g);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(csv_row(rows[i], false) == csv_row(again[i], false));

    g.n = 9;
    CHECK_THROWS_AS(experiment_grid(g), Error);
  }

  TEST_CASE("heat map svg") {
    GridConfig g;
    g.n = 2;
    g.depths = {1, 2};
    g.widths = {4, 8};
    g.seeds = {0};
    g.steps = 100;
    g.eval_samples = 500;
    const auto svg = heatmap_svg(experiment_grid(g));
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
    std::size_t rects = 0;
    for (std::size_t p = svg.find("<rect"); p != std::string::npos; p = svg.find("<rect", p + 1)) ++rects;
    CHECK(rects >= 4);
  }
}

TEST_SUITE("trainer-examples") {
  TEST_CASE("xy on [0,2]^2 with one hidden layer of 8") {
    TrainConfig c;
    c.n = 2;
    c.depth = 1;
    c.width = 8;
    c.steps = 5000;
    const auto r = train(c);
    MESSAGE("test error " << r.final_test_err);
    CHECK(r.final_test_err < 0.05);
  }

  TEST_CASE("six-way product with three hidden layers of 20") {
    TrainConfig c;
    c.n = 6;
    c.depth = 3;
    c.width = 20;
    c.steps = 30000;
    const auto r = train(c);
    MESSAGE("test error " << r.final_test_err);
    CHECK(r.final_test_err < 0.05);
  }
}
