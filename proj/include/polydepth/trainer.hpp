#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polydepth/nonlinearity.hpp"

namespace polydepth {

struct TrainConfig {
  std::size_t n = 6;
  std::size_t depth = 1;  // hidden layers
  std::size_t width = 20;
  Activation activation = Activation::Tanh;
  std::size_t steps = 30000;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  double rho = 0.95;
  double eps = 1e-6;
  double input_low = 0.0;
  double input_high = 2.0;
  std::size_t eval_samples = 100000;
  std::size_t history_every = 1000;

  void validate() const;
};

/// Dense MLP: hidden layers of `width` units, scalar linear output.
struct Mlp {
  Activation activation = Activation::Tanh;
  std::vector<Eigen::MatrixXd> W;
  std::vector<Eigen::VectorXd> b;

  std::size_t parameter_count() const;
  /// Flat parameter view in layer order, weights (column-major) then bias.
  std::vector<double*> parameters();
  Eigen::RowVectorXd forward(const Eigen::MatrixXd& X) const;
};

Mlp init_mlp(const TrainConfig& config);

struct TrainResult {
  TrainConfig config;
  double final_train_err = 0;
  double final_test_err = 0;
  std::vector<std::pair<std::size_t, double>> err_history;
  double wallclock_s = 0;
  double theory_width = 0;
  std::optional<std::string> error;
};

/// Mean absolute error of the product target on `count` points of a stream.
double product_mae(const Mlp& net, const TrainConfig& config, std::uint64_t stream,
                   std::size_t count);

TrainResult train(const TrainConfig& config);

/// Backprop against central differences (h = 1e-5) on squared loss over 50
/// parameters; returns the largest relative deviation. Relu perturbations
/// that switch a unit on or off are skipped.
double gradient_check(const Mlp& net, const TrainConfig& config, std::size_t checks = 50);
double gradient_check(const TrainConfig& config, std::size_t checks = 50);

struct GridConfig {
  std::size_t n = 6;
  std::vector<std::size_t> depths{1, 2, 3};
  std::vector<std::size_t> widths{5, 10, 20, 40};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  Activation activation = Activation::Tanh;
  std::size_t steps = 30000;
  std::size_t batch_size = 64;
  std::size_t eval_samples = 100000;
  std::size_t threads = 0;  // 0: POLYDEPTH_THREADS or hardware concurrency
  bool allow_long = false;  // required for n > 8
};

std::size_t grid_threads(std::size_t requested);

/// One run per (depth, width, seed) in that nesting order. Rows reach
/// `on_row` in grid order as soon as all earlier rows are finished.
std::vector<TrainResult> experiment_grid(const GridConfig& grid,
                                         const std::function<void(const TrainResult&)>& on_row = {});

std::string csv_header();
/// With timing = false the wallclock column is written as 0.
std::string csv_row(const TrainResult& r, bool timing = true);

/// Depth x width heat map of log10 median test error with the asymptotic
/// width curve overlaid.
std::string heatmap_svg(const std::vector<TrainResult>& rows);

}  // namespace polydepth
