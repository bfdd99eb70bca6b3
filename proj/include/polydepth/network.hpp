#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "polydepth/nonlinearity.hpp"
#include "polydepth/series.hpp"

namespace polydepth {

/// y = W x + b with W stored row-major (rows x cols).
struct AffineLayer {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  AffineLayer() = default;
  AffineLayer(std::size_t rows, std::size_t cols)
      : rows(rows), cols(cols), weights(rows * cols, 0.0), bias(rows, 0.0) {}

  double& w(std::size_t r, std::size_t c) { return weights[r * cols + c]; }
  double w(std::size_t r, std::size_t c) const { return weights[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {weights.data() + r * cols, cols}; }

  friend bool operator==(const AffineLayer&, const AffineLayer&) = default;
};

enum class GateTag { Square, Product, Identity, SignPattern, Carry, Vandermonde, Constant };

std::string to_string(GateTag tag);
GateTag gate_tag_from_string(const std::string& s);

/// Tags hidden neurons [from, to) of hidden layer `layer` (0-based). `block`
/// identifies the summand a neuron belongs to after sum_networks.
struct Annotation {
  std::size_t layer;
  std::size_t from;
  std::size_t to;
  GateTag tag;
  std::size_t block = 0;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

/// Affine layers with one shared activation applied between them and none after
/// the last. Hidden layer l is the activated output of layers()[l].
class FeedforwardNetwork {
 public:
  FeedforwardNetwork(std::size_t n, Nonlinearity activation, std::vector<AffineLayer> layers,
                     std::vector<Annotation> annotations = {});

  std::size_t inputs() const noexcept { return n_; }
  const Nonlinearity& activation() const noexcept { return activation_; }
  const std::vector<AffineLayer>& layers() const noexcept { return layers_; }
  const std::vector<Annotation>& annotations() const noexcept { return annotations_; }

  std::size_t depth() const noexcept { return layers_.size() - 1; }
  std::size_t outputs() const noexcept { return layers_.back().rows; }
  std::vector<std::size_t> hidden_widths() const;
  std::size_t neuron_count() const;
  /// Hidden neurons tagged carry or constant (depth alignment and padding).
  std::size_t padding_count() const;
  std::size_t count_tagged(GateTag tag) const;
  /// Number of independent summand blocks (1 when unannotated).
  std::size_t block_count() const;

  std::vector<double> eval(std::span<const double> x) const;
  double eval1(std::span<const double> x) const { return eval(x).front(); }

  std::string to_json() const;
  static FeedforwardNetwork from_json(const std::string& text);

  friend bool operator==(const FeedforwardNetwork&, const FeedforwardNetwork&) = default;

 private:
  std::size_t n_;
  Nonlinearity activation_;
  std::vector<AffineLayer> layers_;
  std::vector<Annotation> annotations_;
};

/// Degree-<=cap Taylor expansion of every output about the origin.
std::vector<TruncatedSeries> taylor_expand_all(const FeedforwardNetwork& net, unsigned cap);
/// Expansion of output 0.
TruncatedSeries taylor_expand(const FeedforwardNetwork& net, unsigned cap);

/// Extends a network to `depth` hidden layers by passing each output through
/// one identity gate (tag carry) per added layer.
FeedforwardNetwork pad_depth(const FeedforwardNetwork& net, std::size_t depth);

/// Network computing the sum of the inputs' outputs; shallower summands are
/// depth-padded first.
FeedforwardNetwork sum_networks(std::span<const FeedforwardNetwork> nets);

/// Network computing N(delta x) / delta^d with unchanged layer widths.
FeedforwardNetwork rescale_network(const FeedforwardNetwork& net, unsigned d, double delta);

/// The sub-network of one block: its hidden neurons and output weights, with
/// zero output bias. Throws if the block reads neurons of another block.
FeedforwardNetwork block_subnetwork(const FeedforwardNetwork& net, std::size_t block);

/// Multiplies the output affine map (weights and bias) by `factor` and adds `offset`.
FeedforwardNetwork scale_output(const FeedforwardNetwork& net, double factor, double offset = 0.0);

}  // namespace polydepth
