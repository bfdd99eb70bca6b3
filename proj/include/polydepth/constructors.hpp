#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "polydepth/network.hpp"
#include "polydepth/nonlinearity.hpp"
#include "polydepth/polynomial.hpp"

namespace polydepth {

/// Incremental layer-by-layer network assembly. A Value is an affine function
/// of the units of one level (level 0 = inputs); gates consume values of the
/// current level and produce values of the next.
class NetworkBuilder {
 public:
  struct Value {
    std::size_t level = 0;
    std::vector<std::pair<std::size_t, double>> terms;  // (unit, weight)
    double bias = 0.0;
  };

  NetworkBuilder(std::size_t n, Nonlinearity sigma);

  const Nonlinearity& sigma() const noexcept { return sigma_; }
  std::size_t level() const noexcept { return layers_.size(); }
  Value input(std::size_t i) const;

  /// 3 neurons: sigma(u), sigma(-u) and a zero-weight constant unit.
  Value square(const Value& u);
  /// Sign-pattern gadget on two inputs, 4 neurons.
  Value product(const Value& u, const Value& v);
  /// 1 neuron computing (sigma(u) - sigma(0)) / sigma_1.
  Value identity(const Value& u, GateTag tag = GateTag::Identity);
  /// 2^N neurons computing the product of N values to leading order.
  Value sign_pattern(const std::vector<Value>& us, GateTag tag = GateTag::SignPattern);

  /// Closes the hidden layer under construction.
  void next_layer();
  FeedforwardNetwork finish(const Value& out);

 private:
  struct Row {
    std::vector<std::pair<std::size_t, double>> terms;
    double bias;
  };
  std::size_t add_neuron(const Value& pre, double scale);
  std::size_t add_neuron_combination(const std::vector<Value>& us, const std::vector<double>& w);
  void check_current(const Value& u) const;
  void tag(std::size_t from, std::size_t to, GateTag tag);

  std::size_t n_;
  Nonlinearity sigma_;
  double s0_;
  std::vector<AffineLayer> layers_;
  std::vector<Annotation> annotations_;
  std::vector<Row> pending_;
};

/// Output weight of sign vector s in the N-input gadget: prod(s) / (2^N N! sigma_N).
double sign_pattern_scale(const Nonlinearity& sigma, unsigned N);

FeedforwardNetwork shallow_product_gadget(unsigned N, const Nonlinearity& sigma);
FeedforwardNetwork shallow_monomial(const ExponentVector& r, const Nonlinearity& sigma);
FeedforwardNetwork deep_power(unsigned d, const Nonlinearity& sigma);
FeedforwardNetwork deep_monomial(const ExponentVector& r, const Nonlinearity& sigma);

/// Group sizes per layer for the k-layer tree product.
struct TreePlan {
  std::size_t n = 0;
  std::vector<std::size_t> b;
  /// Values entering each layer, so groups[i] = ceil(counts[i] / b[i]).
  std::vector<std::size_t> counts;
  std::vector<std::size_t> groups;
  /// Groups shorter than b[i] (realized with a smaller gadget or a carry).
  std::vector<std::size_t> short_groups;

  static TreePlan make(std::size_t n, std::vector<std::size_t> b);
  bool exact() const;  // prod(b) == n
};

/// Multiplies the given input occurrences (variable indices, repeats allowed)
/// through the plan's layers of sign-pattern gadgets.
FeedforwardNetwork tree_product(std::size_t n, const std::vector<std::size_t>& occurrences,
                                const TreePlan& plan, const Nonlinearity& sigma);
FeedforwardNetwork tree_product(std::size_t n, const TreePlan& plan, const Nonlinearity& sigma);

struct VandermondeFit {
  FeedforwardNetwork network;
  std::vector<double> nodes;
  double condition;
  bool rescaled;
};

/// One hidden layer of deg(p)+1 neurons at Chebyshev nodes, output weights from
/// the linear system sum_i c_i sigma_j a_i^j = p_j.
VandermondeFit univariate_network(const SparsePolynomial& p, const Nonlinearity& sigma);

enum class BuildMode { Shallow, Deep, Tree, Vandermonde };

BuildMode build_mode_from_string(const std::string& s);
std::string to_string(BuildMode mode);

/// Per-monomial networks scaled by their coefficients and summed; constants go
/// to the output bias. `k` is the tree depth (0 picks the rule-of-thumb depth).
/// With taylor_exact, a monomial of degree below deg(p) is replaced by a
/// combination of rescaled copies whose residues cancel through degree deg(p);
/// without it each summand is exact only at its own degree.
FeedforwardNetwork build_polynomial_network(const SparsePolynomial& p, const Nonlinearity& sigma,
                                            BuildMode mode, std::size_t k = 0,
                                            bool taylor_exact = true);

/// Weighted sum of copies N(a x) / a^m, a = 1, 1/2, ..., that cancels the
/// residue degrees m + step, m + 2 step, ... up to D.
FeedforwardNetwork extrapolate_residues(const FeedforwardNetwork& net, unsigned m, unsigned D,
                                        unsigned step);

/// Monomial network for one mode, as used by build_polynomial_network.
FeedforwardNetwork monomial_network(const ExponentVector& r, const Nonlinearity& sigma,
                                    BuildMode mode, std::size_t k = 0);

}  // namespace polydepth
