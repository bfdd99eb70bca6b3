#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polydepth/network.hpp"
#include "polydepth/polynomial.hpp"

namespace polydepth {

/// Largest |coefficient| gap between the network's degree-deg(p) Taylor
/// polynomial and p, over the union of supports.
double check_taylor(const FeedforwardNetwork& net, const SparsePolynomial& p);

struct SupErrorEstimate {
  double radius = 0;
  std::size_t samples = 0;  // low-discrepancy points, corners excluded
  std::size_t corners = 0;
  std::uint64_t seed = 0;
  double max_abs_error = 0;
  std::vector<double> argmax;
};

/// Point i of the seeded low-discrepancy sequence on (-R, R)^n; depends only
/// on (seed, i).
std::vector<double> sample_point(std::size_t n, double radius, std::uint64_t seed, std::size_t i);

/// max |N(x) - p(x)| over `samples` sequence points plus the 2^n corners
/// (corners are skipped above 20 variables).
SupErrorEstimate sup_error(const FeedforwardNetwork& net, const SparsePolynomial& p, double radius,
                           std::size_t samples, std::uint64_t seed);

struct DeltaStep {
  double delta;
  double error;
};

struct BlockCertificate {
  std::size_t block = 0;
  unsigned degree = 0;
  SparsePolynomial target{1};
  double budget = 0;
  double delta = 1;
  double sup_error = 0;
  bool monotone = true;
  std::vector<DeltaStep> steps;
};

struct ApproximationCertificate {
  SparsePolynomial target{1};
  std::string kind;  // "taylor" or "epsilon"
  double epsilon = 0;
  double radius = 0;
  double delta = 1;
  double max_coeff_deviation = 0;
  std::optional<double> measured_sup_error;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::size_t neurons = 0;
  std::size_t padding = 0;
  std::vector<BlockCertificate> blocks;

  std::string to_json() const;
};

ApproximationCertificate taylor_certificate(const FeedforwardNetwork& net,
                                            const SparsePolynomial& p);

struct EpsilonResult {
  FeedforwardNetwork network;
  ApproximationCertificate certificate;
};

/// Rescales each summand block by its own delta (halving from 1, floor 1e-8)
/// until every block is within epsilon / blocks of its monomials, then
/// confirms the whole network with twice the samples and seed + 1.
EpsilonResult epsilonize(const FeedforwardNetwork& net, const SparsePolynomial& p, double epsilon,
                         double radius, std::size_t samples = 100000, std::uint64_t seed = 0);

/// Literal matrix A_{S,j} = prod_{h in S} a_{hj}; rows are sub-multisets of the
/// exponent multiset (first variable fastest), columns hidden neurons.
Eigen::MatrixXd derivative_matrix(const FeedforwardNetwork& net, const ExponentVector& r);

struct RankReport {
  std::size_t rank = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> singular_values;
  std::size_t literal_rank = 0;  // SVD rank of the literal matrix
  double literal_condition = 0;
};

/// Numerical rank (singular values above 1e-9 of the largest) after a
/// per-variable orthonormal polynomial change of row basis.
RankReport derivative_matrix_rank(const FeedforwardNetwork& net, const ExponentVector& r);

/// Max Taylor-coefficient deviation from p after refitting the output layer
/// (weights and bias) by least squares; hidden layers are kept.
double best_output_fit(const FeedforwardNetwork& net, const SparsePolynomial& p);

}  // namespace polydepth
