#include "polydepth/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "polydepth/error.hpp"
#include "polydepth/json_format.hpp"
#include "polydepth/rng.hpp"

namespace polydepth {

double check_taylor(const FeedforwardNetwork& net, const SparsePolynomial& p) {
  require(net.inputs() == p.variables(), ErrorCode::DimensionMismatch,
          "network has " + std::to_string(net.inputs()) + " inputs, target has " +
              std::to_string(p.variables()) + " variables");
  const unsigned D = p.degree();
  return taylor_expand(net, D).max_abs_difference(series_from_polynomial(p, D));
}

namespace {

// Additive recurrence with the generalized golden ratio: phi^(n+1) = phi + 1.
std::vector<double> kronecker_alpha(std::size_t n) {
  double phi = 2.0;
  for (int it = 0; it < 64; ++it) {
    const double f = std::pow(phi, static_cast<double>(n + 1)) - phi - 1.0;
    const double df = static_cast<double>(n + 1) * std::pow(phi, static_cast<double>(n)) - 1.0;
    phi -= f / df;
  }
  std::vector<double> alpha(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double v = 1.0 / std::pow(phi, static_cast<double>(j + 1));
    alpha[j] = v - std::floor(v);
  }
  return alpha;
}

}  // namespace

std::vector<double> sample_point(std::size_t n, double radius, std::uint64_t seed, std::size_t i) {
  const auto alpha = kronecker_alpha(n);
  std::vector<double> x(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double shift = counter_uniform(seed, 0x5eed, j);
    double u = shift + static_cast<double>(i + 1) * alpha[j];
    u -= std::floor(u);
    x[j] = radius * (2.0 * u - 1.0);
  }
  return x;
}

SupErrorEstimate sup_error(const FeedforwardNetwork& net, const SparsePolynomial& p, double radius,
                           std::size_t samples, std::uint64_t seed) {
  require(radius > 0, ErrorCode::InvalidArgument, "radius must be positive");
  require(samples >= 1, ErrorCode::InvalidArgument, "need at least one sample");
  const std::size_t n = net.inputs();
  require(n == p.variables(), ErrorCode::DimensionMismatch, "network and target disagree on n");
  SupErrorEstimate est;
  est.radius = radius;
  est.samples = samples;
  est.seed = seed;
  est.max_abs_error = -1.0;

  auto consider = [&](const std::vector<double>& x) {
    const double e = std::abs(net.eval1(x) - p.evaluate(x));
    if (e > est.max_abs_error) {
      est.max_abs_error = e;
      est.argmax = x;
    }
  };

  const auto alpha = kronecker_alpha(n);
  std::vector<double> shift(n), x(n);
  for (std::size_t j = 0; j < n; ++j) shift[j] = counter_uniform(seed, 0x5eed, j);
  for (std::size_t i = 0; i < samples; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double u = shift[j] + static_cast<double>(i + 1) * alpha[j];
      u -= std::floor(u);
      x[j] = radius * (2.0 * u - 1.0);
    }
    consider(x);
  }
  if (n <= 20) {
    est.corners = std::size_t{1} << n;
    for (std::size_t c = 0; c < est.corners; ++c) {
      for (std::size_t j = 0; j < n; ++j) x[j] = (c >> j) & 1 ? -radius : radius;
      consider(x);
    }
  }
  return est;
}

namespace {

Json polynomial_json(const SparsePolynomial& p) { return p.to_string(); }

std::vector<std::vector<std::size_t>> unit_blocks(const FeedforwardNetwork& net) {
  std::vector<std::vector<std::size_t>> blocks;
  for (std::size_t l = 0; l < net.depth(); ++l) blocks.emplace_back(net.layers()[l].rows, 0);
  for (const auto& a : net.annotations())
    for (std::size_t j = a.from; j < a.to; ++j) blocks[a.layer][j] = a.block;
  return blocks;
}

struct BlockInfo {
  FeedforwardNetwork sub;
  double t0 = 0;
  unsigned degree = 0;  // 0: no variable part
  SparsePolynomial q{1};
};

FeedforwardNetwork apply_deltas(const FeedforwardNetwork& net, const std::vector<BlockInfo>& info,
                                const std::vector<double>& delta) {
  if (net.depth() == 0) return net;
  const auto blocks = unit_blocks(net);
  auto layers = net.layers();
  auto& first = layers.front();
  for (std::size_t r = 0; r < first.rows; ++r)
    for (std::size_t c = 0; c < first.cols; ++c) first.w(r, c) *= delta[blocks[0][r]];
  auto& out = layers.back();
  for (std::size_t j = 0; j < out.cols; ++j) {
    const std::size_t b = blocks.back()[j];
    const double s = std::pow(delta[b], static_cast<double>(info[b].degree));
    for (std::size_t r = 0; r < out.rows; ++r) out.w(r, j) /= s;
  }
  for (std::size_t b = 0; b < info.size(); ++b) {
    const double s = std::pow(delta[b], static_cast<double>(info[b].degree));
    out.bias[0] += info[b].t0 - info[b].t0 / s;
  }
  return FeedforwardNetwork(net.inputs(), net.activation(), std::move(layers), net.annotations());
}

constexpr double kDeltaFloor = 1e-8;

}  // namespace

std::string ApproximationCertificate::to_json() const {
  Json j;
  j["target"] = polynomial_json(target);
  j["kind"] = kind;
  if (kind == "epsilon") j["epsilon"] = epsilon;
  j["radius"] = radius;
  j["delta"] = delta;
  j["max_coeff_deviation"] = max_coeff_deviation;
  j["measured_sup_error"] = measured_sup_error ? Json(*measured_sup_error) : Json(nullptr);
  j["samples"] = samples;
  j["seed"] = seed;
  j["neurons"] = neurons;
  j["padding_neurons"] = padding;
  if (kind == "epsilon") j["delta_search"] = "halving from 1, confirmed with 2x samples";
  Json bj = Json::array();
  for (const auto& b : blocks) {
    Json e;
    e["block"] = b.block;
    e["degree"] = b.degree;
    e["target"] = polynomial_json(b.target);
    e["budget"] = b.budget;
    e["delta"] = b.delta;
    e["sup_error"] = b.sup_error;
    e["monotone"] = b.monotone;
    Json steps = Json::array();
    for (const auto& s : b.steps) steps.push_back(Json::array({s.delta, s.error}));
    e["steps"] = std::move(steps);
    bj.push_back(std::move(e));
  }
  j["blocks"] = std::move(bj);
  return dump_json(j) + "\n";
}

ApproximationCertificate taylor_certificate(const FeedforwardNetwork& net,
                                            const SparsePolynomial& p) {
  ApproximationCertificate c;
  c.target = p;
  c.kind = "taylor";
  c.delta = 1.0;
  c.max_coeff_deviation = check_taylor(net, p);
  c.neurons = net.neuron_count();
  c.padding = net.padding_count();
  return c;
}

EpsilonResult epsilonize(const FeedforwardNetwork& net, const SparsePolynomial& p, double epsilon,
                         double radius, std::size_t samples, std::uint64_t seed) {
  require(epsilon > 0, ErrorCode::InvalidArgument, "epsilon must be positive");
  require(radius > 0, ErrorCode::InvalidArgument, "radius must be positive");
  require(net.activation().analytic(), ErrorCode::Domain,
          "epsilon search needs an analytic activation");
  require(net.inputs() == p.variables(), ErrorCode::DimensionMismatch,
          "network and target disagree on n");
  const unsigned D = p.degree();
  double scale = 1.0;
  for (const auto& m : p.monomials()) scale = std::max(scale, std::abs(m.coefficient));
  const double tol = 1e-9 * scale;

  // Identify which monomials of p each block carries at its lowest degree.
  std::vector<BlockInfo> info;
  std::map<std::uint64_t, int> covered;
  for (const auto& m : p.monomials())
    if (m.exponents.degree() > 0) covered[graded_lex_rank(m.exponents.values())] = 0;
  for (std::size_t b = 0; b < net.block_count(); ++b) {
    BlockInfo bi{net.depth() > 0 ? block_subnetwork(net, b)
                                 : scale_output(net, 1.0, -net.layers()[0].bias[0])};
    const auto T = taylor_expand(bi.sub, std::max(D, 1u));
    bi.t0 = T.constant_term();
    unsigned d = 0;
    for (std::size_t i = 0; i < T.size(); ++i)
      if (T.degree_at(i) > 0 && std::abs(T.coefficient_at(i)) > tol)
        d = d == 0 ? T.degree_at(i) : std::min(d, T.degree_at(i));
    bi.degree = d;
    std::vector<Monomial> q;
    for (std::size_t i = 0; d > 0 && i < T.size(); ++i) {
      if (T.degree_at(i) != d || std::abs(T.coefficient_at(i)) <= tol) continue;
      const ExponentVector e(std::vector<Exponent>(T.exponents_of(i).begin(), T.exponents_of(i).end()));
      const double want = [&] {
        for (const auto& m : p.monomials())
          if (m.exponents == e) return m.coefficient;
        return 0.0;
      }();
      require(std::abs(T.coefficient_at(i) - want) <= 1e-6 * scale, ErrorCode::VerificationFailed,
              "block " + std::to_string(b) + " leads with " + std::to_string(T.coefficient_at(i)) +
                  " x^(" + e.to_string() + "), which does not match the target; the network must "
                  "be a sum of per-monomial blocks");
      q.push_back({want, e});
      ++covered[graded_lex_rank(e.values())];
    }
    bi.q = SparsePolynomial(p.variables(), std::move(q));
    info.push_back(std::move(bi));
  }
  for (const auto& [key, count] : covered)
    require(count == 1, ErrorCode::VerificationFailed,
            "monomial x^(" + graded_lex_unrank(key, p.variables()).to_string() + ") is carried by " +
                std::to_string(count) + " blocks; expected exactly one");

  std::size_t active = 0;
  for (const auto& bi : info) active += bi.degree > 0 ? 1 : 0;
  const double budget = epsilon / static_cast<double>(std::max<std::size_t>(active, 1));

  ApproximationCertificate cert;
  cert.target = p;
  cert.kind = "epsilon";
  cert.epsilon = epsilon;
  cert.radius = radius;
  std::vector<double> delta(info.size(), 1.0);
  for (std::size_t b = 0; b < info.size(); ++b) {
    const auto& bi = info[b];
    if (bi.degree == 0) continue;
    BlockCertificate bc;
    bc.block = b;
    bc.degree = bi.degree;
    bc.target = bi.q;
    bc.budget = budget;
    double d = 1.0;
    while (true) {
      const double s = std::pow(d, static_cast<double>(bi.degree));
      const auto scaled = scale_output(rescale_network(bi.sub, bi.degree, d), 1.0, -bi.t0 / s);
      const double err = sup_error(scaled, bi.q, radius, samples, seed).max_abs_error;
      if (!bc.steps.empty() && err > bc.steps.back().error) bc.monotone = false;
      bc.steps.push_back({d, err});
      if (err < budget) break;
      d *= 0.5;
      require(d >= kDeltaFloor, ErrorCode::VerificationFailed,
              "delta floor 1e-8 reached for block " + std::to_string(b) + "; best error " +
                  std::to_string(std::min_element(bc.steps.begin(), bc.steps.end(),
                                                  [](auto& x, auto& y) { return x.error < y.error; })
                                     ->error) +
                  " vs budget " + std::to_string(budget));
    }
    delta[b] = d;
    bc.delta = d;
    bc.sup_error = bc.steps.back().error;
    cert.blocks.push_back(std::move(bc));
  }

  auto result = apply_deltas(net, info, delta);
  auto est = sup_error(result, p, radius, 2 * samples, seed + 1);
  while (!(est.max_abs_error < epsilon)) {
    for (std::size_t b = 0; b < info.size(); ++b) {
      if (info[b].degree == 0) continue;
      delta[b] *= 0.5;
      require(delta[b] >= kDeltaFloor, ErrorCode::VerificationFailed,
              "confirmation pass failed down to the delta floor; best error " +
                  std::to_string(est.max_abs_error));
    }
    result = apply_deltas(net, info, delta);
    est = sup_error(result, p, radius, 2 * samples, seed + 1);
  }
  for (auto& bc : cert.blocks) bc.delta = delta[bc.block];
  cert.delta = *std::min_element(delta.begin(), delta.end());
  cert.max_coeff_deviation = check_taylor(result, p);
  cert.measured_sup_error = est.max_abs_error;
  cert.samples = est.samples;
  cert.seed = est.seed;
  cert.neurons = result.neuron_count();
  cert.padding = result.padding_count();
  return {std::move(result), std::move(cert)};
}

namespace {

void require_shallow(const FeedforwardNetwork& net, const ExponentVector& r) {
  require(net.depth() == 1, ErrorCode::InvalidArgument,
          "derivative matrix needs exactly one hidden layer, network has " +
              std::to_string(net.depth()));
  require(r.size() == net.inputs(), ErrorCode::DimensionMismatch,
          "exponent vector length differs from network inputs");
}

std::size_t row_count(const ExponentVector& r) {
  std::size_t rows = 1;
  for (std::size_t i = 0; i < r.size(); ++i) {
    require(rows <= (std::size_t{1} << 20) / (r[i] + 1), ErrorCode::InvalidArgument,
            "derivative matrix too large");
    rows *= r[i] + 1;
  }
  return rows;
}

// Fill A(s, j) = prod_i basis_i[s_i][j] with s in mixed radix, first fastest.
Eigen::MatrixXd tensor_rows(const ExponentVector& r, const std::vector<Eigen::MatrixXd>& basis,
                            Eigen::Index cols) {
  const std::size_t rows = row_count(r);
  Eigen::MatrixXd A(static_cast<Eigen::Index>(rows), cols);
  std::vector<Exponent> s(r.size(), 0);
  for (std::size_t row = 0; row < rows; ++row) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      double v = 1.0;
      for (std::size_t i = 0; i < r.size(); ++i) v *= basis[i](s[i], j);
      A(static_cast<Eigen::Index>(row), j) = v;
    }
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (++s[i] <= r[i]) break;
      s[i] = 0;
    }
  }
  return A;
}

std::size_t svd_rank(const Eigen::MatrixXd& A, std::vector<double>* values, double* condition) {
  if (A.size() == 0) return 0;
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(A);
  const auto& sv = svd.singularValues();
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-9 * sv(0)) ++rank;
  if (values) values->assign(sv.data(), sv.data() + sv.size());
  if (condition) *condition = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
  return rank;
}

}  // namespace

Eigen::MatrixXd derivative_matrix(const FeedforwardNetwork& net, const ExponentVector& r) {
  require_shallow(net, r);
  const auto& W = net.layers().front();
  const auto cols = static_cast<Eigen::Index>(W.rows);
  std::vector<Eigen::MatrixXd> powers;
  for (std::size_t i = 0; i < r.size(); ++i) {
    Eigen::MatrixXd P(r[i] + 1, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      P(0, j) = 1.0;
      for (Exponent k = 1; k <= r[i]; ++k)
        P(k, j) = P(k - 1, j) * W.w(static_cast<std::size_t>(j), i);
    }
    powers.push_back(std::move(P));
  }
  return tensor_rows(r, powers, cols);
}

RankReport derivative_matrix_rank(const FeedforwardNetwork& net, const ExponentVector& r) {
  require_shallow(net, r);
  const auto& W = net.layers().front();
  const auto cols = static_cast<Eigen::Index>(W.rows);
  const double m = static_cast<double>(cols);

  // Vandermonde with Arnoldi: row k of basis i is a degree-k polynomial in the
  // weights a_ij, orthonormal over the columns. Rows of the literal matrix are
  // an invertible triangular transform of these, so the rank is unchanged.
  std::vector<Eigen::MatrixXd> basis;
  for (std::size_t i = 0; i < r.size(); ++i) {
    Eigen::RowVectorXd z(cols);
    for (Eigen::Index j = 0; j < cols; ++j) z(j) = W.w(static_cast<std::size_t>(j), i);
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(r[i] + 1, cols);
    Q.row(0).setOnes();
    for (Exponent k = 1; k <= r[i]; ++k) {
      Eigen::RowVectorXd v = Q.row(k - 1).cwiseProduct(z);
      const double before = v.norm();
      for (int pass = 0; pass < 2; ++pass)
        for (Exponent l = 0; l < k; ++l) {
          const double qq = Q.row(l).squaredNorm();
          if (qq > 0) v -= (Q.row(l).dot(v) / qq) * Q.row(l);
        }
      const double after = v.norm();
      // A vanishing residual means a^k is already spanned on these points.
      if (after > 1e-12 * std::max(before, 1e-300)) Q.row(k) = v * (std::sqrt(m) / after);
    }
    basis.push_back(std::move(Q));
  }

  RankReport rep;
  const auto A = tensor_rows(r, basis, cols);
  rep.rows = static_cast<std::size_t>(A.rows());
  rep.cols = static_cast<std::size_t>(cols);
  rep.rank = svd_rank(A, &rep.singular_values, nullptr);
  rep.literal_rank = svd_rank(derivative_matrix(net, r), nullptr, &rep.literal_condition);
  return rep;
}

double best_output_fit(const FeedforwardNetwork& net, const SparsePolynomial& p) {
  require(net.depth() >= 1, ErrorCode::InvalidArgument, "output refit needs a hidden layer");
  const unsigned D = p.degree();
  std::vector<AffineLayer> layers(net.layers().begin(), net.layers().end() - 1);
  const std::size_t width = layers.back().rows;
  AffineLayer id(width, width);
  for (std::size_t j = 0; j < width; ++j) id.w(j, j) = 1.0;
  layers.push_back(std::move(id));
  const auto units = taylor_expand_all(FeedforwardNetwork(net.inputs(), net.activation(), layers), D);

  std::map<std::uint64_t, Eigen::Index> row_of;
  auto row = [&](std::span<const Exponent> e) {
    const auto key = graded_lex_rank(e);
    return row_of.try_emplace(key, static_cast<Eigen::Index>(row_of.size())).first->second;
  };
  row(ExponentVector(net.inputs()).values());
  for (const auto& m : p.monomials()) row(m.exponents.values());
  for (const auto& s : units)
    for (std::size_t i = 0; i < s.size(); ++i) row(s.exponents_of(i));

  const auto R = static_cast<Eigen::Index>(row_of.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(R, static_cast<Eigen::Index>(width) + 1);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(R);
  A(0, static_cast<Eigen::Index>(width)) = 1.0;  // bias feeds the constant term
  for (std::size_t j = 0; j < width; ++j)
    for (std::size_t i = 0; i < units[j].size(); ++i)
      A(row(units[j].exponents_of(i)), static_cast<Eigen::Index>(j)) = units[j].coefficient_at(i);
  for (const auto& m : p.monomials()) b(row(m.exponents.values())) = m.coefficient;
  const Eigen::VectorXd c = A.completeOrthogonalDecomposition().solve(b);
  return (A * c - b).cwiseAbs().maxCoeff();
}

}  // namespace polydepth
