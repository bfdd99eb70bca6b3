#include "polydepth/constructors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numbers>

#include <Eigen/Dense>

#include "polydepth/error.hpp"
#include "polydepth/planner.hpp"

namespace polydepth {

namespace {
// Identity gates read their input scaled down so that carried values keep small
// residue coefficients; long carry chains otherwise lose precision.
constexpr double kIdentityGain = 0.25;

double factorial(unsigned k) {
  double f = 1.0;
  for (unsigned i = 2; i <= k; ++i) f *= i;
  return f;
}

std::string coefficient_name(const Nonlinearity& sigma, unsigned k) {
  return "sigma_" + std::to_string(k) + " = 0 for '" + sigma.name() + "'";
}

double nonzero_coefficient(const Nonlinearity& sigma, unsigned k, const std::string& what) {
  require(sigma.analytic(), ErrorCode::Domain,
          what + " needs an analytic activation, got '" + sigma.name() + "'");
  const double c = sigma.coefficient(k);
  require(c != 0.0, ErrorCode::Domain,
          what + " needs a nonzero Taylor coefficient of degree " + std::to_string(k) + ": " +
              coefficient_name(sigma, k));
  return c;
}

}  // namespace

NetworkBuilder::NetworkBuilder(std::size_t n, Nonlinearity sigma)
    : n_(n), sigma_(sigma), s0_(sigma.analytic() ? sigma.eval(0.0) : 0.0) {
  require(n >= 1, ErrorCode::InvalidArgument, "builder needs at least one input");
}

NetworkBuilder::Value NetworkBuilder::input(std::size_t i) const {
  require(i < n_, ErrorCode::DimensionMismatch, "input index out of range");
  require(layers_.empty(), ErrorCode::InvalidArgument, "inputs are only readable at level 0");
  return {0, {{i, 1.0}}, 0.0};
}

void NetworkBuilder::check_current(const Value& u) const {
  require(u.level == level(), ErrorCode::InvalidArgument,
          "gate input from level " + std::to_string(u.level) + " used at level " +
              std::to_string(level()));
}

std::size_t NetworkBuilder::add_neuron(const Value& pre, double scale) {
  return add_neuron_combination({pre}, {scale});
}

std::size_t NetworkBuilder::add_neuron_combination(const std::vector<Value>& us,
                                                   const std::vector<double>& w) {
  std::map<std::size_t, double> merged;
  double bias = 0.0;
  for (std::size_t i = 0; i < us.size(); ++i) {
    check_current(us[i]);
    for (const auto& [unit, weight] : us[i].terms) merged[unit] += w[i] * weight;
    bias += w[i] * us[i].bias;
  }
  Row row{{}, bias};
  for (const auto& [unit, weight] : merged)
    if (weight != 0.0) row.terms.emplace_back(unit, weight);
  pending_.push_back(std::move(row));
  return pending_.size() - 1;
}

void NetworkBuilder::tag(std::size_t from, std::size_t to, GateTag t) {
  annotations_.push_back({level(), from, to, t, 0});
}

NetworkBuilder::Value NetworkBuilder::square(const Value& u) {
  const double s = 1.0 / (2.0 * nonzero_coefficient(sigma_, 2, "square gate"));
  const std::size_t h1 = add_neuron(u, 1.0);
  const std::size_t h2 = add_neuron(u, -1.0);
  pending_.push_back({{}, 0.0});
  const std::size_t h3 = pending_.size() - 1;
  tag(h1, h3 + 1, GateTag::Square);
  return {level() + 1, {{h1, s}, {h2, s}, {h3, -2.0 * s}}, 0.0};
}

NetworkBuilder::Value NetworkBuilder::identity(const Value& u, GateTag t) {
  const double s1 = nonzero_coefficient(sigma_, 1, "identity gate");
  const std::size_t h = add_neuron(u, kIdentityGain);
  tag(h, h + 1, t);
  return {level() + 1, {{h, 1.0 / (kIdentityGain * s1)}}, -s0_ / (kIdentityGain * s1)};
}

NetworkBuilder::Value NetworkBuilder::product(const Value& u, const Value& v) {
  return sign_pattern({u, v}, GateTag::Product);
}

NetworkBuilder::Value NetworkBuilder::sign_pattern(const std::vector<Value>& us, GateTag t) {
  const auto N = static_cast<unsigned>(us.size());
  require(N >= 1 && N < 24, ErrorCode::InvalidArgument, "sign-pattern gadget needs 1..23 inputs");
  const double scale = sign_pattern_scale(sigma_, N);
  Value out{level() + 1, {}, 0.0};
  const std::size_t first = pending_.size();
  std::vector<double> signs(N);
  for (std::size_t idx = 0; idx < (std::size_t{1} << N); ++idx) {
    double prod = 1.0;
    for (unsigned i = 0; i < N; ++i) {
      signs[i] = (idx >> i) & 1 ? -1.0 : 1.0;
      prod *= signs[i];
    }
    const std::size_t h = add_neuron_combination(us, signs);
    out.terms.emplace_back(h, prod * scale);
  }
  tag(first, pending_.size(), t);
  return out;
}

void NetworkBuilder::next_layer() {
  require(!pending_.empty(), ErrorCode::InvalidArgument, "empty hidden layer");
  const std::size_t width = layers_.empty() ? n_ : layers_.back().rows;
  AffineLayer L(pending_.size(), width);
  for (std::size_t r = 0; r < pending_.size(); ++r) {
    for (const auto& [unit, weight] : pending_[r].terms) L.w(r, unit) = weight;
    L.bias[r] = pending_[r].bias;
  }
  layers_.push_back(std::move(L));
  pending_.clear();
}

FeedforwardNetwork NetworkBuilder::finish(const Value& out) {
  require(pending_.empty(), ErrorCode::InvalidArgument, "unfinished hidden layer");
  check_current(out);
  const std::size_t width = layers_.empty() ? n_ : layers_.back().rows;
  AffineLayer L(1, width);
  for (const auto& [unit, weight] : out.terms) L.w(0, unit) += weight;
  L.bias[0] = out.bias;
  auto layers = layers_;
  layers.push_back(std::move(L));
  return FeedforwardNetwork(n_, sigma_, std::move(layers), annotations_);
}

double sign_pattern_scale(const Nonlinearity& sigma, unsigned N) {
  const double sN = nonzero_coefficient(sigma, N, "sign-pattern gadget");
  return 1.0 / (std::ldexp(factorial(N), static_cast<int>(N)) * sN);
}

FeedforwardNetwork shallow_product_gadget(unsigned N, const Nonlinearity& sigma) {
  require(N >= 1, ErrorCode::InvalidArgument, "gadget needs N >= 1");
  NetworkBuilder b(N, sigma);
  std::vector<NetworkBuilder::Value> ys;
  for (unsigned i = 0; i < N; ++i) ys.push_back(b.input(i));
  auto out = b.sign_pattern(ys);
  b.next_layer();
  return b.finish(out);
}

FeedforwardNetwork shallow_monomial(const ExponentVector& r, const Nonlinearity& sigma) {
  const std::size_t n = r.size();
  const unsigned d = r.degree();
  require(n >= 1 && d >= 1, ErrorCode::InvalidArgument, "monomial needs total degree >= 1");
  const double scale = sign_pattern_scale(sigma, d);

  std::vector<std::size_t> active;
  std::size_t width = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (r[i] == 0) continue;
    active.push_back(i);
    require(width <= (std::size_t{1} << 24) / (r[i] + 1), ErrorCode::InvalidArgument,
            "shallow monomial too wide");
    width *= r[i] + 1;
  }

  // Neuron for k (k_i minus signs among the r_i copies of x_i, first variable
  // fastest): weight r_i - 2 k_i, collapsed count prod C(r_i, k_i).
  AffineLayer hidden(width, n), out(1, width);
  std::vector<Exponent> k(active.size(), 0);
  for (std::size_t j = 0; j < width; ++j) {
    std::uint64_t count = 1;
    unsigned minus = 0;
    for (std::size_t a = 0; a < active.size(); ++a) {
      const std::size_t i = active[a];
      hidden.w(j, i) = static_cast<double>(r[i]) - 2.0 * k[a];
      std::uint64_t c = 1;
      for (Exponent t = 1; t <= k[a]; ++t) c = c * (r[i] - k[a] + t) / t;
      require(count <= UINT64_MAX / c, ErrorCode::Numeric, "multinomial count overflows");
      count *= c;
      minus += k[a];
    }
    out.w(0, j) = (minus % 2 ? -1.0 : 1.0) * static_cast<double>(count) * scale;
    for (std::size_t a = 0; a < active.size(); ++a) {
      if (++k[a] <= r[active[a]]) break;
      k[a] = 0;
    }
  }
  std::vector<AffineLayer> layers{std::move(hidden), std::move(out)};
  return FeedforwardNetwork(n, sigma, std::move(layers), {{0, 0, width, GateTag::SignPattern, 0}});
}

namespace {

unsigned floor_log2(unsigned d) { return static_cast<unsigned>(std::bit_width(d)) - 1; }

// Binary exponentiation of one value, one hidden layer per step.
struct PowerRun {
  unsigned d;
  unsigned L;
  unsigned k = 0;
  NetworkBuilder::Value sq;
  std::optional<NetworkBuilder::Value> acc;
  std::optional<NetworkBuilder::Value> result;

  PowerRun(unsigned d, NetworkBuilder::Value x) : d(d), L(floor_log2(d)), sq(std::move(x)) {
    if (d == 1) result = sq;
  }

  bool done() const { return result.has_value(); }

  void step(NetworkBuilder& b) {
    if (k < L) {
      const bool bit = (d >> k) & 1u;
      auto next = b.square(sq);
      if (bit)
        acc = acc ? b.product(*acc, sq) : b.identity(sq);
      else if (acc)
        acc = b.identity(*acc);
      sq = std::move(next);
      ++k;
      if (k == L && !acc) result = sq;
    } else {
      result = b.product(*acc, sq);
    }
  }
};

}  // namespace

FeedforwardNetwork deep_power(unsigned d, const Nonlinearity& sigma) {
  return deep_monomial(ExponentVector{static_cast<Exponent>(d)}, sigma);
}

FeedforwardNetwork deep_monomial(const ExponentVector& r, const Nonlinearity& sigma) {
  require(r.size() >= 1 && r.degree() >= 1, ErrorCode::InvalidArgument,
          "monomial needs total degree >= 1");
  NetworkBuilder b(r.size(), sigma);
  std::vector<PowerRun> runs;
  for (std::size_t i = 0; i < r.size(); ++i)
    if (r[i] > 0) runs.emplace_back(r[i], b.input(i));

  auto all_done = [&] {
    return std::all_of(runs.begin(), runs.end(), [](const PowerRun& p) { return p.done(); });
  };
  while (!all_done()) {
    for (auto& run : runs) {
      if (run.done())
        run.result = b.identity(*run.result, GateTag::Carry);
      else
        run.step(b);
    }
    b.next_layer();
  }

  std::vector<NetworkBuilder::Value> vals;
  for (auto& run : runs) vals.push_back(*run.result);
  while (vals.size() > 1) {
    std::vector<NetworkBuilder::Value> next;
    for (std::size_t i = 0; i + 1 < vals.size(); i += 2) next.push_back(b.product(vals[i], vals[i + 1]));
    if (vals.size() % 2) next.push_back(b.identity(vals.back(), GateTag::Carry));
    b.next_layer();
    vals = std::move(next);
  }
  return b.finish(vals.front());
}

TreePlan TreePlan::make(std::size_t n, std::vector<std::size_t> b) {
  require(n >= 1, ErrorCode::InvalidArgument, "tree plan needs n >= 1");
  require(!b.empty(), ErrorCode::InvalidArgument, "tree plan needs at least one layer");
  TreePlan plan;
  plan.n = n;
  std::size_t count = n;
  for (std::size_t bi : b) {
    require(bi >= 1, ErrorCode::InvalidArgument, "group sizes must be positive");
    plan.counts.push_back(count);
    const std::size_t groups = (count + bi - 1) / bi;
    plan.groups.push_back(groups);
    plan.short_groups.push_back(count % bi ? 1 : 0);
    count = groups;
  }
  require(count == 1, ErrorCode::InvalidArgument,
          "group sizes leave " + std::to_string(count) + " values after the last layer for n=" +
              std::to_string(n));
  plan.b = std::move(b);
  return plan;
}

bool TreePlan::exact() const {
  std::size_t prod = 1;
  for (std::size_t bi : b) {
    if (prod > n) return false;
    prod *= bi;
  }
  return prod == n;
}

FeedforwardNetwork tree_product(std::size_t n, const std::vector<std::size_t>& occurrences,
                                const TreePlan& plan, const Nonlinearity& sigma) {
  require(plan.n == occurrences.size(), ErrorCode::DimensionMismatch,
          "plan is for " + std::to_string(plan.n) + " factors, got " +
              std::to_string(occurrences.size()));
  NetworkBuilder b(n, sigma);
  std::vector<NetworkBuilder::Value> vals;
  for (std::size_t i : occurrences) vals.push_back(b.input(i));
  for (std::size_t bi : plan.b) {
    std::vector<NetworkBuilder::Value> next;
    for (std::size_t g = 0; g < vals.size(); g += bi) {
      std::vector<NetworkBuilder::Value> group(
          vals.begin() + static_cast<std::ptrdiff_t>(g),
          vals.begin() + static_cast<std::ptrdiff_t>(std::min(vals.size(), g + bi)));
      next.push_back(group.size() == 1 ? b.identity(group.front(), GateTag::Carry)
                                       : b.sign_pattern(group));
    }
    b.next_layer();
    vals = std::move(next);
  }
  return b.finish(vals.front());
}

FeedforwardNetwork tree_product(std::size_t n, const TreePlan& plan, const Nonlinearity& sigma) {
  std::vector<std::size_t> occ(n);
  for (std::size_t i = 0; i < n; ++i) occ[i] = i;
  return tree_product(n, occ, plan, sigma);
}

namespace {

struct Solve {
  Eigen::VectorXd c;
  double condition;
  bool ok;
};

Solve solve_vandermonde(const std::vector<double>& nodes, const std::vector<double>& sig,
                        const Eigen::VectorXd& rhs) {
  const auto m = static_cast<Eigen::Index>(nodes.size());
  Eigen::MatrixXd M(m, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < m; ++i)
      M(j, i) = sig[static_cast<std::size_t>(j)] *
                std::pow(nodes[static_cast<std::size_t>(i)], static_cast<double>(j));
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const auto& sv = svd.singularValues();
  const double cond = sv(m - 1) > 0 ? sv(0) / sv(m - 1) : INFINITY;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  Solve s{Eigen::VectorXd::Zero(m), cond, false};
  if (!lu.isInvertible() || !(cond < 1e12)) return s;
  s.c = lu.solve(rhs);
  const double scale = std::max(rhs.cwiseAbs().maxCoeff(), 1e-300);
  s.ok = (M * s.c - rhs).cwiseAbs().maxCoeff() <= 1e-9 * scale && s.c.allFinite();
  return s;
}

}  // namespace

VandermondeFit univariate_network(const SparsePolynomial& p, const Nonlinearity& sigma) {
  require(p.variables() == 1, ErrorCode::DimensionMismatch,
          "univariate construction needs n = 1, got n=" + std::to_string(p.variables()));
  const unsigned d = p.degree();
  const std::size_t m = d + 1;
  std::vector<double> sig(m);
  for (unsigned j = 0; j <= d; ++j) sig[j] = nonzero_coefficient(sigma, j, "Vandermonde network");

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  for (const auto& mono : p.monomials()) rhs(mono.exponents[0]) = mono.coefficient;

  std::vector<double> nodes(m);
  for (std::size_t i = 0; i < m; ++i) {
    nodes[i] = std::cos((2.0 * i + 1.0) * std::numbers::pi / (2.0 * m));
    if (std::abs(nodes[i]) < 1e-14) nodes[i] = 0.0;
  }
  auto s = solve_vandermonde(nodes, sig, rhs);
  bool rescaled = false;
  if (!s.ok && d >= 1) {
    // Balance the first and last rows of the system.
    const double k = std::pow(std::abs(sig[0] / sig[d]), 1.0 / d);
    for (auto& a : nodes) a *= k;
    s = solve_vandermonde(nodes, sig, rhs);
    rescaled = true;
  }
  require(s.ok, ErrorCode::Numeric,
          "Vandermonde system is singular or ill-conditioned (condition number " +
              std::to_string(s.condition) + ")");

  AffineLayer hidden(m, 1), out(1, m);
  for (std::size_t i = 0; i < m; ++i) {
    hidden.w(i, 0) = nodes[i];
    out.w(0, i) = s.c(static_cast<Eigen::Index>(i));
  }
  std::vector<AffineLayer> layers{std::move(hidden), std::move(out)};
  return {FeedforwardNetwork(1, sigma, std::move(layers), {{0, 0, m, GateTag::Vandermonde, 0}}),
          nodes, s.condition, rescaled};
}

BuildMode build_mode_from_string(const std::string& s) {
  if (s == "shallow") return BuildMode::Shallow;
  if (s == "deep") return BuildMode::Deep;
  if (s == "tree") return BuildMode::Tree;
  if (s == "vandermonde") return BuildMode::Vandermonde;
  fail(ErrorCode::InvalidArgument, "unknown mode '" + s + "' (shallow|deep|tree|vandermonde)");
}

std::string to_string(BuildMode mode) {
  switch (mode) {
    case BuildMode::Shallow: return "shallow";
    case BuildMode::Deep: return "deep";
    case BuildMode::Tree: return "tree";
    case BuildMode::Vandermonde: return "vandermonde";
  }
  return "?";
}

FeedforwardNetwork monomial_network(const ExponentVector& r, const Nonlinearity& sigma,
                                    BuildMode mode, std::size_t k) {
  switch (mode) {
    case BuildMode::Shallow: return shallow_monomial(r, sigma);
    case BuildMode::Deep: return deep_monomial(r, sigma);
    case BuildMode::Vandermonde:
      return univariate_network(SparsePolynomial::monomial(r), sigma).network;
    case BuildMode::Tree: break;
  }
  const unsigned d = r.degree();
  require(d >= 1, ErrorCode::InvalidArgument, "monomial needs total degree >= 1");
  std::vector<std::size_t> occ;
  for (std::size_t i = 0; i < r.size(); ++i) occ.insert(occ.end(), r[i], i);
  if (d == 1) {
    NetworkBuilder b(r.size(), sigma);
    return b.finish(b.input(occ.front()));
  }
  if (k == 0) k = depth_rule_of_thumb(d, 1024);
  const auto b = k == 1 ? std::vector<std::size_t>{d} : integer_group_plan(d, k);
  return tree_product(r.size(), occ, TreePlan::make(d, b), sigma);
}

FeedforwardNetwork extrapolate_residues(const FeedforwardNetwork& net, unsigned m, unsigned D,
                                        unsigned step) {
  require(m >= 1 && step >= 1, ErrorCode::InvalidArgument, "bad extrapolation request");
  if (D <= m) return net;
  const unsigned J = (D - m) / step + 1;
  if (J == 1) return net;
  // N(a x) / a^m = q + sum_t a^{step t} R_t; weights are the Lagrange basis at
  // zero over z = a^step, cancelling R_1 .. R_{J-1}.
  std::vector<double> a(J), z(J);
  for (unsigned l = 0; l < J; ++l) {
    a[l] = 1.0 / (l + 1.0);
    z[l] = std::pow(a[l], static_cast<double>(step));
  }
  std::vector<FeedforwardNetwork> copies;
  for (unsigned l = 0; l < J; ++l) {
    double w = 1.0;
    for (unsigned k = 0; k < J; ++k)
      if (k != l) w *= z[k] / (z[k] - z[l]);
    copies.push_back(scale_output(rescale_network(net, m, a[l]), w));
  }
  const auto sum = sum_networks(copies);
  auto ann = sum.annotations();
  for (auto& x : ann) x.block = 0;
  return FeedforwardNetwork(sum.inputs(), sum.activation(), sum.layers(), std::move(ann));
}

FeedforwardNetwork build_polynomial_network(const SparsePolynomial& p, const Nonlinearity& sigma,
                                            BuildMode mode, std::size_t k, bool taylor_exact) {
  const std::size_t n = p.variables();
  if (mode == BuildMode::Vandermonde) return univariate_network(p, sigma).network;
  std::vector<FeedforwardNetwork> parts;
  std::vector<unsigned> degrees;
  std::size_t depth = 0;
  for (const auto& m : p.monomials()) {
    if (m.exponents.degree() == 0) continue;
    parts.push_back(scale_output(monomial_network(m.exponents, sigma, mode, k), m.coefficient));
    degrees.push_back(m.exponents.degree());
    depth = std::max(depth, parts.back().depth());
  }
  if (parts.empty()) {
    AffineLayer L(1, n);
    L.bias[0] = p.constant_term();
    return FeedforwardNetwork(n, sigma, {std::move(L)});
  }
  if (taylor_exact) {
    const unsigned D = p.degree();
    for (std::size_t j = 0; j < parts.size(); ++j) {
      // Sign-pattern outputs only carry residues of the monomial's parity;
      // identity padding and deep gates break that symmetry.
      const bool parity = mode != BuildMode::Deep && parts[j].depth() == depth;
      parts[j] = extrapolate_residues(pad_depth(parts[j], depth), degrees[j], D, parity ? 2 : 1);
    }
  }
  return scale_output(sum_networks(parts), 1.0, p.constant_term());
}

}  // namespace polydepth
