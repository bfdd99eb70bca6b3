#include "polydepth/nonlinearity.hpp"

#include <cmath>

#include "polydepth/error.hpp"

namespace polydepth {

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// Coefficients of y(c + t) for y' = alpha + beta*y + gamma*y^2, y(c) = y0.
std::vector<double> riccati_series(double y0, double alpha, double beta, double gamma,
                                   unsigned count) {
  std::vector<double> a(count, 0.0);
  if (count == 0) return a;
  a[0] = y0;
  for (unsigned k = 0; k + 1 < count; ++k) {
    double sq = 0.0;
    for (unsigned i = 0; i <= k; ++i) sq += a[i] * a[k - i];
    const double rhs = (k == 0 ? alpha : 0.0) + beta * a[k] + gamma * sq;
    a[k + 1] = rhs / static_cast<double>(k + 1);
  }
  return a;
}

}  // namespace

Nonlinearity Nonlinearity::from_name(std::string_view name) {
  if (name == "exp") return Nonlinearity(Activation::Exp);
  if (name == "sigmoid") return Nonlinearity(Activation::Sigmoid);
  if (name == "tanh") return Nonlinearity(Activation::Tanh);
  if (name == "softplus") return Nonlinearity(Activation::Softplus);
  if (name == "relu") return Nonlinearity(Activation::Relu);
  fail(ErrorCode::InvalidArgument, "unknown activation '" + std::string(name) + "'");
}

std::string Nonlinearity::name() const {
  switch (id_) {
    case Activation::Exp: return "exp";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::Softplus: return "softplus";
    case Activation::Relu: return "relu";
  }
  return "?";
}

double Nonlinearity::eval(double x) const {
  switch (id_) {
    case Activation::Exp: return std::exp(x);
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Tanh: return std::tanh(x);
    case Activation::Softplus: return softplus(x);
    case Activation::Relu: return x > 0 ? x : 0.0;
  }
  return 0.0;
}

double Nonlinearity::derivative(double x) const {
  switch (id_) {
    case Activation::Exp: return std::exp(x);
    case Activation::Sigmoid: {
      const double s = sigmoid(x);
      return s * (1.0 - s);
    }
    case Activation::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::Softplus: return sigmoid(x);
    case Activation::Relu: return x > 0 ? 1.0 : 0.0;
  }
  return 0.0;
}

std::vector<double> Nonlinearity::taylor(double center, unsigned count) const {
  switch (id_) {
    case Activation::Exp: {
      std::vector<double> a(count);
      double term = std::exp(center);
      for (unsigned k = 0; k < count; ++k) {
        if (k > 0) term /= static_cast<double>(k);
        a[k] = term;
      }
      return a;
    }
    case Activation::Sigmoid:
      // s' = s - s^2
      return riccati_series(sigmoid(center), 0.0, 1.0, -1.0, count);
    case Activation::Tanh:
      // t' = 1 - t^2
      return riccati_series(std::tanh(center), 1.0, 0.0, -1.0, count);
    case Activation::Softplus: {
      std::vector<double> a(count, 0.0);
      if (count == 0) return a;
      a[0] = softplus(center);
      const auto s = riccati_series(sigmoid(center), 0.0, 1.0, -1.0, count);
      for (unsigned k = 1; k < count; ++k) a[k] = s[k - 1] / static_cast<double>(k);
      return a;
    }
    case Activation::Relu: {
      require(center != 0.0, ErrorCode::Domain, "relu has no Taylor expansion about 0");
      std::vector<double> a(count, 0.0);
      if (center > 0) {
        if (count > 0) a[0] = center;
        if (count > 1) a[1] = 1.0;
      }
      return a;
    }
  }
  return {};
}

double Nonlinearity::coefficient(unsigned k) const { return taylor(0.0, k + 1)[k]; }

}  // namespace polydepth
