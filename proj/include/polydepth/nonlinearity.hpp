#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace polydepth {

enum class Activation { Exp, Sigmoid, Tanh, Softplus, Relu };

/// Scalar activation with pointwise evaluation and Taylor coefficients about an
/// arbitrary center. Coefficients are the sigma_k in sigma(c + t) = sum_k sigma_k t^k.
class Nonlinearity {
 public:
  explicit Nonlinearity(Activation id) : id_(id) {}
  static Nonlinearity from_name(std::string_view name);

  Activation id() const noexcept { return id_; }
  std::string name() const;
  bool analytic() const noexcept { return id_ != Activation::Relu; }

  double eval(double x) const;
  double derivative(double x) const;

  /// First `count` Taylor coefficients about `center`. Throws for relu at 0.
  std::vector<double> taylor(double center, unsigned count) const;

  /// Taylor coefficient of degree k about the origin.
  double coefficient(unsigned k) const;

  friend bool operator==(const Nonlinearity&, const Nonlinearity&) = default;

 private:
  Activation id_;
};

}  // namespace polydepth
