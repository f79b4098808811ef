#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace stylo {

struct NonFiniteLoss : std::runtime_error {
  NonFiniteLoss() : std::runtime_error("objective returned a non-finite value") {}
};

// Central-difference gradient estimate. Test oracle for every hand-derived
// backward pass; expects a deterministic objective and at least 64-bit
// arithmetic (long double shrinks the ulp noise floor for near-zero
// gradients; the comparison tolerance assumes 64-bit or better).
template <class S, class F>
std::vector<S> finite_difference_gradient(const F& f, std::vector<S> theta, S eps) {
  std::vector<S> grad(theta.size(), S(0));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const S orig = theta[i];
    theta[i] = orig + eps;
    const S fp = f(theta);
    theta[i] = orig - eps;
    const S fm = f(theta);
    theta[i] = orig;
    if (!std::isfinite(static_cast<double>(fp)) || !std::isfinite(static_cast<double>(fm)))
      throw NonFiniteLoss();
    grad[i] = (fp - fm) / (S(2) * eps);
  }
  return grad;
}

inline double relative_error(double a, double b) {
  const double denom = std::max({std::fabs(a), std::fabs(b), 1e-8});
  return std::fabs(a - b) / denom;
}

}  // namespace stylo
