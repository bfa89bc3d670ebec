#pragma once

#include <boost/math/special_functions/legendre.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "sphobs/errors.hpp"
#include "sphobs/sphere.hpp"

namespace sphobs {

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [a, b], nodes ascending. Exact for polynomials of degree <= 2n-1.
inline GaussRule gauss_legendre(int n, double a = -1.0, double b = 1.0) {
  if (n < 1) throw PreconditionError("gauss_legendre: n must be >= 1");
  std::vector<double> pos = boost::math::legendre_p_zeros<double>(n);
  std::vector<double> x;
  x.reserve(static_cast<std::size_t>(n));
  for (double z : pos)
    if (z > 0.0) x.push_back(-z);
  for (double z : pos) x.push_back(z);
  std::sort(x.begin(), x.end());

  GaussRule rule;
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  for (double z : x) {
    const double dp = boost::math::legendre_p_prime(n, z);
    rule.nodes.push_back(mid + half * z);
    rule.weights.push_back(half * 2.0 / ((1.0 - z * z) * dp * dp));
  }
  return rule;
}

/// Smallest integer >= n whose only prime factors are 2, 3 and 5.
inline int next_smooth_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

/// Gauss-Legendre (in cos theta) x uniform-longitude product grid.
///
/// With bandwidth L the grid integrates every spherical polynomial of degree <= 2L exactly.
class QuadGrid {
 public:
  explicit QuadGrid(int bandwidth) : lmax_(bandwidth) {
    if (bandwidth < 0) throw PreconditionError("QuadGrid: bandwidth must be >= 0");
    GaussRule rule = gauss_legendre(bandwidth + 1);
    // colatitude ascending: cos theta descending
    std::reverse(rule.nodes.begin(), rule.nodes.end());
    std::reverse(rule.weights.begin(), rule.weights.end());
    cos_theta_ = std::move(rule.nodes);
    theta_weights_ = std::move(rule.weights);
    n_phi_ = next_smooth_size(2 * bandwidth + 2);
    phi_step_ = kTwoPi / n_phi_;
  }

  int lmax() const { return lmax_; }
  int n_theta() const { return static_cast<int>(cos_theta_.size()); }
  int n_phi() const { return n_phi_; }
  std::size_t size() const { return cos_theta_.size() * static_cast<std::size_t>(n_phi_); }
  std::size_t index(int j, int k) const { return static_cast<std::size_t>(j) * n_phi_ + k; }

  double cos_theta(int j) const { return cos_theta_[j]; }
  double theta(int j) const { return std::acos(cos_theta_[j]); }
  double phi(int k) const { return phi_step_ * k; }
  double phi_step() const { return phi_step_; }
  /// Gauss weight of ring j (in cos theta).
  double ring_weight(int j) const { return theta_weights_[j]; }
  /// Area weight of node (j, k); the weights sum to 4 pi.
  double weight(int j) const { return theta_weights_[j] * phi_step_; }

  Vec3 point(int j, int k) const {
    const double c = cos_theta_[j];
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    return {s * std::cos(phi(k)), s * std::sin(phi(k)), c};
  }

  /// Quadrature of a pointwise function f(Vec3) -> double.
  template <class F>
  double integrate(F&& f) const {
    double acc = 0.0;
    for (int j = 0; j < n_theta(); ++j) {
      double ring = 0.0;
      for (int k = 0; k < n_phi_; ++k) ring += f(point(j, k));
      acc += weight(j) * ring;
    }
    return acc;
  }

  /// Quadrature of sampled values laid out ring-major.
  template <class Vec>
  double integrate_values(const Vec& values) const {
    double acc = 0.0;
    for (int j = 0; j < n_theta(); ++j) {
      double ring = 0.0;
      for (int k = 0; k < n_phi_; ++k) ring += values[index(j, k)];
      acc += weight(j) * ring;
    }
    return acc;
  }

 private:
  int lmax_;
  std::vector<double> cos_theta_;
  std::vector<double> theta_weights_;
  int n_phi_;
  double phi_step_;
};

}  // namespace sphobs
