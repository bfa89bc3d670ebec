#pragma once

// Funk (great-circle average) transform on S^2, its inversion on even
// functions, and the triaxial potential family.

#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "sphobs/harmonics.hpp"

namespace sphobs {

/// Q(x) = a x1^2 + b x2^2 + c x3^2 with 0 < a < b < c.
struct TriaxialForm {
  double a, b, c;

  TriaxialForm(double a_, double b_, double c_) : a(a_), b(b_), c(c_) {
    if (!(0.0 < a && a < b && b < c)) throw PreconditionError("TriaxialForm: requires 0<a<b<c");
  }

  Vec3 diag() const { return {a, b, c}; }
  double value(const Vec3& x) const { return a * x.x() * x.x() + b * x.y() * x.y() + c * x.z() * x.z(); }
  /// Ambient gradient 2 Q x.
  Vec3 gradient(const Vec3& x) const { return 2.0 * diag().cwiseProduct(x); }
  double trace() const { return a + b + c; }
};

/// P_l(0) for 0 <= l <= L: the Funk multiplier on degree-l harmonics.
class FunkMultiplierTable {
 public:
  explicit FunkMultiplierTable(int lmax) {
    if (lmax < 0) throw PreconditionError("FunkMultiplierTable: lmax must be >= 0");
    p_.assign(static_cast<std::size_t>(lmax + 1), 0.0);
    p_[0] = 1.0;
    for (int l = 2; l <= lmax; l += 2) p_[l] = -static_cast<double>(l - 1) / l * p_[l - 2];
  }

  int lmax() const { return static_cast<int>(p_.size()) - 1; }
  double operator()(int l) const { return p_[l]; }
  /// Inversion gain 1/|P_l(0)| at even l.
  double amplification(int l) const {
    if (l % 2 != 0) throw DomainError("FunkMultiplierTable: odd degrees are not invertible");
    return 1.0 / std::abs(p_[l]);
  }

 private:
  std::vector<double> p_;
};

/// Mean of f over the great circle {x : x.n = 0} by the N_t-point trapezoid rule.
template <class F>
double funk_transform_quadrature(F&& f, const UnitVec3& n, int n_t = 256) {
  if (n_t < 16) throw PreconditionError("funk_transform_quadrature: N_t must be >= 16");
  const auto [e1, e2] = frame_at(n);
  double acc = 0.0;
  for (int i = 0; i < n_t; ++i) {
    const double t = kTwoPi * i / n_t;
    acc += f(Vec3(std::cos(t) * e1.vec() + std::sin(t) * e2.vec()));
  }
  return acc / n_t;
}

/// Funk transform in coefficient space: c_lm -> P_l(0) c_lm.
inline HarmonicCoeffs funk_transform_coeffs(const HarmonicCoeffs& c) {
  const FunkMultiplierTable p(c.lmax());
  return apply_degree_multiplier(c, [&](int l) { return p(l); });
}

/// Largest |c_lm| over odd l.
inline double odd_part_max(const HarmonicCoeffs& c) {
  double worst = 0.0;
  for (int l = 1; l <= c.lmax(); l += 2)
    for (int m = -l; m <= l; ++m) worst = std::max(worst, std::abs(c(l, m)));
  return worst;
}

/// Inverse of the Funk transform on even expansions.
inline HarmonicCoeffs invert_even(const HarmonicCoeffs& c, double tol = 1e-10) {
  if (odd_part_max(c) > tol) throw PreconditionError("invert_even: input has odd part, not in the image of the Funk transform");
  const FunkMultiplierTable p(c.lmax());
  return apply_degree_multiplier(c, [&](int l) { return (l % 2 == 0) ? 1.0 / p(l) : 0.0; });
}

/// Coefficients of Q restricted to S^2 (degree <= 2).
inline HarmonicCoeffs quadratic_form_coeffs(const TriaxialForm& q) {
  const QuadGrid g(2);
  HarmonicCoeffs c = analyze(sample_on_grid(g, [&](const Vec3& x) { return cplx(q.value(x)); }), g);
  for (std::size_t i = 0; i < c.size(); ++i)
    if (std::abs(c[i]) < 1e-15) c[i] = 0.0;
  return c;
}

/// V with Funk transform equal to Q on S^2, computed by inversion.
inline HarmonicCoeffs synthesize_potential(const TriaxialForm& q) { return invert_even(quadratic_form_coeffs(q)); }

/// Closed form of the same potential: V(x) = (a+b+c) - 2 Q(x).
inline double potential_value(const TriaxialForm& q, const Vec3& x) { return q.trace() - 2.0 * q.value(x); }

inline std::string potential_formula(const TriaxialForm& q) {
  auto num = [](double v) {
    std::ostringstream os;
    os << std::setprecision(15) << v;
    return os.str();
  };
  return "V(x) = " + num(q.trace()) + " - 2*(" + num(q.a) + "*x1^2 + " + num(q.b) + "*x2^2 + " + num(q.c) + "*x3^2)";
}

}  // namespace sphobs
