#pragma once

// Rotations of coefficient arrays through Wigner D-matrices.

#include <cmath>
#include <vector>

#include "sphobs/harmonics.hpp"

namespace sphobs {

/// Wigner small-d matrices d^l_{m'm}(beta) for 0 <= l <= L.
///
/// Each (m', m) column is seeded in closed form at l = max(|m|, |m'|) and
/// advanced with the three-term recurrence in l.
class WignerD {
 public:
  WignerD(int lmax, double beta) : lmax_(lmax), beta_(beta) {
    blocks_.resize(static_cast<std::size_t>(lmax + 1));
    for (int l = 0; l <= lmax; ++l) blocks_[l].assign(static_cast<std::size_t>(2 * l + 1) * (2 * l + 1), 0.0);
    const double cb = std::cos(beta);
    for (int mp = -lmax; mp <= lmax; ++mp) {
      for (int m = -lmax; m <= lmax; ++m) {
        const int l0 = std::max(std::abs(m), std::abs(mp));
        double prev = 0.0;
        double cur = seed(l0, mp, m);
        at(l0, mp, m) = cur;
        for (int l = l0; l < lmax; ++l) {
          double next;
          if (l == 0) {
            next = cb;  // d^1_00 = cos(beta)
          } else {
            const double num = (2.0 * l + 1.0) * (l * (l + 1.0) * cb - static_cast<double>(m) * mp) * cur -
                               (l + 1.0) * std::sqrt((static_cast<double>(l) * l - m * m) * (static_cast<double>(l) * l - mp * mp)) * prev;
            const double den = l * std::sqrt(((l + 1.0) * (l + 1.0) - m * m) * ((l + 1.0) * (l + 1.0) - mp * mp));
            next = num / den;
          }
          prev = cur;
          cur = next;
          at(l + 1, mp, m) = cur;
        }
      }
    }
  }

  int lmax() const { return lmax_; }
  double beta() const { return beta_; }
  double operator()(int l, int mp, int m) const { return blocks_[l][offset(l, mp, m)]; }

 private:
  static std::size_t offset(int l, int mp, int m) {
    return static_cast<std::size_t>(mp + l) * (2 * l + 1) + static_cast<std::size_t>(m + l);
  }
  double& at(int l, int mp, int m) { return blocks_[l][offset(l, mp, m)]; }

  // Closed-form sum at j = max(|m|, |m'|), where it has a single term.
  double seed(int j, int mp, int m) const {
    const double c = std::cos(0.5 * beta_), s = std::sin(0.5 * beta_);
    const int smin = std::max(0, m - mp), smax = std::min(j + m, j - mp);
    const double lpre = 0.5 * (std::lgamma(j + mp + 1.0) + std::lgamma(j - mp + 1.0) + std::lgamma(j + m + 1.0) + std::lgamma(j - m + 1.0));
    double acc = 0.0;
    for (int k = smin; k <= smax; ++k) {
      const double lden = std::lgamma(j + m - k + 1.0) + std::lgamma(k + 1.0) + std::lgamma(mp - m + k + 1.0) + std::lgamma(j - mp - k + 1.0);
      const double sign = ((mp - m + k) % 2 == 0) ? 1.0 : -1.0;
      acc += sign * std::exp(lpre - lden) * std::pow(c, 2 * j + m - mp - 2 * k) * std::pow(s, mp - m + 2 * k);
    }
    return acc;
  }

  int lmax_;
  double beta_;
  std::vector<std::vector<double>> blocks_;
};

/// Active rotation R = Rz(alpha) Ry(beta) Rz(gamma) acting on functions by (R f)(x) = f(R^{-1} x).
class Rotation {
 public:
  Rotation(double alpha, double beta, double gamma) : alpha_(alpha), beta_(beta), gamma_(gamma) {}

  static Rotation from_matrix(const Eigen::Matrix3d& r) {
    const double beta = std::acos(std::clamp(r(2, 2), -1.0, 1.0));
    if (std::sin(beta) < 1e-12) {
      const double alpha = r(2, 2) > 0.0 ? std::atan2(r(1, 0), r(0, 0)) : std::atan2(-r(1, 0), -r(0, 0));
      return Rotation(alpha, beta, 0.0);
    }
    return Rotation(std::atan2(r(1, 2), r(0, 2)), beta, std::atan2(r(2, 1), -r(2, 0)));
  }

  /// Rotation taking the north pole to p (Rz(lon) Ry(colat)).
  static Rotation pole_to(const UnitVec3& p) { return Rotation(p.longitude(), p.colatitude(), 0.0); }

  Rotation inverse() const { return Rotation(-gamma_, -beta_, -alpha_); }

  Eigen::Matrix3d matrix() const {
    return (Eigen::AngleAxisd(alpha_, Vec3::UnitZ()) * Eigen::AngleAxisd(beta_, Vec3::UnitY()) *
            Eigen::AngleAxisd(gamma_, Vec3::UnitZ()))
        .toRotationMatrix();
  }

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double gamma() const { return gamma_; }

  /// Coefficients of x -> f(R^{-1} x): c'_{lm'} = sum_m e^{-i m' alpha} d^l_{m'm}(beta) e^{-i m gamma} c_{lm}.
  HarmonicCoeffs apply(const HarmonicCoeffs& c) const { return apply(c, WignerD(c.lmax(), beta_)); }

  HarmonicCoeffs apply(const HarmonicCoeffs& c, const WignerD& d) const {
    const int L = c.lmax();
    if (d.lmax() < L) throw PreconditionError("Rotation::apply: Wigner table bandwidth too small");
    HarmonicCoeffs out(L);
    std::vector<cplx> tmp;
    for (int l = 0; l <= L; ++l) {
      tmp.assign(static_cast<std::size_t>(2 * l + 1), 0.0);
      for (int m = -l; m <= l; ++m) tmp[m + l] = c(l, m) * std::polar(1.0, -m * gamma_);
      for (int mp = -l; mp <= l; ++mp) {
        cplx acc = 0.0;
        for (int m = -l; m <= l; ++m) acc += d(l, mp, m) * tmp[m + l];
        out(l, mp) = acc * std::polar(1.0, -mp * alpha_);
      }
    }
    return out;
  }

 private:
  double alpha_, beta_, gamma_;
};

}  // namespace sphobs
