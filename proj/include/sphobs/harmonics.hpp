#pragma once

// Complex orthonormal spherical harmonics (Condon-Shortley phase), analysis
// and synthesis on a QuadGrid, spectral multipliers and frequency windows.

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <random>
#include <span>
#include <vector>

#include "sphobs/errors.hpp"
#include "sphobs/quadrature.hpp"
#include "sphobs/sphere.hpp"

namespace sphobs {

using cplx = std::complex<double>;

/// Truncated coefficient array c[l][m], 0 <= l <= L, -l <= m <= l.
class HarmonicCoeffs {
 public:
  HarmonicCoeffs() : HarmonicCoeffs(0) {}
  explicit HarmonicCoeffs(int lmax) : lmax_(lmax) {
    if (lmax < 0) throw PreconditionError("HarmonicCoeffs: lmax must be >= 0");
    c_.assign(static_cast<std::size_t>(lmax + 1) * (lmax + 1), cplx(0.0, 0.0));
  }

  static HarmonicCoeffs delta(int lmax, int l, int m, cplx value = 1.0) {
    HarmonicCoeffs h(lmax);
    h(l, m) = value;
    return h;
  }

  static std::size_t index(int l, int m) { return static_cast<std::size_t>(l * l + l + m); }
  static int size_for(int lmax) { return (lmax + 1) * (lmax + 1); }

  int lmax() const { return lmax_; }
  std::size_t size() const { return c_.size(); }

  cplx& operator()(int l, int m) { return c_[index(l, m)]; }
  const cplx& operator()(int l, int m) const { return c_[index(l, m)]; }
  cplx& operator[](std::size_t i) { return c_[i]; }
  const cplx& operator[](std::size_t i) const { return c_[i]; }

  std::span<cplx> data() { return c_; }
  std::span<const cplx> data() const { return c_; }

  double norm2() const {
    double s = 0.0;
    for (const cplx& z : c_) s += std::norm(z);
    return s;
  }
  double norm() const { return std::sqrt(norm2()); }

  bool all_finite() const {
    for (const cplx& z : c_)
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
  }

  /// Copy truncated or zero-padded to a new bandwidth.
  HarmonicCoeffs resized(int lmax) const {
    HarmonicCoeffs out(lmax);
    const int lc = std::min(lmax, lmax_);
    for (int l = 0; l <= lc; ++l)
      for (int m = -l; m <= l; ++m) out(l, m) = (*this)(l, m);
    return out;
  }

  /// Highest degree carrying a coefficient above tol (-1 when all vanish).
  int effective_degree(double tol = 0.0) const {
    for (int l = lmax_; l >= 0; --l)
      for (int m = -l; m <= l; ++m)
        if (std::abs((*this)(l, m)) > tol) return l;
    return -1;
  }

  /// Largest violation of c[l][-m] = (-1)^m conj(c[l][m]); zero for real-valued functions.
  double real_symmetry_defect() const {
    double d = 0.0;
    for (int l = 0; l <= lmax_; ++l)
      for (int m = 1; m <= l; ++m) {
        const double sign = (m % 2 == 0) ? 1.0 : -1.0;
        d = std::max(d, std::abs((*this)(l, -m) - sign * std::conj((*this)(l, m))));
      }
    for (int l = 0; l <= lmax_; ++l) d = std::max(d, std::abs((*this)(l, 0).imag()));
    return d;
  }

  HarmonicCoeffs& operator+=(const HarmonicCoeffs& o) {
    require_same(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  HarmonicCoeffs& operator-=(const HarmonicCoeffs& o) {
    require_same(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  HarmonicCoeffs& operator*=(cplx s) {
    for (cplx& z : c_) z *= s;
    return *this;
  }
  friend HarmonicCoeffs operator+(HarmonicCoeffs a, const HarmonicCoeffs& b) { return a += b; }
  friend HarmonicCoeffs operator-(HarmonicCoeffs a, const HarmonicCoeffs& b) { return a -= b; }
  friend HarmonicCoeffs operator*(cplx s, HarmonicCoeffs a) { return a *= s; }

  /// L2 inner product <a, b> = sum conj(a) b.
  friend cplx inner(const HarmonicCoeffs& a, const HarmonicCoeffs& b) {
    a.require_same(b);
    cplx s = 0.0;
    for (std::size_t i = 0; i < a.c_.size(); ++i) s += std::conj(a.c_[i]) * b.c_[i];
    return s;
  }

  double max_abs_diff(const HarmonicCoeffs& o) const {
    require_same(o);
    double d = 0.0;
    for (std::size_t i = 0; i < c_.size(); ++i) d = std::max(d, std::abs(c_[i] - o.c_[i]));
    return d;
  }

 private:
  void require_same(const HarmonicCoeffs& o) const {
    if (o.lmax_ != lmax_) throw PreconditionError("HarmonicCoeffs: bandwidth mismatch");
  }

  int lmax_;
  std::vector<cplx> c_;
};

/// Random coefficients with independent complex Gaussian entries; real-symmetric when requested.
template <class Rng>
HarmonicCoeffs random_coeffs(int lmax, Rng& rng, bool real_valued = false) {
  std::normal_distribution<double> g(0.0, 1.0);
  HarmonicCoeffs h(lmax);
  for (int l = 0; l <= lmax; ++l)
    for (int m = -l; m <= l; ++m) h(l, m) = cplx(g(rng), g(rng));
  if (real_valued) {
    for (int l = 0; l <= lmax; ++l) {
      h(l, 0) = h(l, 0).real();
      for (int m = 1; m <= l; ++m) h(l, -m) = ((m % 2 == 0) ? 1.0 : -1.0) * std::conj(h(l, m));
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Associated Legendre functions, unit-normalized on S^2 with Condon-Shortley phase:
// Y_lm(theta, phi) = P_lm(cos theta) e^{i m phi}. Stored triangularly for m >= 0.

inline std::size_t tri_index(int l, int m) { return static_cast<std::size_t>(l) * (l + 1) / 2 + m; }
inline std::size_t tri_size(int lmax) { return static_cast<std::size_t>(lmax + 1) * (lmax + 2) / 2; }

/// Fills out[tri_index(l,m)] = P_lm(cos theta), 0 <= m <= l <= lmax.
///
/// Sectoral seed P_mm = -sqrt((2m+1)/(2m)) sin(theta) P_{m-1,m-1}, then the
/// normalized three-term recurrence in l; no factorials are formed.
inline void legendre_normalized(int lmax, double cos_theta, double sin_theta, std::span<double> out) {
  double pmm = 1.0 / std::sqrt(4.0 * kPi);
  for (int m = 0; m <= lmax; ++m) {
    if (m > 0) pmm *= -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * sin_theta;
    out[tri_index(m, m)] = pmm;
    if (m == lmax) break;
    double p_lm2 = pmm;
    double p_lm1 = std::sqrt(2.0 * m + 3.0) * cos_theta * pmm;
    out[tri_index(m + 1, m)] = p_lm1;
    for (int l = m + 2; l <= lmax; ++l) {
      const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - static_cast<double>(m) * m));
      const double b = std::sqrt(((l - 1.0) * (l - 1.0) - static_cast<double>(m) * m) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
      const double p = a * (cos_theta * p_lm1 - b * p_lm2);
      out[tri_index(l, m)] = p;
      p_lm2 = p_lm1;
      p_lm1 = p;
    }
  }
}

/// P_lm together with dP_lm/dtheta and P_lm / sin(theta) (the latter only for m >= 1; 0 at m = 0).
struct LegendreDerivs {
  std::vector<double> p, dtheta, over_sin;
};

inline LegendreDerivs legendre_with_derivatives(int lmax, double cos_theta, double sin_theta) {
  LegendreDerivs r;
  const std::size_t n = tri_size(lmax + 1);
  r.p.assign(n, 0.0);
  r.dtheta.assign(n, 0.0);
  r.over_sin.assign(n, 0.0);
  legendre_normalized(lmax + 1, cos_theta, sin_theta, r.p);

  // P_lm / sin(theta) obeys the same recurrence in l, seeded without dividing.
  double qmm = 0.0;
  double pprev = 1.0 / std::sqrt(4.0 * kPi);
  for (int m = 1; m <= lmax; ++m) {
    qmm = -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * pprev;
    pprev = r.p[tri_index(m, m)];
    r.over_sin[tri_index(m, m)] = qmm;
    if (m == lmax) break;
    double q2 = qmm;
    double q1 = std::sqrt(2.0 * m + 3.0) * cos_theta * qmm;
    r.over_sin[tri_index(m + 1, m)] = q1;
    for (int l = m + 2; l <= lmax; ++l) {
      const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - static_cast<double>(m) * m));
      const double b = std::sqrt(((l - 1.0) * (l - 1.0) - static_cast<double>(m) * m) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
      const double q = a * (cos_theta * q1 - b * q2);
      r.over_sin[tri_index(l, m)] = q;
      q2 = q1;
      q1 = q;
    }
  }

  // Ladder relation: dP_lm/dtheta = (sqrt((l-m)(l+m+1)) P_{l,m+1} - sqrt((l+m)(l-m+1)) P_{l,m-1}) / 2,
  // with P_{l,-1} = -P_{l,1}.
  for (int l = 0; l <= lmax; ++l) {
    for (int m = 0; m <= l; ++m) {
      const double up = (m + 1 <= l) ? std::sqrt((l - m) * (l + m + 1.0)) * r.p[tri_index(l, m + 1)] : 0.0;
      double down;
      if (m == 0)
        down = (l >= 1) ? -std::sqrt(l * (l + 1.0)) * r.p[tri_index(l, 1)] : 0.0;
      else
        down = std::sqrt((l + m) * (l - m + 1.0)) * r.p[tri_index(l, m - 1)];
      r.dtheta[tri_index(l, m)] = 0.5 * (up - down);
    }
  }
  r.p.resize(tri_size(lmax));
  return r;
}

/// Single spherical harmonic Y_lm at a point.
inline cplx spherical_harmonic(int l, int m, const Vec3& x) {
  const int am = std::abs(m);
  if (am > l) return 0.0;
  std::vector<double> p(tri_size(l));
  const double ct = std::clamp(x.z(), -1.0, 1.0);
  legendre_normalized(l, ct, std::hypot(x.x(), x.y()), p);
  double v = p[tri_index(l, am)];
  if (m < 0 && (am % 2 == 1)) v = -v;
  return v * std::polar(1.0, m * std::atan2(x.y(), x.x()));
}

/// Pointwise value of a coefficient expansion.
inline cplx evaluate(const HarmonicCoeffs& c, const Vec3& x) {
  const int L = c.lmax();
  std::vector<double> p(tri_size(L));
  const double ct = std::clamp(x.z(), -1.0, 1.0);
  legendre_normalized(L, ct, std::hypot(x.x(), x.y()), p);
  const double phi = std::atan2(x.y(), x.x());
  cplx acc = 0.0;
  for (int m = -L; m <= L; ++m) {
    const int am = std::abs(m);
    const double sign = (m < 0 && (am % 2 == 1)) ? -1.0 : 1.0;
    cplx fm = 0.0;
    for (int l = am; l <= L; ++l) fm += c(l, m) * p[tri_index(l, am)];
    acc += sign * fm * std::polar(1.0, m * phi);
  }
  return acc;
}

/// Ambient gradient of the expansion restricted to S^2 (tangent to the sphere at x).
/// Returns the complex gradient; take the real part for real-valued fields.
inline Eigen::Vector3cd tangential_gradient(const HarmonicCoeffs& c, const Vec3& x) {
  const int L = c.lmax();
  const double ct = std::clamp(x.z(), -1.0, 1.0);
  const double st = std::hypot(x.x(), x.y());
  const LegendreDerivs d = legendre_with_derivatives(L, ct, st);
  const double phi = std::atan2(x.y(), x.x());
  cplx f_theta = 0.0, f_phi = 0.0;
  for (int m = -L; m <= L; ++m) {
    const int am = std::abs(m);
    const double sign = (m < 0 && (am % 2 == 1)) ? -1.0 : 1.0;
    cplx a = 0.0, b = 0.0;
    for (int l = am; l <= L; ++l) {
      a += c(l, m) * d.dtheta[tri_index(l, am)];
      b += c(l, m) * d.over_sin[tri_index(l, am)];
    }
    const cplx e = std::polar(1.0, m * phi);
    f_theta += sign * a * e;
    f_phi += sign * cplx(0.0, m) * b * e;
  }
  const Vec3 e_theta(ct * std::cos(phi), ct * std::sin(phi), -st);
  const Vec3 e_phi(-std::sin(phi), std::cos(phi), 0.0);
  return f_theta * e_theta.cast<cplx>() + f_phi * e_phi.cast<cplx>();
}

// ---------------------------------------------------------------------------

/// Analysis/synthesis between coefficients of bandwidth L and values on a QuadGrid.
///
/// Exact when the grid bandwidth is >= L and the sampled function has degree
/// <= 2*grid.lmax() - L. Holds scratch buffers, so one instance per thread.
class SphericalTransform {
 public:
  SphericalTransform(QuadGrid grid, int lmax) : grid_(std::move(grid)), lmax_(lmax) {
    if (lmax < 0) throw PreconditionError("SphericalTransform: lmax must be >= 0");
    if (grid_.n_phi() < 2 * lmax + 1) throw PreconditionError("SphericalTransform: grid too coarse in longitude");
    const int nt = grid_.n_theta();
    table_.assign(static_cast<std::size_t>(nt) * tri_size(lmax), 0.0);
    for (int j = 0; j < nt; ++j) {
      const double ct = grid_.cos_theta(j);
      legendre_normalized(lmax, ct, std::sqrt(std::max(0.0, 1.0 - ct * ct)),
                          std::span<double>(table_).subspan(static_cast<std::size_t>(j) * tri_size(lmax), tri_size(lmax)));
    }
    fft_.SetFlag(Eigen::FFT<double>::Unscaled);
    ring_in_.resize(static_cast<std::size_t>(grid_.n_phi()));
    ring_out_.resize(static_cast<std::size_t>(grid_.n_phi()));
  }

  /// Convenience: grid with bandwidth equal to lmax.
  explicit SphericalTransform(int lmax) : SphericalTransform(QuadGrid(lmax), lmax) {}

  const QuadGrid& grid() const { return grid_; }
  int lmax() const { return lmax_; }

  std::vector<cplx> synthesize(const HarmonicCoeffs& c) {
    std::vector<cplx> values(grid_.size());
    synthesize_into(c, values);
    return values;
  }

  void synthesize_into(const HarmonicCoeffs& c, std::span<cplx> values) {
    if (values.size() != grid_.size()) throw PreconditionError("synthesize: output size does not match grid");
    const int L = std::min(lmax_, c.lmax());
    const int np = grid_.n_phi();
    for (int j = 0; j < grid_.n_theta(); ++j) {
      const double* p = ring_table(j);
      std::fill(ring_in_.begin(), ring_in_.end(), cplx(0.0));
      for (int m = -L; m <= L; ++m) {
        const int am = std::abs(m);
        cplx fm = 0.0;
        for (int l = am; l <= L; ++l) fm += c(l, m) * p[tri_index(l, am)];
        if (m < 0 && (am % 2 == 1)) fm = -fm;
        ring_in_[static_cast<std::size_t>((m + np) % np)] = fm;
      }
      fft_.inv(ring_out_, ring_in_);
      std::copy(ring_out_.begin(), ring_out_.end(), values.begin() + static_cast<std::ptrdiff_t>(grid_.index(j, 0)));
    }
  }

  HarmonicCoeffs analyze(std::span<const cplx> values) {
    HarmonicCoeffs c(lmax_);
    analyze_into(values, c);
    return c;
  }

  void analyze_into(std::span<const cplx> values, HarmonicCoeffs& c) {
    if (values.size() != grid_.size()) throw PreconditionError("analyze: value count does not match grid");
    if (c.lmax() != lmax_) c = HarmonicCoeffs(lmax_);
    std::fill(c.data().begin(), c.data().end(), cplx(0.0));
    const int L = lmax_;
    const int np = grid_.n_phi();
    for (int j = 0; j < grid_.n_theta(); ++j) {
      std::copy(values.begin() + static_cast<std::ptrdiff_t>(grid_.index(j, 0)),
                values.begin() + static_cast<std::ptrdiff_t>(grid_.index(j, 0) + np), ring_in_.begin());
      fft_.fwd(ring_out_, ring_in_);
      const double w = grid_.weight(j);
      const double* p = ring_table(j);
      for (int m = -L; m <= L; ++m) {
        const int am = std::abs(m);
        cplx fm = w * ring_out_[static_cast<std::size_t>((m + np) % np)];
        if (m < 0 && (am % 2 == 1)) fm = -fm;
        for (int l = am; l <= L; ++l) c(l, m) += fm * p[tri_index(l, am)];
      }
    }
    return;
  }

  HarmonicCoeffs analyze_real(std::span<const double> values) {
    std::vector<cplx> v(values.begin(), values.end());
    return analyze(v);
  }

 private:
  const double* ring_table(int j) const { return table_.data() + static_cast<std::size_t>(j) * tri_size(lmax_); }

  QuadGrid grid_;
  int lmax_;
  std::vector<double> table_;
  Eigen::FFT<double> fft_;
  std::vector<cplx> ring_in_, ring_out_;
};

/// Forward transform on a grid, to the grid's bandwidth.
inline HarmonicCoeffs analyze(std::span<const cplx> values, const QuadGrid& grid) {
  SphericalTransform t(grid, grid.lmax());
  return t.analyze(values);
}

/// Inverse transform onto a grid. The grid must resolve the coefficients' bandwidth.
inline std::vector<cplx> synthesize(const HarmonicCoeffs& c, const QuadGrid& grid) {
  if (grid.lmax() < c.lmax()) throw PreconditionError("synthesize: grid bandwidth below coefficient bandwidth");
  SphericalTransform t(grid, c.lmax());
  return t.synthesize(c);
}

/// Samples a pointwise function on every node of the grid.
template <class F>
std::vector<cplx> sample_on_grid(const QuadGrid& grid, F&& f) {
  std::vector<cplx> v(grid.size());
  for (int j = 0; j < grid.n_theta(); ++j)
    for (int k = 0; k < grid.n_phi(); ++k) v[grid.index(j, k)] = f(grid.point(j, k));
  return v;
}

// ---------------------------------------------------------------------------
// Spectral multipliers of the round sphere S^d.

/// Eigenvalue k(k+d-1) of -Laplacian on degree-k harmonics.
inline double laplacian_eigenvalue(int k, int d = 2) {
  if (k < 0) throw DomainError("laplacian_eigenvalue: k must be >= 0");
  if (d < 1) throw DomainError("laplacian_eigenvalue: d must be >= 1");
  return static_cast<double>(k) * (k + d - 1);
}

/// (k(k+d-1))^{alpha/2}, the symbol of (-Laplacian)^{alpha/2}.
inline double fractional_multiplier(int k, double alpha, int d = 2) {
  if (!(alpha > 0.0)) throw DomainError("fractional_multiplier: alpha must be > 0");
  const double lam = laplacian_eigenvalue(k, d);
  if (lam == 0.0) return 0.0;
  if (alpha == 2.0) return lam;
  return std::pow(lam, 0.5 * alpha);
}

/// sqrt(k(k+d-1) + (d-1)^2/4) = k + (d-1)/2, the shifted half-wave symbol.
inline double halfwave_multiplier(int k, int d = 2) {
  if (k < 0) throw DomainError("halfwave_multiplier: k must be >= 0");
  return k + 0.5 * (d - 1);
}

/// Smooth cutoff equal to 1 on [1, 2] and vanishing outside (1/2, 5/2).
///
/// Transitions use the smoothstep built from exp(-steepness / s).
struct FrequencyWindow {
  double h = 0.1;
  double steepness = 1.0;

  FrequencyWindow() = default;
  FrequencyWindow(double h_, double steep = 1.0) : h(h_), steepness(steep) {
    if (!(h_ > 0.0)) throw DomainError("FrequencyWindow: h must be > 0");
    if (!(steep > 0.0)) throw DomainError("FrequencyWindow: steepness must be > 0");
  }

  double chi(double s) const {
    if (s <= 0.5 || s >= 2.5) return 0.0;
    if (s >= 1.0 && s <= 2.0) return 1.0;
    const double t = (s < 1.0) ? (s - 0.5) / 0.5 : (2.5 - s) / 0.5;
    return smoothstep(t);
  }

  /// chi(h^2 k(k+d-1)).
  double weight(int k, int d = 2) const { return chi(h * h * laplacian_eigenvalue(k, d)); }

 private:
  double bump(double t) const { return t > 0.0 ? std::exp(-steepness / t) : 0.0; }
  double smoothstep(double t) const {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double a = bump(t), b = bump(1.0 - t);
    return a / (a + b);
  }
};

/// Pi_h = chi(-h^2 Laplacian) applied diagonally.
inline HarmonicCoeffs apply_frequency_window(const HarmonicCoeffs& c, const FrequencyWindow& w, int d = 2) {
  HarmonicCoeffs out = c;
  for (int l = 0; l <= c.lmax(); ++l) {
    const double f = w.weight(l, d);
    for (int m = -l; m <= l; ++m) out(l, m) *= f;
  }
  return out;
}

/// Applies a per-degree multiplier f(l) to every coefficient.
template <class F>
HarmonicCoeffs apply_degree_multiplier(const HarmonicCoeffs& c, F&& f) {
  HarmonicCoeffs out = c;
  for (int l = 0; l <= c.lmax(); ++l) {
    const auto s = f(l);
    for (int m = -l; m <= l; ++m) out(l, m) *= s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Highest-weight harmonics phi_k = c_k (x1 + i x2)^k.

/// Normalizing constant c_k = sqrt(Gamma(k+(d+1)/2) / (2 pi^{(d+1)/2} k!)), via log-Gamma.
inline double highest_weight_constant(int k, int d = 2) {
  if (k < 0) throw DomainError("highest_weight_constant: k must be >= 0");
  const double lg = std::lgamma(k + 0.5 * (d + 1)) - std::log(2.0) - 0.5 * (d + 1) * std::log(kPi) - std::lgamma(k + 1.0);
  return std::exp(0.5 * lg);
}

/// Pointwise value of phi_k at x in S^2.
inline cplx highest_weight_value(int k, const Vec3& x) {
  return highest_weight_constant(k, 2) * std::pow(cplx(x.x(), x.y()), k);
}

/// Coefficient form of phi_k: a single (k, k) entry of modulus one.
inline HarmonicCoeffs highest_weight(int k, int lmax) {
  if (k < 0) throw DomainError("highest_weight: k must be >= 0");
  if (k > lmax) throw PreconditionError("highest_weight: k exceeds the bandwidth");
  // Y_kk = (-1)^k c_k sin^k(theta) e^{ik phi}
  return HarmonicCoeffs::delta(lmax, k, k, (k % 2 == 0) ? 1.0 : -1.0);
}

}  // namespace sphobs
