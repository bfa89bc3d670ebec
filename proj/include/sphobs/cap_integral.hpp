#pragma once

// Integrals of |u|^2 (and of conj(u) v) over unions of caps.

#include <Eigen/Core>

#include <cmath>
#include <memory>
#include <optional>
#include <vector>

#include "sphobs/harmonics.hpp"
#include "sphobs/rotation.hpp"

namespace sphobs {

/// Restricted integral over one cap, for expansions of bandwidth <= L.
///
/// The expansion is rotated so the cap center sits at the north pole, where
/// the integral splits over m into Gram blocks
///   G^(m)_{ll'} = 2 pi int_{cos r}^1 P_lm(t) P_l'm(t) dt,
/// evaluated exactly by Gauss-Legendre with L+1 nodes on [cos r, 1].
class PolarCapIntegral {
 public:
  PolarCapIntegral(const Cap& cap, int lmax)
      : cap_(cap), lmax_(lmax), to_pole_(0.0, -cap.center.colatitude(), -cap.center.longitude()), wigner_(lmax, to_pole_.beta()) {
    const GaussRule rule = gauss_legendre(lmax + 1, std::cos(cap.radius), 1.0);
    blocks_.resize(static_cast<std::size_t>(lmax + 1));
    std::vector<double> p(tri_size(lmax));
    for (int m = 0; m <= lmax; ++m) blocks_[m] = Eigen::MatrixXd::Zero(lmax - m + 1, lmax - m + 1);
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const double t = rule.nodes[q];
      legendre_normalized(lmax, t, std::sqrt(std::max(0.0, 1.0 - t * t)), p);
      const double w = kTwoPi * rule.weights[q];
      for (int m = 0; m <= lmax; ++m) {
        Eigen::MatrixXd& g = blocks_[m];
        for (int l = m; l <= lmax; ++l)
          for (int lp = m; lp <= l; ++lp) g(l - m, lp - m) += w * p[tri_index(l, m)] * p[tri_index(lp, m)];
      }
    }
    for (auto& g : blocks_) g = g.selfadjointView<Eigen::Lower>();
  }

  int lmax() const { return lmax_; }
  const Cap& cap() const { return cap_; }

  /// Coefficients of u(S x), S taking the north pole to the cap center.
  HarmonicCoeffs to_pole(const HarmonicCoeffs& u) const { return to_pole_.apply(checked(u), wigner_); }

  double mass_rotated(const HarmonicCoeffs& w) const { return inner_rotated(w, w).real(); }

  cplx inner_rotated(const HarmonicCoeffs& a, const HarmonicCoeffs& b) const {
    cplx acc = 0.0;
    for (int m = -lmax_; m <= lmax_; ++m) {
      const Eigen::MatrixXd& g = blocks_[std::abs(m)];
      const int am = std::abs(m);
      for (int l = am; l <= lmax_; ++l) {
        cplx row = 0.0;
        for (int lp = am; lp <= lmax_; ++lp) row += g(l - am, lp - am) * b(lp, m);
        acc += std::conj(a(l, m)) * row;
      }
    }
    return acc;
  }

  double mass(const HarmonicCoeffs& u) const { return mass_rotated(to_pole(u)); }

 private:
  HarmonicCoeffs checked(const HarmonicCoeffs& u) const {
    if (u.lmax() > lmax_) throw PreconditionError("PolarCapIntegral: expansion bandwidth exceeds the integrator's");
    return u.lmax() == lmax_ ? u : u.resized(lmax_);
  }

  Cap cap_;
  int lmax_;
  Rotation to_pole_;
  WignerD wigner_;
  std::vector<Eigen::MatrixXd> blocks_;
};

struct CapMassEstimate {
  double value = 0.0;
  double error_estimate = 0.0;
};

/// Sharp-indicator quadrature of |u|^2 over a region on a grid, with a
/// refinement-based error estimate (the same sum on a grid of twice the bandwidth).
inline CapMassEstimate cap_mass_sharp(const HarmonicCoeffs& u, const Region& region, const QuadGrid& grid) {
  auto on = [&](const QuadGrid& g) {
    SphericalTransform t(g, u.lmax());
    const std::vector<cplx> v = t.synthesize(u);
    double acc = 0.0;
    for (int j = 0; j < g.n_theta(); ++j) {
      double ring = 0.0;
      for (int k = 0; k < g.n_phi(); ++k)
        if (region.contains(g.point(j, k))) ring += std::norm(v[g.index(j, k)]);
      acc += g.weight(j) * ring;
    }
    return acc;
  };
  const QuadGrid& base = grid;
  if (base.lmax() < u.lmax()) throw PreconditionError("cap_mass_sharp: grid does not resolve the expansion");
  CapMassEstimate est;
  est.value = on(base);
  est.error_estimate = std::abs(est.value - on(QuadGrid(2 * base.lmax())));
  return est;
}

/// Integrals over a region at fixed bandwidth.
///
/// Disjoint caps are integrated exactly through PolarCapIntegral. Overlapping
/// caps fall back to sharp-indicator quadrature on a fine grid.
class RegionIntegrator {
 public:
  RegionIntegrator(const Region& region, int lmax) : region_(region), lmax_(lmax) {
    if (region.empty()) throw PreconditionError("RegionIntegrator: region must contain at least one cap");
    exact_ = !region.has_overlaps();
    if (exact_) {
      for (const Cap& c : region.caps) caps_.emplace_back(std::make_shared<PolarCapIntegral>(c, lmax));
    } else {
      fallback_ = std::make_shared<SphericalTransform>(QuadGrid(std::max(4 * lmax, 96)), lmax);
    }
  }

  bool exact() const { return exact_; }
  int lmax() const { return lmax_; }
  const Region& region() const { return region_; }

  double mass(const HarmonicCoeffs& u) const {
    if (!exact_) return inner(u, u).real();
    double acc = 0.0;
    for (const auto& c : caps_) acc += c->mass(fit(u));
    return acc;
  }

  /// int_region conj(a) b.
  cplx inner(const HarmonicCoeffs& a, const HarmonicCoeffs& b) const {
    if (exact_) {
      cplx acc = 0.0;
      for (const auto& c : caps_) acc += c->inner_rotated(c->to_pole(fit(a)), c->to_pole(fit(b)));
      return acc;
    }
    const QuadGrid& g = fallback_->grid();
    const std::vector<cplx> va = fallback_->synthesize(fit(a));
    const std::vector<cplx> vb = fallback_->synthesize(fit(b));
    cplx acc = 0.0;
    for (int j = 0; j < g.n_theta(); ++j) {
      cplx ring = 0.0;
      for (int k = 0; k < g.n_phi(); ++k)
        if (region_.contains(g.point(j, k))) ring += std::conj(va[g.index(j, k)]) * vb[g.index(j, k)];
      acc += g.weight(j) * ring;
    }
    return acc;
  }

  /// Hermitian Gram matrix G_ij = int_region conj(u_i) u_j.
  Eigen::MatrixXcd gram(const std::vector<HarmonicCoeffs>& us) const {
    const auto n = static_cast<Eigen::Index>(us.size());
    Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(n, n);
    if (exact_) {
      for (const auto& c : caps_) {
        std::vector<HarmonicCoeffs> rot;
        rot.reserve(us.size());
        for (const auto& u : us) rot.push_back(c->to_pole(fit(u)));
        for (Eigen::Index i = 0; i < n; ++i)
          for (Eigen::Index j = i; j < n; ++j) g(i, j) += c->inner_rotated(rot[i], rot[j]);
      }
    } else {
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) g(i, j) = inner(us[i], us[j]);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      g(i, i) = g(i, i).real();
      for (Eigen::Index j = 0; j < i; ++j) g(i, j) = std::conj(g(j, i));
    }
    return g;
  }

 private:
  HarmonicCoeffs fit(const HarmonicCoeffs& u) const {
    if (u.lmax() > lmax_) throw PreconditionError("RegionIntegrator: expansion bandwidth exceeds the integrator's");
    return u.lmax() == lmax_ ? u : u.resized(lmax_);
  }

  Region region_;
  int lmax_;
  bool exact_ = true;
  std::vector<std::shared_ptr<PolarCapIntegral>> caps_;
  std::shared_ptr<SphericalTransform> fallback_;
};

/// int_omega |u|^2 dx. Exact for regions of disjoint caps; otherwise
/// sharp-indicator quadrature on the supplied grid.
inline double cap_mass(const HarmonicCoeffs& u, const Region& region, const QuadGrid& grid) {
  if (region.empty()) throw PreconditionError("cap_mass: region must contain at least one cap");
  if (!region.has_overlaps()) return RegionIntegrator(region, u.lmax()).mass(u);
  return cap_mass_sharp(u, region, grid).value;
}

inline double cap_mass(const HarmonicCoeffs& u, const Region& region) {
  return cap_mass(u, region, QuadGrid(std::max(4 * u.lmax(), 96)));
}

}  // namespace sphobs
