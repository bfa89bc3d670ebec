#pragma once

// The space of oriented great circles, identified with S^2 through the circle
// normal n = x x xi, and Hamiltonian flows on it.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sphobs/harmonics.hpp"
#include "sphobs/radon.hpp"
#include "sphobs/sphere.hpp"

namespace sphobs {

using GeodesicPoint = UnitVec3;

inline GeodesicPoint phase_to_geodesic(const PhasePoint& p) { return GeodesicPoint(p.normal()); }

/// A phase point on the oriented circle with normal n: (base, dir) = frame_at(n).
inline PhasePoint geodesic_to_phase(const GeodesicPoint& n) { return phase_on_circle(n); }

/// H(n) = n^T M n + b.n on S^2. Covers every real expansion of degree <= 2.
class QuadraticHamiltonian {
 public:
  QuadraticHamiltonian(const Eigen::Matrix3d& m, const Vec3& b = Vec3::Zero()) : m_(0.5 * (m + m.transpose())), b_(b) {}

  static QuadraticHamiltonian from_triaxial(const TriaxialForm& q) { return QuadraticHamiltonian(q.diag().asDiagonal().toDenseMatrix()); }

  /// Fits (M, b) to the real part of a degree <= 2 expansion; the constant is folded into M.
  static QuadraticHamiltonian from_coeffs(const HarmonicCoeffs& c, double tol = 1e-10) {
    if (c.lmax() > 2 && c.effective_degree(tol) > 2) throw PreconditionError("QuadraticHamiltonian: expansion has degree > 2");
    const HarmonicCoeffs c2 = c.resized(2);
    const std::vector<UnitVec3> pts = fibonacci_lattice(40);
    Eigen::MatrixXd a(pts.size(), 9);
    Eigen::VectorXd rhs(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Vec3& x = pts[i].vec();
      a.row(static_cast<Eigen::Index>(i)) << x.x() * x.x(), x.y() * x.y(), x.z() * x.z(), 2 * x.x() * x.y(), 2 * x.x() * x.z(),
          2 * x.y() * x.z(), x.x(), x.y(), x.z();
      rhs(static_cast<Eigen::Index>(i)) = evaluate(c2, x).real();
    }
    const Eigen::VectorXd s = a.colPivHouseholderQr().solve(rhs);
    if ((a * s - rhs).lpNorm<Eigen::Infinity>() > tol * (1.0 + rhs.lpNorm<Eigen::Infinity>()))
      throw NumericalGuardError("QuadraticHamiltonian: fit residual too large");
    Eigen::Matrix3d m;
    m << s(0), s(3), s(4), s(3), s(1), s(5), s(4), s(5), s(2);
    return QuadraticHamiltonian(m, Vec3(s(6), s(7), s(8)));
  }

  double value(const Vec3& n) const { return n.dot(m_ * n) + b_.dot(n); }
  Vec3 gradient(const Vec3& n) const { return 2.0 * m_ * n + b_; }
  const Eigen::Matrix3d& matrix() const { return m_; }
  const Vec3& linear() const { return b_; }

 private:
  Eigen::Matrix3d m_;
  Vec3 b_;
};

/// H given by the real part of a coefficient expansion (any bandwidth).
class HarmonicHamiltonian {
 public:
  explicit HarmonicHamiltonian(HarmonicCoeffs c) : c_(std::move(c)) {}
  double value(const Vec3& n) const { return evaluate(c_, n).real(); }
  Vec3 gradient(const Vec3& n) const { return tangential_gradient(c_, n).real(); }
  const HarmonicCoeffs& coeffs() const { return c_; }

 private:
  HarmonicCoeffs c_;
};

/// Hamiltonian vector field n x grad H(n) on geodesic space.
template <class H>
Vec3 vfield(const Vec3& n, const H& h) {
  return n.cross(h.gradient(n));
}

/// One classical RK4 step followed by renormalization.
template <class H>
Vec3 rk4_step(const Vec3& n, const H& h, double ds) {
  const Vec3 k1 = vfield(n, h);
  const Vec3 k2 = vfield(Vec3(n + 0.5 * ds * k1), h);
  const Vec3 k3 = vfield(Vec3(n + 0.5 * ds * k2), h);
  const Vec3 k4 = vfield(Vec3(n + ds * k3), h);
  return (n + ds / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).normalized();
}

inline constexpr double kMaxFlowSteps = 1e9;

/// Integrates over [0, s]; visit(s_i, n_i) is called at every step including both ends.
/// The last step is shortened to land on s.
template <class H, class Visit>
Vec3 integrate_flow(const Vec3& n0, const H& h, double s, double ds, Visit&& visit) {
  if (!(ds > 0.0)) throw PreconditionError("vflow: step must be > 0");
  if (!(s >= 0.0)) throw PreconditionError("vflow: flow time must be >= 0");
  const double steps = std::ceil(s / ds - 1e-9);
  if (steps > kMaxFlowSteps) throw NumericalGuardError("vflow: step count overflow");
  const auto n_steps = static_cast<long long>(steps);
  Vec3 n = n0;
  visit(0.0, n);
  for (long long i = 0; i < n_steps; ++i) {
    const double s0 = i * ds;
    const double step = std::min(ds, s - s0);
    n = rk4_step(n, h, step);
    visit(s0 + step, n);
  }
  return n;
}

struct TrajectorySample {
  double s;
  Vec3 n;
  double energy;
};

struct FlowResult {
  GeodesicPoint end;
  std::vector<TrajectorySample> trajectory;  ///< every record_every-th step; empty when record_every == 0
  double max_energy_drift = 0.0;
  long long steps = 0;
};

/// Flow of H on geodesic space for time s with step ds.
template <class H>
FlowResult vflow(const GeodesicPoint& n0, const H& h, double s, double ds = 1e-3, int record_every = 0) {
  FlowResult out;
  const double e0 = h.value(n0.vec());
  long long i = 0;
  const Vec3 end = integrate_flow(n0.vec(), h, s, ds, [&](double si, const Vec3& n) {
    const double e = h.value(n);
    out.max_energy_drift = std::max(out.max_energy_drift, std::abs(e - e0));
    if (record_every > 0 && (i % record_every == 0 || si == s)) out.trajectory.push_back({si, n, e});
    ++i;
  });
  out.end = GeodesicPoint(end);
  out.steps = i - 1;
  return out;
}

struct OrbitReturn {
  double period;
  GeodesicPoint point;
  double return_error;  ///< |n(period) - n0|
};

/// First return to the plane through n0 orthogonal to the initial velocity.
/// Returns nothing for equilibria or when no return happens before s_max.
template <class H>
std::optional<OrbitReturn> orbit_period(const GeodesicPoint& n0, const H& h, double ds = 1e-3, double s_max = 1e3) {
  const Vec3 x0 = n0.vec();
  const Vec3 v0 = vfield(x0, h);
  if (v0.norm() < 1e-12) return std::nullopt;
  const Vec3 dir = v0.normalized();
  auto g = [&](const Vec3& n) { return (n - x0).dot(dir); };
  Vec3 n = x0;
  double s = 0.0;
  bool left = false;
  while (s < s_max) {
    const Vec3 next = rk4_step(n, h, ds);
    const double g0 = g(n), g1 = g(next);
    if (g1 < 0.0) left = true;
    if (left && g0 < 0.0 && g1 >= 0.0) {
      // regula falsi on the sub-step length
      double lo = 0.0, hi = ds, glo = g0, ghi = g1;
      Vec3 best = next;
      for (int it = 0; it < 60 && hi - lo > 1e-15; ++it) {
        const double tau = lo - glo * (hi - lo) / (ghi - glo);
        best = rk4_step(n, h, tau);
        const double gt = g(best);
        if (std::abs(gt) < 1e-15) {
          lo = hi = tau;
          break;
        }
        if (gt < 0.0) {
          lo = tau;
          glo = gt;
          ghi *= 0.5;
        } else {
          hi = tau;
          ghi = gt;
          glo *= 0.5;
        }
      }
      const double tau = 0.5 * (lo + hi);
      best = rk4_step(n, h, tau);
      return OrbitReturn{s + tau, GeodesicPoint(best), (best - x0).norm()};
    }
    n = next;
    s += ds;
  }
  return std::nullopt;
}

enum class OrbitClass { EquilibriumMin, AroundC1, Separatrix, EquilibriumSaddle, AroundC3, EquilibriumMax };

inline std::string orbit_class_name(OrbitClass c) {
  switch (c) {
    case OrbitClass::EquilibriumMin: return "equilibrium_min";
    case OrbitClass::AroundC1: return "around_c1";
    case OrbitClass::Separatrix: return "separatrix";
    case OrbitClass::EquilibriumSaddle: return "equilibrium_saddle";
    case OrbitClass::AroundC3: return "around_c3";
    case OrbitClass::EquilibriumMax: return "equilibrium_max";
  }
  return "unknown";
}

struct OrbitInfo {
  OrbitClass tag;
  double energy;
};

/// Orbit type of the Q-flow through n0, decided from the energy E = Q(n0).
inline OrbitInfo classify_orbit(const GeodesicPoint& n0, const TriaxialForm& q, double tol = 1e-9) {
  if (!(tol > 0.0)) throw PreconditionError("classify_orbit: tol must be > 0");
  const Vec3& x = n0.vec();
  const double e = q.value(x);
  auto near_axis = [&](int i) { return (x - Vec3::Unit(i)).norm() <= tol || (x + Vec3::Unit(i)).norm() <= tol; };
  if (near_axis(0) || std::abs(e - q.a) <= tol) return {OrbitClass::EquilibriumMin, e};
  if (near_axis(2) || std::abs(e - q.c) <= tol) return {OrbitClass::EquilibriumMax, e};
  if (near_axis(1)) return {OrbitClass::EquilibriumSaddle, e};
  if (std::abs(e - q.b) <= tol) return {OrbitClass::Separatrix, e};
  return {e < q.b ? OrbitClass::AroundC1 : OrbitClass::AroundC3, e};
}

/// Angular clearance of the circle with normal n into the cap: r - dist(center, circle).
inline double band_clearance(const Vec3& n, const Cap& cap) {
  return cap.radius - std::asin(std::min(1.0, std::abs(n.dot(cap.center.vec()))));
}

inline double band_clearance(const Vec3& n, const Region& region) {
  double best = -std::numeric_limits<double>::infinity();
  for (const Cap& c : region.caps) best = std::max(best, band_clearance(n, c));
  return best;
}

/// True iff the great circle with normal n meets some cap: |n.p| <= sin r.
inline bool geodesic_sees_region(const GeodesicPoint& n, const Region& region) {
  return std::any_of(region.caps.begin(), region.caps.end(), [&](const Cap& c) {
    return c.radius >= 0.5 * kPi || std::abs(n.vec().dot(c.center.vec())) <= std::sin(c.radius);
  });
}

struct VgccSample {
  GeodesicPoint n0;
  double energy = 0.0;
  double first_hit_time = -1.0;  ///< -1 when the region is never seen
  double margin = 0.0;           ///< max over the trajectory of the band clearance
};

struct VgccResult {
  bool holds = true;
  double margin = std::numeric_limits<double>::infinity();
  double T = 0.0;
  std::vector<VgccSample> samples;
  std::vector<GeodesicPoint> uncontrolled;
  bool certified = false;  ///< always false: the verdict is sampled
};

/// Sampled V-GCC_T check: every start, transported by the flow of H for s in [0, T],
/// must see the region. Starts are a Fibonacci lattice plus any extra starts.
template <class H>
VgccResult check_vgcc(const Region& region, const H& h, double T, int n_samples, double ds = 1e-3,
                      const std::vector<GeodesicPoint>& extra_starts = {}) {
  if (region.empty()) throw PreconditionError("check_vgcc: region must contain at least one cap");
  if (!(T > 0.0)) throw PreconditionError("check_vgcc: T must be > 0");
  if (n_samples < 1) throw PreconditionError("check_vgcc: n_samples must be >= 1");
  std::vector<GeodesicPoint> starts = fibonacci_lattice(n_samples);
  starts.insert(starts.end(), extra_starts.begin(), extra_starts.end());

  VgccResult res;
  res.T = T;
  res.samples.reserve(starts.size());
  for (const GeodesicPoint& n0 : starts) {
    VgccSample smp;
    smp.n0 = n0;
    smp.energy = h.value(n0.vec());
    smp.margin = -std::numeric_limits<double>::infinity();
    integrate_flow(n0.vec(), h, T, ds, [&](double s, const Vec3& n) {
      const double c = band_clearance(n, region);
      if (c >= 0.0 && smp.first_hit_time < 0.0) smp.first_hit_time = s;
      smp.margin = std::max(smp.margin, c);
    });
    if (smp.first_hit_time < 0.0) {
      res.holds = false;
      res.uncontrolled.push_back(n0);
    }
    res.margin = std::min(res.margin, smp.margin);
    res.samples.push_back(smp);
  }
  return res;
}

/// Eigen-frame of a quadratic Hamiltonian without linear part: energies
/// lambda_1 < lambda_2 < lambda_3 at the critical axes u_1, u_2, u_3.
struct QuadraticFrame {
  Vec3 energies;
  Eigen::Matrix3d axes;  ///< columns u_1, u_2, u_3
};

inline QuadraticFrame quadratic_frame(const QuadraticHamiltonian& h) {
  if (h.linear().norm() > 1e-10) throw PreconditionError("quadratic_frame: Hamiltonian has a linear part");
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(h.matrix());
  return {es.eigenvalues(), es.eigenvectors()};
}

/// Orbit type for a quadratic Hamiltonian with distinct energies, in its eigen-frame.
inline OrbitInfo classify_orbit(const GeodesicPoint& n0, const QuadraticHamiltonian& h, double tol = 1e-9) {
  if (!(tol > 0.0)) throw PreconditionError("classify_orbit: tol must be > 0");
  const QuadraticFrame f = quadratic_frame(h);
  const double l1 = f.energies(0), l2 = f.energies(1), l3 = f.energies(2);
  if (!(l2 - l1 > tol && l3 - l2 > tol)) throw PreconditionError("classify_orbit: energies must be distinct");
  const Vec3& x = n0.vec();
  const double e = h.value(x);
  auto near_axis = [&](int i) { return (x - f.axes.col(i)).norm() <= tol || (x + f.axes.col(i)).norm() <= tol; };
  if (near_axis(0) || std::abs(e - l1) <= tol) return {OrbitClass::EquilibriumMin, e};
  if (near_axis(2) || std::abs(e - l3) <= tol) return {OrbitClass::EquilibriumMax, e};
  if (near_axis(1)) return {OrbitClass::EquilibriumSaddle, e};
  if (std::abs(e - l2) <= tol) return {OrbitClass::Separatrix, e};
  return {e < l2 ? OrbitClass::AroundC1 : OrbitClass::AroundC3, e};
}

/// Points on the two separatrix circles {H = lambda_2}, avoiding the saddles.
inline std::vector<GeodesicPoint> separatrix_starts(const QuadraticHamiltonian& h, int per_circle = 16) {
  const QuadraticFrame f = quadratic_frame(h);
  const double l1 = f.energies(0), l2 = f.energies(1), l3 = f.energies(2);
  if (!(l1 < l2 && l2 < l3)) throw PreconditionError("separatrix_starts: energies must be distinct");
  const double kappa = std::sqrt((l2 - l1) / (l3 - l2));
  const Vec3 u1 = f.axes.col(0), u2 = f.axes.col(1), u3 = f.axes.col(2);
  std::vector<GeodesicPoint> out;
  for (double sign : {1.0, -1.0}) {
    const Vec3 w = (u1 + sign * kappa * u3).normalized();
    for (int i = 0; i < per_circle; ++i) {
      const double t = kTwoPi * (i + 0.5) / per_circle;
      if (std::abs(std::cos(t)) < 1e-6) continue;
      out.emplace_back(std::cos(t) * w + std::sin(t) * u2);
    }
  }
  return out;
}

/// Longest period among non-separatrix, non-equilibrium starts: the orbit
/// whose energy is closest to the saddle level.
inline std::optional<double> slowest_period(const QuadraticHamiltonian& h, const std::vector<GeodesicPoint>& starts,
                                            double ds = 1e-3, double sep_tol = 1e-9) {
  const double l2 = quadratic_frame(h).energies(1);
  const GeodesicPoint* pick = nullptr;
  double best = std::numeric_limits<double>::infinity();
  for (const GeodesicPoint& n : starts) {
    const double gap = std::abs(h.value(n.vec()) - l2);
    if (gap <= sep_tol || vfield(n.vec(), h).norm() < 1e-9) continue;
    if (gap < best) {
      best = gap;
      pick = &n;
    }
  }
  if (!pick) return std::nullopt;
  const auto r = orbit_period(*pick, h, ds, 1e4);
  if (!r) return std::nullopt;
  return r->period;
}

/// Zeros of vfield located by a lattice scan and Newton refinement in the tangent plane.
template <class H>
std::vector<GeodesicPoint> critical_points(const H& h, int n_grid = 10000, double tol = 1e-12) {
  const std::vector<UnitVec3> lattice = fibonacci_lattice(n_grid);
  std::vector<double> speed(lattice.size());
  double vmax = 0.0;
  for (std::size_t i = 0; i < lattice.size(); ++i) vmax = std::max(vmax, speed[i] = vfield(lattice[i].vec(), h).norm());
  std::vector<GeodesicPoint> found;
  if (vmax == 0.0) throw PreconditionError("critical_points: Hamiltonian is constant");
  auto residual = [&](const UnitVec3& base, const Vec2& y, const UnitVec3& e1, const UnitVec3& e2) {
    const Vec3 v = vfield(chart_to_sphere(base, y).vec(), h);
    return Vec2(v.dot(e1.vec()), v.dot(e2.vec()));
  };
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    if (speed[i] > 0.1 * vmax) continue;
    UnitVec3 n = lattice[i];
    bool ok = false;
    for (int it = 0; it < 50; ++it) {
      if (vfield(n.vec(), h).norm() <= 0.01 * tol) {
        ok = true;
        break;
      }
      const auto [e1, e2] = frame_at(n);
      const double eps = 1e-7;
      const Vec2 f0 = residual(n, Vec2::Zero(), e1, e2);
      Eigen::Matrix2d jac;
      jac.col(0) = (residual(n, Vec2(eps, 0), e1, e2) - residual(n, Vec2(-eps, 0), e1, e2)) / (2 * eps);
      jac.col(1) = (residual(n, Vec2(0, eps), e1, e2) - residual(n, Vec2(0, -eps), e1, e2)) / (2 * eps);
      Vec2 step = -jac.fullPivLu().solve(f0);
      if (!step.allFinite()) break;
      if (step.norm() > 0.2) step *= 0.2 / step.norm();
      n = chart_to_sphere(n, step);
    }
    if (!ok && vfield(n.vec(), h).norm() <= tol) ok = true;
    if (!ok) continue;
    const bool dup = std::any_of(found.begin(), found.end(), [&](const GeodesicPoint& f) { return (f.vec() - n.vec()).norm() < 1e-6; });
    if (!dup) found.push_back(n);
  }
  return found;
}

}  // namespace sphobs
