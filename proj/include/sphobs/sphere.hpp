#pragma once

// Exact geometry of the round unit sphere: points, unit tangent vectors,
// great-circle geodesics, tangent frames, exponential charts and cap regions.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "sphobs/errors.hpp"

namespace sphobs {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// A point of S^2, stored as a unit vector of R^3.
class UnitVec3 {
 public:
  UnitVec3() : v_(0.0, 0.0, 1.0) {}
  UnitVec3(double x, double y, double z) : UnitVec3(Vec3(x, y, z)) {}
  explicit UnitVec3(const Vec3& v) {
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("UnitVec3: cannot normalize a zero or non-finite vector");
    v_ = v / n;
  }

  double x() const { return v_.x(); }
  double y() const { return v_.y(); }
  double z() const { return v_.z(); }
  const Vec3& vec() const { return v_; }
  operator const Vec3&() const { return v_; }  // NOLINT(google-explicit-constructor)

  double dot(const UnitVec3& o) const { return v_.dot(o.v_); }
  UnitVec3 operator-() const { return UnitVec3(-v_); }

  /// Colatitude in [0, pi].
  double colatitude() const { return std::acos(std::clamp(v_.z(), -1.0, 1.0)); }
  /// Longitude in (-pi, pi].
  double longitude() const { return std::atan2(v_.y(), v_.x()); }

  static UnitVec3 from_angles(double colat, double lon) {
    return UnitVec3(std::sin(colat) * std::cos(lon), std::sin(colat) * std::sin(lon), std::cos(colat));
  }

 private:
  Vec3 v_;
};

/// Great-circle (angular) distance between two points of S^2.
inline double angular_distance(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

/// A unit covector (x, xi) on S^2, with xi identified with a unit tangent vector at x.
class PhasePoint {
 public:
  PhasePoint(const UnitVec3& base, const Vec3& dir) : base_(base) {
    const Vec3 t = dir - dir.dot(base.vec()) * base.vec();
    if (!(t.norm() > 1e-14)) throw DomainError("PhasePoint: direction is parallel to the base point");
    dir_ = UnitVec3(t);
  }

  const UnitVec3& base() const { return base_; }
  const UnitVec3& dir() const { return dir_; }

  /// Unit normal of the oriented great circle through (base, dir).
  Vec3 normal() const { return base_.vec().cross(dir_.vec()); }

 private:
  UnitVec3 base_;
  UnitVec3 dir_;
};

/// Unit-speed geodesic flow; periodic of period 2*pi on the round sphere.
inline PhasePoint geodesic_flow_point(const PhasePoint& p, double t) {
  const double c = std::cos(t), s = std::sin(t);
  const Vec3& x = p.base().vec();
  const Vec3& xi = p.dir().vec();
  return PhasePoint(UnitVec3(c * x + s * xi), -s * x + c * xi);
}

/// Right-handed orthonormal tangent frame {x0, e1, e2} at x0.
///
/// e1 = normalize(k x x0) with k = e3, switching to k = e2 when |x0.z| > 0.9.
inline std::pair<UnitVec3, UnitVec3> frame_at(const UnitVec3& x0) {
  const Vec3 k = std::abs(x0.z()) > 0.9 ? Vec3(0.0, 1.0, 0.0) : Vec3(0.0, 0.0, 1.0);
  const UnitVec3 e1(k.cross(x0.vec()));
  const UnitVec3 e2(x0.vec().cross(e1.vec()));
  return {e1, e2};
}

/// Exponential chart at x0: y -> exp_{x0}(y1 e1 + y2 e2). Requires |y| < pi.
inline UnitVec3 chart_to_sphere(const UnitVec3& x0, const Vec2& y) {
  const double rho = y.norm();
  if (!(rho < kPi)) throw DomainError("chart_to_sphere: |y| must be < pi");
  if (rho == 0.0) return x0;
  const auto [e1, e2] = frame_at(x0);
  const Vec3 v = (y.x() * e1.vec() + y.y() * e2.vec()) / rho;
  return UnitVec3(std::cos(rho) * x0.vec() + std::sin(rho) * v);
}

/// Inverse of chart_to_sphere (logarithm map). Undefined at the antipode of x0.
inline Vec2 sphere_to_chart(const UnitVec3& x0, const Vec3& x) {
  const Vec3 t = x - x.dot(x0.vec()) * x0.vec();
  const double s = t.norm();
  const double rho = std::atan2(s, x.dot(x0.vec()));
  if (s == 0.0) {
    if (rho > 1.0) throw DomainError("sphere_to_chart: point is antipodal to the chart center");
    return Vec2::Zero();
  }
  const auto [e1, e2] = frame_at(x0);
  return rho / s * Vec2(t.dot(e1.vec()), t.dot(e2.vec()));
}

/// Open spherical cap {x : d(x, center) < radius}.
struct Cap {
  UnitVec3 center;
  double radius;

  Cap(const UnitVec3& c, double r) : center(c), radius(r) {
    if (!(r > 0.0 && r < kPi)) throw DomainError("Cap: radius must lie in (0, pi)");
  }

  bool contains(const Vec3& x) const { return x.dot(center.vec()) > std::cos(radius); }
};

/// Finite union of open caps; the observation set.
struct Region {
  std::vector<Cap> caps;

  Region() = default;
  explicit Region(std::vector<Cap> c) : caps(std::move(c)) {}

  bool empty() const { return caps.empty(); }
  bool contains(const Vec3& x) const {
    return std::any_of(caps.begin(), caps.end(), [&](const Cap& c) { return c.contains(x); });
  }

  /// True when some pair of caps intersects.
  bool has_overlaps() const {
    for (std::size_t i = 0; i < caps.size(); ++i)
      for (std::size_t j = i + 1; j < caps.size(); ++j)
        if (angular_distance(caps[i].center, caps[j].center) < caps[i].radius + caps[j].radius) return true;
    return false;
  }
};

/// Largest value of (gamma(t).c - cos r) over t in [0, T], in closed form.
///
/// gamma(t).c = A cos(t - t0) with A = |(base.c, dir.c)|.
inline double segment_cap_excess(const PhasePoint& p, const Cap& cap, double T) {
  const Vec3& c = cap.center.vec();
  const double u = p.base().vec().dot(c);
  const double v = p.dir().vec().dot(c);
  const double amp = std::hypot(u, v);
  double best;
  if (T >= kTwoPi) {
    best = amp;
  } else {
    double t0 = std::atan2(v, u);
    if (t0 < 0.0) t0 += kTwoPi;
    best = (t0 <= T) ? amp : std::max(u, u * std::cos(T) + v * std::sin(T));
  }
  return best - std::cos(cap.radius);
}

/// Angular clearance of the segment gamma([0,T]) into the cap: radius minus
/// the smallest distance to the center. Positive iff the segment enters the cap.
inline double segment_cap_clearance(const PhasePoint& p, const Cap& cap, double T) {
  const double excess = segment_cap_excess(p, cap, T);
  const double closest = std::clamp(excess + std::cos(cap.radius), -1.0, 1.0);
  return cap.radius - std::acos(closest);
}

/// Exact test whether the geodesic segment of length T issued from p meets the region.
inline bool geodesic_hits_region_within(const PhasePoint& p, const Region& region, double T) {
  if (!(T > 0.0)) throw DomainError("geodesic_hits_region_within: T must be positive");
  return std::any_of(region.caps.begin(), region.caps.end(),
                     [&](const Cap& cap) { return segment_cap_excess(p, cap, T) > 0.0; });
}

/// Quasi-uniform deterministic point set on S^2 (spherical Fibonacci lattice).
inline std::vector<UnitVec3> fibonacci_lattice(int n) {
  if (n < 1) throw PreconditionError("fibonacci_lattice: n must be >= 1");
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  std::vector<UnitVec3> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    pts.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return pts;
}

/// Phase point on the oriented great circle with unit normal n (base x dir = n).
inline PhasePoint phase_on_circle(const UnitVec3& n) {
  const auto [e1, e2] = frame_at(n);
  return PhasePoint(e1, e2.vec());
}

struct GccResult {
  bool holds = true;
  double worst_margin = 0.0;   ///< min over samples of the best angular clearance (radians)
  UnitVec3 worst_normal;       ///< circle normal of the worst sample
  double worst_start = 0.0;    ///< start offset along that circle
  std::size_t n_checked = 0;
  bool certified = false;      ///< always false: the verdict is sampled
};

/// Sampled GCC_T check over oriented geodesic segments of length T.
///
/// Circles are drawn from a Fibonacci lattice of normals with both orientations.
/// When T < 2 pi, segment starts are spaced T/2 apart along each circle.
inline GccResult check_gcc(const Region& region, double T, int n_samples) {
  if (n_samples < 1) throw PreconditionError("check_gcc: n_samples must be >= 1");
  if (region.empty()) throw PreconditionError("check_gcc: region must contain at least one cap");
  if (!(T > 0.0)) throw DomainError("check_gcc: T must be positive");

  const int n_starts = T >= kTwoPi ? 1 : static_cast<int>(std::ceil(2.0 * kTwoPi / T));
  const double seg = std::min(T, kTwoPi);
  GccResult res;
  res.worst_margin = std::numeric_limits<double>::infinity();
  for (const UnitVec3& n0 : fibonacci_lattice(n_samples)) {
    for (const UnitVec3& n : {n0, -n0}) {
      const PhasePoint start = phase_on_circle(n);
      for (int k = 0; k < n_starts; ++k) {
        const double offset = 0.5 * T * k;
        const PhasePoint p = geodesic_flow_point(start, offset);
        double best = -std::numeric_limits<double>::infinity();
        for (const Cap& cap : region.caps) best = std::max(best, segment_cap_clearance(p, cap, seg));
        ++res.n_checked;
        if (best <= 0.0) res.holds = false;
        if (best < res.worst_margin) {
          res.worst_margin = best;
          res.worst_normal = n;
          res.worst_start = offset;
        }
      }
    }
  }
  return res;
}

}  // namespace sphobs
