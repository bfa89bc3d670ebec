#pragma once

// Split-step propagation of i u_t = (-Laplacian)^{alpha/2} u + V u on S^2,
// wave-packet initial data and observability functionals.

#include <cmath>
#include <optional>
#include <vector>

#include "sphobs/cap_integral.hpp"
#include "sphobs/harmonics.hpp"

namespace sphobs {

enum class Generator {
  Fractional,  ///< (l(l+1))^{alpha/2}
  HalfWave,    ///< l + 1/2
};

struct EvolutionParams {
  double alpha = 2.0;
  double T = 1.0;
  double dt = 1e-3;
  int lmax = 32;
  std::optional<HarmonicCoeffs> potential;  ///< real-valued; absent means V = 0
  Generator generator = Generator::Fractional;
  int save_every = 0;  ///< 0 selects ceil(n_steps / 400)
  double drift_guard = 1e-6;

  void validate() const {
    if (!(alpha > 0.0)) throw PreconditionError("EvolutionParams: alpha must be > 0");
    if (!(T > 0.0)) throw PreconditionError("EvolutionParams: T must be > 0");
    if (!(dt > 0.0) || dt > T) throw PreconditionError("EvolutionParams: dt must lie in (0, T]");
    if (lmax < 0) throw PreconditionError("EvolutionParams: lmax must be >= 0");
    if (save_every < 0) throw PreconditionError("EvolutionParams: save_every must be >= 0");
    if (potential) {
      if (potential->lmax() > lmax) throw PreconditionError("EvolutionParams: potential bandwidth exceeds lmax");
      if (!potential->all_finite()) throw PreconditionError("EvolutionParams: potential has non-finite coefficients");
      if (potential->real_symmetry_defect() > 1e-12 * (1.0 + potential->norm()))
        throw PreconditionError("EvolutionParams: potential must be real-valued");
    }
  }

  double omega(int l) const { return generator == Generator::HalfWave ? halfwave_multiplier(l, 2) : fractional_multiplier(l, alpha, 2); }

  bool has_potential() const { return potential && potential->norm() > 0.0; }
};

/// Uniform time stepping actually used: dt is shrunk so that n_steps is a
/// multiple of the save cadence and n_steps * dt = T.
struct StepPlan {
  long long n_steps;
  int save_every;
  double dt;
};

inline StepPlan plan_steps(const EvolutionParams& p) {
  long long n = static_cast<long long>(std::ceil(p.T / p.dt - 1e-9));
  const int every = p.save_every > 0 ? p.save_every : static_cast<int>(std::max<long long>(1, (n + 399) / 400));
  n = ((n + every - 1) / every) * every;
  return {n, every, p.T / static_cast<double>(n)};
}

/// Strang splitting: half diagonal step, pointwise potential phase, half diagonal step.
class SplitStepPropagator {
 public:
  SplitStepPropagator(const EvolutionParams& p, double dt) : lmax_(p.lmax), dt_(dt) {
    half_.resize(static_cast<std::size_t>(lmax_ + 1));
    full_.resize(static_cast<std::size_t>(lmax_ + 1));
    for (int l = 0; l <= lmax_; ++l) {
      half_[l] = std::polar(1.0, -0.5 * dt * p.omega(l));
      full_[l] = std::polar(1.0, -dt * p.omega(l));
    }
    if (p.has_potential()) {
      const int lv = p.potential->lmax();
      transform_.emplace(QuadGrid(lmax_ + std::max(lv, 1)), lmax_);
      SphericalTransform vt(transform_->grid(), lv);
      const std::vector<cplx> v = vt.synthesize(*p.potential);
      phase_.resize(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) phase_[i] = std::polar(1.0, -dt * v[i].real());
      values_.resize(v.size());
    }
  }

  double dt() const { return dt_; }

  void step(HarmonicCoeffs& u) {
    if (!transform_) {
      diag(u, full_);
      return;
    }
    diag(u, half_);
    transform_->synthesize_into(u, values_);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] *= phase_[i];
    transform_->analyze_into(values_, u);
    diag(u, half_);
  }

 private:
  void diag(HarmonicCoeffs& u, const std::vector<cplx>& f) const {
    for (int l = 0; l <= lmax_; ++l)
      for (int m = -l; m <= l; ++m) u(l, m) *= f[l];
  }

  int lmax_;
  double dt_;
  std::vector<cplx> half_, full_;
  std::optional<SphericalTransform> transform_;
  std::vector<cplx> phase_, values_;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<HarmonicCoeffs> states;
  StepPlan plan{};
  double norm_drift = 0.0;  ///< max relative deviation of the norm over all steps
};

/// Runs the propagation and calls observe(t, u) at every save time (including 0 and T).
/// Returns the step plan and the norm drift.
template <class Observe>
std::pair<StepPlan, double> propagate_observe(const HarmonicCoeffs& u0, const EvolutionParams& params, Observe&& observe) {
  params.validate();
  if (u0.lmax() > params.lmax) throw PreconditionError("propagate: initial state bandwidth exceeds lmax");
  if (!u0.all_finite()) throw PreconditionError("propagate: initial state has non-finite coefficients");
  const double n0 = u0.norm();
  if (!(n0 > 0.0)) throw PreconditionError("propagate: initial state must be non-zero");
  const StepPlan plan = plan_steps(params);
  SplitStepPropagator prop(params, plan.dt);
  HarmonicCoeffs u = u0.resized(params.lmax);
  double drift = 0.0;
  observe(0.0, static_cast<const HarmonicCoeffs&>(u));
  for (long long i = 1; i <= plan.n_steps; ++i) {
    prop.step(u);
    const double d = std::abs(u.norm() - n0) / n0;
    drift = std::max(drift, d);
    if (!(d <= params.drift_guard)) throw NumericalGuardError("propagate: norm drift exceeded the guard");
    if (i % plan.save_every == 0) observe(static_cast<double>(i) * plan.dt, static_cast<const HarmonicCoeffs&>(u));
  }
  return {plan, drift};
}

inline Trajectory propagate(const HarmonicCoeffs& u0, const EvolutionParams& params) {
  Trajectory tr;
  const auto [plan, drift] = propagate_observe(u0, params, [&](double t, const HarmonicCoeffs& u) {
    tr.times.push_back(t);
    tr.states.push_back(u);
  });
  tr.plan = plan;
  tr.norm_drift = drift;
  return tr;
}

/// Composite Simpson rule on uniformly spaced samples (3/8 rule on the last
/// three intervals when the interval count is odd).
inline double simpson(const std::vector<double>& f, double step) {
  const std::size_t n = f.size();
  if (n < 2) return 0.0;
  if (n == 2) return 0.5 * step * (f[0] + f[1]);
  std::size_t intervals = n - 1;
  double acc = 0.0;
  std::size_t end = intervals;
  if (intervals % 2 == 1) {
    if (intervals == 1) return 0.5 * step * (f[0] + f[1]);
    end = intervals - 3;
    acc += 3.0 * step / 8.0 * (f[end] + 3.0 * f[end + 1] + 3.0 * f[end + 2] + f[end + 3]);
  }
  for (std::size_t i = 0; i + 2 <= end; i += 2) acc += step / 3.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2]);
  return acc;
}

struct ObservabilityReport {
  double quotient = 0.0;
  std::vector<double> times;
  std::vector<double> mass_omega;
  std::vector<double> norms;
  double norm_drift = 0.0;
  double window_mass = 1.0;  ///< |Pi_h u0|^2 / |u0|^2 (1 without a window)
  double horizon = 0.0;      ///< length of the time integral
  bool averaged = false;     ///< quotient divided by the horizon
  StepPlan plan{};
  EvolutionParams params;
};

namespace detail {

inline ObservabilityReport run_observability(const HarmonicCoeffs& u0, const HarmonicCoeffs& start, const EvolutionParams& params,
                                            const Region& region) {
  ObservabilityReport rep;
  rep.params = params;
  const RegionIntegrator integ(region, params.lmax);
  const auto [plan, drift] = propagate_observe(start, params, [&](double t, const HarmonicCoeffs& u) {
    rep.times.push_back(t);
    rep.mass_omega.push_back(integ.mass(u));
    rep.norms.push_back(u.norm());
  });
  rep.plan = plan;
  rep.norm_drift = drift;
  rep.horizon = params.T;
  rep.quotient = simpson(rep.mass_omega, plan.dt * plan.save_every) / u0.norm2();
  return rep;
}

}  // namespace detail

/// int_0^T int_omega |u(t)|^2 dx dt / |u0|^2.
inline ObservabilityReport observability_quotient(const HarmonicCoeffs& u0, const EvolutionParams& params, const Region& region) {
  return detail::run_observability(u0, u0, params, region);
}

/// (1/T_h) int_0^{T_h} int_omega |u(t)|^2 dx dt / |u0|^2 for u(0) = Pi_h u0.
inline ObservabilityReport long_time_quotient(const HarmonicCoeffs& u0, const EvolutionParams& params, const Region& region,
                                             double T_h, const FrequencyWindow& window) {
  if (!(T_h >= params.T)) throw PreconditionError("long_time_quotient: T_h must be >= T");
  EvolutionParams p = params;
  p.T = T_h;
  const HarmonicCoeffs start = apply_frequency_window(u0.resized(params.lmax), window);
  if (!(start.norm() > 0.0)) throw PreconditionError("long_time_quotient: the window annihilates the initial state");
  ObservabilityReport rep = detail::run_observability(u0, start, p, region);
  rep.window_mass = start.norm2() / u0.norm2();
  rep.quotient /= T_h;
  rep.averaged = true;
  return rep;
}

// ---------------------------------------------------------------------------
// Wave packets.

struct WavePacketSpec {
  PhasePoint center;
  double h = 0.1;
  double radius = 5.0;  ///< support of the profile in rescaled chart units
  double sigma = 1.0;   ///< Gaussian width: rho(y) = exp(-|y|^2 / (2 sigma^2)) near the center

  void validate() const {
    if (!(h > 0.0 && h <= 1.0)) throw PreconditionError("WavePacketSpec: h must lie in (0, 1]");
    if (!(radius > 1.0)) throw PreconditionError("WavePacketSpec: radius must be > 1");
    if (!(sigma > 0.0)) throw PreconditionError("WavePacketSpec: sigma must be > 0");
    if (!(radius * std::sqrt(h) < kPi)) throw DomainError("WavePacketSpec: support leaves the exponential chart");
  }
};

/// Radial profile: Gaussian times a smooth cutoff falling from 1 at radius-1 to 0 at radius.
inline double wavepacket_profile(double r, double radius, double sigma) {
  if (r >= radius) return 0.0;
  const double g = std::exp(-0.5 * r * r / (sigma * sigma));
  if (r <= radius - 1.0) return g;
  const double t = radius - r;  // in (0, 1)
  const double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
  return g * a / (a + b);
}

/// Unnormalized pointwise value h^{-1/2} rho(y / sqrt h) e^{i xi0.y / h} in the exponential chart at x0.
inline cplx wavepacket_value(const WavePacketSpec& s, const Vec3& x) {
  const Vec3& x0 = s.center.base().vec();
  const double sh = std::sqrt(s.h);
  const double dist = angular_distance(x0, x);
  if (dist >= s.radius * sh) return 0.0;
  const Vec2 y = sphere_to_chart(s.center.base(), x);
  const auto [e1, e2] = frame_at(s.center.base());
  const Vec2 xi(s.center.dir().vec().dot(e1.vec()), s.center.dir().vec().dot(e2.vec()));
  return wavepacket_profile(y.norm() / sh, s.radius, s.sigma) / sh * std::polar(1.0, xi.dot(y) / s.h);
}

/// Wave packet sampled on the grid, analyzed to bandwidth lmax and normalized.
inline HarmonicCoeffs make_wavepacket(const WavePacketSpec& spec, const QuadGrid& grid, int lmax) {
  spec.validate();
  if (lmax < 0 || lmax > grid.lmax()) throw PreconditionError("make_wavepacket: lmax must lie in [0, grid bandwidth]");
  SphericalTransform t(grid, lmax);
  HarmonicCoeffs c = t.analyze(sample_on_grid(grid, [&](const Vec3& x) { return wavepacket_value(spec, x); }));
  const double n = c.norm();
  if (!(n > 0.0)) throw NumericalGuardError("make_wavepacket: packet is not resolved by the grid");
  c *= 1.0 / n;
  return c;
}

inline HarmonicCoeffs make_wavepacket(const WavePacketSpec& spec, const QuadGrid& grid) { return make_wavepacket(spec, grid, grid.lmax()); }

/// Grid used for wave-packet sampling at bandwidth lmax.
inline QuadGrid wavepacket_grid(int lmax) { return QuadGrid(std::max(2 * lmax, 64)); }

// ---------------------------------------------------------------------------
// Density observables.

/// int x |u|^2 dx, exact on a grid of bandwidth L+1.
class MomentIntegrator {
 public:
  explicit MomentIntegrator(int lmax) : t_(QuadGrid(lmax + 1), lmax) {}

  Vec3 first_moment(const HarmonicCoeffs& u) {
    const QuadGrid& g = t_.grid();
    const std::vector<cplx> v = t_.synthesize(u);
    Vec3 acc = Vec3::Zero();
    for (int j = 0; j < g.n_theta(); ++j) {
      Vec3 ring = Vec3::Zero();
      for (int k = 0; k < g.n_phi(); ++k) ring += std::norm(v[g.index(j, k)]) * g.point(j, k);
      acc += g.weight(j) * ring;
    }
    return acc;
  }

  /// Direction of the first moment; throws when the moment vanishes.
  UnitVec3 center_of_mass(const HarmonicCoeffs& u) { return UnitVec3(first_moment(u)); }

 private:
  SphericalTransform t_;
};

/// Mass within angular distance `width` of the great circle with unit normal n,
/// as |u|^2 minus the masses of the two complementary polar caps.
class TubeIntegrator {
 public:
  TubeIntegrator(const UnitVec3& n, double width, int lmax)
      : north_(Cap(n, 0.5 * kPi - width), lmax), south_(Cap(-n, 0.5 * kPi - width), lmax) {
    if (!(width > 0.0 && width < 0.5 * kPi)) throw PreconditionError("TubeIntegrator: width must lie in (0, pi/2)");
  }

  double mass(const HarmonicCoeffs& u) const { return u.norm2() - north_.mass(u) - south_.mass(u); }

 private:
  PolarCapIntegral north_, south_;
};

}  // namespace sphobs
