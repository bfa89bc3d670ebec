#include <gtest/gtest.h>

#include <random>

#include "sphobs/radon.hpp"
#include "sphobs/rotation.hpp"
#include "test_support.hpp"

using namespace sphobs;
using sphobs::testing::random_rotation;
using sphobs::testing::random_unit;

namespace {

// (l-1)!!/l!! for even l, as an explicit product.
double double_factorial_ratio(int l) {
  double r = 1.0;
  for (int j = 1; j <= l; ++j) r *= (j % 2 == 1) ? static_cast<double>(j) : 1.0 / j;
  return r;
}

HarmonicCoeffs parity_part(const HarmonicCoeffs& c, int parity) {
  HarmonicCoeffs out = c;
  for (int l = 0; l <= c.lmax(); ++l)
    if (l % 2 != parity)
      for (int m = -l; m <= l; ++m) out(l, m) = 0.0;
  return out;
}

}  // namespace

TEST(FunkTable, LowDegrees) {
  const FunkMultiplierTable p(6);
  const double expected[] = {1.0, 0.0, -0.5, 0.0, 0.375, 0.0, -0.3125};
  for (int l = 0; l <= 6; ++l) EXPECT_EQ(p(l), expected[l]);
}

TEST(FunkTable, MagnitudeAndSigns) {
  const FunkMultiplierTable p(60);
  for (int l = 0; l <= 60; ++l) {
    if (l % 2 == 1) {
      EXPECT_EQ(p(l), 0.0);
      continue;
    }
    EXPECT_NEAR(std::abs(p(l)), double_factorial_ratio(l), 1e-15);
    EXPECT_EQ(p(l) > 0.0, l % 4 == 0);
    if (l >= 2) EXPECT_LT(std::abs(p(l)), std::abs(p(l - 2)));
  }
}

TEST(FunkTable, AmplificationGrowth) {
  const FunkMultiplierTable p(20);
  const double gain = p.amplification(20);
  EXPECT_NEAR(gain, 1.0 / double_factorial_ratio(20), 1e-12);
  EXPECT_NEAR(gain, 5.675464, 1e-6);
  EXPECT_NEAR(gain / std::sqrt(kPi * 20 / 2), 1.0, 0.02);
  EXPECT_THROW(p.amplification(3), DomainError);
}

TEST(FunkQuadrature, Examples) {
  std::mt19937_64 rng(1);
  const TriaxialForm q(1, 2, 3);
  for (int i = 0; i < 20; ++i) {
    const UnitVec3 n = random_unit(rng);
    EXPECT_NEAR(funk_transform_quadrature([](const Vec3&) { return 1.0; }, n), 1.0, 1e-15);
    EXPECT_NEAR(funk_transform_quadrature([](const Vec3& x) { return x.z(); }, n), 0.0, 1e-14);
    EXPECT_NEAR(funk_transform_quadrature([&](const Vec3& x) { return q.value(x); }, n), 0.5 * (q.trace() - q.value(n)), 1e-14);
  }
  EXPECT_NEAR(funk_transform_quadrature([&](const Vec3& x) { return q.value(x); }, UnitVec3(0, 0, 1)), 1.5, 1e-14);
  EXPECT_THROW(funk_transform_quadrature([](const Vec3&) { return 1.0; }, UnitVec3(0, 0, 1), 8), PreconditionError);
}

TEST(FunkCoeffs, SingleHarmonics) {
  std::mt19937_64 rng(2);
  const HarmonicCoeffs y21 = HarmonicCoeffs::delta(4, 2, 1);
  const HarmonicCoeffs out = funk_transform_coeffs(y21);
  EXPECT_EQ(out(2, 1), cplx(-0.5));
  for (int i = 0; i < 10; ++i) {
    const UnitVec3 n = random_unit(rng);
    const double re = funk_transform_quadrature([](const Vec3& x) { return spherical_harmonic(2, 1, x).real(); }, n);
    const double im = funk_transform_quadrature([](const Vec3& x) { return spherical_harmonic(2, 1, x).imag(); }, n);
    EXPECT_LE(std::abs(cplx(re, im) + 0.5 * spherical_harmonic(2, 1, n)), 1e-13);
  }
  EXPECT_EQ(funk_transform_coeffs(HarmonicCoeffs::delta(4, 3, 0)).norm(), 0.0);
  EXPECT_EQ(funk_transform_coeffs(HarmonicCoeffs::delta(4, 0, 0))(0, 0), cplx(1.0));
}

TEST(FunkCoeffs, AgreesWithQuadratureOracle) {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int f = 0; f < 50; ++f) {
    const HarmonicCoeffs c = random_coeffs(16, rng, true);
    const HarmonicCoeffs ic = funk_transform_coeffs(c);
    for (int i = 0; i < 5; ++i) {
      const UnitVec3 n = random_unit(rng);
      const double quad = funk_transform_quadrature([&](const Vec3& x) { return evaluate(c, x).real(); }, n, 256);
      worst = std::max(worst, std::abs(quad - evaluate(ic, n).real()));
    }
  }
  EXPECT_LE(worst, 1e-8);
}

TEST(FunkCoeffs, OddFunctionsAnnihilated) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 10; ++i) {
    const HarmonicCoeffs odd = parity_part(random_coeffs(15, rng, true), 1);
    EXPECT_LE(funk_transform_coeffs(odd).norm(), 1e-10);
    const UnitVec3 n = random_unit(rng);
    EXPECT_NEAR(funk_transform_quadrature([&](const Vec3& x) { return evaluate(odd, x).real(); }, n), 0.0, 1e-10);
  }
}

TEST(FunkCoeffs, CommutesWithRotations) {
  std::mt19937_64 rng(5);
  const HarmonicCoeffs f = random_coeffs(10, rng, true);
  for (int i = 0; i < 10; ++i) {
    const Eigen::Matrix3d r = random_rotation(rng);
    const Rotation rot = Rotation::from_matrix(r);
    EXPECT_LE(funk_transform_coeffs(rot.apply(f)).max_abs_diff(rot.apply(funk_transform_coeffs(f))), 1e-10);
    const UnitVec3 n = random_unit(rng);
    const double lhs = funk_transform_quadrature([&](const Vec3& x) { return evaluate(f, r.transpose() * x).real(); }, n);
    const double rhs = funk_transform_quadrature([&](const Vec3& x) { return evaluate(f, x).real(); }, UnitVec3(r.transpose() * n.vec()));
    EXPECT_NEAR(lhs, rhs, 1e-6);
  }
}

TEST(InvertEven, RoundTrip) {
  std::mt19937_64 rng(6);
  const HarmonicCoeffs one = HarmonicCoeffs::delta(6, 0, 0, 2.0);
  EXPECT_EQ(invert_even(one).max_abs_diff(one), 0.0);
  for (int i = 0; i < 10; ++i) {
    const HarmonicCoeffs even = parity_part(random_coeffs(20, rng, true), 0);
    EXPECT_LE(funk_transform_coeffs(invert_even(even)).max_abs_diff(even), 1e-9);
  }
}

TEST(InvertEven, RejectsOddInput) {
  HarmonicCoeffs c = HarmonicCoeffs::delta(4, 2, 0);
  c(3, 1) = 1e-6;
  EXPECT_THROW(invert_even(c), PreconditionError);
  c(3, 1) = 1e-12;
  EXPECT_NO_THROW(invert_even(c));
}

TEST(Potential, ClosedFormAndFunkRoundTrip) {
  std::mt19937_64 rng(7);
  const TriaxialForm q(1, 2, 3);
  const HarmonicCoeffs v = synthesize_potential(q);
  EXPECT_EQ(v.lmax(), 2);
  for (int m = -1; m <= 1; ++m) EXPECT_EQ(v(1, m), cplx(0.0));
  EXPECT_LE(v.real_symmetry_defect(), 1e-14);
  for (int i = 0; i < 100; ++i) {
    const UnitVec3 x = random_unit(rng);
    EXPECT_NEAR(evaluate(v, x).real(), 6.0 - 2.0 * q.value(x), 1e-12);
    EXPECT_NEAR(potential_value(q, x), potential_value(q, -x.vec()), 0.0);
    const double iv = funk_transform_quadrature([&](const Vec3& y) { return potential_value(q, y); }, x);
    EXPECT_NEAR(iv, q.value(x), 1e-8);
    EXPECT_NEAR(evaluate(funk_transform_coeffs(v), x).real(), q.value(x), 1e-12);
  }
  EXPECT_NEAR(funk_transform_quadrature([&](const Vec3& y) { return potential_value(q, y); }, UnitVec3(0, 0, 1)), 3.0, 1e-14);
}

TEST(Potential, RequiresOrderedAxes) {
  EXPECT_THROW(TriaxialForm(2, 1, 3), PreconditionError);
  EXPECT_THROW(TriaxialForm(0, 1, 3), PreconditionError);
  EXPECT_THROW(TriaxialForm(1, 1, 3), PreconditionError);
  try {
    TriaxialForm(2, 1, 3);
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("requires 0<a<b<c"), std::string::npos);
  }
}

TEST(Potential, Formula) {
  EXPECT_EQ(potential_formula(TriaxialForm(1, 2, 3)), "V(x) = 6 - 2*(1*x1^2 + 2*x2^2 + 3*x3^2)");
}
