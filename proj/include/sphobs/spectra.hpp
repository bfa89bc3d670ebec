#pragma once

// Dense eigenproblem for (-Laplacian)^{alpha/2} + V on the truncated harmonic
// basis, and eigenfunction observability scans.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "sphobs/cap_integral.hpp"
#include "sphobs/harmonics.hpp"
#include "sphobs/radon.hpp"

namespace sphobs {

struct PotentialMatrix {
  Eigen::MatrixXcd matrix;          ///< symmetrized Galerkin matrix over flat index l^2+l+m
  double hermiticity_defect = 0.0;  ///< max |M - M^H| before symmetrization
};

/// Galerkin matrix M_{(lm),(l'm')} = int conj(Y_lm) V Y_l'm', exact on a grid of bandwidth L + ceil(L_V/2).
inline PotentialMatrix potential_matrix(const HarmonicCoeffs& v, int lmax) {
  if (lmax < 0) throw PreconditionError("potential_matrix: lmax must be >= 0");
  const int lv = v.lmax();
  SphericalTransform t(QuadGrid(lmax + (lv + 1) / 2), lmax);
  const std::vector<cplx> vals = [&] {
    SphericalTransform tv(t.grid(), lv);
    return tv.synthesize(v);
  }();
  const auto n = static_cast<Eigen::Index>(HarmonicCoeffs::size_for(lmax));
  PotentialMatrix out;
  out.matrix.resize(n, n);
  std::vector<cplx> buf(t.grid().size());
  HarmonicCoeffs col(lmax);
  for (int l = 0; l <= lmax; ++l)
    for (int m = -l; m <= l; ++m) {
      t.synthesize_into(HarmonicCoeffs::delta(lmax, l, m), buf);
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] *= vals[i];
      t.analyze_into(buf, col);
      const auto j = static_cast<Eigen::Index>(HarmonicCoeffs::index(l, m));
      for (Eigen::Index i = 0; i < n; ++i) out.matrix(i, j) = col[static_cast<std::size_t>(i)];
    }
  out.hermiticity_defect = (out.matrix - out.matrix.adjoint()).cwiseAbs().maxCoeff();
  const Eigen::MatrixXcd sym = 0.5 * (out.matrix + out.matrix.adjoint());
  out.matrix = sym;
  const double scale = out.matrix.cwiseAbs().maxCoeff();
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      if (std::abs(out.matrix(i, j)) <= 1e-14 * scale) out.matrix(i, j) = 0.0;
  return out;
}

/// Connected components of the nonzero pattern of a square matrix.
inline std::vector<std::vector<Eigen::Index>> coupling_blocks(const Eigen::MatrixXcd& m) {
  const Eigen::Index n = m.rows();
  std::vector<Eigen::Index> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), Eigen::Index{0});
  auto find = [&](Eigen::Index i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i)
      if (m(i, j) != cplx(0.0)) parent[find(i)] = find(j);
  std::vector<std::vector<Eigen::Index>> blocks;
  std::vector<Eigen::Index> slot(static_cast<std::size_t>(n), -1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index r = find(i);
    if (slot[r] < 0) {
      slot[r] = static_cast<Eigen::Index>(blocks.size());
      blocks.emplace_back();
    }
    blocks[slot[r]].push_back(i);
  }
  return blocks;
}

struct SpectralDecomposition {
  int lmax = 0;
  double alpha = 2.0;
  std::vector<double> eigenvalues;          ///< ascending
  std::vector<HarmonicCoeffs> eigenvectors;  ///< unit norm
  std::vector<double> residuals;            ///< |H phi - lambda phi|
  double operator_norm = 0.0;               ///< max |lambda|
  std::size_t n_blocks = 0;
  double hermiticity_defect = 0.0;
};

/// Dense self-adjoint eigendecomposition of diag(omega_l) + P_L V P_L, solved block by block.
inline SpectralDecomposition eigensolve(double alpha, const HarmonicCoeffs& v, int lmax) {
  if (!(alpha > 0.0)) throw DomainError("eigensolve: alpha must be > 0");
  if (v.real_symmetry_defect() > 1e-12 * (1.0 + v.norm())) throw PreconditionError("eigensolve: potential must be real-valued");
  const PotentialMatrix pm = potential_matrix(v, lmax);
  Eigen::MatrixXcd h = pm.matrix;
  for (int l = 0; l <= lmax; ++l)
    for (int m = -l; m <= l; ++m) {
      const auto i = static_cast<Eigen::Index>(HarmonicCoeffs::index(l, m));
      h(i, i) += fractional_multiplier(l, alpha, 2);
    }
  const auto blocks = coupling_blocks(h);

  struct Pair {
    double lambda;
    HarmonicCoeffs vec;
    double residual;
  };
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<std::size_t>(h.rows()));
  for (const auto& b : blocks) {
    const auto nb = static_cast<Eigen::Index>(b.size());
    Eigen::MatrixXcd sub(nb, nb);
    for (Eigen::Index i = 0; i < nb; ++i)
      for (Eigen::Index j = 0; j < nb; ++j) sub(i, j) = h(b[i], b[j]);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(sub);
    if (es.info() != Eigen::Success)
      throw NumericalGuardError("eigensolve: eigensolver failed on a block of size " + std::to_string(nb) +
                                ", max entry " + std::to_string(sub.cwiseAbs().maxCoeff()));
    const Eigen::MatrixXcd r = sub * es.eigenvectors() - es.eigenvectors() * es.eigenvalues().asDiagonal();
    for (Eigen::Index k = 0; k < nb; ++k) {
      HarmonicCoeffs c(lmax);
      for (Eigen::Index i = 0; i < nb; ++i) c[static_cast<std::size_t>(b[i])] = es.eigenvectors()(i, k);
      pairs.push_back({es.eigenvalues()(k), std::move(c), r.col(k).norm()});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.lambda < b.lambda; });

  SpectralDecomposition d;
  d.lmax = lmax;
  d.alpha = alpha;
  d.n_blocks = blocks.size();
  d.hermiticity_defect = pm.hermiticity_defect;
  for (auto& p : pairs) {
    d.eigenvalues.push_back(p.lambda);
    d.eigenvectors.push_back(std::move(p.vec));
    d.residuals.push_back(p.residual);
    d.operator_norm = std::max(d.operator_norm, std::abs(p.lambda));
  }
  return d;
}

/// sup |V| for V = scale * ((a+b+c) - 2Q): attained on the coordinate axes.
inline double potential_sup(const TriaxialForm& q) {
  double s = 0.0;
  for (double x : {q.a, q.b, q.c}) s = std::max(s, std::abs(q.trace() - 2.0 * x));
  return s;
}

/// Default scale: eps * sup|V| equals the cluster spacing 2(k+1) at k = 20.
inline double default_potential_scale(const TriaxialForm& q) { return 42.0 / potential_sup(q); }

inline HarmonicCoeffs scaled_potential(const TriaxialForm& q, double eps) {
  HarmonicCoeffs v = synthesize_potential(q);
  v *= eps;
  return v;
}

struct EigenObsRow {
  std::size_t index;
  double lambda;
  int cluster_k;
  double mass_omega;
  double min_in_cluster;
  bool trusted;
};

struct ClusterSummary {
  int k;
  double min_mass;  ///< over eigenpairs and over the eigenspaces of degenerate groups
  bool trusted;
};

struct EigenObsScan {
  std::vector<EigenObsRow> rows;
  std::vector<ClusterSummary> clusters;
  double min_mass = 0.0;          ///< over trusted eigenpairs
  double degeneracy_gap = 1e-8;
  double trust_threshold = 0.0;   ///< eigenvalues above it are untrusted
};

/// mass_omega for every eigenpair; cluster k holds sorted indices k^2 .. (k+1)^2 - 1.
/// Within a degenerate group (gap < degeneracy_gap) the minimum over the eigenspace is the
/// smallest eigenvalue of the localization Gram matrix.
inline EigenObsScan eigen_obs_scan(const SpectralDecomposition& d, const Region& region, double degeneracy_gap = 1e-8) {
  const std::size_t n = d.eigenvalues.size();
  EigenObsScan scan;
  scan.degeneracy_gap = degeneracy_gap;
  if (n == 0) return scan;
  const double lo = d.eigenvalues.front(), hi = d.eigenvalues.back();
  scan.trust_threshold = hi - 0.1 * (hi - lo);
  const RegionIntegrator integ(region, d.lmax);

  std::vector<double> mass(n), group_min(n);
  for (std::size_t i = 0; i < n; ++i) group_min[i] = mass[i] = integ.mass(d.eigenvectors[i]);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && d.eigenvalues[j] - d.eigenvalues[j - 1] < degeneracy_gap * std::max(1.0, std::abs(d.eigenvalues[j]))) ++j;
    if (j - i > 1) {
      const std::vector<HarmonicCoeffs> group(d.eigenvectors.begin() + static_cast<std::ptrdiff_t>(i),
                                              d.eigenvectors.begin() + static_cast<std::ptrdiff_t>(j));
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(integ.gram(group), Eigen::EigenvaluesOnly);
      const double gmin = std::max(0.0, es.eigenvalues()(0));
      for (std::size_t k = i; k < j; ++k) group_min[k] = gmin;
    }
    i = j;
  }

  const int kmax = static_cast<int>(std::floor(std::sqrt(static_cast<double>(n - 1))));
  scan.clusters.resize(static_cast<std::size_t>(kmax + 1));
  for (int k = 0; k <= kmax; ++k) scan.clusters[k] = {k, std::numeric_limits<double>::infinity(), true};
  scan.min_mass = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const int k = static_cast<int>(std::floor(std::sqrt(static_cast<double>(i))));
    const bool trusted = d.eigenvalues[i] < scan.trust_threshold;
    ClusterSummary& c = scan.clusters[k];
    c.min_mass = std::min({c.min_mass, mass[i], group_min[i]});
    c.trusted = c.trusted && trusted;
    if (trusted) scan.min_mass = std::min({scan.min_mass, mass[i], group_min[i]});
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int k = static_cast<int>(std::floor(std::sqrt(static_cast<double>(i))));
    scan.rows.push_back({i, d.eigenvalues[i], k, mass[i], scan.clusters[k].min_mass, d.eigenvalues[i] < scan.trust_threshold});
  }
  return scan;
}

}  // namespace sphobs
