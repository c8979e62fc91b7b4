#pragma once

// The canonical Gamma-ensemble rho(x) ~ exp(-beta H(x)) on CP^n.
//
// Under the uniform Fubini-Study measure the energy-basis populations
// p_k = |<k|psi>|^2 are flat-Dirichlet on the simplex and H(x) = sum_k p_k E_k.
// Every equilibrium quantity therefore reduces to flat-Dirichlet averages of
// exp(-beta sum_k p_k E_k). By Hermite-Genocchi,
//
//   E_Dir(1,...,1)[exp(-sum_k p_k x_k)] = n! (-1)^n exp(-.)[x_0, ..., x_n],
//
// a divided difference of exp(-y). Population moments correspond to divided
// differences with repeated nodes.
//
// Partition functions are reported per unit phase-space volume (z_rel): the
// total Fubini-Study volume cancels from every physical ratio, so no volume
// normalisation is committed to.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qtherm/geometry.hpp"

namespace qtherm {

/// Divided difference of y -> exp(-(y - shift)) at `nodes` (repeats allowed),
/// evaluated through the exponential of the bidiagonal node matrix.
double exp_divided_difference(std::span<const double> nodes, double shift);

enum class PartitionRoute {
  automatic,          ///< closed form unless degenerate or some beta gap < 0.5
  closed_form,        ///< n! sum_k e^{-x_k} / prod_{j!=k} (x_j - x_k)
  divided_difference  ///< bidiagonal matrix exponential, stable for clusters
};

/// z_rel(beta) = E_flat-Dirichlet[exp(-beta sum_k p_k E_k)].
double partition_function(const Spectrum& spectrum, double beta,
                          PartitionRoute route = PartitionRoute::automatic);
/// ln z_rel, finite for large beta where z_rel itself would overflow.
double log_partition_function(const Spectrum& spectrum, double beta,
                              PartitionRoute route = PartitionRoute::automatic);

/// Route `automatic` picks for this (spectrum, beta).
PartitionRoute automatic_route(const Spectrum& spectrum, double beta);

/// Canonical averages of the energy-basis populations, computed exactly.
struct PopulationMoments {
  std::vector<double> first;  ///< E_rho[p_k]
  RVector second_flat;        ///< E_rho[p_k p_l], row-major N x N
  double second(std::size_t k, std::size_t l) const {
    return second_flat[static_cast<Eigen::Index>(k * first.size() + l)];
  }
};

PopulationMoments exact_population_moments(const Spectrum& spectrum, double beta);

/// U = -d ln z_rel / d beta by central differences (step 1e-4 max(1, beta))
/// with one Richardson extrapolation.
double equilibrium_energy(const Spectrum& spectrum, double beta);
/// C = dU/dT = beta^2 d^2 ln z_rel / d beta^2; requires beta > 0.
double heat_capacity(const Spectrum& spectrum, double beta);

struct CanonicalResult {
  double beta = 0.0;
  double z_rel = 0.0;
  double u = 0.0;
  double var_total = 0.0;      ///< E[<H^2>] - U^2
  double var_classical = 0.0;  ///< variance of H(x) under rho(x)
  double c = 0.0;              ///< heat capacity (k = 1)
};

CanonicalResult canonical_summary(const Spectrum& spectrum, double beta);

/// |T^2 C - (Var[H] + (n+1) T (U - Hbar))| with Var[H] the total
/// (quantum plus thermal) variance.
double verify_capacity_identity(const Spectrum& spectrum, double beta);

// ---------------------------------------------------------------------------
// Density of states

enum class DosMethod { exact_piecewise, monte_carlo };

struct DosEstimate {
  std::vector<double> energies;
  std::vector<double> density;    ///< normalised so that integral of density dE = 1
  std::vector<double> std_error;  ///< zero for the exact method
  DosMethod method = DosMethod::exact_piecewise;
};

struct DosOptions {
  std::size_t samples = 1'000'000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

/// Exact piecewise-polynomial density for n <= 2; otherwise a Monte Carlo
/// histogram whose bins are centred on the (increasing) grid points.
DosEstimate dos(const Spectrum& spectrum, std::span<const double> grid, const DosOptions& options = {});

// ---------------------------------------------------------------------------
// Monte Carlo

struct McOptions {
  std::size_t samples = 1'000'000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

struct McValue {
  double value = 0.0;
  double std_error = 0.0;
};

/// Plain flat-Dirichlet Monte Carlo estimate of z_rel.
McValue partition_function_mc(const Spectrum& spectrum, double beta, const McOptions& options = {});

/// Importance-weighted flat-Dirichlet estimate of the canonical moments of
/// the projector, rotated back to the basis of `h`.
struct EquilibriumMoments {
  DensityMatrix rho;
  /// Standard errors of rho: real part holds se(Re rho), imaginary part
  /// se(Im rho). Full covariance propagation through the eigenbasis rotation.
  CMatrix rho_se;
  SecondMoment r2;
  /// Per-entry error bars of r2 (same re/im convention). In a rotated basis
  /// these are the triangle-inequality bound sum |coef| se(E[p_k p_l]).
  std::vector<Complex> r2_se;
  double energy = 0.0;
  double energy_se = 0.0;
  std::size_t samples = 0;
};

EquilibriumMoments equilibrium_moments(const HermitianOperator& h, double beta,
                                       const McOptions& options = {});
DensityMatrix equilibrium_density_matrix(const HermitianOperator& h, double beta,
                                         const McOptions& options = {});
SecondMoment equilibrium_second_moment(const HermitianOperator& h, double beta,
                                       const McOptions& options = {});

/// Exact canonical moments from the divided-difference population moments.
DensityMatrix exact_equilibrium_density_matrix(const HermitianOperator& h, double beta);
SecondMoment exact_equilibrium_second_moment(const HermitianOperator& h, double beta);

/// Assemble R in the original basis from population second moments M_kl in
/// the eigenbasis (columns of `unitary`), using phase-pair symmetry.
SecondMoment second_moment_from_populations(const CMatrix& unitary, const RVector& second_flat);

/// Conventional reference e^{-beta H} / tr e^{-beta H}.
DensityMatrix von_neumann_density_matrix(const HermitianOperator& h, double beta);

}  // namespace qtherm
