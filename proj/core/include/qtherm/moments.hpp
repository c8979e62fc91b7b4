#pragma once

// Density-matrix moment dynamics.
//
// For the ensemble average rho = E[Pi] and R = E[Pi (x) Pi] the state
// dynamics imply the closed linear law
//
//   d rho / dt = i (H rho - rho H) - (kappa^2 beta / 4)(H rho + rho H)
//                + (kappa^2 / 2)(I - (n+1) rho + beta C(H, R)),
//
// with C(H, R)^a_b = sum_{c,d} H(d, c) R^{ac}_{bd}. The commutator sign
// matches the symplectic lift +i(H - <H>) psi used by the integrator.

#include <cstddef>
#include <span>
#include <vector>

#include "qtherm/canonical.hpp"
#include "qtherm/geometry.hpp"
#include "qtherm/sde.hpp"

namespace qtherm {

struct MomentSnapshot {
  double time = 0.0;
  DensityMatrix rho;
  CMatrix rho_se;  ///< real part: se(Re rho), imaginary part: se(Im rho)
  SecondMoment r2;
  std::vector<Complex> r2_se;  ///< same convention, indexed like r2
  std::size_t samples = 0;
};

/// Sample means of Pi and Pi (x) Pi with jackknife standard errors (for a
/// sample mean these equal s / sqrt(n)).
MomentSnapshot estimate_moments(std::span<const PureState> states, double time = 0.0);

/// C(H, R)^a_b = sum_{c,d} H(d, c) R^{ac}_{bd}.
CMatrix contract(const HermitianOperator& h, const SecondMoment& r2);

/// The four contributions to d rho / dt.
struct LiouvilleTerms {
  CMatrix commutator;      ///< i (H rho - rho H)
  CMatrix anticommutator;  ///< -(kappa^2 beta / 4)(H rho + rho H)
  CMatrix laplacian;       ///< (kappa^2 / 2)(I - (n+1) rho)
  CMatrix second_moment;   ///< (kappa^2 beta / 2) C(H, R)
  CMatrix total() const { return commutator + anticommutator + laplacian + second_moment; }
};

LiouvilleTerms liouville_terms(const CMatrix& rho, const SecondMoment& r2,
                               const HermitianOperator& h, double beta, double kappa);
CMatrix liouville_rhs(const DensityMatrix& rho, const SecondMoment& r2, const HermitianOperator& h,
                      double beta, double kappa);
/// Right-hand side at rho = Pi(psi), R = Pi (x) Pi, where C(H, R) = <H> Pi.
CMatrix liouville_rhs_pure(const PureState& psi, const HermitianOperator& h, double beta,
                           double kappa);

/// Moment snapshots from one SDE ensemble, plus the paired finite-difference
/// residual of the moment law.
///
/// For trajectory j and interior record k the residual is
/// (Pi_j(k+1) - Pi_j(k-1)) / (2 Delta) - rhs(Pi_j(k)). Its trajectory mean is
/// exactly the central difference of the snapshots minus the right-hand side
/// at the snapshot moments, and its spread gives an honest paired error.
/// `bias` is the Richardson estimate of the O(Delta^2) differencing error from
/// the +-2 record difference, set to zero when not statistically resolved.
struct MomentSeries {
  double spacing = 0.0;
  std::vector<MomentSnapshot> snapshots;
  std::vector<std::size_t> residual_index;
  std::vector<CMatrix> residual;     ///< re/im parts
  std::vector<CMatrix> residual_se;  ///< re/im convention
  std::vector<CMatrix> bias;         ///< re/im convention
};

/// Runs the ensemble and accumulates moments at every record. Needs at least
/// two trajectories; the paired residuals need at least five records.
MomentSeries run_moment_ensemble(const InitialLaw& law, const HermitianOperator& h,
                                 const SdeParams& params, unsigned workers = 1);

struct NormalizedResidual {
  double time = 0.0;
  std::size_t row = 0;
  std::size_t col = 0;
  bool imaginary = false;
  double residual = 0.0;
  double error = 0.0;  ///< standard error plus bias bound
  double z = 0.0;      ///< residual / error
};

struct LiouvilleReport {
  std::vector<NormalizedResidual> residuals;
  double fraction_within_3 = 0.0;
  double max_abs_z = 0.0;
  double max_trace = 0.0;           ///< max |tr rhs| over snapshots
  double max_hermiticity = 0.0;     ///< max |rhs - rhs^dagger|
  double max_energy_channel = 0.0;  ///< max |tr(H rhs) - energy law|
  bool passed(double min_fraction = 0.95) const { return fraction_within_3 >= min_fraction; }
};

/// Compares central differences of the snapshots with the right-hand side at
/// interior snapshots, over the independent entries (diagonal real parts,
/// upper-triangle real and imaginary parts). Uses the paired residuals when
/// the series carries them; otherwise the error combines the snapshot
/// errors of both differences with a linear bound on the rhs error.
/// Throws UsageError for fewer than 3 snapshots or nonuniform spacing.
LiouvilleReport verify_liouville(const MomentSeries& series, const HermitianOperator& h,
                                 double beta, double kappa);

struct FixedPointResidual {
  CMatrix rhs;  ///< estimate of rhs at the canonical moments
  CMatrix se;   ///< re/im convention
  double max_abs_z = 0.0;
};

/// Importance-weighted canonical average of liouville_rhs_pure, which equals
/// the rhs at the canonical moments because the rhs is linear in (rho, R).
FixedPointResidual canonical_fixed_point_residual(const HermitianOperator& h, double beta,
                                                  double kappa, const McOptions& options = {});

}  // namespace qtherm
