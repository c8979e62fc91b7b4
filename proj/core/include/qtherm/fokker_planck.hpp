#pragma once

// Azimuthally symmetric Fokker-Planck equation on CP^1 in u = cos(theta):
//
//   d rho / dt = d/du [ (kappa^2 / 2) (1 - u^2) (d rho / du + beta h rho) ],
//
// with rho a density with respect to du, H = h u, upper level at u = +1.
// The symplectic flow only advects the azimuth and drops out for such data.
// The diffusion coefficient vanishes at u = +-1, so the boundary fluxes are
// zero without an explicit boundary condition.
//
// Discretisation: M cells of width 2/M, Chang-Cooper (Scharfetter-Gummel)
// exponentially fitted fluxes and explicit Euler in time. The discrete
// equilibrium exp(-beta h u_i) has exactly zero flux, mass is conserved to
// rounding, and the scheme preserves positivity when
// dt <= 0.4 du^2 / (kappa^2 max_i c_i), c_i the flux coefficient below.

#include <cstddef>
#include <vector>

#include "qtherm/types.hpp"

namespace qtherm {

struct Density1D {
  std::vector<double> values;  ///< rho at cell centres, sum(values) * du = 1
  double time = 0.0;

  std::size_t cells() const noexcept { return values.size(); }
  double du() const noexcept { return 2.0 / static_cast<double>(values.size()); }
  double center(std::size_t i) const noexcept {
    return -1.0 + (static_cast<double>(i) + 0.5) * du();
  }
  double mass() const;

  /// Discrete equilibrium proportional to exp(-beta h u).
  static Density1D stationary(std::size_t cells, double h, double beta);
  static Density1D uniform(std::size_t cells);
  /// Normalised Gaussian bump exp(-(u - center)^2 / (2 width^2)). The width
  /// must be at least 3 du. Values are floored at 1e-250 before normalising
  /// so that logarithms stay finite.
  static Density1D gaussian(std::size_t cells, double center, double width);
  /// rho = (1 + a u) / 2, |a| <= 1.
  static Density1D linear(std::size_t cells, double slope);
};

/// Fixed-grid Chang-Cooper stepper.
class FokkerPlanckCP1 {
 public:
  FokkerPlanckCP1(std::size_t cells, double h, double beta, double kappa);

  std::size_t cells() const noexcept { return cells_; }
  double du() const noexcept { return du_; }
  /// Largest dt satisfying 0.4 du^2 / (kappa^2 max flux coefficient).
  double max_stable_dt() const noexcept { return max_dt_; }

  /// Flux J_{i+1/2} through the M-1 interior faces (positive towards +u).
  std::vector<double> fluxes(const Density1D& rho) const;
  /// Semi-discrete right-hand side d rho_i / dt.
  std::vector<double> rate(const Density1D& rho) const;

  /// One explicit step; throws GuardError("dt") above max_stable_dt().
  Density1D step(const Density1D& rho, double dt) const;

 private:
  std::size_t cells_;
  double du_;
  double kappa_;
  std::vector<double> forward_;   ///< coefficient of rho_i in J_{i+1/2}, per du
  std::vector<double> backward_;  ///< coefficient of rho_{i+1} in J_{i+1/2}, per du
  double max_dt_;
};

/// fp_step: convenience wrapper building the stepper for one step.
Density1D fp_step(const Density1D& rho, double h, double beta, double kappa, double dt);

/// -sum rho ln rho du (0 ln 0 = 0), relative to the du measure.
double entropy(const Density1D& rho);
/// sum h u rho du.
double energy(const Density1D& rho, double h);
/// sum |rho - rho_eq| du against the discrete equilibrium.
double l1_distance_to_equilibrium(const Density1D& rho, double h, double beta);

/// eta(u) = -(1/beta) ln rho - h u, shifted to zero mean under rho.
/// Throws UsageError if any cell is nonpositive or beta <= 0.
std::vector<double> eta_field(const Density1D& rho, double h, double beta);

/// (kappa^2 beta^2 / 2) integral (1 - u^2) (d eta / du)^2 rho du evaluated
/// from the eta field on cell faces.
double eta_production(const Density1D& rho, double h, double beta, double kappa);

/// The same production written without eta, valid also at beta = 0:
/// (kappa^2 / 2) integral (1 - u^2) (d ln rho / du + beta h)^2 rho du.
double entropy_production(const Density1D& rho, double h, double beta, double kappa);

struct ThermoSeries {
  std::vector<double> times;
  std::vector<double> entropy;     ///< S
  std::vector<double> energy;      ///< U
  std::vector<double> d_entropy;   ///< dS/dt from the semi-discrete rate
  std::vector<double> d_energy;    ///< dU/dt from the semi-discrete rate
  std::vector<double> production;  ///< P_eta >= 0 (face quadrature)
  std::vector<double> residual;    ///< dS/dt - beta dU/dt - P_eta
  std::vector<double> l1_distance;  ///< distance to the discrete equilibrium
  Density1D final_density;
};

/// Steps from `initial` to t_max (last step shortened to land on t_max),
/// recording at t = 0 and every `record_stride` steps and at the end.
/// dt <= 0 selects max_stable_dt().
ThermoSeries solve(const Density1D& initial, double h, double beta, double kappa, double t_max,
                   double dt = 0.0, std::size_t record_stride = 1);

}  // namespace qtherm
