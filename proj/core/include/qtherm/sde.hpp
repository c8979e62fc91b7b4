#pragma once

// Stochastic thermalisation dynamics integrated in the ambient Hilbert space.
//
// The state follows
//
//   d psi = [ i (H - <H>) - (kappa^2 beta / 4) (H - <H>) ] psi dt
//           + (kappa / sqrt 2) P dB,          P = 1 - psi psi^dagger,
//
// followed by renormalisation. dB is a complex Wiener increment with
// E[dB_k conj(dB_l)] = delta_kl dt. With this scaling the projected process
// on CP^n has generator (kappa^2/2) Laplacian plus the gradient drift
// -(kappa^2 beta / 2) grad H and the Hamiltonian flow, so for the energy
//
//   E[d<H>] = (kappa^2/2) ((n+1)(Hbar - <H>) - beta V) dt,  Var[d<H>] = kappa^2 V dt.
//
// The renormalisation supplies the curvature drift exactly at O(dt); no
// separate Ito correction is applied. The scheme has weak order one.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "qtherm/geometry.hpp"
#include "qtherm/random.hpp"

namespace qtherm {

struct SdeParams {
  double beta = 0.0;    ///< inverse bath temperature, >= 0
  double kappa = 1.0;   ///< noise strength, time^(-1/2), >= 0
  double dt = 1e-3;
  std::size_t steps = 1000;
  std::size_t ensemble_size = 1;
  std::uint64_t master_seed = 0;
  std::size_t record_stride = 1;

  /// Throws GuardError naming the offending parameter. Enforces
  /// dt * kappa^2 * dim < 0.1 (resolution guard).
  void validate(std::size_t dim) const;
  /// Largest dt accepted by the resolution guard at this kappa and dim.
  double max_dt(std::size_t dim) const;
};

/// Selects which parts of the drift and noise a step applies.
struct StepTerms {
  bool symplectic = true;
  bool gradient = true;
  bool noise = true;
};

/// i (H - <H>) psi - (kappa^2 beta / 4) (H - <H>) psi; orthogonal to psi.
CVector drift_vector(const PureState& psi, const HermitianOperator& h, double beta, double kappa);

/// Reusable Euler-Maruyama stepper with preallocated workspace.
class EulerMaruyamaStepper {
 public:
  EulerMaruyamaStepper(const HermitianOperator& h, double beta, double kappa, double dt,
                       StepTerms terms = {});

  std::size_t dim() const noexcept { return dim_; }

  /// One step in place. `dw` holds 2N independent N(0, dt) draws; entries
  /// 2k and 2k+1 form the real and imaginary parts of component k.
  void advance(CVector& psi, std::span<const double> dw);
  /// One step with draws taken from `rng`.
  void advance(CVector& psi, RandomStream& rng);

 private:
  CMatrix h_;
  std::size_t dim_;
  double gradient_coeff_;
  double noise_amplitude_;
  double dt_;
  double sqrt_dt_;
  StepTerms terms_;
  CVector h_psi_;
  CVector increment_;
  std::vector<double> draws_;
};

/// One Euler-Maruyama step returning a new normalised state.
PureState step(const PureState& psi, const HermitianOperator& h, const SdeParams& params,
               std::span<const double> dw);

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<PureState> states;  ///< empty unless states were requested
  std::vector<double> energy;     ///< <H> at each recorded time
  std::vector<double> variance;   ///< V = <H^2> - <H>^2 at each recorded time
};

/// Integrates `params.steps` steps from psi0, recording at t = 0 and every
/// `record_stride` steps.
TrajectoryRecord simulate_trajectory(const PureState& psi0, const HermitianOperator& h,
                                     const SdeParams& params, RandomStream& rng,
                                     bool keep_states = false);

/// Initial condition of an ensemble: one fixed state, the uniform
/// Fubini-Study law, or a user list (trajectory i starts from entry i mod size).
class InitialLaw {
 public:
  static InitialLaw fixed(PureState psi);
  static InitialLaw uniform(std::size_t dim);
  static InitialLaw list(std::vector<PureState> states);

  std::size_t dim() const noexcept { return dim_; }
  PureState draw(std::size_t trajectory, RandomStream& rng) const;

 private:
  struct Uniform {};
  std::variant<PureState, Uniform, std::vector<PureState>> law_;
  std::size_t dim_ = 0;

  template <class T>
  InitialLaw(T law, std::size_t dim) : law_(std::move(law)), dim_(dim) {}
};

/// Called once per trajectory, in increasing index order.
using TrajectoryVisitor = std::function<void(std::size_t index, const TrajectoryRecord&)>;

/// Runs `params.ensemble_size` trajectories, trajectory i on
/// RandomStream(master_seed, i). Trajectories are computed in parallel blocks
/// and handed to `visit` in index order, so anything reduced inside the
/// visitor is independent of the worker count.
void for_each_trajectory(const InitialLaw& law, const HermitianOperator& h,
                         const SdeParams& params, unsigned workers, bool keep_states,
                         const TrajectoryVisitor& visit);

struct EnsembleSeries {
  std::vector<double> times;
  std::vector<double> mean_energy;  ///< U_t
  std::vector<double> se_energy;
  std::vector<double> mean_variance;  ///< E[V_t]
  std::vector<double> se_variance;

  /// Energy-law residual at interior record indices k (2 <= k <= K-3):
  /// central difference of U over +-1 record minus
  /// (kappa^2/2)((n+1)(Hbar - U) - beta E[V]), averaged per trajectory so that
  /// the standard error accounts for the pairing. `ode_bias` is a Richardson
  /// estimate of the O(Delta^2) differencing bias (zero when not
  /// statistically resolved).
  std::vector<std::size_t> ode_index;
  std::vector<double> ode_residual;
  std::vector<double> ode_residual_se;
  std::vector<double> ode_bias;

  /// Fraction of interior points with |residual| <= k (se + bias).
  double ode_fraction_within(double k) const;
};

EnsembleSeries simulate_ensemble(const InitialLaw& law, const HermitianOperator& h,
                                 const SdeParams& params, unsigned workers = 1);

// ---------------------------------------------------------------------------
// Spin-1/2 latitude process

/// Euler step of d theta = [(kappa^2/2) cot theta + (kappa^2 beta h / 2) sin theta] dt
/// + kappa dW on the unit sphere, theta measured from the upper level. Steps
/// leaving (0, pi) are reflected back. `dw` is an N(0, dt) draw.
double spin_half_theta_step(double theta, double h, double beta, double kappa, double dt,
                            double dw);

/// Runs the latitude process for `steps` steps and returns the final theta.
double simulate_theta(double theta0, double h, double beta, double kappa, double dt,
                      std::size_t steps, RandomStream& rng);

/// (cos(theta/2), sin(theta/2)): the CP^1 point at latitude theta when the
/// upper level is basis vector 0.
PureState spin_half_state(double theta);

}  // namespace qtherm
