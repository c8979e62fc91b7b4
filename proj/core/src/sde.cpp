#include "qtherm/sde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include "qtherm/parallel.hpp"
#include "qtherm/stats.hpp"

namespace qtherm {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kResolutionBound = 0.1;

std::string format_double(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameters

double SdeParams::max_dt(std::size_t dim) const {
  const double rate = kappa * kappa * static_cast<double>(dim);
  return rate > 0.0 ? kResolutionBound / rate : std::numeric_limits<double>::infinity();
}

void SdeParams::validate(std::size_t dim) const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw GuardError("beta", "beta must be finite and >= 0");
  }
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
    throw GuardError("kappa", "kappa must be finite and >= 0");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) throw GuardError("dt", "dt must be positive");
  if (steps == 0) throw GuardError("steps", "steps must be positive");
  if (ensemble_size == 0) throw GuardError("ensemble", "ensemble size must be positive");
  if (record_stride == 0) throw GuardError("record_stride", "record_stride must be positive");
  if (dt * kappa * kappa * static_cast<double>(dim) >= kResolutionBound) {
    throw GuardError("dt", "dt = " + format_double(dt) +
                               " violates the resolution guard dt*kappa^2*(n+1) < 0.1; need dt < " +
                               format_double(max_dt(dim)));
  }
}

// ---------------------------------------------------------------------------
// Drift and stepping

CVector drift_vector(const PureState& psi, const HermitianOperator& h, double beta, double kappa) {
  if (psi.dim() != h.dim()) throw UsageError("drift_vector: dimension mismatch");
  const CVector& v = psi.amplitudes();
  CVector g = h.matrix() * v;
  const double energy = v.dot(g).real();
  g -= energy * v;
  const double c = 0.25 * kappa * kappa * beta;
  return Complex(-c, 1.0) * g;
}

EulerMaruyamaStepper::EulerMaruyamaStepper(const HermitianOperator& h, double beta, double kappa,
                                           double dt, StepTerms terms)
    : h_(h.matrix()),
      dim_(h.dim()),
      gradient_coeff_(0.25 * kappa * kappa * beta),
      noise_amplitude_(kappa * kInvSqrt2),
      dt_(dt),
      sqrt_dt_(std::sqrt(dt)),
      terms_(terms),
      h_psi_(static_cast<Eigen::Index>(dim_)),
      increment_(static_cast<Eigen::Index>(dim_)),
      draws_(2 * dim_) {}

void EulerMaruyamaStepper::advance(CVector& psi, std::span<const double> dw) {
  if (static_cast<std::size_t>(psi.size()) != dim_ || dw.size() != 2 * dim_) {
    throw UsageError("EulerMaruyamaStepper::advance: dimension mismatch");
  }
  h_psi_.noalias() = h_ * psi;
  const double energy = psi.dot(h_psi_).real();
  h_psi_ -= energy * psi;  // (H - <H>) psi

  Complex drift(0.0, 0.0);
  if (terms_.symplectic) drift += Complex(0.0, 1.0);
  if (terms_.gradient) drift -= gradient_coeff_;

  if (terms_.noise) {
    for (std::size_t k = 0; k < dim_; ++k) {
      increment_[static_cast<Eigen::Index>(k)] =
          Complex(dw[2 * k] * kInvSqrt2, dw[2 * k + 1] * kInvSqrt2);
    }
    const Complex overlap = psi.dot(increment_);
    increment_ -= overlap * psi;
    psi += (drift * dt_) * h_psi_ + noise_amplitude_ * increment_;
  } else {
    psi += (drift * dt_) * h_psi_;
  }
  psi /= psi.norm();
}

void EulerMaruyamaStepper::advance(CVector& psi, RandomStream& rng) {
  for (double& x : draws_) x = sqrt_dt_ * rng.normal();
  advance(psi, draws_);
}

PureState step(const PureState& psi, const HermitianOperator& h, const SdeParams& params,
               std::span<const double> dw) {
  if (psi.dim() != h.dim()) throw UsageError("step: dimension mismatch");
  EulerMaruyamaStepper stepper(h, params.beta, params.kappa, params.dt);
  CVector v = psi.amplitudes();
  stepper.advance(v, dw);
  return PureState(std::move(v));
}

// ---------------------------------------------------------------------------
// Trajectories

namespace {

void record(TrajectoryRecord& rec, double t, const CVector& psi, const CMatrix& h,
            bool keep_states) {
  const CVector h_psi = h * psi;
  const double e = psi.dot(h_psi).real();
  rec.times.push_back(t);
  rec.energy.push_back(e);
  rec.variance.push_back(std::max(0.0, h_psi.squaredNorm() - e * e));
  if (keep_states) rec.states.emplace_back(psi);
}

}  // namespace

TrajectoryRecord simulate_trajectory(const PureState& psi0, const HermitianOperator& h,
                                     const SdeParams& params, RandomStream& rng,
                                     bool keep_states) {
  if (psi0.dim() != h.dim()) throw UsageError("simulate_trajectory: dimension mismatch");
  params.validate(h.dim());

  EulerMaruyamaStepper stepper(h, params.beta, params.kappa, params.dt);
  const std::size_t records = params.steps / params.record_stride + 1;
  TrajectoryRecord rec;
  rec.times.reserve(records);
  rec.energy.reserve(records);
  rec.variance.reserve(records);
  if (keep_states) rec.states.reserve(records);

  CVector psi = psi0.amplitudes();
  record(rec, 0.0, psi, h.matrix(), keep_states);
  for (std::size_t n = 1; n <= params.steps; ++n) {
    stepper.advance(psi, rng);
    if (n % params.record_stride == 0) {
      record(rec, static_cast<double>(n) * params.dt, psi, h.matrix(), keep_states);
    }
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Ensembles

InitialLaw InitialLaw::fixed(PureState psi) {
  const std::size_t dim = psi.dim();
  return InitialLaw(std::move(psi), dim);
}

InitialLaw InitialLaw::uniform(std::size_t dim) {
  if (dim < 2) throw UsageError("InitialLaw::uniform: dimension must be at least 2");
  return InitialLaw(Uniform{}, dim);
}

InitialLaw InitialLaw::list(std::vector<PureState> states) {
  if (states.empty()) throw UsageError("InitialLaw::list: empty state list");
  const std::size_t dim = states.front().dim();
  for (const PureState& s : states) {
    if (s.dim() != dim) throw UsageError("InitialLaw::list: states differ in dimension");
  }
  return InitialLaw(std::move(states), dim);
}

PureState InitialLaw::draw(std::size_t trajectory, RandomStream& rng) const {
  if (const auto* fixed = std::get_if<PureState>(&law_)) return *fixed;
  if (const auto* states = std::get_if<std::vector<PureState>>(&law_)) {
    return (*states)[trajectory % states->size()];
  }
  return sample_uniform(dim_, rng);
}

void for_each_trajectory(const InitialLaw& law, const HermitianOperator& h,
                         const SdeParams& params, unsigned workers, bool keep_states,
                         const TrajectoryVisitor& visit) {
  if (law.dim() != h.dim()) throw UsageError("for_each_trajectory: dimension mismatch");
  params.validate(h.dim());
  if (workers == 0) workers = default_workers();

  const std::size_t block = std::max<std::size_t>(64, 16 * static_cast<std::size_t>(workers));
  std::vector<TrajectoryRecord> records;
  for (std::size_t start = 0; start < params.ensemble_size; start += block) {
    const std::size_t count = std::min(block, params.ensemble_size - start);
    records.assign(count, TrajectoryRecord{});
    parallel_for(count, workers, [&](std::size_t i) {
      RandomStream rng(params.master_seed, start + i);
      const PureState psi0 = law.draw(start + i, rng);
      records[i] = simulate_trajectory(psi0, h, params, rng, keep_states);
    });
    for (std::size_t i = 0; i < count; ++i) visit(start + i, records[i]);
  }
}

double EnsembleSeries::ode_fraction_within(double k) const {
  if (ode_residual.empty()) return 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < ode_residual.size(); ++i) {
    if (std::abs(ode_residual[i]) <= k * (ode_residual_se[i] + ode_bias[i])) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(ode_residual.size());
}

EnsembleSeries simulate_ensemble(const InitialLaw& law, const HermitianOperator& h,
                                 const SdeParams& params, unsigned workers) {
  if (params.ensemble_size < 2) throw GuardError("ensemble", "ensemble size must be at least 2");
  const std::size_t records = params.steps / params.record_stride + 1;
  const double spacing = params.dt * static_cast<double>(params.record_stride);
  const double n_levels = static_cast<double>(h.dim());
  const double hbar = uniform_average(h);
  const double half_k2 = 0.5 * params.kappa * params.kappa;

  std::vector<RunningStats> energy(records), var(records);
  const std::size_t interior = records >= 5 ? records - 4 : 0;
  std::vector<RunningStats> residual(interior), richardson(interior);

  std::vector<double> times;
  for_each_trajectory(law, h, params, workers, false,
                      [&](std::size_t, const TrajectoryRecord& rec) {
                        if (times.empty()) times = rec.times;
                        for (std::size_t k = 0; k < records; ++k) {
                          energy[k].add(rec.energy[k]);
                          var[k].add(rec.variance[k]);
                        }
                        for (std::size_t j = 0; j < interior; ++j) {
                          const std::size_t k = j + 2;
                          const double fd1 = (rec.energy[k + 1] - rec.energy[k - 1]) / (2.0 * spacing);
                          const double fd2 = (rec.energy[k + 2] - rec.energy[k - 2]) / (4.0 * spacing);
                          const double model =
                              half_k2 * (n_levels * (hbar - rec.energy[k]) - params.beta * rec.variance[k]);
                          residual[j].add(fd1 - model);
                          richardson[j].add(fd1 - fd2);
                        }
                      });

  EnsembleSeries out;
  out.times = std::move(times);
  for (std::size_t k = 0; k < records; ++k) {
    out.mean_energy.push_back(energy[k].mean());
    out.se_energy.push_back(energy[k].standard_error());
    out.mean_variance.push_back(var[k].mean());
    out.se_variance.push_back(var[k].standard_error());
  }
  for (std::size_t j = 0; j < interior; ++j) {
    out.ode_index.push_back(j + 2);
    out.ode_residual.push_back(residual[j].mean());
    out.ode_residual_se.push_back(residual[j].standard_error());
    const double resolved =
        std::abs(richardson[j].mean()) - 2.0 * richardson[j].standard_error();
    out.ode_bias.push_back(std::max(0.0, resolved) / 3.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spin-1/2 latitude process

double spin_half_theta_step(double theta, double h, double beta, double kappa, double dt,
                            double dw) {
  const double k2 = kappa * kappa;
  const double drift = 0.5 * k2 * (std::cos(theta) / std::sin(theta)) +
                       0.5 * k2 * beta * h * std::sin(theta);
  double next = theta + drift * dt + kappa * dw;
  constexpr double pi = std::numbers::pi;
  // Reflect overshoots back into (0, pi); a huge step may need several folds.
  for (int fold = 0; fold < 8 && (next <= 0.0 || next >= pi); ++fold) {
    if (next <= 0.0) next = -next;
    if (next >= pi) next = 2.0 * pi - next;
  }
  if (next <= 0.0) next = std::nextafter(0.0, 1.0);
  if (next >= pi) next = std::nextafter(pi, 0.0);
  return next;
}

double simulate_theta(double theta0, double h, double beta, double kappa, double dt,
                      std::size_t steps, RandomStream& rng) {
  const double sqrt_dt = std::sqrt(dt);
  double theta = theta0;
  for (std::size_t n = 0; n < steps; ++n) {
    theta = spin_half_theta_step(theta, h, beta, kappa, dt, sqrt_dt * rng.normal());
  }
  return theta;
}

PureState spin_half_state(double theta) {
  CVector v(2);
  v << std::cos(0.5 * theta), std::sin(0.5 * theta);
  return PureState(std::move(v));
}

}  // namespace qtherm
