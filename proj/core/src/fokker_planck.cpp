#include "qtherm/fokker_planck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace qtherm {

namespace {

/// Bernoulli function x / (e^x - 1).
double bernoulli(double x) {
  if (std::abs(x) < 1e-8) return 1.0 - 0.5 * x;
  return x / std::expm1(x);
}

double face_position(std::size_t face, double du) {
  return -1.0 + static_cast<double>(face + 1) * du;
}

void require_cells(std::size_t cells) {
  if (cells < 3) throw UsageError("Fokker-Planck grid needs at least 3 cells");
}

Density1D normalised(std::vector<double> values) {
  Density1D rho{std::move(values), 0.0};
  const double mass = rho.mass();
  for (double& v : rho.values) v /= mass;
  return rho;
}

}  // namespace

// ---------------------------------------------------------------------------
// Density1D

double Density1D::mass() const {
  return std::accumulate(values.begin(), values.end(), 0.0) * du();
}

Density1D Density1D::stationary(std::size_t cells, double h, double beta) {
  require_cells(cells);
  Density1D tmp{std::vector<double>(cells), 0.0};
  // Shift the exponent so the largest value is 1.
  const double a = beta * h;
  const double peak = a >= 0.0 ? tmp.center(0) : tmp.center(cells - 1);
  for (std::size_t i = 0; i < cells; ++i) tmp.values[i] = std::exp(-a * (tmp.center(i) - peak));
  return normalised(std::move(tmp.values));
}

Density1D Density1D::uniform(std::size_t cells) {
  require_cells(cells);
  return Density1D{std::vector<double>(cells, 0.5), 0.0};
}

Density1D Density1D::gaussian(std::size_t cells, double center, double width) {
  require_cells(cells);
  Density1D tmp{std::vector<double>(cells), 0.0};
  if (!(width >= 3.0 * tmp.du())) {
    throw UsageError("Density1D::gaussian: width must be at least 3 du (" +
                     std::to_string(3.0 * tmp.du()) + ")");
  }
  for (std::size_t i = 0; i < cells; ++i) {
    const double z = (tmp.center(i) - center) / width;
    tmp.values[i] = std::max(1e-250, std::exp(-0.5 * z * z));
  }
  return normalised(std::move(tmp.values));
}

Density1D Density1D::linear(std::size_t cells, double slope) {
  require_cells(cells);
  if (std::abs(slope) > 1.0) throw UsageError("Density1D::linear: |slope| must be <= 1");
  Density1D tmp{std::vector<double>(cells), 0.0};
  for (std::size_t i = 0; i < cells; ++i) tmp.values[i] = 0.5 * (1.0 + slope * tmp.center(i));
  return normalised(std::move(tmp.values));
}

// ---------------------------------------------------------------------------
// Stepper

FokkerPlanckCP1::FokkerPlanckCP1(std::size_t cells, double h, double beta, double kappa)
    : cells_(cells), du_(2.0 / static_cast<double>(cells)), kappa_(kappa) {
  require_cells(cells);
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw GuardError("kappa", "kappa must be positive");
  if (!std::isfinite(beta) || !std::isfinite(h)) throw GuardError("beta", "beta and h must be finite");
  const double w = beta * h * du_;
  const double b_plus = bernoulli(w);
  const double b_minus = bernoulli(-w);
  forward_.resize(cells - 1);
  backward_.resize(cells - 1);
  double max_coeff = 0.0;
  for (std::size_t f = 0; f + 1 < cells; ++f) {
    const double u = face_position(f, du_);
    const double diffusion = 0.5 * kappa * kappa * (1.0 - u * u);
    forward_[f] = diffusion * b_plus / du_;
    backward_[f] = diffusion * b_minus / du_;
    max_coeff = std::max(max_coeff, (1.0 - u * u) * std::max(b_plus, b_minus));
  }
  max_dt_ = 0.4 * du_ * du_ / (kappa * kappa * max_coeff);
}

std::vector<double> FokkerPlanckCP1::fluxes(const Density1D& rho) const {
  if (rho.cells() != cells_) throw UsageError("FokkerPlanckCP1: grid size mismatch");
  std::vector<double> j(cells_ - 1);
  for (std::size_t f = 0; f + 1 < cells_; ++f) {
    j[f] = backward_[f] * rho.values[f + 1] - forward_[f] * rho.values[f];
  }
  return j;
}

std::vector<double> FokkerPlanckCP1::rate(const Density1D& rho) const {
  const std::vector<double> j = fluxes(rho);
  std::vector<double> r(cells_);
  for (std::size_t i = 0; i < cells_; ++i) {
    const double right = i + 1 < cells_ ? j[i] : 0.0;
    const double left = i > 0 ? j[i - 1] : 0.0;
    r[i] = (right - left) / du_;
  }
  return r;
}

Density1D FokkerPlanckCP1::step(const Density1D& rho, double dt) const {
  if (!(dt > 0.0) || dt > max_dt_ * (1.0 + 1e-12)) {
    throw GuardError("dt", "Fokker-Planck dt must lie in (0, " + std::to_string(max_dt_) + "]");
  }
  const std::vector<double> r = rate(rho);
  Density1D next{rho.values, rho.time + dt};
  for (std::size_t i = 0; i < cells_; ++i) next.values[i] += dt * r[i];
  return next;
}

Density1D fp_step(const Density1D& rho, double h, double beta, double kappa, double dt) {
  return FokkerPlanckCP1(rho.cells(), h, beta, kappa).step(rho, dt);
}

// ---------------------------------------------------------------------------
// Diagnostics

double entropy(const Density1D& rho) {
  double s = 0.0;
  for (double v : rho.values) {
    if (v > 0.0) s -= v * std::log(v);
  }
  return s * rho.du();
}

double energy(const Density1D& rho, double h) {
  double u = 0.0;
  for (std::size_t i = 0; i < rho.cells(); ++i) u += rho.center(i) * rho.values[i];
  return h * u * rho.du();
}

double l1_distance_to_equilibrium(const Density1D& rho, double h, double beta) {
  const Density1D eq = Density1D::stationary(rho.cells(), h, beta);
  double d = 0.0;
  for (std::size_t i = 0; i < rho.cells(); ++i) d += std::abs(rho.values[i] - eq.values[i]);
  return d * rho.du();
}

std::vector<double> eta_field(const Density1D& rho, double h, double beta) {
  if (!(beta > 0.0)) throw UsageError("eta_field: beta must be positive");
  std::vector<double> eta(rho.cells());
  for (std::size_t i = 0; i < rho.cells(); ++i) {
    if (!(rho.values[i] > 0.0)) {
      throw UsageError("eta_field: density is nonpositive in cell " + std::to_string(i) +
                       "; use a smaller dt or smoother initial data");
    }
    eta[i] = -std::log(rho.values[i]) / beta - h * rho.center(i);
  }
  double mean = 0.0;
  for (std::size_t i = 0; i < rho.cells(); ++i) mean += eta[i] * rho.values[i];
  mean *= rho.du();
  for (double& e : eta) e -= mean;
  return eta;
}

namespace {

double face_density(double left, double right) { return 0.5 * (left + right); }

}  // namespace

double eta_production(const Density1D& rho, double h, double beta, double kappa) {
  const std::vector<double> eta = eta_field(rho, h, beta);
  const double du = rho.du();
  double p = 0.0;
  for (std::size_t f = 0; f + 1 < rho.cells(); ++f) {
    const double u = face_position(f, du);
    const double grad = (eta[f + 1] - eta[f]) / du;
    p += (1.0 - u * u) * grad * grad * face_density(rho.values[f], rho.values[f + 1]);
  }
  return 0.5 * kappa * kappa * beta * beta * p * du;
}

double entropy_production(const Density1D& rho, double h, double beta, double kappa) {
  const double du = rho.du();
  double p = 0.0;
  for (std::size_t f = 0; f + 1 < rho.cells(); ++f) {
    const double left = rho.values[f], right = rho.values[f + 1];
    if (!(left > 0.0) || !(right > 0.0)) {
      throw UsageError("entropy_production: density is nonpositive near face " + std::to_string(f));
    }
    const double u = face_position(f, du);
    const double g = (std::log(right) - std::log(left)) / du + beta * h;
    p += (1.0 - u * u) * g * g * face_density(left, right);
  }
  return 0.5 * kappa * kappa * p * du;
}

// ---------------------------------------------------------------------------
// Solver

ThermoSeries solve(const Density1D& initial, double h, double beta, double kappa, double t_max,
                   double dt, std::size_t record_stride) {
  if (!(t_max >= 0.0) || !std::isfinite(t_max)) throw GuardError("t_max", "t_max must be >= 0");
  if (record_stride == 0) throw GuardError("record_stride", "record_stride must be positive");
  const FokkerPlanckCP1 solver(initial.cells(), h, beta, kappa);
  if (dt <= 0.0) dt = solver.max_stable_dt();
  if (dt > solver.max_stable_dt() * (1.0 + 1e-12)) {
    throw GuardError("dt", "Fokker-Planck dt exceeds the positivity bound " +
                               std::to_string(solver.max_stable_dt()));
  }

  ThermoSeries out;
  auto record = [&](const Density1D& rho) {
    const std::vector<double> j = solver.fluxes(rho);
    double ds = 0.0, flux_sum = 0.0;
    for (std::size_t f = 0; f < j.size(); ++f) {
      ds += j[f] * (std::log(rho.values[f + 1]) - std::log(rho.values[f]));
      flux_sum += j[f];
    }
    const double du_dt = -h * rho.du() * flux_sum;
    const double production = entropy_production(rho, h, beta, kappa);
    out.times.push_back(rho.time);
    out.entropy.push_back(entropy(rho));
    out.energy.push_back(energy(rho, h));
    out.d_entropy.push_back(ds);
    out.d_energy.push_back(du_dt);
    out.production.push_back(production);
    out.residual.push_back(ds - beta * du_dt - production);
    out.l1_distance.push_back(l1_distance_to_equilibrium(rho, h, beta));
  };

  Density1D rho = initial;
  rho.time = 0.0;
  record(rho);
  const auto steps = static_cast<std::size_t>(std::ceil(t_max / dt - 1e-9));
  for (std::size_t n = 1; n <= steps; ++n) {
    const double step_dt = std::min(dt, t_max - rho.time);
    if (step_dt <= 0.0) break;
    rho = solver.step(rho, step_dt);
    if (n % record_stride == 0 || n == steps) record(rho);
  }
  out.final_density = std::move(rho);
  return out;
}

}  // namespace qtherm
