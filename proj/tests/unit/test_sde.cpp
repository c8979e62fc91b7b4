#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "qtherm/sde.hpp"
#include "qtherm/stats.hpp"

using namespace qtherm;

namespace {

HermitianOperator diag(std::vector<double> e) { return HermitianOperator::diagonal(e); }

PureState state(std::initializer_list<Complex> amps) {
  CVector v(static_cast<Eigen::Index>(amps.size()));
  Eigen::Index i = 0;
  for (Complex a : amps) v[i++] = a;
  return PureState(v);
}

std::vector<double> draws(RandomStream& rng, std::size_t n, double dt) {
  std::vector<double> dw(2 * n);
  for (double& x : dw) x = std::sqrt(dt) * rng.normal();
  return dw;
}

/// d<H>/dt along the deterministic flow: 2 Re <psi| H |v>.
double energy_rate(const PureState& psi, const HermitianOperator& h, const CVector& v) {
  return 2.0 * psi.amplitudes().dot(h.matrix() * v).real();
}

}  // namespace

TEST_CASE("drift vector examples") {
  const auto h = diag({-0.5, 0.2, 1.3});
  CHECK(drift_vector(PureState::basis(3, 1), h, 2.0, 0.7).norm() < 1e-15);

  RandomStream rng(1, 0);
  for (int trial = 0; trial < 5; ++trial) {
    const auto psi = sample_uniform(3, rng);
    const CVector v0 = drift_vector(psi, h, 0.0, 0.7);
    CHECK(std::abs(energy_rate(psi, h, v0)) < 1e-14);
    const CVector v = drift_vector(psi, h, 1.7, 0.7);
    CHECK(std::abs(psi.amplitudes().dot(v)) < 1e-14);
    // Deterministic energy decrease is -(kappa^2 beta / 2) V.
    CHECK(energy_rate(psi, h, v) ==
          doctest::Approx(-0.5 * 0.49 * 1.7 * variance(h, psi)).epsilon(1e-12));
  }

  const double hh = 1.3, kappa = 0.8, beta = 0.9;
  const auto spin = diag({hh, -hh});
  const auto equator = state({1.0, 1.0});
  CHECK(energy_rate(equator, spin, drift_vector(equator, spin, beta, kappa)) ==
        doctest::Approx(-0.5 * kappa * kappa * beta * hh * hh).epsilon(1e-13));
  CHECK_THROWS_AS(drift_vector(PureState::basis(2, 0), h, 1.0, 1.0), UsageError);
}

TEST_CASE("resolution guard names dt and its bound") {
  SdeParams p;
  p.kappa = 1.0;
  p.dt = 0.06;
  try {
    p.validate(2);
    FAIL("expected a guard error");
  } catch (const GuardError& e) {
    CHECK(e.parameter() == "dt");
    CHECK(std::string(e.what()).find("0.05") != std::string::npos);
  }
  p.dt = 0.04;
  CHECK_NOTHROW(p.validate(2));
  p.kappa = 0.0;
  p.dt = 10.0;
  CHECK_NOTHROW(p.validate(8));
  p.steps = 0;
  CHECK_THROWS_AS(p.validate(2), GuardError);
}

TEST_CASE("step preserves norm and is deterministic in the draws") {
  RandomStream rng(4, 4);
  const auto h = diag({0.0, 0.5, 2.0, 3.0});
  SdeParams p{.beta = 1.0, .kappa = 0.9, .dt = 1e-3};
  auto psi = sample_uniform(4, rng);
  for (int i = 0; i < 2000; ++i) {
    const auto dw = draws(rng, 4, p.dt);
    const auto next = step(psi, h, p, dw);
    CHECK(std::abs(next.amplitudes().norm() - 1.0) < 1e-12);
    CHECK(step(psi, h, p, dw).amplitudes() == next.amplitudes());
    psi = next;
  }
}

TEST_CASE("small kappa, beta = 0 conserves energy to second order per step") {
  const auto h = diag({-1.0, 0.4, 2.0});
  RandomStream rng(8, 0);
  const auto psi = sample_uniform(3, rng);
  const std::vector<double> zero(6, 0.0);
  for (double dt : {1e-2, 5e-3, 2.5e-3}) {
    SdeParams p{.beta = 0.0, .kappa = 0.0, .dt = dt};
    const double change = std::abs(expectation(h, step(psi, h, p, zero)) - expectation(h, psi));
    CHECK(change < 10.0 * dt * dt);
  }
}

TEST_CASE("noise-only one-step energy drift follows the Laplacian") {
  constexpr std::size_t kReps = 100'000;
  const auto h = diag({-1.0, 1.0});
  const double kappa = 0.7, dt = 1e-3;
  EulerMaruyamaStepper noise_only(h, 0.0, kappa, dt, {.symplectic = false, .gradient = false});
  auto drift_of = [&](const PureState& psi, std::uint64_t seed) {
    RunningStats s;
    RandomStream rng(seed, 0);
    const double e0 = expectation(h, psi);
    for (std::size_t r = 0; r < kReps; ++r) {
      CVector v = psi.amplitudes();
      noise_only.advance(v, rng);
      s.add((expectation(h, PureState(v)) - e0) / dt);
    }
    return s;
  };
  const auto ground = drift_of(PureState::basis(2, 0), 1);
  CHECK(std::abs(ground.mean() - kappa * kappa) < 4.0 * ground.standard_error());
  const auto equator = drift_of(state({1.0, 1.0}), 2);
  CHECK(std::abs(equator.mean()) < 4.0 * equator.standard_error());
}

TEST_CASE("one-step quadratic variation equals kappa^2 V") {
  constexpr std::size_t kReps = 100'000;
  const auto h = diag({-0.3, 0.1, 1.2});
  const double kappa = 0.6, beta = 1.5, dt = 1e-4;
  RandomStream rng(12, 0);
  const auto psi = sample_uniform(3, rng);
  EulerMaruyamaStepper stepper(h, beta, kappa, dt);
  const double e0 = expectation(h, psi);
  RunningStats sq;
  for (std::size_t r = 0; r < kReps; ++r) {
    CVector v = psi.amplitudes();
    stepper.advance(v, rng);
    const double de = expectation(h, PureState(v)) - e0;
    sq.add(de * de / dt);
  }
  // E[de^2]/dt = kappa^2 V + O(dt); the O(dt) part is far below the error bar here.
  CHECK(std::abs(sq.mean() - kappa * kappa * variance(h, psi)) < 4.0 * sq.standard_error());
}

TEST_CASE("gauge covariance with a co-rotated noise stream") {
  // P dB does not pick up the phase of psi, so the complex increment is
  // rotated with the state. The rotated increment has the same law.
  const auto h = diag({-1.0, 0.3, 0.8});
  RandomStream init(21, 0);
  const auto psi = sample_uniform(3, init);
  EulerMaruyamaStepper stepper(h, 1.2, 0.8, 1e-3);
  for (double alpha : {std::numbers::pi / 3, std::numbers::pi}) {
    const Complex phase = alpha == std::numbers::pi ? Complex(-1.0, 0.0) : std::polar(1.0, alpha);
    CVector a = psi.amplitudes();
    CVector b = phase * psi.amplitudes();
    RandomStream rng(5, 0);
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
      const auto dw = draws(rng, 3, 1e-3);
      std::vector<double> turned(dw.size());
      for (std::size_t k = 0; k < 3; ++k) {
        const Complex z = phase * Complex(dw[2 * k], dw[2 * k + 1]);
        turned[2 * k] = z.real();
        turned[2 * k + 1] = z.imag();
      }
      stepper.advance(a, dw);
      stepper.advance(b, turned);
      worst = std::max(worst, (a * a.adjoint() - b * b.adjoint()).cwiseAbs().maxCoeff());
    }
    if (alpha == std::numbers::pi) {
      CHECK(worst == 0.0);
    } else {
      CHECK(worst < 1e-13);
    }
  }
}

TEST_CASE("trajectory records and limits") {
  const auto h = diag({-1.0, 1.0});
  SdeParams p{.beta = 1.0, .kappa = 0.5, .dt = 1e-3, .steps = 1000, .record_stride = 100};
  RandomStream rng(3, 0);
  const auto rec = simulate_trajectory(PureState::basis(2, 1), h, p, rng, true);
  CHECK(rec.times.size() == 11);
  CHECK(rec.states.size() == 11);
  CHECK(rec.times.back() == doctest::Approx(1.0));
  for (std::size_t k = 0; k < rec.energy.size(); ++k) {
    CHECK(rec.energy[k] >= -1.0 - 1e-12);
    CHECK(rec.energy[k] <= 1.0 + 1e-12);
    CHECK(std::abs(rec.states[k].amplitudes().norm() - 1.0) < 1e-12);
  }

  SUBCASE("kappa = 0 from an eigenstate is stationary") {
    SdeParams q{.beta = 3.0, .kappa = 0.0, .dt = 1e-2, .steps = 500};
    const auto r = simulate_trajectory(PureState::basis(2, 1), h, q, rng, true);
    for (const auto& s : r.states) CHECK((s.amplitudes() - PureState::basis(2, 1).amplitudes()).norm() < 1e-15);
  }

  SUBCASE("low temperature collapses to the ground state") {
    SdeParams q{.beta = 200.0, .kappa = 1.0, .dt = 2e-4, .steps = 25'000, .ensemble_size = 50,
                .master_seed = 8, .record_stride = 25'000};
    const auto series = simulate_ensemble(InitialLaw::uniform(2), h, q);
    CHECK(std::abs(series.mean_energy.back() + 1.0) < 0.02);
  }
}

TEST_CASE("infinite temperature approaches the uniform average") {
  const auto h = diag({0.0, 1.0, 3.0});
  SdeParams p{.beta = 0.0, .kappa = 1.0, .dt = 2e-3, .steps = 6000, .ensemble_size = 400,
              .master_seed = 77, .record_stride = 500};
  const auto s = simulate_ensemble(InitialLaw::fixed(PureState::basis(3, 0)), h, p);
  // Relaxation rate is kappa^2 (n+1) / 2 = 1.5; after t = 8 the start is forgotten.
  RunningStats late;
  for (std::size_t k = 8; k < s.times.size(); ++k) late.add(s.mean_energy[k]);
  CHECK(std::abs(late.mean() - 4.0 / 3.0) < 4.0 * s.se_energy.back());
}

TEST_CASE("ensemble series: uniform start and energy law residuals") {
  const auto h = diag({-1.0, 1.0});
  SdeParams p{.beta = 1.0, .kappa = 0.8, .dt = 1e-3, .steps = 3000, .ensemble_size = 2000,
              .master_seed = 99, .record_stride = 100};
  const auto s = simulate_ensemble(InitialLaw::uniform(2), h, p);
  CHECK(std::abs(s.mean_energy[0]) < 4.0 * s.se_energy[0]);
  CHECK(std::abs(s.mean_variance[0] - 2.0 / 3.0) < 4.0 * s.se_variance[0]);
  // Initial energy-law rate at the uniform start is -kappa^2 beta / 3.
  const double model0 = 0.5 * 0.64 * (2.0 * (0.0 - s.mean_energy[0]) - s.mean_variance[0]);
  CHECK(model0 == doctest::Approx(-0.64 / 3.0).epsilon(0.05));
  CHECK(s.ode_index.front() == 2);
  CHECK(s.ode_index.size() == s.times.size() - 4);
  CHECK(s.ode_fraction_within(3.0) >= 0.9);
  for (double se : s.se_energy) CHECK(se >= 0.0);
  for (double u : s.mean_energy) CHECK(std::abs(u) <= 1.0);

  SdeParams tiny = p;
  tiny.ensemble_size = 1;
  CHECK_THROWS_AS(simulate_ensemble(InitialLaw::uniform(2), h, tiny), GuardError);
}

TEST_CASE("ensembles are independent of the worker count") {
  const auto h = diag({-0.4, 0.1, 0.9});
  SdeParams p{.beta = 0.8, .kappa = 0.9, .dt = 1e-3, .steps = 400, .ensemble_size = 150,
              .master_seed = 5, .record_stride = 20};
  const auto a = simulate_ensemble(InitialLaw::uniform(3), h, p, 1);
  for (unsigned w : {4u, 8u}) {
    const auto b = simulate_ensemble(InitialLaw::uniform(3), h, p, w);
    CHECK(a.mean_energy == b.mean_energy);
    CHECK(a.se_energy == b.se_energy);
    CHECK(a.mean_variance == b.mean_variance);
    CHECK(a.ode_residual == b.ode_residual);
  }
}

TEST_CASE("initial laws") {
  RandomStream rng(1, 0);
  const auto list = InitialLaw::list({PureState::basis(2, 0), PureState::basis(2, 1)});
  CHECK(list.draw(0, rng).amplitudes() == PureState::basis(2, 0).amplitudes());
  CHECK(list.draw(3, rng).amplitudes() == PureState::basis(2, 1).amplitudes());
  CHECK_THROWS_AS(InitialLaw::list({}), UsageError);
  CHECK_THROWS_AS(InitialLaw::list({PureState::basis(2, 0), PureState::basis(3, 0)}), UsageError);
  CHECK_THROWS_AS(InitialLaw::uniform(1), UsageError);
}

TEST_CASE("latitude process: stationary law and reflection") {
  const double h = 1.0, kappa = 1.0, dt = 1e-3;
  for (double beta : {0.0, 1.5}) {
    constexpr std::size_t kWalkers = 2000;
    std::vector<double> u_sde, u_exact;
    RunningStats mean_u;
    for (std::size_t i = 0; i < kWalkers; ++i) {
      RandomStream rng(31, i);
      const double theta = simulate_theta(0.5, h, beta, kappa, dt, 6000, rng);
      u_sde.push_back(std::cos(theta));
      mean_u.add(std::cos(theta));
      // Inverse-CDF draw from the density proportional to exp(-a u) on [-1, 1].
      const double a = beta * h, x = rng.uniform();
      u_exact.push_back(a == 0.0 ? 2.0 * x - 1.0
                                 : -std::log(std::exp(a) - x * (std::exp(a) - std::exp(-a))) / a);
    }
    CHECK(ks_two_sample(u_sde, u_exact).p_value > 0.01);
    if (beta == 0.0) CHECK(std::abs(mean_u.mean()) < 4.0 * mean_u.standard_error());
  }
  const double reflected = spin_half_theta_step(0.01, 1.0, 1.0, 1.0, 1e-4, -0.05);
  CHECK(reflected > 0.0);
  CHECK(reflected < std::numbers::pi);
  const double top = spin_half_theta_step(3.13, 1.0, 1.0, 1.0, 1e-4, 0.05);
  CHECK(top < std::numbers::pi);
}

TEST_CASE("latitude state") {
  const auto spin = diag({2.0, -2.0});
  CHECK(expectation(spin, spin_half_state(1.0)) == doctest::Approx(2.0 * std::cos(1.0)));
}
