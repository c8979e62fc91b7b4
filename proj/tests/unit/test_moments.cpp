#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "qtherm/canonical.hpp"
#include "qtherm/moments.hpp"
#include "qtherm/stats.hpp"

using namespace qtherm;

namespace {

HermitianOperator random_hermitian(std::size_t n, RandomStream& rng) {
  CMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = Complex(rng.normal(), rng.normal());
  return HermitianOperator(0.5 * (m + m.adjoint()));
}

std::vector<PureState> uniform_states(std::size_t n, std::size_t count, RandomStream& rng) {
  std::vector<PureState> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_uniform(n, rng));
  return out;
}

}  // namespace

TEST_CASE("estimate_moments examples") {
  RandomStream rng(1, 0);
  const auto psi = sample_uniform(3, rng);
  const std::vector<PureState> one{psi};
  const auto single = estimate_moments(one, 0.5);
  CHECK(single.time == 0.5);
  CHECK(single.samples == 1);
  CHECK((single.rho.matrix() - projector(psi).matrix()).cwiseAbs().maxCoeff() < 1e-15);
  const auto sq = SecondMoment::tensor_square(psi);
  for (std::size_t k = 0; k < sq.entries().size(); ++k) {
    CHECK(std::abs(single.r2.entries()[k] - sq.entries()[k]) < 1e-15);
    CHECK(single.r2_se[k] == Complex(0.0, 0.0));
  }
  CHECK(single.rho_se.cwiseAbs().maxCoeff() == 0.0);

  const std::vector<PureState> orthogonal{PureState::basis(2, 0), PureState::basis(2, 1)};
  const auto pair = estimate_moments(orthogonal);
  CHECK((pair.rho.matrix() - CMatrix::Identity(2, 2) / 2.0).cwiseAbs().maxCoeff() < 1e-15);
  const auto uni = SecondMoment::uniform(2);
  CHECK(pair.r2(0, 0, 0, 0).real() == doctest::Approx(0.5));
  CHECK(uni(0, 0, 0, 0).real() == doctest::Approx(1.0 / 3.0));

  CHECK_THROWS_AS(estimate_moments(std::vector<PureState>{}), UsageError);
}

TEST_CASE("sample moments of uniform states") {
  RandomStream rng(2, 0);
  const auto states = uniform_states(3, 100'000, rng);
  const auto snap = estimate_moments(states);
  const auto uni = SecondMoment::uniform(3);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const double target = a == b ? 1.0 / 3.0 : 0.0;
      CHECK(std::abs(snap.rho.matrix()(a, b).real() - target) <= 5.0 * snap.rho_se(a, b).real());
    }
  for (std::size_t k = 0; k < uni.entries().size(); ++k) {
    const Complex d = snap.r2.entries()[k] - uni.entries()[k];
    CHECK(std::abs(d.real()) <= 5.0 * snap.r2_se[k].real() + 1e-15);
    CHECK(std::abs(d.imag()) <= 5.0 * snap.r2_se[k].imag() + 1e-15);
  }
  CHECK((snap.r2.partial_trace() - snap.rho.matrix()).cwiseAbs().maxCoeff() < 1e-12);

  // Jackknife error of a mean is s / sqrt(n).
  RunningStats direct;
  for (const auto& s : states) direct.add(std::norm(s[0]));
  CHECK(snap.rho_se(0, 0).real() == doctest::Approx(direct.standard_error()).epsilon(1e-10));
}

TEST_CASE("contraction against explicit loops") {
  RandomStream rng(3, 0);
  for (std::size_t n : {2u, 3u, 4u}) {
    const auto h = random_hermitian(n, rng);
    const auto snap = estimate_moments(uniform_states(n, 20, rng));
    const CMatrix ref = oracle::brute_contract(h.matrix(), snap.r2.entries(), n);
    CHECK((contract(h, snap.r2) - ref).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("right-hand side examples") {
  const double kappa = 0.7;
  SUBCASE("uniform state is stationary at infinite temperature") {
    RandomStream rng(4, 0);
    const auto h = random_hermitian(3, rng);
    const DensityMatrix rho(CMatrix::Identity(3, 3) / 3.0);
    CHECK(liouville_rhs(rho, SecondMoment::uniform(3), h, 0.0, kappa).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("ground state of a two-level system") {
    const auto h = HermitianOperator::diagonal(std::vector<double>{-0.4, 1.1});
    const auto g = PureState::basis(2, 0);
    for (double beta : {0.0, 1.0, 5.0}) {
      const CMatrix r = liouville_rhs(projector(g), SecondMoment::tensor_square(g), h, beta, kappa);
      CMatrix expected = CMatrix::Zero(2, 2);
      expected(0, 0) = -0.5 * kappa * kappa;
      expected(1, 1) = 0.5 * kappa * kappa;
      CHECK((r - expected).cwiseAbs().maxCoeff() < 1e-15);
    }
  }
  SUBCASE("pure-state form matches the general form") {
    RandomStream rng(5, 0);
    const auto h = random_hermitian(4, rng);
    for (int t = 0; t < 5; ++t) {
      const auto psi = sample_uniform(4, rng);
      const CMatrix general = liouville_rhs(projector(psi), SecondMoment::tensor_square(psi), h, 1.3, kappa);
      CHECK((liouville_rhs_pure(psi, h, 1.3, kappa) - general).cwiseAbs().maxCoeff() < 1e-13);
    }
  }
}

TEST_CASE("trace, hermiticity and energy channel on random valid inputs") {
  RandomStream rng(6, 0);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 4);
    const auto h = random_hermitian(n, rng);
    const auto snap = estimate_moments(uniform_states(n, 1 + static_cast<std::size_t>(trial), rng));
    const double beta = 3.0 * rng.uniform(), kappa = 0.2 + rng.uniform();
    const auto terms = liouville_terms(snap.rho.matrix(), snap.r2, h, beta, kappa);
    const CMatrix r = terms.total();
    CHECK(std::abs(r.trace()) < 1e-12);
    CHECK((r - r.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    // The beta terms cancel in the trace.
    CHECK(std::abs((terms.anticommutator + terms.second_moment).trace()) < 1e-12);
    CHECK(std::abs(terms.commutator.trace()) < 1e-12);

    const CMatrix& rho = snap.rho.matrix();
    const double u = (h.matrix() * rho).trace().real();
    const double mean_h2 = (h.matrix() * h.matrix() * rho).trace().real();
    const double mean_sq = (h.matrix() * contract(h, snap.r2)).trace().real();
    const double law = 0.5 * kappa * kappa *
                       (static_cast<double>(n) * (uniform_average(h) - u) - beta * (mean_h2 - mean_sq));
    CHECK(std::abs((h.matrix() * r).trace().real() - law) < 1e-12);
  }
}

TEST_CASE("one-step generator matches the right-hand side") {
  constexpr std::size_t kReps = 100'000;
  const double kappa = 0.8, beta = 1.1, dt = 1e-4;
  RandomStream setup(7, 0);
  const auto h = random_hermitian(3, setup);
  const std::vector<HermitianOperator> observables{h, random_hermitian(3, setup), random_hermitian(3, setup)};
  for (int s = 0; s < 3; ++s) {
    const auto psi = sample_uniform(3, setup);
    const CMatrix rhs = liouville_rhs_pure(psi, h, beta, kappa);
    EulerMaruyamaStepper stepper(h, beta, kappa, dt);
    RandomStream rng(70, static_cast<std::uint64_t>(s));
    std::vector<RunningStats> drift(observables.size());
    for (std::size_t r = 0; r < kReps; ++r) {
      CVector v = psi.amplitudes();
      stepper.advance(v, rng);
      const PureState next(v);
      for (std::size_t a = 0; a < observables.size(); ++a)
        drift[a].add((expectation(observables[a], next) - expectation(observables[a], psi)) / dt);
    }
    for (std::size_t a = 0; a < observables.size(); ++a) {
      const double model = (observables[a].matrix() * rhs).trace().real();
      CHECK(std::abs(drift[a].mean() - model) < 4.0 * drift[a].standard_error());
    }
  }
}

TEST_CASE("canonical moments are a fixed point") {
  RandomStream rng(8, 0);
  const auto h = random_hermitian(3, rng);
  for (double beta : {0.5, 2.0}) {
    const auto rho = exact_equilibrium_density_matrix(h, beta);
    const auto r2 = exact_equilibrium_second_moment(h, beta);
    CHECK(liouville_rhs(rho, r2, h, beta, 0.9).cwiseAbs().maxCoeff() < 1e-10);
    const auto fp = canonical_fixed_point_residual(h, beta, 0.9, {.samples = 200'000, .seed = 4});
    CHECK(fp.max_abs_z < 5.0);
    CHECK(fp.se.cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("moment ensemble and verify_liouville") {
  const auto h = HermitianOperator::diagonal(std::vector<double>{-1.0, 1.0});
  CVector v(2);
  v << 1.0, 1.0;
  const auto law = InitialLaw::fixed(PureState(v));
  SdeParams p{.beta = 1.0, .kappa = 0.5, .dt = 1e-3, .steps = 2000, .ensemble_size = 2000,
              .master_seed = 12, .record_stride = 50};
  const auto series = run_moment_ensemble(law, h, p);
  CHECK(series.snapshots.size() == 41);
  CHECK(series.residual.size() == 37);
  for (const auto& s : series.snapshots) {
    CHECK(s.samples == 2000);
    CHECK((s.r2.partial_trace() - s.rho.matrix()).cwiseAbs().maxCoeff() < 1e-12);
  }
  const auto report = verify_liouville(series, h, p.beta, p.kappa);
  CHECK(report.residuals.size() == 37 * 4);
  CHECK(report.fraction_within_3 >= 0.95);
  CHECK(report.max_trace < 1e-12);
  CHECK(report.max_hermiticity < 1e-12);
  CHECK(report.max_energy_channel < 1e-12);

  // Snapshots alone take the unpaired route with a conservative error.
  MomentSeries bare;
  bare.spacing = series.spacing;
  bare.snapshots = series.snapshots;
  const auto unpaired = verify_liouville(bare, h, p.beta, p.kappa);
  CHECK(unpaired.residuals.size() == 37 * 4);
  CHECK(unpaired.fraction_within_3 >= 0.95);

  const auto again = run_moment_ensemble(law, h, p, 4);
  CHECK(again.snapshots.back().rho.matrix() == series.snapshots.back().rho.matrix());
  CHECK(again.residual.back() == series.residual.back());

  MomentSeries short_series;
  short_series.snapshots.assign(series.snapshots.begin(), series.snapshots.begin() + 2);
  CHECK_THROWS_AS(verify_liouville(short_series, h, 1.0, 0.5), UsageError);
  MomentSeries uneven = bare;
  uneven.snapshots[2].time += 0.01;
  CHECK_THROWS_AS(verify_liouville(uneven, h, 1.0, 0.5), UsageError);
}
