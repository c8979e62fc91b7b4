#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "qtherm/geometry.hpp"
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

HermitianOperator random_hermitian(std::size_t n, RandomStream& rng) {
  CMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = Complex(rng.normal(), rng.normal());
  return HermitianOperator(0.5 * (m + m.adjoint()));
}

}  // namespace

TEST_CASE("expectation and variance examples") {
  const auto h = diag({-1.0, 1.0});
  CHECK(expectation(h, PureState::basis(2, 0)) == doctest::Approx(-1.0));
  CHECK(expectation(h, state({1.0, 1.0})) == doctest::Approx(0.0));
  CHECK(variance(h, PureState::basis(2, 1)) == doctest::Approx(0.0));
  CHECK(variance(h, state({1.0, 1.0})) == doctest::Approx(1.0));

  // Latitude theta from the upper level: E = h cos(theta), Var = h^2 sin^2(theta).
  const double hh = 0.7;
  const auto spin = diag({hh, -hh});
  for (double theta : {0.3, 1.1, 2.0, 2.9}) {
    const auto psi = state({std::cos(theta / 2), std::sin(theta / 2)});
    CHECK(expectation(spin, psi) == doctest::Approx(hh * std::cos(theta)).epsilon(1e-14));
    CHECK(variance(spin, psi) ==
          doctest::Approx(hh * hh * std::sin(theta) * std::sin(theta)).epsilon(1e-12));
  }
}

TEST_CASE("uniform average") {
  CHECK(uniform_average(diag({-1.0, 1.0})) == 0.0);
  CHECK(uniform_average(diag({-1.0, 0.0, 1.0})) == 0.0);
  CHECK(uniform_average(diag({0.0, 1.0, 2.0, 3.0})) == doctest::Approx(1.5));
}

TEST_CASE("dimension mismatch is a usage error") {
  CHECK_THROWS_AS(expectation(diag({0.0, 1.0, 2.0}), PureState::basis(2, 0)), UsageError);
  CHECK_THROWS_AS(variance(diag({0.0, 1.0, 2.0}), PureState::basis(2, 0)), UsageError);
}

TEST_CASE("HermitianOperator validation and eigensystem") {
  CMatrix bad(2, 2);
  bad << 1.0, Complex(0.0, 1.0), Complex(0.0, 1.0), 2.0;
  CHECK_THROWS_AS(HermitianOperator{bad}, UsageError);
  CHECK_THROWS_AS(HermitianOperator{CMatrix(2, 3)}, UsageError);

  RandomStream rng(7, 0);
  for (std::size_t n : {2u, 3u, 5u, 8u}) {
    const auto h = random_hermitian(n, rng);
    const auto& eig = h.eigensystem();
    CMatrix d = CMatrix::Zero(n, n);
    for (std::size_t k = 0; k < n; ++k) d(k, k) = eig.spectrum[k];
    const CMatrix rebuilt = eig.unitary * d * eig.unitary.adjoint();
    CHECK((rebuilt - h.matrix()).cwiseAbs().maxCoeff() < 1e-10);
    for (std::size_t k = 1; k < n; ++k) CHECK(eig.spectrum[k - 1] <= eig.spectrum[k]);
  }
}

TEST_CASE("Spectrum degeneracy tolerance") {
  CHECK_FALSE(Spectrum({-1.0, 1.0}).has_degeneracy());
  CHECK(Spectrum({0.0, 1.0, 1.0 + 1e-10}).has_degeneracy());
  CHECK_FALSE(Spectrum({0.0, 1.0, 1.0 + 1e-8}).has_degeneracy());
  CHECK(Spectrum({1e3, 1e3 + 1e-7}).has_degeneracy());
  const Spectrum s({3.0, -1.0, 2.0});
  CHECK(s.min() == -1.0);
  CHECK(s.max() == 3.0);
  CHECK(s.mean() == doctest::Approx(4.0 / 3.0));
}

TEST_CASE("PureState normalisation and gauge") {
  const auto psi = state({Complex(3.0, 0.0), Complex(0.0, 4.0)});
  CHECK(std::abs(psi.amplitudes().norm() - 1.0) < 1e-12);
  CHECK_THROWS_AS(PureState(CVector::Zero(3)), UsageError);
  CHECK_THROWS_AS(PureState(CVector(0)), UsageError);

  const auto rotated = PureState(std::polar(1.0, 0.8) * psi.amplitudes());
  const auto g1 = psi.canonical_gauge(), g2 = rotated.canonical_gauge();
  CHECK(g1[0].imag() == 0.0);
  CHECK(g1[0].real() >= 0.0);
  CHECK((g1.amplitudes() - g2.amplitudes()).norm() < 1e-14);
  CHECK(PureState(state({0.0, Complex(0.0, -2.0)})).canonical_gauge()[1] == Complex(1.0, 0.0));
}

TEST_CASE("projector examples") {
  const auto p0 = projector(PureState::basis(2, 0)).matrix();
  CHECK(p0(0, 0) == Complex(1.0, 0.0));
  CHECK(p0(1, 1) == Complex(0.0, 0.0));
  const auto p = projector(state({1.0, 1.0})).matrix();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(std::abs(p(i, j) - 0.5) < 1e-15);

  RandomStream rng(3, 1);
  const auto psi = sample_uniform(4, rng);
  const CMatrix pi = projector(psi).matrix();
  CHECK((pi * pi - pi).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(pi.trace() - 1.0) < 1e-12);
}

TEST_CASE("gauge invariance of exported quantities") {
  RandomStream rng(11, 0);
  const auto h = random_hermitian(3, rng);
  const auto psi = sample_uniform(3, rng);

  // alpha = pi is an exact sign flip, so results must agree bit for bit.
  const PureState flipped(-psi.amplitudes());
  CHECK(expectation(h, flipped) == expectation(h, psi));
  CHECK(variance(h, flipped) == variance(h, psi));
  CHECK(projector(flipped).matrix() == projector(psi).matrix());

  // alpha = pi/3 rounds the amplitudes, so agreement is to rounding.
  const PureState turned(std::polar(1.0, std::numbers::pi / 3) * psi.amplitudes());
  CHECK(std::abs(expectation(h, turned) - expectation(h, psi)) < 1e-14);
  CHECK(std::abs(variance(h, turned) - variance(h, psi)) < 1e-14);
  CHECK((projector(turned).matrix() - projector(psi).matrix()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("DensityMatrix validation") {
  CHECK_NOTHROW(DensityMatrix(CMatrix::Identity(3, 3) / 3.0));
  CHECK_THROWS_AS(DensityMatrix(CMatrix::Identity(3, 3)), UsageError);
  CMatrix negative(2, 2);
  negative << 1.5, 0.0, 0.0, -0.5;
  CHECK_THROWS_AS(DensityMatrix{negative}, UsageError);
  CMatrix skew(2, 2);
  skew << 0.5, Complex(0.0, 0.1), Complex(0.0, 0.1), 0.5;
  CHECK_THROWS_AS(DensityMatrix{skew}, UsageError);
}

TEST_CASE("SecondMoment symmetries and partial trace") {
  RandomStream rng(5, 2);
  const auto psi = sample_uniform(3, rng);
  const auto r = SecondMoment::tensor_square(psi);
  const CMatrix pi = projector(psi).matrix();
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t d = 0; d < 3; ++d) {
          CHECK(std::abs(r(a, b, c, d) - r(c, d, a, b)) < 1e-15);
          CHECK(std::abs(r(a, b, c, d) - std::conj(r(b, a, d, c))) < 1e-15);
        }
  CHECK((r.partial_trace() - pi).cwiseAbs().maxCoeff() < 1e-12);

  const auto u = SecondMoment::uniform(3);
  CHECK((u.partial_trace() - CMatrix::Identity(3, 3) / 3.0).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(u(0, 0, 0, 0).real() == doctest::Approx(2.0 / 12.0));
  CHECK(u(0, 0, 1, 1).real() == doctest::Approx(1.0 / 12.0));
  CHECK(u(0, 1, 1, 0).real() == doctest::Approx(1.0 / 12.0));
  CHECK(std::abs(u(0, 1, 0, 1)) == 0.0);

  std::vector<Complex> asym(16, 0.0);
  asym[r.index(0, 1, 1, 1)] = 1.0;
  CHECK_THROWS_AS(SecondMoment(2, asym), UsageError);
}

TEST_CASE("uniform sampling: projector mean, populations, second moment") {
  constexpr std::size_t kSamples = 1'000'000;
  constexpr std::size_t n = 3;
  RandomStream rng(2024, 0);
  std::vector<RunningStats> re(n * n), im(n * n), pop0_sq;
  RunningStats pop0;
  for (std::size_t s = 0; s < kSamples; ++s) {
    const auto psi = sample_uniform(n, rng);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        const Complex v = psi[a] * std::conj(psi[b]);
        re[a * n + b].add(v.real());
        im[a * n + b].add(v.imag());
      }
    pop0.add(std::norm(psi[0]));
  }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      const double target = a == b ? 1.0 / n : 0.0;
      CHECK(std::abs(re[a * n + b].mean() - target) < 5.0 * re[a * n + b].standard_error());
      if (a != b) CHECK(std::abs(im[a * n + b].mean()) < 5.0 * im[a * n + b].standard_error());
    }
  CHECK(std::abs(pop0.mean() - 1.0 / n) < 5.0 * pop0.standard_error());

  // N = 2: |psi_0|^2 is uniform on [0, 1].
  RandomStream rng2(2024, 1);
  RunningStats p, p2;
  for (std::size_t s = 0; s < 200'000; ++s) {
    const double x = std::norm(sample_uniform(2, rng2)[0]);
    p.add(x);
    p2.add((x - 0.5) * (x - 0.5));
  }
  CHECK(std::abs(p2.mean() - 1.0 / 12.0) < 5.0 * p2.standard_error());

  // Second moment against the symmetric-subspace form.
  RandomStream rng3(2024, 2);
  constexpr std::size_t m = 200'000;
  std::vector<RunningStats> r2(2 * 81);
  for (std::size_t s = 0; s < m; ++s) {
    const auto t = SecondMoment::tensor_square(sample_uniform(n, rng3));
    for (std::size_t k = 0; k < 81; ++k) {
      r2[2 * k].add(t.entries()[k].real());
      r2[2 * k + 1].add(t.entries()[k].imag());
    }
  }
  const auto u = SecondMoment::uniform(n);
  for (std::size_t k = 0; k < 81; ++k) {
    CHECK(std::abs(r2[2 * k].mean() - u.entries()[k].real()) <= 5.0 * r2[2 * k].standard_error() + 1e-15);
    CHECK(std::abs(r2[2 * k + 1].mean() - u.entries()[k].imag()) <= 5.0 * r2[2 * k + 1].standard_error() + 1e-15);
  }
}

TEST_CASE("sample_simplex is flat Dirichlet") {
  RandomStream rng(9, 9);
  std::vector<double> first;
  for (int i = 0; i < 20000; ++i) {
    const auto p = sample_simplex(2, rng);
    CHECK(std::abs(p[0] + p[1] - 1.0) < 1e-15);
    first.push_back(p[0]);
  }
  const auto ks = ks_one_sample(first, [](double x) { return std::clamp(x, 0.0, 1.0); });
  CHECK(ks.p_value > 0.01);
}

TEST_CASE("variance decomposition") {
  const auto h = diag({-1.0, 1.0});
  {
    std::vector<PureState> e(3, PureState::basis(2, 0));
    const auto v = variance_decomposition(e, h);
    CHECK(v.total == doctest::Approx(0.0));
    CHECK(v.mean_conditional == doctest::Approx(0.0));
    CHECK(v.variance_of_conditional == doctest::Approx(0.0));
  }
  {
    std::vector<PureState> e(4, state({1.0, Complex(0.3, 0.2)}));
    const auto v = variance_decomposition(e, h);
    CHECK(v.variance_of_conditional == doctest::Approx(0.0));
    CHECK(v.total == doctest::Approx(v.mean_conditional).epsilon(1e-12));
  }
  {
    std::vector<PureState> e{PureState::basis(2, 0), PureState::basis(2, 1)};
    const auto v = variance_decomposition(e, h);
    CHECK(v.total == doctest::Approx(1.0));
    CHECK(v.mean_conditional == doctest::Approx(0.0));
    CHECK(v.variance_of_conditional == doctest::Approx(1.0));
  }
  RandomStream rng(1, 1);
  std::vector<PureState> e;
  for (int i = 0; i < 500; ++i) e.push_back(sample_uniform(4, rng));
  const auto a = random_hermitian(4, rng);
  const auto v = variance_decomposition(e, a);
  CHECK(std::abs(v.total - v.mean_conditional - v.variance_of_conditional) < 1e-12);
  CHECK_THROWS_AS(variance_decomposition(std::vector<PureState>{}, h), UsageError);
}
