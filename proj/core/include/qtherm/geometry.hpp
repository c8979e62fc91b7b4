#pragma once

// Complex linear algebra on the quantum phase space CP^n.
//
// Conventions: hbar = k = 1. The Fubini-Study metric is scaled so that the
// squared gradient of H(x) = <psi|H|psi> equals the quantum variance and
// the Laplacian of H(x) equals (n+1)(Hbar - H(x)); on CP^1 this is the unit
// 2-sphere.

#include <cstddef>
#include <span>
#include <vector>

#include "qtherm/random.hpp"
#include "qtherm/types.hpp"

namespace qtherm {

/// Relative tolerance used when validating Hermiticity of user input.
inline constexpr double kHermitianTolerance = 1e-12;

/// Sorted energy levels with a degeneracy tolerance.
class Spectrum {
 public:
  /// Levels are sorted ascending on construction.
  explicit Spectrum(std::vector<double> levels);

  std::size_t size() const noexcept { return levels_.size(); }
  const std::vector<double>& levels() const noexcept { return levels_; }
  double operator[](std::size_t k) const { return levels_[k]; }
  double min() const { return levels_.front(); }
  double max() const { return levels_.back(); }
  double mean() const;

  /// |E_i - E_j| below which two levels count as degenerate:
  /// 1e-9 * max(1, max|E|).
  double degeneracy_tolerance() const noexcept { return tolerance_; }
  bool has_degeneracy() const;

 private:
  std::vector<double> levels_;
  double tolerance_ = 0.0;
};

/// Spectrum plus the unitary whose columns are the matching eigenvectors.
struct Eigensystem {
  Spectrum spectrum;
  CMatrix unitary;
};

/// A Hermitian N x N matrix: the Hamiltonian or a linear observable.
class HermitianOperator {
 public:
  /// Throws UsageError if the matrix is not square or not Hermitian within
  /// kHermitianTolerance relative to its largest entry.
  explicit HermitianOperator(CMatrix matrix);

  static HermitianOperator diagonal(std::span<const double> levels);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(matrix_.rows()); }
  const CMatrix& matrix() const noexcept { return matrix_; }
  const Eigensystem& eigensystem() const noexcept { return eigen_; }
  const Spectrum& spectrum() const noexcept { return eigen_.spectrum; }

 private:
  CMatrix matrix_;
  Eigensystem eigen_;
};

/// A unit vector in C^N representing a point of CP^(N-1).
class PureState {
 public:
  /// Normalises `amplitudes`; throws UsageError for a zero or empty vector.
  explicit PureState(CVector amplitudes);

  static PureState basis(std::size_t dim, std::size_t k);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(amps_.size()); }
  const CVector& amplitudes() const noexcept { return amps_; }
  Complex operator[](std::size_t k) const { return amps_[static_cast<Eigen::Index>(k)]; }

  /// Same ray, with the first nonzero amplitude rotated real and nonnegative.
  /// Only meant for printing and diffing.
  PureState canonical_gauge() const;

 private:
  CVector amps_;
};

/// First moment of the projector over an ensemble.
class DensityMatrix {
 public:
  /// Validates Hermiticity, unit trace and eigenvalues >= -1e-10.
  explicit DensityMatrix(CMatrix matrix);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(matrix_.rows()); }
  const CMatrix& matrix() const noexcept { return matrix_; }
  Complex operator()(std::size_t a, std::size_t b) const {
    return matrix_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  }

 private:
  CMatrix matrix_;
};

/// Second moment R^{ac}_{bd} = E[Pi^a_b Pi^c_d], stored as [a][b][c][d].
class SecondMoment {
 public:
  /// Validates pair-swap symmetry and pair Hermiticity within 1e-10.
  SecondMoment(std::size_t dim, std::vector<Complex> entries);

  static SecondMoment tensor_square(const PureState& psi);
  /// Uniform Fubini-Study value (d^a_b d^c_d + d^a_d d^c_b) / (N (N+1)).
  static SecondMoment uniform(std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }
  Complex operator()(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    return entries_[index(a, b, c, d)];
  }
  const std::vector<Complex>& entries() const noexcept { return entries_; }

  /// Sum over c of R^{ac}_{bc}.
  CMatrix partial_trace() const;

  std::size_t index(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const noexcept {
    return ((a * dim_ + b) * dim_ + c) * dim_ + d;
  }

 private:
  std::size_t dim_;
  std::vector<Complex> entries_;
};

/// <psi|A|psi>.
double expectation(const HermitianOperator& a, const PureState& psi);
/// <psi|A^2|psi> - <psi|A|psi>^2, clamped at zero.
double variance(const HermitianOperator& a, const PureState& psi);
/// tr A / N.
double uniform_average(const HermitianOperator& a);

DensityMatrix projector(const PureState& psi);

/// Draw from the unitarily invariant measure on CP^(N-1): i.i.d. standard
/// complex Gaussian amplitudes, normalised.
PureState sample_uniform(std::size_t dim, RandomStream& rng);

/// Flat-Dirichlet point on the probability simplex (|psi_k|^2 of a uniform
/// state).
std::vector<double> sample_simplex(std::size_t dim, RandomStream& rng);

struct VarianceDecomposition {
  double total = 0.0;                    ///< E[<A^2>] - E[<A>]^2
  double mean_conditional = 0.0;         ///< E[Var_psi(A)]
  double variance_of_conditional = 0.0;  ///< Var(<A>_psi), population form
};

/// Conditional variance split of A over an equally weighted ensemble.
VarianceDecomposition variance_decomposition(std::span<const PureState> ensemble,
                                             const HermitianOperator& a);

}  // namespace qtherm
