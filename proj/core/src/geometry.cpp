#include "qtherm/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace qtherm {

namespace {

double max_abs_entry(const CMatrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw UsageError(std::string(what) + ": dimension mismatch (" + std::to_string(a) + " vs " +
                     std::to_string(b) + ")");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Spectrum

Spectrum::Spectrum(std::vector<double> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw UsageError("Spectrum: no levels");
  for (double e : levels_) {
    if (!std::isfinite(e)) throw UsageError("Spectrum: non-finite level");
  }
  std::sort(levels_.begin(), levels_.end());
  const double largest = std::max(std::abs(levels_.front()), std::abs(levels_.back()));
  tolerance_ = 1e-9 * std::max(1.0, largest);
}

double Spectrum::mean() const {
  return std::accumulate(levels_.begin(), levels_.end(), 0.0) / static_cast<double>(levels_.size());
}

bool Spectrum::has_degeneracy() const {
  for (std::size_t k = 1; k < levels_.size(); ++k) {
    if (levels_[k] - levels_[k - 1] < tolerance_) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// HermitianOperator

namespace {

Eigensystem diagonalise(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(m);
  if (solver.info() != Eigen::Success) throw UsageError("HermitianOperator: eigensolver failed");
  const RVector& values = solver.eigenvalues();  // ascending
  return Eigensystem{Spectrum(std::vector<double>(values.data(), values.data() + values.size())),
                     solver.eigenvectors()};
}

}  // namespace

HermitianOperator::HermitianOperator(CMatrix matrix)
    : matrix_(std::move(matrix)), eigen_{Spectrum({0.0}), CMatrix()} {
  if (matrix_.rows() == 0 || matrix_.rows() != matrix_.cols()) {
    throw UsageError("HermitianOperator: matrix must be square and nonempty");
  }
  const double scale = std::max(1e-300, max_abs_entry(matrix_));
  const double defect = max_abs_entry(matrix_ - matrix_.adjoint());
  if (defect > kHermitianTolerance * scale) {
    throw UsageError("HermitianOperator: matrix is not Hermitian (defect " + std::to_string(defect) +
                     ")");
  }
  // Symmetrise away the sub-tolerance defect so downstream identities are exact.
  matrix_ = 0.5 * (matrix_ + matrix_.adjoint()).eval();
  eigen_ = diagonalise(matrix_);
}

HermitianOperator HermitianOperator::diagonal(std::span<const double> levels) {
  CMatrix m = CMatrix::Zero(static_cast<Eigen::Index>(levels.size()),
                            static_cast<Eigen::Index>(levels.size()));
  for (std::size_t k = 0; k < levels.size(); ++k) {
    m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = levels[k];
  }
  return HermitianOperator(std::move(m));
}

// ---------------------------------------------------------------------------
// PureState

PureState::PureState(CVector amplitudes) : amps_(std::move(amplitudes)) {
  const double norm = amps_.norm();
  if (amps_.size() == 0 || !(norm > 0.0) || !std::isfinite(norm)) {
    throw UsageError("PureState: amplitudes must be finite and not all zero");
  }
  amps_ /= norm;
}

PureState PureState::basis(std::size_t dim, std::size_t k) {
  if (k >= dim) throw UsageError("PureState::basis: index out of range");
  CVector v = CVector::Zero(static_cast<Eigen::Index>(dim));
  v[static_cast<Eigen::Index>(k)] = 1.0;
  return PureState(std::move(v));
}

PureState PureState::canonical_gauge() const {
  for (Eigen::Index k = 0; k < amps_.size(); ++k) {
    const double mag = std::abs(amps_[k]);
    if (mag > 0.0) {
      const Complex phase = std::conj(amps_[k]) / mag;
      CVector rotated = amps_ * phase;
      rotated[k] = mag;
      return PureState(std::move(rotated));
    }
  }
  return *this;
}

// ---------------------------------------------------------------------------
// DensityMatrix

DensityMatrix::DensityMatrix(CMatrix matrix) : matrix_(std::move(matrix)) {
  if (matrix_.rows() == 0 || matrix_.rows() != matrix_.cols()) {
    throw UsageError("DensityMatrix: matrix must be square and nonempty");
  }
  if (max_abs_entry(matrix_ - matrix_.adjoint()) > 1e-10) {
    throw UsageError("DensityMatrix: not Hermitian");
  }
  if (std::abs(matrix_.trace() - Complex(1.0)) > 1e-10) {
    throw UsageError("DensityMatrix: trace differs from one");
  }
  const CMatrix herm = 0.5 * (matrix_ + matrix_.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(herm, Eigen::EigenvaluesOnly);
  if (solver.eigenvalues().minCoeff() < -1e-10) {
    throw UsageError("DensityMatrix: negative eigenvalue");
  }
}

// ---------------------------------------------------------------------------
// SecondMoment

SecondMoment::SecondMoment(std::size_t dim, std::vector<Complex> entries)
    : dim_(dim), entries_(std::move(entries)) {
  if (dim_ == 0 || entries_.size() != dim_ * dim_ * dim_ * dim_) {
    throw UsageError("SecondMoment: entry count must be dim^4");
  }
  for (std::size_t a = 0; a < dim_; ++a)
    for (std::size_t b = 0; b < dim_; ++b)
      for (std::size_t c = 0; c < dim_; ++c)
        for (std::size_t d = 0; d < dim_; ++d) {
          const Complex r = (*this)(a, b, c, d);
          if (std::abs(r - (*this)(c, d, a, b)) > 1e-10) {
            throw UsageError("SecondMoment: not symmetric under pair swap");
          }
          if (std::abs(r - std::conj((*this)(b, a, d, c))) > 1e-10) {
            throw UsageError("SecondMoment: not Hermitian in the pairing");
          }
        }
}

SecondMoment SecondMoment::tensor_square(const PureState& psi) {
  const std::size_t n = psi.dim();
  const CMatrix p = projector(psi).matrix();
  std::vector<Complex> e(n * n * n * n);
  std::size_t i = 0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c)
        for (std::size_t d = 0; d < n; ++d)
          e[i++] = p(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) *
                   p(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(d));
  return SecondMoment(n, std::move(e));
}

SecondMoment SecondMoment::uniform(std::size_t dim) {
  const double norm = 1.0 / (static_cast<double>(dim) * static_cast<double>(dim + 1));
  std::vector<Complex> e(dim * dim * dim * dim);
  std::size_t i = 0;
  for (std::size_t a = 0; a < dim; ++a)
    for (std::size_t b = 0; b < dim; ++b)
      for (std::size_t c = 0; c < dim; ++c)
        for (std::size_t d = 0; d < dim; ++d)
          e[i++] = norm * (double(a == b && c == d) + double(a == d && c == b));
  return SecondMoment(dim, std::move(e));
}

CMatrix SecondMoment::partial_trace() const {
  const auto n = static_cast<Eigen::Index>(dim_);
  CMatrix out = CMatrix::Zero(n, n);
  for (std::size_t a = 0; a < dim_; ++a)
    for (std::size_t b = 0; b < dim_; ++b)
      for (std::size_t c = 0; c < dim_; ++c)
        out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += (*this)(a, b, c, c);
  return out;
}

// ---------------------------------------------------------------------------
// Operations

double expectation(const HermitianOperator& a, const PureState& psi) {
  require_same_dim(a.dim(), psi.dim(), "expectation");
  return psi.amplitudes().dot(a.matrix() * psi.amplitudes()).real();
}

double variance(const HermitianOperator& a, const PureState& psi) {
  require_same_dim(a.dim(), psi.dim(), "variance");
  const CVector a_psi = a.matrix() * psi.amplitudes();
  const double mean = psi.amplitudes().dot(a_psi).real();
  return std::max(0.0, a_psi.squaredNorm() - mean * mean);
}

double uniform_average(const HermitianOperator& a) {
  return a.matrix().trace().real() / static_cast<double>(a.dim());
}

DensityMatrix projector(const PureState& psi) {
  return DensityMatrix(psi.amplitudes() * psi.amplitudes().adjoint());
}

PureState sample_uniform(std::size_t dim, RandomStream& rng) {
  if (dim < 2) throw UsageError("sample_uniform: dimension must be at least 2");
  constexpr double kScale = 0.7071067811865475244;  // unit-variance complex normal
  CVector v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const double re = rng.normal();
    const double im = rng.normal();
    v[k] = Complex(kScale * re, kScale * im);
  }
  return PureState(std::move(v));
}

std::vector<double> sample_simplex(std::size_t dim, RandomStream& rng) {
  if (dim == 0) throw UsageError("sample_simplex: empty dimension");
  std::vector<double> p(dim);
  double total = 0.0;
  for (double& x : p) {
    x = -std::log1p(-rng.uniform());  // Exp(1)
    total += x;
  }
  for (double& x : p) x /= total;
  return p;
}

VarianceDecomposition variance_decomposition(std::span<const PureState> ensemble,
                                             const HermitianOperator& a) {
  if (ensemble.empty()) throw UsageError("variance_decomposition: empty ensemble");
  double sum_mean = 0.0;
  double sum_mean_sq = 0.0;
  double sum_second = 0.0;
  double sum_var = 0.0;
  for (const PureState& psi : ensemble) {
    require_same_dim(a.dim(), psi.dim(), "variance_decomposition");
    const CVector a_psi = a.matrix() * psi.amplitudes();
    const double m = psi.amplitudes().dot(a_psi).real();
    const double second = a_psi.squaredNorm();
    sum_mean += m;
    sum_mean_sq += m * m;
    sum_second += second;
    sum_var += second - m * m;
  }
  const double count = static_cast<double>(ensemble.size());
  const double mean = sum_mean / count;
  VarianceDecomposition out;
  out.total = sum_second / count - mean * mean;
  out.mean_conditional = sum_var / count;
  out.variance_of_conditional = sum_mean_sq / count - mean * mean;
  return out;
}

}  // namespace qtherm
