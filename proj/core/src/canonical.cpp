#include "qtherm/canonical.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qtherm/parallel.hpp"
#include "qtherm/random.hpp"

namespace qtherm {

namespace {

double factorial(std::size_t n) {
  double f = 1.0;
  for (std::size_t k = 2; k <= n; ++k) f *= static_cast<double>(k);
  return f;
}

std::vector<double> scaled_levels(const Spectrum& spectrum, double beta) {
  std::vector<double> x(spectrum.size());
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = beta * spectrum[k];
  return x;
}

constexpr double kConditioningGap = 0.5;

}  // namespace

// ---------------------------------------------------------------------------
// Divided differences of the exponential

double exp_divided_difference(std::span<const double> nodes, double shift) {
  if (nodes.empty()) throw UsageError("exp_divided_difference: no nodes");
  const std::size_t m = nodes.size() - 1;
  const double x_max = *std::max_element(nodes.begin(), nodes.end());

  // Reflect y = x_max - x so the target becomes (-1)^m times a divided
  // difference of e^{y - c}, all of whose entries are positive. Taylor
  // series plus repeated squaring of the nonnegative bidiagonal matrix then
  // involve no cancellation.
  std::vector<double> y(nodes.size());
  double y_max = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    y[i] = x_max - nodes[i];
    y_max = std::max(y_max, y[i]);
  }
  const double c = x_max - shift;
  const double s = std::max(1.0, y_max);
  const int squarings = std::max(0, static_cast<int>(std::ceil(std::log2((y_max + s) / 0.5))));
  const double scale = std::ldexp(1.0, -squarings);

  const auto dim = static_cast<Eigen::Index>(nodes.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    a(i, i) = y[static_cast<std::size_t>(i)] * scale;
    if (i + 1 < dim) a(i, i + 1) = s * scale;
  }

  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(dim, dim);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(dim, dim);
  for (int k = 1; k < 80; ++k) {
    term = (term * a) / static_cast<double>(k);
    result += term;
    if (term.maxCoeff() < 1e-18 * result.maxCoeff()) break;
  }
  result *= std::exp(-c * scale);
  for (int q = 0; q < squarings; ++q) result = (result * result).eval();

  const double entry = result(0, dim - 1) / std::pow(s, static_cast<double>(m));
  return (m % 2 == 0) ? entry : -entry;
}

// ---------------------------------------------------------------------------
// Partition function

PartitionRoute automatic_route(const Spectrum& spectrum, double beta) {
  if (spectrum.has_degeneracy()) return PartitionRoute::divided_difference;
  for (std::size_t k = 1; k < spectrum.size(); ++k) {
    if (std::abs(beta) * (spectrum[k] - spectrum[k - 1]) < kConditioningGap) {
      return PartitionRoute::divided_difference;
    }
  }
  return PartitionRoute::closed_form;
}

namespace {

/// z_rel * exp(x_min): the shifted partition function, O(1) for any beta.
double shifted_partition(const Spectrum& spectrum, double beta, PartitionRoute route,
                         double& x_min) {
  if (!std::isfinite(beta)) throw UsageError("partition_function: beta must be finite");
  const std::vector<double> x = scaled_levels(spectrum, beta);
  x_min = *std::min_element(x.begin(), x.end());
  const std::size_t n = x.size() - 1;
  if (n == 0) return 1.0;
  if (route == PartitionRoute::automatic) route = automatic_route(spectrum, beta);

  if (route == PartitionRoute::closed_form) {
    double sum = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
      double denom = 1.0;
      for (std::size_t j = 0; j <= n; ++j) {
        if (j != k) denom *= (x[j] - x[k]);
      }
      sum += std::exp(-(x[k] - x_min)) / denom;
    }
    return factorial(n) * sum;
  }
  const double dd = exp_divided_difference(x, x_min);
  return factorial(n) * ((n % 2 == 0) ? dd : -dd);
}

}  // namespace

double partition_function(const Spectrum& spectrum, double beta, PartitionRoute route) {
  double x_min = 0.0;
  const double shifted = shifted_partition(spectrum, beta, route, x_min);
  return shifted * std::exp(-x_min);
}

double log_partition_function(const Spectrum& spectrum, double beta, PartitionRoute route) {
  double x_min = 0.0;
  const double shifted = shifted_partition(spectrum, beta, route, x_min);
  return std::log(shifted) - x_min;
}

// ---------------------------------------------------------------------------
// Population moments

PopulationMoments exact_population_moments(const Spectrum& spectrum, double beta) {
  const std::vector<double> x = scaled_levels(spectrum, beta);
  const std::size_t n = x.size();
  const double shift = *std::min_element(x.begin(), x.end());
  const double base = exp_divided_difference(x, shift);

  PopulationMoments out;
  out.first.resize(n);
  out.second_flat = RVector::Zero(static_cast<Eigen::Index>(n * n));
  std::vector<double> nodes = x;
  nodes.push_back(0.0);
  for (std::size_t k = 0; k < n; ++k) {
    nodes[n] = x[k];
    out.first[k] = -exp_divided_difference(nodes, shift) / base;
  }
  nodes.push_back(0.0);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = k; l < n; ++l) {
      nodes[n] = x[k];
      nodes[n + 1] = x[l];
      const double value = (k == l ? 2.0 : 1.0) * exp_divided_difference(nodes, shift) / base;
      out.second_flat[static_cast<Eigen::Index>(k * n + l)] = value;
      out.second_flat[static_cast<Eigen::Index>(l * n + k)] = value;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Thermodynamics by differentiating ln z_rel

namespace {

struct Centered {
  Spectrum spectrum;
  double mean;
};

Centered centered(const Spectrum& spectrum) {
  const double mean = spectrum.mean();
  std::vector<double> levels = spectrum.levels();
  for (double& e : levels) e -= mean;
  return {Spectrum(std::move(levels)), mean};
}

double first_derivative(const Spectrum& s, double beta, double step) {
  return (log_partition_function(s, beta + step) - log_partition_function(s, beta - step)) /
         (2.0 * step);
}

double second_derivative(const Spectrum& s, double beta, double step) {
  return (log_partition_function(s, beta + step) - 2.0 * log_partition_function(s, beta) +
          log_partition_function(s, beta - step)) /
         (step * step);
}

double fd_step(double beta) { return 1e-4 * std::max(1.0, std::abs(beta)); }

}  // namespace

double equilibrium_energy(const Spectrum& spectrum, double beta) {
  // ln z is shifted by beta * mean under centring, so U shifts by the mean.
  const Centered c = centered(spectrum);
  const double h = fd_step(beta);
  const double coarse = first_derivative(c.spectrum, beta, h);
  const double fine = first_derivative(c.spectrum, beta, 0.5 * h);
  return c.mean - (4.0 * fine - coarse) / 3.0;
}

double heat_capacity(const Spectrum& spectrum, double beta) {
  if (!(beta > 0.0)) throw GuardError("beta", "heat_capacity requires beta > 0");
  const Centered c = centered(spectrum);
  const double h = fd_step(beta);
  const double coarse = second_derivative(c.spectrum, beta, h);
  const double fine = second_derivative(c.spectrum, beta, 0.5 * h);
  return beta * beta * (4.0 * fine - coarse) / 3.0;
}

CanonicalResult canonical_summary(const Spectrum& spectrum, double beta) {
  CanonicalResult r;
  r.beta = beta;
  r.z_rel = partition_function(spectrum, beta);
  r.u = equilibrium_energy(spectrum, beta);

  const PopulationMoments pm = exact_population_moments(spectrum, beta);
  const std::size_t n = spectrum.size();
  double mean_sq = 0.0;
  double classical_second = 0.0;
  double classical_first = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mean_sq += pm.first[k] * spectrum[k] * spectrum[k];
    classical_first += pm.first[k] * spectrum[k];
    for (std::size_t l = 0; l < n; ++l) classical_second += pm.second(k, l) * spectrum[k] * spectrum[l];
  }
  r.var_total = mean_sq - r.u * r.u;
  r.var_classical = std::max(0.0, classical_second - classical_first * classical_first);
  r.c = beta > 0.0 ? heat_capacity(spectrum, beta) : 0.0;
  return r;
}

double verify_capacity_identity(const Spectrum& spectrum, double beta) {
  if (!(beta > 0.0)) throw GuardError("beta", "verify_capacity_identity requires beta > 0");
  const double t = 1.0 / beta;
  const double u = equilibrium_energy(spectrum, beta);
  const double c = heat_capacity(spectrum, beta);
  const PopulationMoments pm = exact_population_moments(spectrum, beta);
  double mean_sq = 0.0;
  for (std::size_t k = 0; k < spectrum.size(); ++k) mean_sq += pm.first[k] * spectrum[k] * spectrum[k];
  const double var_total = mean_sq - u * u;
  const double lhs = t * t * c;
  const double rhs = var_total + static_cast<double>(spectrum.size()) * t * (u - spectrum.mean());
  return std::abs(lhs - rhs);
}

// ---------------------------------------------------------------------------
// Density of states

namespace {

double exact_density(const Spectrum& s, double e) {
  const double tol = s.degeneracy_tolerance();
  if (s.size() == 2) return 1.0 / (s[1] - s[0]);
  const double e0 = s[0], e1 = s[1], e2 = s[2];
  const double width = e2 - e0;
  if (e1 - e0 < tol) return 2.0 * (e2 - e) / (width * width);
  if (e2 - e1 < tol) return 2.0 * (e - e0) / (width * width);
  if (e <= e1) return 2.0 * (e - e0) / (width * (e1 - e0));
  return 2.0 * (e2 - e) / (width * (e2 - e1));
}

}  // namespace

DosEstimate dos(const Spectrum& spectrum, std::span<const double> grid, const DosOptions& options) {
  if (spectrum.size() < 2) throw UsageError("dos: need at least two levels");
  if (grid.empty()) throw UsageError("dos: empty grid");
  const double tol = spectrum.degeneracy_tolerance();
  if (spectrum.max() - spectrum.min() < tol) {
    throw UsageError("dos: fully degenerate spectrum has a point-mass density");
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < spectrum.min() - tol || grid[i] > spectrum.max() + tol) {
      throw UsageError("dos: grid point " + std::to_string(grid[i]) + " outside the spectral hull");
    }
    if (i > 0 && !(grid[i] > grid[i - 1])) throw UsageError("dos: grid must be strictly increasing");
  }

  DosEstimate out;
  out.energies.assign(grid.begin(), grid.end());

  if (spectrum.size() <= 3) {
    out.method = DosMethod::exact_piecewise;
    out.std_error.assign(grid.size(), 0.0);
    for (double e : grid) {
      const double clamped = std::clamp(e, spectrum.min(), spectrum.max());
      out.density.push_back(std::max(0.0, exact_density(spectrum, clamped)));
    }
    return out;
  }

  out.method = DosMethod::monte_carlo;
  const std::size_t bins = grid.size();
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 1; i < bins; ++i) edges[i] = 0.5 * (grid[i - 1] + grid[i]);
  const double first_half = bins > 1 ? 0.5 * (grid[1] - grid[0]) : 0.5 * (spectrum.max() - spectrum.min());
  const double last_half = bins > 1 ? 0.5 * (grid[bins - 1] - grid[bins - 2]) : first_half;
  edges[0] = std::max(spectrum.min(), grid[0] - first_half);
  edges[bins] = std::min(spectrum.max(), grid[bins - 1] + last_half);

  constexpr std::size_t kChunk = 1 << 15;
  const std::size_t chunks = (options.samples + kChunk - 1) / kChunk;
  std::vector<std::vector<double>> counts(chunks, std::vector<double>(bins, 0.0));
  parallel_for(chunks, options.workers, [&](std::size_t c) {
    RandomStream rng(options.seed, c);
    const std::size_t count = std::min(kChunk, options.samples - c * kChunk);
    for (std::size_t i = 0; i < count; ++i) {
      const std::vector<double> p = sample_simplex(spectrum.size(), rng);
      double e = 0.0;
      for (std::size_t k = 0; k < p.size(); ++k) e += p[k] * spectrum[k];
      const auto it = std::upper_bound(edges.begin(), edges.end(), e);
      if (it == edges.begin() || it == edges.end()) continue;
      counts[c][static_cast<std::size_t>(it - edges.begin()) - 1] += 1.0;
    }
  });
  const double total = static_cast<double>(options.samples);
  for (std::size_t b = 0; b < bins; ++b) {
    double hits = 0.0;
    for (const auto& chunk : counts) hits += chunk[b];
    const double width = edges[b + 1] - edges[b];
    const double prob = hits / total;
    out.density.push_back(width > 0.0 ? prob / width : 0.0);
    out.std_error.push_back(width > 0.0 ? std::sqrt(prob * (1.0 - prob) / total) / width : 0.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo

namespace {

constexpr std::size_t kMcChunk = 1 << 14;

std::size_t chunk_count(std::size_t samples) { return (samples + kMcChunk - 1) / kMcChunk; }

std::size_t chunk_size(std::size_t samples, std::size_t c) {
  return std::min(kMcChunk, samples - c * kMcChunk);
}

/// Sums needed for self-normalised importance estimates of several
/// functionals g_i with delta-method covariance.
struct WeightedSums {
  double w = 0.0;
  double w2 = 0.0;
  std::vector<double> wg;    // sum w g_i
  std::vector<double> w2g;   // sum w^2 g_i
  std::vector<double> w2gg;  // sum w^2 g_i g_j, row-major

  explicit WeightedSums(std::size_t dims = 0)
      : wg(dims, 0.0), w2g(dims, 0.0), w2gg(dims * dims, 0.0) {}

  void merge(const WeightedSums& o) {
    w += o.w;
    w2 += o.w2;
    for (std::size_t i = 0; i < wg.size(); ++i) {
      wg[i] += o.wg[i];
      w2g[i] += o.w2g[i];
    }
    for (std::size_t i = 0; i < w2gg.size(); ++i) w2gg[i] += o.w2gg[i];
  }

  double mean(std::size_t i) const { return wg[i] / w; }

  /// Delta-method covariance of the ratio estimators i and j.
  double covariance(std::size_t i, std::size_t j) const {
    const double mi = mean(i), mj = mean(j);
    const std::size_t d = wg.size();
    const double s = w2gg[i * d + j] - mi * w2g[j] - mj * w2g[i] + mi * mj * w2;
    return s / (w * w);
  }
};

}  // namespace

McValue partition_function_mc(const Spectrum& spectrum, double beta, const McOptions& options) {
  if (options.samples < 2) throw UsageError("partition_function_mc: need at least two samples");
  const std::size_t chunks = chunk_count(options.samples);
  std::vector<double> sum(chunks, 0.0), sum_sq(chunks, 0.0);
  parallel_for(chunks, options.workers, [&](std::size_t c) {
    RandomStream rng(options.seed, c);
    for (std::size_t i = 0; i < chunk_size(options.samples, c); ++i) {
      const std::vector<double> p = sample_simplex(spectrum.size(), rng);
      double e = 0.0;
      for (std::size_t k = 0; k < p.size(); ++k) e += p[k] * spectrum[k];
      const double w = std::exp(-beta * e);
      sum[c] += w;
      sum_sq[c] += w * w;
    }
  });
  double s = 0.0, s2 = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    s += sum[c];
    s2 += sum_sq[c];
  }
  const double n = static_cast<double>(options.samples);
  const double mean = s / n;
  const double var = std::max(0.0, (s2 / n - mean * mean) * n / (n - 1.0));
  return {mean, std::sqrt(var / n)};
}

SecondMoment second_moment_from_populations(const CMatrix& unitary, const RVector& second_flat) {
  const std::size_t n = static_cast<std::size_t>(unitary.rows());
  std::vector<Complex> r(n * n * n * n, Complex(0.0, 0.0));
  auto idx = [n](std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    return ((a * n + b) * n + c) * n + d;
  };
  auto u = [&](std::size_t row, std::size_t col) {
    return unitary(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
  };
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const double m = second_flat[static_cast<Eigen::Index>(a * n + b)];
      if (m == 0.0) continue;
      for (std::size_t al = 0; al < n; ++al)
        for (std::size_t be = 0; be < n; ++be) {
          // Pairing (a a)(b b): projector products with matching phases.
          const Complex left = u(al, a) * std::conj(u(be, a));
          // Pairing (a b)(b a), only for a != b (a == b already counted).
          const Complex cross = a != b ? u(al, a) * std::conj(u(be, b)) : Complex(0.0, 0.0);
          for (std::size_t ga = 0; ga < n; ++ga)
            for (std::size_t de = 0; de < n; ++de) {
              Complex v = left * u(ga, b) * std::conj(u(de, b));
              if (a != b) v += cross * u(ga, b) * std::conj(u(de, a));
              r[idx(al, be, ga, de)] += m * v;
            }
        }
    }
  }
  return SecondMoment(n, std::move(r));
}

namespace {

DensityMatrix rotate_populations(const CMatrix& unitary, const std::vector<double>& populations) {
  RVector p(static_cast<Eigen::Index>(populations.size()));
  for (std::size_t k = 0; k < populations.size(); ++k) p[static_cast<Eigen::Index>(k)] = populations[k];
  CMatrix rho = unitary * p.cast<Complex>().asDiagonal() * unitary.adjoint();
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return DensityMatrix(std::move(rho));
}

}  // namespace

EquilibriumMoments equilibrium_moments(const HermitianOperator& h, double beta,
                                       const McOptions& options) {
  if (options.samples < 2) throw UsageError("equilibrium_moments: need at least two samples");
  if (!std::isfinite(beta)) throw UsageError("equilibrium_moments: beta must be finite");
  const Eigensystem& es = h.eigensystem();
  const Spectrum& spec = es.spectrum;
  const std::size_t n = spec.size();
  // Functionals: p_k (n of them), p_k p_l for k <= l, and the energy.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t l = k; l < n; ++l) pairs.emplace_back(k, l);
  const std::size_t dims = n + pairs.size() + 1;
  const double e_ref = beta >= 0.0 ? spec.min() : spec.max();

  const std::size_t chunks = chunk_count(options.samples);
  std::vector<WeightedSums> partial(chunks, WeightedSums(dims));
  parallel_for(chunks, options.workers, [&](std::size_t c) {
    RandomStream rng(options.seed, c);
    WeightedSums& acc = partial[c];
    std::vector<double> g(dims);
    for (std::size_t i = 0; i < chunk_size(options.samples, c); ++i) {
      const std::vector<double> p = sample_simplex(n, rng);
      double e = 0.0;
      for (std::size_t k = 0; k < n; ++k) e += p[k] * spec[k];
      const double w = std::exp(-beta * (e - e_ref));
      for (std::size_t k = 0; k < n; ++k) g[k] = p[k];
      for (std::size_t j = 0; j < pairs.size(); ++j) g[n + j] = p[pairs[j].first] * p[pairs[j].second];
      g[dims - 1] = e;
      acc.w += w;
      acc.w2 += w * w;
      for (std::size_t a = 0; a < dims; ++a) {
        acc.wg[a] += w * g[a];
        const double w2ga = w * w * g[a];
        acc.w2g[a] += w2ga;
        for (std::size_t b = 0; b < dims; ++b) acc.w2gg[a * dims + b] += w2ga * g[b];
      }
    }
  });
  WeightedSums total(dims);
  for (const WeightedSums& part : partial) total.merge(part);

  std::vector<double> populations(n);
  for (std::size_t k = 0; k < n; ++k) populations[k] = total.mean(k);
  RVector second = RVector::Zero(static_cast<Eigen::Index>(n * n));
  RVector second_se = RVector::Zero(static_cast<Eigen::Index>(n * n));
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    const auto [k, l] = pairs[j];
    const double m = total.mean(n + j);
    const double se = std::sqrt(std::max(0.0, total.covariance(n + j, n + j)));
    for (auto [a, b] : {std::pair{k, l}, std::pair{l, k}}) {
      second[static_cast<Eigen::Index>(a * n + b)] = m;
      second_se[static_cast<Eigen::Index>(a * n + b)] = se;
    }
  }

  // Errors of rho: rho_ab = sum_k U_ak conj(U_bk) p_k, linear in the
  // population estimates, so propagate their covariance exactly.
  const CMatrix& u = es.unitary;
  const auto ni = static_cast<Eigen::Index>(n);
  CMatrix rho_se(ni, ni);
  for (Eigen::Index a = 0; a < ni; ++a)
    for (Eigen::Index b = 0; b < ni; ++b) {
      double var_re = 0.0, var_im = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l) {
          const Complex ck = u(a, static_cast<Eigen::Index>(k)) * std::conj(u(b, static_cast<Eigen::Index>(k)));
          const Complex cl = u(a, static_cast<Eigen::Index>(l)) * std::conj(u(b, static_cast<Eigen::Index>(l)));
          const double cov = total.covariance(k, l);
          var_re += ck.real() * cl.real() * cov;
          var_im += ck.imag() * cl.imag() * cov;
        }
      rho_se(a, b) = Complex(std::sqrt(std::max(0.0, var_re)), std::sqrt(std::max(0.0, var_im)));
    }

  // Errors of r2: triangle-inequality bound through the same rotation.
  std::vector<Complex> r2_se(n * n * n * n, Complex(0.0, 0.0));
  {
    CMatrix abs_u = u.cwiseAbs().cast<Complex>();
    const SecondMoment bound = second_moment_from_populations(abs_u, second_se);
    for (std::size_t i = 0; i < r2_se.size(); ++i) {
      const double b = std::abs(bound.entries()[i]);
      r2_se[i] = Complex(b, b);
    }
  }

  EquilibriumMoments out{rotate_populations(u, populations),
                         std::move(rho_se),
                         second_moment_from_populations(u, second),
                         std::move(r2_se),
                         total.mean(dims - 1),
                         std::sqrt(std::max(0.0, total.covariance(dims - 1, dims - 1))),
                         options.samples};
  return out;
}

DensityMatrix equilibrium_density_matrix(const HermitianOperator& h, double beta,
                                         const McOptions& options) {
  return equilibrium_moments(h, beta, options).rho;
}

SecondMoment equilibrium_second_moment(const HermitianOperator& h, double beta,
                                       const McOptions& options) {
  return equilibrium_moments(h, beta, options).r2;
}

DensityMatrix exact_equilibrium_density_matrix(const HermitianOperator& h, double beta) {
  const PopulationMoments pm = exact_population_moments(h.spectrum(), beta);
  return rotate_populations(h.eigensystem().unitary, pm.first);
}

SecondMoment exact_equilibrium_second_moment(const HermitianOperator& h, double beta) {
  const PopulationMoments pm = exact_population_moments(h.spectrum(), beta);
  return second_moment_from_populations(h.eigensystem().unitary, pm.second_flat);
}

DensityMatrix von_neumann_density_matrix(const HermitianOperator& h, double beta) {
  const Eigensystem& es = h.eigensystem();
  const std::size_t n = es.spectrum.size();
  std::vector<double> weights(n);
  const double e_ref = beta >= 0.0 ? es.spectrum.min() : es.spectrum.max();
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    weights[k] = std::exp(-beta * (es.spectrum[k] - e_ref));
    total += weights[k];
  }
  for (double& w : weights) w /= total;
  return rotate_populations(es.unitary, weights);
}

}  // namespace qtherm
