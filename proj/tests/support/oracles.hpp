#pragma once

// Reference values computed independently of the library.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "qtherm/geometry.hpp"

namespace oracle {

inline double spin_half_energy(double beta, double h) {
  return 1.0 / beta - h / std::tanh(beta * h);
}

inline double spin_half_z(double beta, double h) {
  return beta * h == 0.0 ? 1.0 : std::sinh(beta * h) / (beta * h);
}

/// T^2 C for levels {-h, h}.
inline double spin_half_t2c(double beta, double h) {
  const double s = std::sinh(beta * h);
  return 1.0 / (beta * beta) - h * h / (s * s);
}

/// Flat-Dirichlet average of f over the N-simplex by tensor Gauss-Legendre in
/// collapsed coordinates. Accurate for smooth f and N <= 4.
inline double simplex_average(std::size_t n, const std::function<double(const std::vector<double>&)>& f) {
  using Rule = boost::math::quadrature::gauss<double, 40>;
  std::vector<double> nodes, weights;
  for (std::size_t i = 0; i < Rule::abscissa().size(); ++i) {
    const double x = Rule::abscissa()[i], w = Rule::weights()[i];
    nodes.push_back(0.5 * (1.0 + x));
    weights.push_back(0.5 * w);
    if (x != 0.0) {
      nodes.push_back(0.5 * (1.0 - x));
      weights.push_back(0.5 * w);
    }
  }
  const std::size_t dims = n - 1;
  std::vector<std::size_t> at(dims, 0);
  std::vector<double> p(n);
  double factorial = 1.0;
  for (std::size_t k = 2; k < n; ++k) factorial *= static_cast<double>(k);
  double total = 0.0;
  while (true) {
    double rest = 1.0, jac = 1.0, w = 1.0;
    for (std::size_t j = 0; j < dims; ++j) {
      const double u = nodes[at[j]];
      w *= weights[at[j]];
      p[j] = rest * u;
      jac *= rest;
      rest *= 1.0 - u;
    }
    p[dims] = rest;
    total += w * jac * f(p);
    std::size_t j = 0;
    while (j < dims && ++at[j] == nodes.size()) at[j++] = 0;
    if (j == dims) break;
  }
  return factorial * total;
}

/// Canonical average E_rho[g(p)] for levels `e` by quadrature.
inline double canonical_average(const std::vector<double>& e, double beta,
                                const std::function<double(const std::vector<double>&)>& g) {
  auto energy = [&](const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) s += p[k] * e[k];
    return s;
  };
  const double z = simplex_average(e.size(), [&](const auto& p) { return std::exp(-beta * energy(p)); });
  const double num =
      simplex_average(e.size(), [&](const auto& p) { return g(p) * std::exp(-beta * energy(p)); });
  return num / z;
}

/// sum_{c,d} H(d, c) R[a][b][c][d] by explicit loops over the flat storage.
inline qtherm::CMatrix brute_contract(const qtherm::CMatrix& h, const std::vector<qtherm::Complex>& r2,
                                      std::size_t n) {
  qtherm::CMatrix out = qtherm::CMatrix::Zero(n, n);
  std::size_t flat = 0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c)
        for (std::size_t d = 0; d < n; ++d) out(a, b) += h(d, c) * r2[flat++];
  return out;
}

}  // namespace oracle
