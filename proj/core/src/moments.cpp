#include "qtherm/moments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "qtherm/parallel.hpp"
#include "qtherm/stats.hpp"

namespace qtherm {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

double magnitude(Complex se) { return std::hypot(se.real(), se.imag()); }

/// Welford statistics for the real and imaginary parts of Pi and Pi (x) Pi.
class MomentAccumulator {
 public:
  explicit MomentAccumulator(std::size_t dim)
      : dim_(dim), pi_(2 * dim * dim), r2_(2 * dim * dim * dim * dim), proj_(dim * dim) {}

  void add(const CVector& psi) {
    const std::size_t n = dim_;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) proj_[a * n + b] = psi[idx(a)] * std::conj(psi[idx(b)]);
    }
    for (std::size_t i = 0; i < n * n; ++i) {
      pi_[2 * i].add(proj_[i].real());
      pi_[2 * i + 1].add(proj_[i].imag());
    }
    for (std::size_t i = 0; i < n * n; ++i) {
      for (std::size_t j = 0; j < n * n; ++j) {
        const Complex v = proj_[i] * proj_[j];
        const std::size_t k = i * n * n + j;
        r2_[2 * k].add(v.real());
        r2_[2 * k + 1].add(v.imag());
      }
    }
  }

  MomentSnapshot snapshot(double time) const {
    const std::size_t n = dim_;
    CMatrix rho(idx(n), idx(n)), rho_se(idx(n), idx(n));
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        const std::size_t i = a * n + b;
        rho(idx(a), idx(b)) = Complex(pi_[2 * i].mean(), pi_[2 * i + 1].mean());
        rho_se(idx(a), idx(b)) =
            Complex(pi_[2 * i].standard_error(), pi_[2 * i + 1].standard_error());
      }
    }
    // [a][b][c][d] storage matches proj_ index pairs (a b) and (c d).
    std::vector<Complex> r2(n * n * n * n), r2_se(n * n * n * n);
    for (std::size_t k = 0; k < r2.size(); ++k) {
      r2[k] = Complex(r2_[2 * k].mean(), r2_[2 * k + 1].mean());
      r2_se[k] = Complex(r2_[2 * k].standard_error(), r2_[2 * k + 1].standard_error());
    }
    return MomentSnapshot{time,
                          DensityMatrix(std::move(rho)),
                          std::move(rho_se),
                          SecondMoment(n, std::move(r2)),
                          std::move(r2_se),
                          pi_.front().count()};
  }

 private:
  std::size_t dim_;
  std::vector<RunningStats> pi_;
  std::vector<RunningStats> r2_;
  std::vector<Complex> proj_;
};

/// rhs at a pure state written into `out`, without temporaries.
class PureRhs {
 public:
  PureRhs(const HermitianOperator& h, double beta, double kappa)
      : h_(h.matrix()),
        n_(h.dim()),
        c_anti_(0.25 * kappa * kappa * beta),
        c_lap_(0.5 * kappa * kappa),
        c_second_(0.5 * kappa * kappa * beta),
        h_psi_(idx(n_)) {}

  void operator()(const CVector& psi, CMatrix& out) {
    h_psi_.noalias() = h_ * psi;
    const double e = psi.dot(h_psi_).real();
    const double nd = static_cast<double>(n_);
    out.resize(idx(n_), idx(n_));
    for (std::size_t a = 0; a < n_; ++a) {
      for (std::size_t b = 0; b < n_; ++b) {
        const Complex hp = h_psi_[idx(a)] * std::conj(psi[idx(b)]);  // (H Pi)_ab
        const Complex ph = psi[idx(a)] * std::conj(h_psi_[idx(b)]);  // (Pi H)_ab
        const Complex pi = psi[idx(a)] * std::conj(psi[idx(b)]);
        Complex v = Complex(0.0, 1.0) * (hp - ph) - c_anti_ * (hp + ph) +
                    c_lap_ * (-nd * pi) + c_second_ * e * pi;
        if (a == b) v += c_lap_;
        out(idx(a), idx(b)) = v;
      }
    }
  }

 private:
  CMatrix h_;
  std::size_t n_;
  double c_anti_, c_lap_, c_second_;
  CVector h_psi_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Moments and the right-hand side

MomentSnapshot estimate_moments(std::span<const PureState> states, double time) {
  if (states.empty()) throw UsageError("estimate_moments: empty state list");
  MomentAccumulator acc(states.front().dim());
  for (const PureState& s : states) {
    if (s.dim() != states.front().dim()) throw UsageError("estimate_moments: dimension mismatch");
    acc.add(s.amplitudes());
  }
  return acc.snapshot(time);
}

CMatrix contract(const HermitianOperator& h, const SecondMoment& r2) {
  const std::size_t n = h.dim();
  if (r2.dim() != n) throw UsageError("contract: dimension mismatch");
  const CMatrix& hm = h.matrix();
  CMatrix out = CMatrix::Zero(idx(n), idx(n));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      Complex s(0.0, 0.0);
      for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t d = 0; d < n; ++d) s += hm(idx(d), idx(c)) * r2(a, b, c, d);
      }
      out(idx(a), idx(b)) = s;
    }
  }
  return out;
}

LiouvilleTerms liouville_terms(const CMatrix& rho, const SecondMoment& r2,
                               const HermitianOperator& h, double beta, double kappa) {
  const std::size_t n = h.dim();
  if (static_cast<std::size_t>(rho.rows()) != n || static_cast<std::size_t>(rho.cols()) != n ||
      r2.dim() != n) {
    throw UsageError("liouville_rhs: dimension mismatch");
  }
  const CMatrix& hm = h.matrix();
  const CMatrix h_rho = hm * rho;
  const CMatrix rho_h = rho * hm;
  const double k2 = kappa * kappa;
  LiouvilleTerms t;
  t.commutator = Complex(0.0, 1.0) * (h_rho - rho_h);
  t.anticommutator = -(0.25 * k2 * beta) * (h_rho + rho_h);
  t.laplacian = 0.5 * k2 * (CMatrix::Identity(idx(n), idx(n)) - static_cast<double>(n) * rho);
  t.second_moment = (0.5 * k2 * beta) * contract(h, r2);
  return t;
}

CMatrix liouville_rhs(const DensityMatrix& rho, const SecondMoment& r2, const HermitianOperator& h,
                      double beta, double kappa) {
  return liouville_terms(rho.matrix(), r2, h, beta, kappa).total();
}

CMatrix liouville_rhs_pure(const PureState& psi, const HermitianOperator& h, double beta,
                           double kappa) {
  if (psi.dim() != h.dim()) throw UsageError("liouville_rhs_pure: dimension mismatch");
  CMatrix out;
  PureRhs(h, beta, kappa)(psi.amplitudes(), out);
  return out;
}

// ---------------------------------------------------------------------------
// Ensemble

MomentSeries run_moment_ensemble(const InitialLaw& law, const HermitianOperator& h,
                                 const SdeParams& params, unsigned workers) {
  if (params.ensemble_size < 2) throw GuardError("ensemble", "ensemble size must be at least 2");
  const std::size_t n = h.dim();
  const std::size_t records = params.steps / params.record_stride + 1;
  const double spacing = params.dt * static_cast<double>(params.record_stride);
  const std::size_t interior = records >= 5 ? records - 4 : 0;

  std::vector<MomentAccumulator> moments(records, MomentAccumulator(n));
  // Per interior record: re/im stats of the residual and of fd1 - fd2.
  std::vector<RunningStats> residual(interior * 2 * n * n), richardson(interior * 2 * n * n);
  std::vector<double> times;
  PureRhs rhs(h, params.beta, params.kappa);
  CMatrix f;

  for_each_trajectory(law, h, params, workers, true,
                      [&](std::size_t, const TrajectoryRecord& rec) {
                        if (times.empty()) times = rec.times;
                        for (std::size_t k = 0; k < records; ++k) moments[k].add(rec.states[k].amplitudes());
                        for (std::size_t j = 0; j < interior; ++j) {
                          const std::size_t k = j + 2;
                          const CVector& m1 = rec.states[k - 1].amplitudes();
                          const CVector& p1 = rec.states[k + 1].amplitudes();
                          const CVector& m2 = rec.states[k - 2].amplitudes();
                          const CVector& p2 = rec.states[k + 2].amplitudes();
                          rhs(rec.states[k].amplitudes(), f);
                          for (std::size_t a = 0; a < n; ++a) {
                            for (std::size_t b = 0; b < n; ++b) {
                              const Complex fd1 = (p1[idx(a)] * std::conj(p1[idx(b)]) -
                                                   m1[idx(a)] * std::conj(m1[idx(b)])) /
                                                  (2.0 * spacing);
                              const Complex fd2 = (p2[idx(a)] * std::conj(p2[idx(b)]) -
                                                   m2[idx(a)] * std::conj(m2[idx(b)])) /
                                                  (4.0 * spacing);
                              const Complex r = fd1 - f(idx(a), idx(b));
                              const std::size_t slot = (j * n * n + a * n + b) * 2;
                              residual[slot].add(r.real());
                              residual[slot + 1].add(r.imag());
                              richardson[slot].add((fd1 - fd2).real());
                              richardson[slot + 1].add((fd1 - fd2).imag());
                            }
                          }
                        }
                      });

  MomentSeries out;
  out.spacing = spacing;
  for (std::size_t k = 0; k < records; ++k) out.snapshots.push_back(moments[k].snapshot(times[k]));
  auto bias_of = [](const RunningStats& s) {
    return std::max(0.0, std::abs(s.mean()) - 2.0 * s.standard_error()) / 3.0;
  };
  for (std::size_t j = 0; j < interior; ++j) {
    CMatrix r(idx(n), idx(n)), se(idx(n), idx(n)), bias(idx(n), idx(n));
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        const std::size_t slot = (j * n * n + a * n + b) * 2;
        r(idx(a), idx(b)) = Complex(residual[slot].mean(), residual[slot + 1].mean());
        se(idx(a), idx(b)) =
            Complex(residual[slot].standard_error(), residual[slot + 1].standard_error());
        bias(idx(a), idx(b)) = Complex(bias_of(richardson[slot]), bias_of(richardson[slot + 1]));
      }
    }
    out.residual_index.push_back(j + 2);
    out.residual.push_back(std::move(r));
    out.residual_se.push_back(std::move(se));
    out.bias.push_back(std::move(bias));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Verification

namespace {

/// Linear bound on the rhs error from the snapshot errors.
CMatrix rhs_error_bound(const MomentSnapshot& s, const HermitianOperator& h, double beta,
                        double kappa) {
  const std::size_t n = h.dim();
  const CMatrix& hm = h.matrix();
  const double k2 = kappa * kappa;
  const double c_rho = std::hypot(1.0, 0.25 * k2 * beta);
  CMatrix bound(idx(n), idx(n));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      double e = 0.5 * k2 * static_cast<double>(n) * magnitude(s.rho_se(idx(a), idx(b)));
      for (std::size_t c = 0; c < n; ++c) {
        e += c_rho * (std::abs(hm(idx(a), idx(c))) * magnitude(s.rho_se(idx(c), idx(b))) +
                      magnitude(s.rho_se(idx(a), idx(c))) * std::abs(hm(idx(c), idx(b))));
        for (std::size_t d = 0; d < n; ++d) {
          e += 0.5 * k2 * beta * std::abs(hm(idx(d), idx(c))) *
               magnitude(s.r2_se[s.r2.index(a, b, c, d)]);
        }
      }
      bound(idx(a), idx(b)) = Complex(e, e);
    }
  }
  return bound;
}

CMatrix hypot_parts(const CMatrix& x, const CMatrix& y) {
  CMatrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out.data()[i] = Complex(std::hypot(x.data()[i].real(), y.data()[i].real()),
                            std::hypot(x.data()[i].imag(), y.data()[i].imag()));
  }
  return out;
}

}  // namespace

LiouvilleReport verify_liouville(const MomentSeries& series, const HermitianOperator& h,
                                 double beta, double kappa) {
  const auto& snaps = series.snapshots;
  if (snaps.size() < 3) throw UsageError("verify_liouville: need at least 3 snapshots");
  const std::size_t n = h.dim();
  const double spacing = snaps[1].time - snaps[0].time;
  if (!(spacing > 0.0)) throw UsageError("verify_liouville: snapshot times must increase");
  for (std::size_t k = 1; k < snaps.size(); ++k) {
    if (snaps[k].rho.dim() != n) throw UsageError("verify_liouville: dimension mismatch");
    const double dt = snaps[k].time - snaps[k - 1].time;
    if (std::abs(dt - spacing) > 1e-9 * std::max(1.0, spacing)) {
      throw UsageError("verify_liouville: snapshot spacing is not uniform");
    }
  }

  LiouvilleReport report;
  const HermitianOperator h2(h.matrix() * h.matrix());
  const double hbar = uniform_average(h);
  const double k2 = kappa * kappa;
  std::vector<CMatrix> rhs(snaps.size());
  for (std::size_t k = 0; k < snaps.size(); ++k) {
    rhs[k] = liouville_rhs(snaps[k].rho, snaps[k].r2, h, beta, kappa);
    report.max_trace = std::max(report.max_trace, std::abs(rhs[k].trace()));
    report.max_hermiticity =
        std::max(report.max_hermiticity, (rhs[k] - rhs[k].adjoint()).cwiseAbs().maxCoeff());
    const CMatrix& rho = snaps[k].rho.matrix();
    const double u = (h.matrix() * rho).trace().real();
    const double mean_sq = (h.matrix() * contract(h, snaps[k].r2)).trace().real();
    const double mean_var = (h2.matrix() * rho).trace().real() - mean_sq;
    const double law = 0.5 * k2 * (static_cast<double>(n) * (hbar - u) - beta * mean_var);
    report.max_energy_channel =
        std::max(report.max_energy_channel, std::abs((h.matrix() * rhs[k]).trace().real() - law));
  }

  auto push = [&](double time, const CMatrix& r, const CMatrix& err) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a; b < n; ++b) {
        for (bool imag : {false, true}) {
          if (imag && a == b) continue;
          const Complex rv = r(idx(a), idx(b)), ev = err(idx(a), idx(b));
          NormalizedResidual nr;
          nr.time = time;
          nr.row = a;
          nr.col = b;
          nr.imaginary = imag;
          nr.residual = imag ? rv.imag() : rv.real();
          nr.error = imag ? ev.imag() : ev.real();
          nr.z = nr.error > 0.0 ? nr.residual / nr.error
                                : (nr.residual == 0.0 ? 0.0 : std::copysign(INFINITY, nr.residual));
          report.residuals.push_back(nr);
        }
      }
    }
  };

  if (!series.residual.empty()) {
    for (std::size_t j = 0; j < series.residual.size(); ++j) {
      const std::size_t k = series.residual_index[j];
      push(snaps[k].time, series.residual[j], series.residual_se[j] + series.bias[j]);
    }
  } else {
    const std::size_t first = snaps.size() >= 5 ? 2 : 1;
    for (std::size_t k = first; k + first < snaps.size(); ++k) {
      const CMatrix fd1 = (snaps[k + 1].rho.matrix() - snaps[k - 1].rho.matrix()) / (2.0 * spacing);
      const CMatrix se1 = hypot_parts(snaps[k + 1].rho_se, snaps[k - 1].rho_se) / (2.0 * spacing);
      CMatrix bias = CMatrix::Zero(idx(n), idx(n));
      if (first == 2) {
        const CMatrix fd2 =
            (snaps[k + 2].rho.matrix() - snaps[k - 2].rho.matrix()) / (4.0 * spacing);
        const CMatrix se2 = hypot_parts(snaps[k + 2].rho_se, snaps[k - 2].rho_se) / (4.0 * spacing);
        for (Eigen::Index i = 0; i < bias.size(); ++i) {
          const Complex d = fd1.data()[i] - fd2.data()[i];
          const Complex s = se1.data()[i] + se2.data()[i];
          bias.data()[i] = Complex(std::max(0.0, std::abs(d.real()) - 2.0 * s.real()) / 3.0,
                                   std::max(0.0, std::abs(d.imag()) - 2.0 * s.imag()) / 3.0);
        }
      }
      push(snaps[k].time, fd1 - rhs[k], se1 + rhs_error_bound(snaps[k], h, beta, kappa) + bias);
    }
  }

  std::size_t within = 0;
  for (const NormalizedResidual& r : report.residuals) {
    if (std::abs(r.z) <= 3.0) ++within;
    report.max_abs_z = std::max(report.max_abs_z, std::abs(r.z));
  }
  if (!report.residuals.empty()) {
    report.fraction_within_3 =
        static_cast<double>(within) / static_cast<double>(report.residuals.size());
  }
  return report;
}

// ---------------------------------------------------------------------------
// Canonical fixed point

FixedPointResidual canonical_fixed_point_residual(const HermitianOperator& h, double beta,
                                                  double kappa, const McOptions& options) {
  if (options.samples < 2) throw UsageError("canonical_fixed_point_residual: need two samples");
  const std::size_t n = h.dim();
  const std::size_t m = 2 * n * n;
  const Eigensystem& eig = h.eigensystem();
  const double e_ref = eig.spectrum.min();
  constexpr std::size_t kChunk = 1 << 14;
  const std::size_t chunks = (options.samples + kChunk - 1) / kChunk;

  struct Sums {
    double w = 0.0, w2 = 0.0;
    std::vector<double> wf, w2f, w2ff;
  };
  std::vector<Sums> partial(chunks);
  parallel_for(chunks, options.workers, [&](std::size_t c) {
    RandomStream rng(options.seed, c);
    Sums& s = partial[c];
    s.wf.assign(m, 0.0);
    s.w2f.assign(m, 0.0);
    s.w2ff.assign(m, 0.0);
    PureRhs rhs(h, beta, kappa);
    CMatrix f;
    CVector local(idx(n));
    const std::size_t count = std::min(kChunk, options.samples - c * kChunk);
    for (std::size_t i = 0; i < count; ++i) {
      const std::vector<double> p = sample_simplex(n, rng);
      double e = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double phase = 2.0 * std::numbers::pi * rng.uniform();
        local[idx(k)] = std::polar(std::sqrt(p[k]), phase);
        e += p[k] * eig.spectrum[k];
      }
      const CVector psi = eig.unitary * local;
      rhs(psi, f);
      const double w = std::exp(-beta * (e - e_ref));
      s.w += w;
      s.w2 += w * w;
      for (std::size_t k = 0; k < n * n; ++k) {
        for (int part = 0; part < 2; ++part) {
          const double g = part == 0 ? f.data()[k].real() : f.data()[k].imag();
          const std::size_t q = 2 * k + static_cast<std::size_t>(part);
          s.wf[q] += w * g;
          s.w2f[q] += w * w * g;
          s.w2ff[q] += w * w * g * g;
        }
      }
    }
  });

  Sums total{0.0, 0.0, std::vector<double>(m, 0.0), std::vector<double>(m, 0.0),
             std::vector<double>(m, 0.0)};
  for (const Sums& s : partial) {
    total.w += s.w;
    total.w2 += s.w2;
    for (std::size_t q = 0; q < m; ++q) {
      total.wf[q] += s.wf[q];
      total.w2f[q] += s.w2f[q];
      total.w2ff[q] += s.w2ff[q];
    }
  }

  FixedPointResidual out;
  out.rhs.resize(idx(n), idx(n));
  out.se.resize(idx(n), idx(n));
  for (std::size_t k = 0; k < n * n; ++k) {
    double mean[2], se[2];
    for (std::size_t part = 0; part < 2; ++part) {
      const std::size_t q = 2 * k + part;
      mean[part] = total.wf[q] / total.w;
      const double ss = total.w2ff[q] - 2.0 * mean[part] * total.w2f[q] + mean[part] * mean[part] * total.w2;
      se[part] = std::sqrt(std::max(0.0, ss)) / total.w;
      if (se[part] > 0.0) out.max_abs_z = std::max(out.max_abs_z, std::abs(mean[part]) / se[part]);
    }
    out.rhs.data()[k] = Complex(mean[0], mean[1]);
    out.se.data()[k] = Complex(se[0], se[1]);
  }
  return out;
}

}  // namespace qtherm
