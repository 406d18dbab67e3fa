#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "sfwm/analysis/metrics.hpp"
#include "sfwm/biphoton.hpp"
#include "sfwm/detail/least_squares.hpp"
#include "sfwm/detail/parallel.hpp"
#include "sfwm/errors.hpp"
#include "sfwm/physics.hpp"

namespace sfwm::analysis {

using biphoton::WavePacket;
using physics::DopplerQuadrature;
using physics::DriveParams;
using physics::MediumParams;
using physics::Spectrum;

// y(x) = y0 + S exp(-(x - x0)/tau) for x >= x0.
struct ExpFit {
  double y0 = 0.0;
  double amplitude = 0.0;  // S
  double tau_ns = std::numeric_limits<double>::quiet_NaN();
  double x0_ns = 200.0;
  double sigma_y0 = 0.0;
  double sigma_amplitude = 0.0;
  double sigma_tau_ns = 0.0;
  double residual_norm = 0.0;
  long iterations = 0;
  bool converged = false;
  // False when nothing rises above the baseline after x0; tau is then NaN.
  bool signal_detected = false;

  double model(double x_ns) const {
    if (!signal_detected || x_ns < x0_ns) return y0;
    return y0 + amplitude * std::exp(-(x_ns - x0_ns) / tau_ns);
  }
};

inline double sbr(const ExpFit& fit) { return sbr(fit.amplitude, fit.y0); }

// One-sigma uncertainty of S/y0 by first-order propagation.
inline double sbr_sigma(const ExpFit& fit) {
  if (fit.y0 <= 0.0 || fit.amplitude <= 0.0) return std::numeric_limits<double>::infinity();
  const double rel_s = fit.sigma_amplitude / fit.amplitude;
  const double rel_b = fit.sigma_y0 / fit.y0;
  return fit.amplitude / fit.y0 * std::sqrt(rel_s * rel_s + rel_b * rel_b);
}

/// Background-subtracted coincidence rate (pairs/s): counts above y0 summed
/// over every bin, divided by the accumulation time.
inline double detected_pair_rate(const WavePacket& h, double y0, double accumulation_s) {
  if (!(accumulation_s > 0.0)) throw DomainError("accumulation time must be > 0");
  double excess = 0.0;
  for (double v : h.g2) excess += v - y0;
  return excess / accumulation_s;
}

/// Two-stage exponential fit of a wave packet or coincidence histogram.
///
/// Stage 1 fixes the baseline y0 as the mean of the pre-onset samples
/// (tau <= x0 - 2 bins) together with the last 10% of samples. Stage 2 fits
/// (S, tau) on samples with tau >= x0 by Levenberg-Marquardt with Poisson
/// weights, 1/max(y, 1) on the first pass and 1/max(model, 1) afterwards. The
/// fit runs in (ln S, ln tau) so both stay positive. Uncertainties come from
/// the inverse weighted normal matrix, which is the Poisson covariance when
/// the data are raw counts, plus the propagated baseline uncertainty.
inline ExpFit fit_exponential(const WavePacket& w, double x0_ns = 200.0) {
  const std::size_t n = w.size();
  if (n == 0 || w.g2.size() != n) throw UsageError("empty wave packet");
  if (std::all_of(w.g2.begin(), w.g2.end(), [](double v) { return v == 0.0; }))
    throw DegenerateDataError("all-zero data cannot be fitted");
  const double bin = w.bin_width_ns > 0.0 ? w.bin_width_ns
                                          : (n > 1 ? w.tau_ns[1] - w.tau_ns[0] : 1.0);

  std::vector<std::size_t> fit_idx;
  for (std::size_t k = 0; k < n; ++k)
    if (w.tau_ns[k] >= x0_ns) fit_idx.push_back(k);
  if (fit_idx.size() < 10)
    throw UsageError("exponential fit needs at least 10 samples after x0");

  // Stage 1: baseline.
  const std::size_t tail = std::max<std::size_t>(1, n / 10);
  std::vector<double> base;
  for (std::size_t k = 0; k < n; ++k)
    if (w.tau_ns[k] <= x0_ns - 2.0 * bin || k >= n - tail) base.push_back(w.g2[k]);
  double y0 = 0.0;
  for (double v : base) y0 += v;
  y0 /= static_cast<double>(base.size());
  double var = 0.0;
  for (double v : base) var += (v - y0) * (v - y0);
  var = base.size() > 1 ? var / static_cast<double>(base.size() - 1) : 0.0;

  ExpFit fit;
  fit.x0_ns = x0_ns;
  fit.y0 = std::max(y0, 0.0);
  fit.sigma_y0 = std::sqrt(var / static_cast<double>(base.size()));

  // Initial guess from a log-linear regression over samples with a clear excess.
  double peak_excess = 0.0;
  for (std::size_t k : fit_idx) peak_excess = std::max(peak_excess, w.g2[k] - fit.y0);
  if (!(peak_excess > 0.0)) {
    fit.amplitude = 0.0;
    fit.converged = true;
    fit.signal_detected = false;
    return fit;
  }
  double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t k : fit_idx) {
    const double e = w.g2[k] - fit.y0;
    if (e <= 0.05 * peak_excess) continue;
    const double x = w.tau_ns[k] - x0_ns;
    const double y = std::log(e);
    const double wt = e * e / std::max(w.g2[k], 1.0);
    sw += wt;
    sx += wt * x;
    sy += wt * y;
    sxx += wt * x * x;
    sxy += wt * x * y;
  }
  double tau_guess = (w.tau_ns[fit_idx.back()] - x0_ns) / 3.0;
  double amp_guess = peak_excess;
  const double det = sw * sxx - sx * sx;
  if (det > 0.0) {
    const double slope = (sw * sxy - sx * sy) / det;
    const double icpt = (sy - slope * sx) / sw;
    if (slope < 0.0) {
      tau_guess = -1.0 / slope;
      amp_guess = std::exp(icpt);
    }
  }

  // Stage 2: weighted least squares over (ln S, ln tau). The first pass weights
  // by the counts; later passes reweight by the current model until the
  // solution stops moving, which solves the Poisson likelihood equations and
  // removes the low bias of count-based weights.
  const std::size_t m = fit_idx.size();
  std::vector<double> xs(m), ys(m), sqrt_w(m);
  for (std::size_t i = 0; i < m; ++i) {
    xs[i] = w.tau_ns[fit_idx[i]] - x0_ns;
    ys[i] = w.g2[fit_idx[i]];
    sqrt_w[i] = 1.0 / std::sqrt(std::max(ys[i], 1.0));
  }
  const double base_y0 = fit.y0;
  auto residual = [&](const detail::Vector& p, detail::Vector& r) {
    const double s = std::exp(p[0]);
    const double tau = std::exp(p[1]);
    for (std::size_t i = 0; i < m; ++i)
      r[static_cast<Eigen::Index>(i)] =
          (base_y0 + s * std::exp(-xs[i] / tau) - ys[i]) * sqrt_w[i];
  };
  auto jacobian = [&](const detail::Vector& p, detail::Matrix& j) {
    const double s = std::exp(p[0]);
    const double tau = std::exp(p[1]);
    for (std::size_t i = 0; i < m; ++i) {
      const double e = s * std::exp(-xs[i] / tau) * sqrt_w[i];
      const auto row = static_cast<Eigen::Index>(i);
      j(row, 0) = e;
      j(row, 1) = e * xs[i] / tau;
    }
  };
  detail::Vector p(2);
  p << std::log(amp_guess), std::log(tau_guess);
  detail::LeastSquaresResult lm;
  long iterations = 0;
  bool converged = true;
  constexpr int kMaxPasses = 20;
  for (int pass = 0; pass < kMaxPasses; ++pass) {
    lm = detail::solve_least_squares(residual, jacobian, p, m, 800);
    iterations += lm.iterations;
    converged = converged && lm.converged;
    const double shift = (lm.x - p).cwiseAbs().maxCoeff();
    p = lm.x;
    if (pass > 0 && shift < 1e-10) break;
    if (pass + 1 == kMaxPasses) converged = false;
    const double s = std::exp(p[0]);
    const double tau = std::exp(p[1]);
    for (std::size_t i = 0; i < m; ++i)
      sqrt_w[i] = 1.0 / std::sqrt(std::max(base_y0 + s * std::exp(-xs[i] / tau), 1.0));
  }

  fit.amplitude = std::exp(p[0]);
  fit.tau_ns = std::exp(p[1]);
  fit.residual_norm = lm.residual_norm;
  fit.iterations = iterations;
  fit.converged = converged && std::isfinite(fit.tau_ns) && std::isfinite(fit.amplitude);
  fit.signal_detected = true;

  // Covariance in (S, tau), including the uncertainty of the fixed baseline:
  // d(S, tau)/d(y0) = -(J^T W J)^-1 J^T W 1.
  detail::Matrix j(static_cast<Eigen::Index>(m), 2);
  detail::Vector ones_w(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    const double e = std::exp(-xs[i] / fit.tau_ns) * sqrt_w[i];
    const auto row = static_cast<Eigen::Index>(i);
    j(row, 0) = e;
    j(row, 1) = fit.amplitude * e * xs[i] / (fit.tau_ns * fit.tau_ns);
    ones_w[row] = sqrt_w[i];
  }
  const detail::Matrix normal = j.transpose() * j;
  if (std::abs(normal.determinant()) > 0.0) {
    const detail::Matrix cov = normal.inverse();
    const detail::Vector dy0 = -cov * (j.transpose() * ones_w);
    const double v0 = fit.sigma_y0 * fit.sigma_y0;
    fit.sigma_amplitude = std::sqrt(std::max(cov(0, 0) + dy0[0] * dy0[0] * v0, 0.0));
    fit.sigma_tau_ns = std::sqrt(std::max(cov(1, 1) + dy0[1] * dy0[1] * v0, 0.0));
  }
  if (!fit.converged)
    throw FitError<ExpFit>("exponential fit did not converge", fit);
  return fit;
}

// Fitted parameters of an EIT spectrum (Gamma units).
struct EitFit {
  double alpha_s = 0.0;
  double omega_c = 0.0;
  double gamma = 0.0;
  double residual_norm = 0.0;
  long iterations = 0;
  bool converged = false;
};

namespace detail_eit {

// Doppler-averaged transmission and its derivatives with respect to ln(omega_c)
// and ln(gamma) at one detuning.
struct TransmissionPoint {
  double t;
  double dt_dlog_omega_c;
  double dt_dlog_gamma;
};

inline TransmissionPoint transmission_with_gradient(double delta, const MediumParams& m,
                                                    const DriveParams& d,
                                                    const physics::DopplerGrid& grid) {
  double absorption = 0.0, d_oc = 0.0, d_g = 0.0;
  const auto& nodes = grid.nodes();
  const auto& weights = grid.weights();
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const auto xi = physics::self_chi(delta, nodes[k], m, d);
    const auto g = physics::self_chi_gradient(delta, nodes[k], m, d);
    absorption += weights[k] * std::imag(4.0 * xi);
    d_oc += weights[k] * std::imag(4.0 * g.d_omega_c);
    d_g += weights[k] * std::imag(4.0 * g.d_gamma);
  }
  const double t = std::exp(-absorption);
  return {t, -t * d_oc * d.omega_c, -t * d_g * m.gamma};
}

}  // namespace detail_eit

/// Extracts (alpha_s, omega_c, gamma) from a transmission spectrum.
///
/// Stage 1 inverts the baseline (outer 10% of the scan) for alpha_s against the
/// uncoupled (omega_c = 0) model evaluated on the same outer samples; the
/// Doppler-broadened absorption is monotone in alpha_s so a bracketing root
/// find is enough. Stage 2 fits (omega_c, gamma) at fixed alpha_s by
/// Levenberg-Marquardt in log parameters with an analytic Jacobian.
inline EitFit fit_eit(const Spectrum& data, const MediumParams& m0, const DriveParams& d0,
                      const DopplerQuadrature& q = {}) {
  const std::size_t n = data.size();
  if (n < 10 || data.value.size() != n) throw UsageError("EIT fit needs >= 10 samples");
  if (!(m0.alpha_s > 0.0 && d0.omega_c > 0.0 && m0.gamma > 0.0))
    throw UsageError("EIT fit initial guesses must be positive");
  for (double v : data.value)
    if (!std::isfinite(v)) throw UsageError("non-finite transmission sample");

  // Stage 1: optical depth from the baseline.
  const std::size_t edge = std::max<std::size_t>(1, n / 10);
  std::vector<double> outer_delta;
  for (std::size_t i = 0; i < edge; ++i) {
    outer_delta.push_back(data.delta[i]);
    outer_delta.push_back(data.delta[n - 1 - i]);
  }
  const double baseline = physics::spectrum_baseline(data);
  if (!(baseline > 0.0 && baseline < 1.0))
    throw InversionError("baseline transmission outside (0, 1) cannot be inverted");

  MediumParams unit = m0;
  unit.alpha_s = 1.0;
  DriveParams uncoupled = d0;
  uncoupled.omega_c = 0.0;
  const physics::DopplerGrid unit_grid(unit, q);
  // With omega_c = 0 the absorption exponent is exactly proportional to alpha_s.
  std::vector<double> unit_absorption(outer_delta.size());
  for (std::size_t i = 0; i < outer_delta.size(); ++i)
    unit_absorption[i] = physics::doppler_absorption(outer_delta[i], unit, uncoupled, unit_grid);
  auto baseline_model = [&](double alpha) {
    double sum = 0.0;
    for (double a : unit_absorption) sum += std::exp(-alpha * a);
    return sum / static_cast<double>(unit_absorption.size()) - baseline;
  };
  double lo = 1e-6, hi = 1e5;
  if (!(baseline_model(lo) > 0.0 && baseline_model(hi) < 0.0))
    throw InversionError("baseline transmission outside the model range");
  std::uintmax_t max_iter = 200;
  const auto bracket = boost::math::tools::toms748_solve(
      baseline_model, lo, hi, boost::math::tools::eps_tolerance<double>(50), max_iter);
  const double alpha_s = 0.5 * (bracket.first + bracket.second);

  // Stage 2: coupling Rabi frequency and decoherence rate.
  MediumParams m = m0;
  m.alpha_s = alpha_s;
  if (m.gamma <= 0.0) m.gamma = 1e-3;
  const physics::DopplerGrid grid(m, q);
  auto evaluate = [&](const detail::Vector& p) {
    MediumParams mp = m;
    DriveParams dp = d0;
    dp.omega_c = std::exp(p[0]);
    mp.gamma = std::exp(p[1]);
    std::vector<detail_eit::TransmissionPoint> pts(n);
    sfwm::detail::parallel_for(n, [&](std::size_t i) {
      pts[i] = detail_eit::transmission_with_gradient(data.delta[i], mp, dp, grid);
    });
    return pts;
  };
  auto residual = [&](const detail::Vector& p, detail::Vector& r) {
    const auto pts = evaluate(p);
    for (std::size_t i = 0; i < n; ++i)
      r[static_cast<Eigen::Index>(i)] = pts[i].t - data.value[i];
  };
  auto jacobian = [&](const detail::Vector& p, detail::Matrix& j) {
    const auto pts = evaluate(p);
    for (std::size_t i = 0; i < n; ++i) {
      j(static_cast<Eigen::Index>(i), 0) = pts[i].dt_dlog_omega_c;
      j(static_cast<Eigen::Index>(i), 1) = pts[i].dt_dlog_gamma;
    }
  };
  detail::Vector p0(2);
  p0 << std::log(d0.omega_c), std::log(m.gamma);
  const auto lm = detail::solve_least_squares(residual, jacobian, p0, n, 300, 1e-10);

  EitFit fit;
  fit.alpha_s = alpha_s;
  fit.omega_c = std::exp(lm.x[0]);
  fit.gamma = std::exp(lm.x[1]);
  fit.residual_norm = lm.residual_norm;
  fit.iterations = lm.iterations;
  fit.converged = lm.converged && std::isfinite(fit.omega_c) && std::isfinite(fit.gamma);
  if (!fit.converged) throw FitError<EitFit>("EIT fit did not converge", fit);
  return fit;
}

// Decoherence rate used for sweep predictions: the mean gamma of the fits at
// the `count` smallest coupling powers.
inline double sweep_gamma(const std::vector<double>& powers_mw,
                          const std::vector<EitFit>& fits, std::size_t count = 3) {
  if (powers_mw.size() != fits.size() || fits.empty())
    throw UsageError("power list and fit list must be non-empty and aligned");
  std::vector<std::size_t> order(fits.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return powers_mw[a] < powers_mw[b]; });
  const std::size_t k = std::min(count, order.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += fits[order[i]].gamma;
  return sum / static_cast<double>(k);
}

}  // namespace sfwm::analysis
