#pragma once

// Figures of merit of a biphoton source and the empirical laws of the
// experiment (coupling Rabi frequency and background versus coupling power).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include "sfwm/errors.hpp"

namespace sfwm::analysis {

/// Linewidth 1/(2 pi tau) in Hz from an e^-1 time constant in ns.
inline double linewidth_from_tau(double tau_ns) {
  if (!(std::isfinite(tau_ns) && tau_ns > 0.0))
    throw DomainError("time constant must be finite and > 0");
  return 1.0 / (2.0 * std::numbers::pi * tau_ns * 1e-9);
}

// Inverse of linewidth_from_tau.
inline double tau_from_linewidth(double linewidth_hz) {
  if (!(std::isfinite(linewidth_hz) && linewidth_hz > 0.0))
    throw DomainError("linewidth must be finite and > 0");
  return 1.0 / (2.0 * std::numbers::pi * linewidth_hz) * 1e9;
}

// Signal-to-background ratio S/y0. A zero baseline yields +infinity; a zero
// amplitude yields 0.
inline double sbr(double amplitude, double baseline) {
  if (amplitude == 0.0) return 0.0;
  if (baseline == 0.0) return std::numeric_limits<double>::infinity();
  return amplitude / baseline;
}

/// Cauchy-Schwarz violation factor g2^2 / (g_auto_as * g_auto_s) with both
/// autocorrelations set to g_auto.
inline double cs_violation(double g2, double g_auto = 2.0) {
  if (!(g2 >= 0.0)) throw DomainError("cross-correlation must be >= 0");
  if (!(g_auto > 0.0)) throw DomainError("autocorrelation must be > 0");
  return g2 * g2 / (g_auto * g_auto);
}

inline constexpr double kEfficiencyAntiStokes = 0.084;
inline constexpr double kEfficiencyStokes = 0.13;

/// Pair generation rate: detected coincidence rate over the product of the
/// collection efficiencies.
inline double generation_rate(double detected_pairs_per_s,
                              double eff_as = kEfficiencyAntiStokes,
                              double eff_s = kEfficiencyStokes) {
  if (!(eff_as > 0.0 && eff_as <= 1.0 && eff_s > 0.0 && eff_s <= 1.0))
    throw DomainError("collection efficiencies must lie in (0, 1]");
  return detected_pairs_per_s / (eff_as * eff_s);
}

// pairs / (s mW MHz)
inline double spectral_brightness(double rate_pairs_per_s, double pump_mw,
                                  double linewidth_hz) {
  if (!(pump_mw > 0.0)) throw DomainError("pump power must be > 0");
  if (!(linewidth_hz > 0.0)) throw DomainError("linewidth must be > 0");
  return rate_pairs_per_s / (pump_mw * linewidth_hz / 1e6);
}

inline constexpr double kRabiPerSqrtMilliwatt = 2.7;

/// Coupling Rabi frequency (Gamma units) at coupling power p_mw.
inline double omega_c_from_power(double p_mw) {
  if (!(p_mw >= 0.0)) throw DomainError("coupling power must be >= 0");
  return kRabiPerSqrtMilliwatt * std::sqrt(p_mw);
}

// Pump Rabi frequency: 2.0 Gamma at 0.5 mW, scaling with the field amplitude.
inline double omega_p_from_power(double pump_mw) {
  if (!(pump_mw >= 0.0)) throw DomainError("pump power must be >= 0");
  return 2.0 * std::sqrt(pump_mw / 0.5);
}

/// Background count rate of the Stokes channel (counts/s) versus coupling power.
inline double background_rate(double p_mw) {
  if (!(p_mw >= 0.0)) throw DomainError("coupling power must be >= 0");
  return 240.0 + 320.0 * std::pow(p_mw, 0.53);
}

/// Scale a minimizing sum (a p_i - o_i)^2: a = sum(p o) / sum(p^2).
inline double normalize_predictions(const std::vector<double>& predicted,
                                    const std::vector<double>& observed) {
  if (predicted.size() != observed.size())
    throw UsageError("prediction and observation lengths differ");
  if (predicted.size() < 2) throw UsageError("normalization needs at least two points");
  double po = 0.0;
  double pp = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    po += predicted[i] * observed[i];
    pp += predicted[i] * predicted[i];
  }
  if (pp == 0.0) throw DegenerateDataError("all predictions are zero");
  return po / pp;
}

// Average ranks (1-based), ties share the mean rank.
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = mean_rank;
    i = j + 1;
  }
  return r;
}

/// Spearman rank correlation.
inline double rank_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw UsageError("rank correlation needs two equal-length series of >= 2 points");
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (saa == 0.0 || sbb == 0.0) throw DegenerateDataError("constant series has no rank order");
  return sab / std::sqrt(saa * sbb);
}

}  // namespace sfwm::analysis
