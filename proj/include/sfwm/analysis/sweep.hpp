#pragma once

// Coupling-power sweep: predicted time constant, generation rate, spectral
// brightness and SBR of the biphoton source.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "sfwm/analysis/fitting.hpp"
#include "sfwm/analysis/metrics.hpp"
#include "sfwm/biphoton.hpp"
#include "sfwm/errors.hpp"
#include "sfwm/physics.hpp"

namespace sfwm::analysis {

inline const std::vector<double>& standard_coupling_powers() {
  static const std::vector<double> powers{0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0};
  return powers;
}

// Detection-frame constants shared by predictions and synthetic data.
inline constexpr double kOnsetDelayNs = 160.0;
inline constexpr double kFitOnsetNs = 200.0;
inline constexpr double kRiseTimeNs = 35.0;

inline constexpr double kBinNs = 25.6;
inline constexpr std::size_t kFrameBins = 320;

/// Fits the exponential time constant of a predicted (noiseless, zero
/// background) packet the same way measured data are fitted: the packet is
/// integrated into detection-frame bins with physical tau = 0 at `onset_ns`
/// and fitted from `x0_ns`.
inline ExpFit fit_prediction(const biphoton::WavePacket& w, double onset_ns = kOnsetDelayNs,
                             double x0_ns = kFitOnsetNs, double bin_ns = kBinNs,
                             std::size_t bins = kFrameBins) {
  return fit_exponential(biphoton::bin_to_frame(w, onset_ns, bin_ns, bins), x0_ns);
}

struct SweepOptions {
  double alpha_s = 82.0;
  double gamma = 0.025;
  double pump_mw = 0.5;
  MediumParams medium{};  // alpha_s and gamma above take precedence
  double delta_p = -333.3;
  biphoton::SpectralGrid grid{};
  DopplerQuadrature quadrature{};
  biphoton::EtalonChain etalons = biphoton::EtalonChain::standard();
  biphoton::TauGrid tau{0.0, 2.0, 3000};
  double onset_ns = kOnsetDelayNs;
  double x0_ns = kFitOnsetNs;
  double rise_time_ns = kRiseTimeNs;
  // EIT scan used for the FWHM column: +-max(eit_min_half_width, eit_width_factor * omega_c^2).
  double eit_min_half_width = 2.0;
  double eit_width_factor = 0.25;
  std::size_t eit_points = 801;

  // Rate anchor: predicted generation rate at anchor_power_mw equals
  // anchor_rate_per_mhz * anchor_linewidth_hz / 1e6 pairs/s.
  double anchor_power_mw = 1.0;
  double anchor_rate_per_mhz = 1500.0;
  double anchor_linewidth_hz = 610.0e3;
  // SBR anchor: predicted SBR at anchor_power_mw.
  double anchor_sbr = 42.0;
};

struct SweepPrediction {
  std::vector<double> powers_mw;
  std::vector<double> omega_c;
  std::vector<double> tau_ns;
  std::vector<double> linewidth_hz;
  std::vector<double> eit_fwhm_hz;
  std::vector<double> area;           // arbitrary units x ns
  std::vector<double> peak_convolved; // arbitrary units
  std::vector<double> rate;           // pairs/s
  std::vector<double> brightness;     // pairs/(s mW MHz)
  std::vector<double> sbr;
  double pump_mw = 0.5;
  double rate_normalization = 1.0;
  double sbr_normalization = 1.0;
};

// Unnormalized predictions at one coupling power.
struct PowerPoint {
  double omega_c = 0.0;
  double tau_ns = 0.0;
  double eit_fwhm_hz = 0.0;
  double area = 0.0;
  double peak_convolved = 0.0;
};

inline PowerPoint predict_power(double p_mw, const SweepOptions& o, bool with_eit = true) {
  MediumParams m = o.medium;
  m.alpha_s = o.alpha_s;
  m.gamma = o.gamma;
  DriveParams d{omega_c_from_power(p_mw), omega_p_from_power(o.pump_mw), o.delta_p};

  PowerPoint pt;
  pt.omega_c = d.omega_c;
  const auto amp = biphoton::spectral_amplitude(o.grid, m, d, o.quadrature, o.etalons);
  const auto packet = biphoton::wavepacket(amp, o.tau);
  pt.tau_ns = fit_prediction(packet, o.onset_ns, o.x0_ns).tau_ns;
  pt.area = biphoton::wavepacket_area(packet);
  const auto convolved = biphoton::rise_time_convolve(packet, o.rise_time_ns);
  pt.peak_convolved = *std::max_element(convolved.g2.begin(), convolved.g2.end());

  if (with_eit) {
    const double half = std::max(o.eit_min_half_width, o.eit_width_factor * d.omega_c * d.omega_c);
    const auto scan = physics::linspace(-half, half, o.eit_points);
    pt.eit_fwhm_hz = physics::spectrum_fwhm(physics::eit_spectrum(scan, m, d, o.quadrature));
  }
  return pt;
}

/// Predictions over a list of coupling powers. Rates and SBRs are scaled by
/// normalization factors anchored at anchor_power_mw (see SweepOptions); use
/// renormalize_rates / renormalize_sbr to fit them to observations instead.
inline SweepPrediction sweep_predict(const std::vector<double>& powers_mw,
                                     const SweepOptions& o = {}) {
  if (powers_mw.empty()) throw UsageError("empty coupling-power list");
  for (double p : powers_mw)
    if (!(std::isfinite(p) && p > 0.0)) throw DomainError("coupling powers must be > 0");

  SweepPrediction out;
  out.powers_mw = powers_mw;
  out.pump_mw = o.pump_mw;
  std::optional<PowerPoint> anchor;
  for (double p : powers_mw) {
    const auto pt = predict_power(p, o);
    if (p == o.anchor_power_mw) anchor = pt;
    out.omega_c.push_back(pt.omega_c);
    out.tau_ns.push_back(pt.tau_ns);
    out.linewidth_hz.push_back(linewidth_from_tau(pt.tau_ns));
    out.eit_fwhm_hz.push_back(pt.eit_fwhm_hz);
    out.area.push_back(pt.area);
    out.peak_convolved.push_back(pt.peak_convolved);
  }
  if (!anchor) anchor = predict_power(o.anchor_power_mw, o, false);

  out.rate_normalization =
      o.anchor_rate_per_mhz * o.anchor_linewidth_hz / 1e6 / anchor->area;
  out.sbr_normalization = o.anchor_sbr * background_rate(o.anchor_power_mw) /
                          anchor->peak_convolved;

  for (std::size_t i = 0; i < powers_mw.size(); ++i) {
    out.rate.push_back(out.area[i] * out.rate_normalization);
    out.brightness.push_back(
        spectral_brightness(out.rate[i], o.pump_mw, out.linewidth_hz[i]));
    out.sbr.push_back(out.peak_convolved[i] / background_rate(powers_mw[i]) *
                      out.sbr_normalization);
  }
  return out;
}

// Refit the rate normalization to observed generation rates (pairs/s).
inline void renormalize_rates(SweepPrediction& s, const std::vector<double>& observed) {
  s.rate_normalization = normalize_predictions(s.area, observed);
  for (std::size_t i = 0; i < s.area.size(); ++i) {
    s.rate[i] = s.area[i] * s.rate_normalization;
    s.brightness[i] = spectral_brightness(s.rate[i], s.pump_mw, s.linewidth_hz[i]);
  }
}

// Refit the SBR normalization to observed SBRs.
inline void renormalize_sbr(SweepPrediction& s, const std::vector<double>& observed) {
  std::vector<double> raw(s.powers_mw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = s.peak_convolved[i] / background_rate(s.powers_mw[i]);
  s.sbr_normalization = normalize_predictions(raw, observed);
  for (std::size_t i = 0; i < raw.size(); ++i) s.sbr[i] = raw[i] * s.sbr_normalization;
}

}  // namespace sfwm::analysis
