#pragma once

// Biphoton spectral amplitude, etalon filtering and Fourier synthesis of the
// two-photon wave packet G2(tau).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <sstream>
#include <vector>

#include "sfwm/detail/parallel.hpp"
#include "sfwm/errors.hpp"
#include "sfwm/physics.hpp"
#include "sfwm/units.hpp"

namespace sfwm::biphoton {

using physics::cplx;
using physics::DopplerGrid;
using physics::DopplerQuadrature;
using physics::DriveParams;
using physics::MediumParams;

/// Uniform two-photon detuning grid centered on the two-photon resonance.
///
/// The default half-width of 16 Gamma keeps the etalon-filtered amplitude at
/// the grid edges below 1e-3 of its peak for coupling Rabi frequencies up to
/// about 6 Gamma.
struct SpectralGrid {
  double half_width = 16.0;  // Gamma units
  std::size_t count = 8192;
  double edge_tolerance = 1e-3;

  std::vector<double> values() const {
    return physics::linspace(-half_width, half_width, count);
  }
  double spacing() const { return 2.0 * half_width / static_cast<double>(count - 1); }
};

inline void validate(const SpectralGrid& g) {
  if (g.count < 1024) throw GridError("spectral grid needs at least 1024 samples");
  if (!(std::isfinite(g.half_width) && g.half_width > 0.0))
    throw GridError("spectral grid half-width must be finite and > 0");
  if (!(g.edge_tolerance > 0.0)) throw GridError("edge tolerance must be > 0");
}

struct BiphotonAmplitude {
  SpectralGrid grid;
  std::vector<double> delta;
  std::vector<cplx> values;
};

// Doppler-averaged cross term C(delta) and self term Z(delta) on a grid; the
// intermediates of the spectral amplitude.
struct SpectralTerms {
  std::vector<double> delta;
  std::vector<cplx> cross;
  std::vector<cplx> self;
};

enum class FilterMode {
  amplitude,  // causal single-pole response per etalon (default)
  intensity,  // zero-phase sqrt(Lorentzian), i.e. Lorentzian on |A|^2
};

struct EtalonChain {
  std::vector<double> fwhm_hz{45.0e6, 60.0e6};
  std::vector<double> center_hz{0.0, 0.0};
  FilterMode mode = FilterMode::amplitude;

  static EtalonChain standard() { return {}; }
  static EtalonChain none() { return {{}, {}, FilterMode::amplitude}; }
};

inline void validate(const EtalonChain& e) {
  if (e.fwhm_hz.size() != e.center_hz.size())
    throw UsageError("etalon FWHM and center lists differ in length");
  for (double f : e.fwhm_hz)
    if (!(std::isfinite(f) && f > 0.0)) throw DomainError("etalon FWHM must be > 0");
  for (double c : e.center_hz)
    if (!std::isfinite(c)) throw DomainError("etalon center must be finite");
}

/// sin(z)/z, with the removable singularity handled by its Taylor series.
inline cplx complex_sinc(cplx z) {
  if (std::abs(z) < 1e-4) {
    const cplx z2 = z * z;
    return 1.0 - z2 / 6.0 + z2 * z2 / 120.0;
  }
  return std::sin(z) / z;
}

inline SpectralTerms spectral_terms(const SpectralGrid& grid, const MediumParams& m,
                                    const DriveParams& d, const DopplerQuadrature& q) {
  validate(grid);
  physics::validate(d);
  const DopplerGrid doppler(m, q);
  SpectralTerms t{grid.values(), {}, {}};
  t.cross.resize(t.delta.size());
  t.self.resize(t.delta.size());
  sfwm::detail::parallel_for(t.delta.size(), [&](std::size_t i) {
    const double delta = t.delta[i];
    t.cross[i] = physics::doppler_average(
        [&](double w) { return physics::cross_chi(delta, w, m, d); }, doppler);
    t.self[i] = physics::doppler_average(
        [&](double w) { return physics::self_chi(delta, w, m, d); }, doppler);
  });
  return t;
}

// Per-sample multiplier of the etalon chain at two-photon detuning delta.
inline cplx etalon_response(double delta, const EtalonChain& e) {
  const double f_hz = units::to_hz(delta);
  cplx factor{1.0, 0.0};
  for (std::size_t k = 0; k < e.fwhm_hz.size(); ++k) {
    const double x = 2.0 * (f_hz - e.center_hz[k]) / e.fwhm_hz[k];
    if (e.mode == FilterMode::amplitude)
      factor /= cplx{1.0, -x};
    else
      factor /= std::sqrt(1.0 + x * x);
  }
  return factor;
}

inline BiphotonAmplitude apply_etalons(BiphotonAmplitude a, const EtalonChain& e) {
  validate(e);
  if (e.fwhm_hz.empty()) return a;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    a.values[i] *= etalon_response(a.delta[i], e);
  return a;
}

// Throws GridError when |A| at either grid edge is not below
// edge_tolerance * max|A|. An identically zero amplitude passes.
inline void check_edge_decay(const BiphotonAmplitude& a) {
  double peak = 0.0;
  for (const auto& v : a.values) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) return;
  const double edge = std::max(std::abs(a.values.front()), std::abs(a.values.back()));
  if (!(edge < a.grid.edge_tolerance * peak)) {
    std::ostringstream msg;
    msg << "spectral grid too narrow: |A(edge)|/|A|max = " << edge / peak
        << " (tolerance " << a.grid.edge_tolerance << ")";
    throw GridError(msg.str());
  }
}

inline BiphotonAmplitude amplitude_from_terms(const SpectralGrid& grid,
                                              const SpectralTerms& t) {
  BiphotonAmplitude a{grid, t.delta, std::vector<cplx>(t.delta.size())};
  const cplx i{0.0, 1.0};
  for (std::size_t k = 0; k < t.delta.size(); ++k) {
    const cplx z = t.self[k];
    a.values[k] = t.cross[k] * complex_sinc(z) * std::exp(i * z);
    if (!std::isfinite(a.values[k].real()) || !std::isfinite(a.values[k].imag()))
      throw DomainError("non-finite biphoton amplitude");
  }
  return a;
}

/// A(delta) = C(delta) sinc(Z(delta)) exp(i Z(delta)), followed by the etalon
/// chain. The edge-decay guard is applied to the filtered amplitude, which is
/// what the Fourier synthesis sees.
inline BiphotonAmplitude spectral_amplitude(const SpectralGrid& grid,
                                            const MediumParams& m,
                                            const DriveParams& d,
                                            const DopplerQuadrature& q,
                                            const EtalonChain& filters) {
  auto a = apply_etalons(amplitude_from_terms(grid, spectral_terms(grid, m, d, q)),
                         filters);
  check_edge_decay(a);
  return a;
}

inline BiphotonAmplitude spectral_amplitude(const SpectralGrid& grid,
                                            const MediumParams& m,
                                            const DriveParams& d,
                                            const DopplerQuadrature& q) {
  return spectral_amplitude(grid, m, d, q, EtalonChain::none());
}

struct WavePacket {
  std::vector<double> tau_ns;
  std::vector<double> g2;
  double bin_width_ns = 0.0;

  std::size_t size() const noexcept { return tau_ns.size(); }
};

// Uniform delay grid: start_ns + k * step_ns for k in [0, count).
struct TauGrid {
  double start_ns = 0.0;
  double step_ns = 2.0;
  std::size_t count = 2000;

  double span_ns() const { return step_ns * static_cast<double>(count - 1); }
};

/// G2(tau) = |sum_j w_j exp(-i delta_j tau) A(delta_j) / 2pi|^2 by direct
/// trapezoidal quadrature over the spectral grid.
inline WavePacket wavepacket(const BiphotonAmplitude& a, const TauGrid& tau) {
  if (tau.count < 2 || !(tau.step_ns > 0.0))
    throw GridError("delay grid needs >= 2 points and a positive step");
  const std::size_t n = a.values.size();
  if (n < 2 || a.delta.size() != n) throw GridError("spectral amplitude is empty");
  const double d_delta = a.delta[1] - a.delta[0];
  const double span = units::from_ns(tau.span_ns());
  if (d_delta * span > 2.0 * std::numbers::pi) {
    std::ostringstream msg;
    msg << "aliasing: spectral spacing " << d_delta << " Gamma times delay span "
        << tau.span_ns() << " ns exceeds 2*pi; refine the spectral grid";
    throw GridError(msg.str());
  }

  std::vector<cplx> weighted(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double w = (j == 0 || j + 1 == n) ? 0.5 * d_delta : d_delta;
    weighted[j] = w * a.values[j] / (2.0 * std::numbers::pi);
  }

  WavePacket out;
  out.bin_width_ns = tau.step_ns;
  out.tau_ns.resize(tau.count);
  out.g2.resize(tau.count);
  for (std::size_t k = 0; k < tau.count; ++k)
    out.tau_ns[k] = tau.start_ns + tau.step_ns * static_cast<double>(k);

  sfwm::detail::parallel_for(tau.count, [&](std::size_t k) {
    const double t = units::from_ns(out.tau_ns[k]);
    cplx acc{};
    for (std::size_t j = 0; j < n; ++j)
      acc += std::polar(1.0, -a.delta[j] * t) * weighted[j];
    out.g2[k] = std::norm(acc);
  });
  return out;
}

/// Trapezoidal area under g2 (units of g2 times ns), optionally after
/// subtracting a constant baseline.
inline double wavepacket_area(const WavePacket& w,
                              std::optional<double> baseline = std::nullopt) {
  const double b = baseline.value_or(0.0);
  double area = 0.0;
  for (std::size_t k = 1; k < w.size(); ++k)
    area += 0.5 * ((w.g2[k - 1] - b) + (w.g2[k] - b)) * (w.tau_ns[k] - w.tau_ns[k - 1]);
  return area;
}

/// Causal convolution with (1/rc) exp(-t/rc), t >= 0. The input is treated as
/// piecewise linear between samples and zero before the first one, and the
/// first-order response is integrated exactly over each interval.
inline WavePacket rise_time_convolve(const WavePacket& w, double rc_ns = 35.0) {
  if (!(std::isfinite(rc_ns) && rc_ns >= 0.0))
    throw DomainError("rise time must be finite and >= 0");
  if (rc_ns == 0.0 || w.size() < 2) return w;
  WavePacket out = w;
  out.g2[0] = 0.0;
  for (std::size_t k = 1; k < w.size(); ++k) {
    const double h = w.tau_ns[k] - w.tau_ns[k - 1];
    const double decay = std::exp(-h / rc_ns);
    const double x0 = w.g2[k - 1];
    const double x1 = w.g2[k];
    // -expm1 keeps 1 - exp(-h/rc) accurate when h << rc.
    const double gain = -std::expm1(-h / rc_ns) * rc_ns / h;
    out.g2[k] = decay * out.g2[k - 1] + x1 - decay * x0 - (x1 - x0) * gain;
    out.g2[k] = std::max(out.g2[k], 0.0);
  }
  return out;
}

// Linear interpolation of g2 at delay t; zero outside the sampled range.
inline double sample_at(const WavePacket& w, double t_ns) {
  if (w.size() < 2 || t_ns < w.tau_ns.front() || t_ns > w.tau_ns.back()) return 0.0;
  const auto it = std::upper_bound(w.tau_ns.begin(), w.tau_ns.end(), t_ns);
  const std::size_t hi = std::min<std::size_t>(
      static_cast<std::size_t>(it - w.tau_ns.begin()), w.size() - 1);
  const std::size_t lo = hi - 1;
  const double f = (t_ns - w.tau_ns[lo]) / (w.tau_ns[hi] - w.tau_ns[lo]);
  return w.g2[lo] + f * (w.g2[hi] - w.g2[lo]);
}

/// Places a packet (physical delay, starting at tau = 0) into the detection
/// frame, where physical tau = 0 sits at onset_ns. Samples before the onset are
/// zero; the step is kept.
inline WavePacket shift_to_frame(const WavePacket& w, double onset_ns) {
  if (w.size() < 2) throw GridError("wave packet needs at least two samples");
  if (!(onset_ns >= 0.0)) throw DomainError("onset delay must be >= 0");
  const double step = w.bin_width_ns;
  const auto count = static_cast<std::size_t>(
      std::floor((onset_ns + w.tau_ns.back()) / step + 1e-9)) + 1;
  WavePacket out;
  out.bin_width_ns = step;
  out.tau_ns.resize(count);
  out.g2.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    out.tau_ns[k] = step * static_cast<double>(k);
    out.g2[k] = sample_at(w, out.tau_ns[k] - onset_ns);
  }
  return out;
}

// Cumulative integral of the piecewise-linear interpolant of g2, evaluated at
// arbitrary delays.
class PacketIntegral {
 public:
  explicit PacketIntegral(const WavePacket& w) : w_(w), cumulative_(w.size(), 0.0) {
    for (std::size_t k = 1; k < w.size(); ++k) {
      if (w.g2[k] < 0.0 || w.g2[k - 1] < 0.0) throw DomainError("negative wave packet sample");
      cumulative_[k] = cumulative_[k - 1] +
                       0.5 * (w.g2[k - 1] + w.g2[k]) * (w.tau_ns[k] - w.tau_ns[k - 1]);
    }
  }

  double total() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }

  double at(double t_ns) const {
    if (w_.size() < 2 || t_ns <= w_.tau_ns.front()) return 0.0;
    if (t_ns >= w_.tau_ns.back()) return total();
    const auto it = std::upper_bound(w_.tau_ns.begin(), w_.tau_ns.end(), t_ns);
    const std::size_t hi = static_cast<std::size_t>(it - w_.tau_ns.begin());
    const std::size_t lo = hi - 1;
    const double dt = t_ns - w_.tau_ns[lo];
    const double slope = (w_.g2[hi] - w_.g2[lo]) / (w_.tau_ns[hi] - w_.tau_ns[lo]);
    return cumulative_[lo] + dt * (w_.g2[lo] + 0.5 * slope * dt);
  }

  // Delay t with at(t) = u * total(), for u in [0, 1].
  double inverse(double u) const {
    const double target = u * total();
    const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), target);
    if (it == cumulative_.begin()) return w_.tau_ns.front();
    if (it == cumulative_.end()) return w_.tau_ns.back();
    const std::size_t hi = static_cast<std::size_t>(it - cumulative_.begin());
    const std::size_t lo = hi - 1;
    const double rest = target - cumulative_[lo];
    const double h = w_.tau_ns[hi] - w_.tau_ns[lo];
    const double a = 0.5 * (w_.g2[hi] - w_.g2[lo]) / h;
    const double b = w_.g2[lo];
    double dt;
    if (std::abs(a) < 1e-300) {
      dt = b > 0.0 ? rest / b : 0.0;
    } else {
      // a dt^2 + b dt - rest = 0, numerically stable root.
      const double disc = std::max(b * b + 4.0 * a * rest, 0.0);
      dt = 2.0 * rest / (b + std::sqrt(disc));
    }
    return w_.tau_ns[lo] + std::clamp(dt, 0.0, h);
  }

 private:
  const WavePacket& w_;
  std::vector<double> cumulative_;
};

/// Integrates a packet (physical delay) into detection-frame bins
/// [k*bin, (k+1)*bin), k < bins, with physical tau = 0 at onset_ns. The result
/// holds the integral of g2 over each bin (units of g2 x ns).
inline WavePacket bin_to_frame(const WavePacket& w, double onset_ns, double bin_ns,
                               std::size_t bins) {
  if (!(bin_ns > 0.0)) throw GridError("bin width must be > 0");
  const PacketIntegral integral(w);
  WavePacket out;
  out.bin_width_ns = bin_ns;
  out.tau_ns.resize(bins);
  out.g2.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    out.tau_ns[k] = bin_ns * static_cast<double>(k);
    const double lo = out.tau_ns[k] - onset_ns;
    out.g2[k] = integral.at(lo + bin_ns) - integral.at(lo);
  }
  return out;
}

}  // namespace sfwm::biphoton
