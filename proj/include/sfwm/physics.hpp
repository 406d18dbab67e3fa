#pragma once

// Susceptibilities of the double-Lambda vapor, Gaussian Doppler averaging and
// EIT transmission spectra. All frequencies are in units of Gamma.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "sfwm/detail/parallel.hpp"
#include "sfwm/errors.hpp"
#include "sfwm/units.hpp"

namespace sfwm::physics {

using cplx = std::complex<double>;

struct MediumParams {
  double alpha_s = 82.0;   // optical depth, Stokes transition
  double alpha_as = 82.0;  // optical depth, anti-Stokes transition
  double gamma = 0.025;    // ground-state decoherence rate
  double gamma_doppler = 54.0;
  double gamma3 = 1.0;  // excited-state decay, Stokes side
  double gamma4 = 1.0;  // excited-state decay, anti-Stokes side
};

struct DriveParams {
  double omega_c = 2.7;   // coupling Rabi frequency
  double omega_p = 2.0;   // pump Rabi frequency
  double delta_p = -333.3;  // pump detuning (-2.0 GHz)
};

// Uniform trapezoid over [-half_range*Gamma_D, +half_range*Gamma_D].
struct DopplerQuadrature {
  double half_range = 4.0;  // in units of gamma_doppler
  double step = 0.125;      // in units of Gamma
};

inline void validate(const MediumParams& m) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!(finite(m.alpha_s) && m.alpha_s > 0.0))
    throw DomainError("alpha_s must be finite and > 0");
  if (!(finite(m.alpha_as) && m.alpha_as > 0.0))
    throw DomainError("alpha_as must be finite and > 0");
  if (!(finite(m.gamma) && m.gamma >= 0.0))
    throw DomainError("gamma must be finite and >= 0");
  if (!(finite(m.gamma_doppler) && m.gamma_doppler > 0.0))
    throw DomainError("gamma_doppler must be finite and > 0");
  if (!(finite(m.gamma3) && m.gamma3 > 0.0 && finite(m.gamma4) && m.gamma4 > 0.0))
    throw DomainError("gamma3 and gamma4 must be finite and > 0");
}

inline void validate(const DriveParams& d) {
  if (!(std::isfinite(d.omega_c) && d.omega_c >= 0.0))
    throw DomainError("omega_c must be finite and >= 0");
  if (!(std::isfinite(d.omega_p) && d.omega_p >= 0.0))
    throw DomainError("omega_p must be finite and >= 0");
  if (!std::isfinite(d.delta_p)) throw DomainError("delta_p must be finite");
}

inline void validate(const DopplerQuadrature& q) {
  if (!(std::isfinite(q.half_range) && q.half_range >= 3.0))
    throw DomainError("Doppler quadrature half_range must be >= 3");
  if (!(std::isfinite(q.step) && q.step > 0.0 && q.step <= 0.25))
    throw DomainError("Doppler quadrature step must be in (0, 0.25]");
}

namespace detail {

inline void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) throw DomainError(std::string("non-finite ") + name);
}

// Common EIT denominator Omega_c^2 - 4(delta + i gamma)(delta + w_D + i Gamma_3/2).
inline cplx eit_denominator(double delta, double omega_d, const MediumParams& m,
                            double omega_c) {
  const cplx ground{delta, m.gamma};
  const cplx excited{delta + omega_d, 0.5 * m.gamma3};
  return omega_c * omega_c - 4.0 * ground * excited;
}

}  // namespace detail

/// Cross-susceptibility term sqrt(k_as k_s) L / 2 * chi(delta, w_D).
inline cplx cross_chi(double delta, double omega_d, const MediumParams& m,
                      const DriveParams& d) {
  detail::require_finite(delta, "delta");
  detail::require_finite(omega_d, "omega_d");
  if (d.omega_c == 0.0 || d.omega_p == 0.0) return {0.0, 0.0};
  const double prefactor =
      std::sqrt(m.alpha_as * m.alpha_s) * std::sqrt(m.gamma3 * m.gamma4) / 4.0;
  const cplx pump = d.omega_p / cplx{d.delta_p - omega_d, 0.5 * m.gamma4};
  const cplx coupling =
      d.omega_c / detail::eit_denominator(delta, omega_d, m, d.omega_c);
  return prefactor * pump * coupling;
}

/// Self-susceptibility term k_s L / 4 * xi(delta, w_D). Independent of the
/// pump field.
inline cplx self_chi(double delta, double omega_d, const MediumParams& m,
                     const DriveParams& d) {
  detail::require_finite(delta, "delta");
  detail::require_finite(omega_d, "omega_d");
  const double prefactor = m.alpha_s * m.gamma3 / 2.0;
  // Without coupling the ground-state factor cancels; this also removes the
  // 0/0 at delta = gamma = 0.
  if (d.omega_c == 0.0)
    return prefactor * (-1.0 / (4.0 * cplx{delta + omega_d, 0.5 * m.gamma3}));
  return prefactor * (cplx{delta, m.gamma} /
                      detail::eit_denominator(delta, omega_d, m, d.omega_c));
}

// Partial derivatives of self_chi with respect to omega_c and gamma.
struct SelfChiGradient {
  cplx d_omega_c;
  cplx d_gamma;
};

inline SelfChiGradient self_chi_gradient(double delta, double omega_d,
                                         const MediumParams& m,
                                         const DriveParams& d) {
  const double prefactor = m.alpha_s * m.gamma3 / 2.0;
  const cplx ground{delta, m.gamma};
  const cplx excited{delta + omega_d, 0.5 * m.gamma3};
  const cplx den = detail::eit_denominator(delta, omega_d, m, d.omega_c);
  const cplx den2 = den * den;
  const cplx i{0.0, 1.0};
  return {prefactor * (-2.0 * d.omega_c * ground / den2),
          prefactor * (i / den + 4.0 * i * ground * excited / den2)};
}

/// Nodes and trapezoid weights of the Gaussian velocity average. The weights
/// include the normalized Maxwell-Boltzmann factor exp(-w^2/G_D^2)/(sqrt(pi) G_D).
class DopplerGrid {
 public:
  DopplerGrid(const MediumParams& m, const DopplerQuadrature& q) {
    validate(m);
    validate(q);
    const double edge = q.half_range * m.gamma_doppler;
    const auto intervals =
        static_cast<std::size_t>(std::ceil(2.0 * edge / q.step - 1e-9));
    const double h = 2.0 * edge / static_cast<double>(intervals);
    const double norm = 1.0 / (std::sqrt(std::numbers::pi) * m.gamma_doppler);
    nodes_.resize(intervals + 1);
    weights_.resize(intervals + 1);
    for (std::size_t k = 0; k <= intervals; ++k) {
      const double w = -edge + h * static_cast<double>(k);
      const double x = w / m.gamma_doppler;
      nodes_[k] = w;
      weights_[k] = h * norm * std::exp(-x * x);
    }
    weights_.front() *= 0.5;
    weights_.back() *= 0.5;
  }

  const std::vector<double>& nodes() const noexcept { return nodes_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

/// Trapezoidal Gaussian average of f over the Doppler grid. Summation runs
/// left to right.
template <typename Fn>
auto doppler_average(Fn&& f, const DopplerGrid& grid) {
  using Value = decltype(f(0.0));
  Value acc{};
  const auto& nodes = grid.nodes();
  const auto& weights = grid.weights();
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const Value v = f(nodes[k]);
    if (!std::isfinite(std::real(v)) || !std::isfinite(std::imag(v)))
      throw DomainError("non-finite integrand in Doppler average at w_D = " +
                        std::to_string(nodes[k]));
    acc += weights[k] * v;
  }
  return acc;
}

template <typename Fn>
auto doppler_average(Fn&& f, const MediumParams& m, const DopplerQuadrature& q) {
  return doppler_average(std::forward<Fn>(f), DopplerGrid(m, q));
}

// Doppler-averaged optical depth term Im[k_s L xi] (the exponent of T).
inline double doppler_absorption(double delta, const MediumParams& m,
                                 const DriveParams& d, const DopplerGrid& grid) {
  return doppler_average(
      [&](double w) { return std::imag(4.0 * self_chi(delta, w, m, d)); }, grid);
}

inline double eit_transmission(double delta, const MediumParams& m,
                               const DriveParams& d, const DopplerGrid& grid) {
  validate(d);
  return std::exp(-doppler_absorption(delta, m, d, grid));
}

/// Probe transmission T(delta) of the Doppler-broadened medium.
inline double eit_transmission(double delta, const MediumParams& m,
                               const DriveParams& d, const DopplerQuadrature& q) {
  return eit_transmission(delta, m, d, DopplerGrid(m, q));
}

// A real function sampled on a two-photon detuning grid (Gamma units).
struct Spectrum {
  std::vector<double> delta;
  std::vector<double> value;

  std::size_t size() const noexcept { return delta.size(); }
};

// Uniform detuning grid of `count` points on [lo, hi].
inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  const double h = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) out[i] = lo + h * static_cast<double>(i);
  out.back() = hi;
  return out;
}

inline Spectrum eit_spectrum(const std::vector<double>& grid, const MediumParams& m,
                             const DriveParams& d, const DopplerQuadrature& q) {
  if (grid.empty()) throw UsageError("EIT spectrum requested on an empty grid");
  if (!std::is_sorted(grid.begin(), grid.end()))
    throw UsageError("EIT detuning grid must be sorted");
  validate(d);
  const DopplerGrid doppler(m, q);
  Spectrum s{grid, std::vector<double>(grid.size())};
  sfwm::detail::parallel_for(grid.size(), [&](std::size_t i) {
    s.value[i] = eit_transmission(grid[i], m, d, doppler);
  });
  return s;
}

// Baseline of a spectrum: mean of the outermost 10% of samples on each side.
inline double spectrum_baseline(const Spectrum& s) {
  const std::size_t n = s.size();
  const std::size_t edge = std::max<std::size_t>(1, n / 10);
  double sum = 0.0;
  for (std::size_t i = 0; i < edge; ++i) sum += s.value[i] + s.value[n - 1 - i];
  return sum / static_cast<double>(2 * edge);
}

/// Full width at half of (peak - baseline), in Hz. Crossings are located by
/// linear interpolation between the bracketing samples.
inline double spectrum_fwhm(const Spectrum& s) {
  const std::size_t n = s.size();
  if (n < 3 || s.value.size() != n) throw ShapeError("spectrum too short for a width");
  const double baseline = spectrum_baseline(s);
  const auto peak_it = std::max_element(s.value.begin(), s.value.end());
  const std::size_t peak = static_cast<std::size_t>(peak_it - s.value.begin());
  const double height = *peak_it - baseline;
  if (!(height > 1e-3)) throw ShapeError("no peak above baseline + 1e-3");
  const double half = baseline + 0.5 * height;

  auto crossing = [&](std::size_t below, std::size_t above) {
    const double t = (half - s.value[below]) / (s.value[above] - s.value[below]);
    return s.delta[below] + t * (s.delta[above] - s.delta[below]);
  };

  std::size_t i = peak;
  while (i > 0 && s.value[i] > half) --i;
  if (s.value[i] > half) throw ShapeError("peak does not fall to half maximum on the left");
  const double left = crossing(i, i + 1);

  std::size_t j = peak;
  while (j + 1 < n && s.value[j] > half) ++j;
  if (s.value[j] > half) throw ShapeError("peak does not fall to half maximum on the right");
  const double right = crossing(j, j - 1);

  return units::to_hz(right - left);
}

}  // namespace sfwm::physics
