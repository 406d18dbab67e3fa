#pragma once

// Run configuration. The file format is line-based:
//
//   # comment                 (also allowed after a value)
//   [section]
//   key = value
//   key = v1, v2, v3          (lists, where a key takes one)
//
// Section and key names are fixed (see docs/config.md); unknown sections,
// unknown keys and repeated keys are errors. Physical values use external
// units: MHz for frequencies (angular quantities as Omega / 2pi), mW, ns, s.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sfwm/analysis/metrics.hpp"
#include "sfwm/analysis/sweep.hpp"
#include "sfwm/biphoton.hpp"
#include "sfwm/errors.hpp"
#include "sfwm/expsim.hpp"
#include "sfwm/io/csv.hpp"
#include "sfwm/physics.hpp"
#include "sfwm/units.hpp"

namespace sfwm::io {

enum class SynthShape { physics, exponential };

struct SynthOptions {
  SynthShape shape = SynthShape::physics;
  double tau_ns = 260.0;  // exponential shape only
  std::optional<double> success_probability;
  std::optional<double> target_sbr;
  double duration_s = 0.0;  // time-tag stream length; 0 disables
};

struct RunConfig {
  physics::MediumParams medium{};
  physics::DriveParams drive{};
  double coupling_power_mw = 1.0;
  double pump_power_mw = 0.5;
  physics::DopplerQuadrature quadrature{};
  biphoton::SpectralGrid grid{};
  biphoton::TauGrid tau{0.0, 2.0, 3000};
  biphoton::EtalonChain etalons = biphoton::EtalonChain::standard();
  expsim::DetectionModel detection{};
  double rise_time_ns = analysis::kRiseTimeNs;
  double fit_onset_ns = analysis::kFitOnsetNs;
  SynthOptions synth{};
  std::string output_dir = ".";

  // Canonical text of every parsed value; hashed into output metadata.
  std::string canonical;
};

namespace config_detail {

inline bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw UsageError(where + ": expected true/false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& v, const std::string& where) {
  std::vector<double> out;
  if (trim(v).empty()) return out;
  for (const auto& item : split(v, ',')) out.push_back(parse_double(item, where));
  return out;
}

inline std::size_t parse_count(const std::string& v, const std::string& where) {
  const double d = parse_double(v, where);
  if (!(d >= 0.0) || std::floor(d) != d) throw UsageError(where + ": expected a non-negative integer");
  return static_cast<std::size_t>(d);
}

}  // namespace config_detail

inline RunConfig parse_config(std::istream& is) {
  using namespace config_detail;
  RunConfig c;
  std::map<std::string, std::string> entries;
  std::string section;
  std::string line;
  std::size_t line_no = 0;
  const std::set<std::string> sections{"medium",    "drive",     "quadrature", "grid", "delay",
                                        "etalon",    "detection", "synth",      "run"};
  while (std::getline(is, line)) {
    ++line_no;
    const std::string where = "config line " + std::to_string(line_no);
    auto hash = line.find('#');
    std::string s = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw UsageError(where + ": malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      if (!sections.count(section)) throw UsageError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError(where + ": expected key = value");
    if (section.empty()) throw UsageError(where + ": key outside of a section");
    const std::string key = section + "." + trim(s.substr(0, eq));
    if (entries.count(key)) throw UsageError(where + ": repeated key " + key);
    entries[key] = trim(s.substr(eq + 1));
  }

  std::optional<double> coupling_rabi_mhz, pump_rabi_mhz, coupling_power, pump_power;
  std::vector<double> fwhm_mhz{45.0, 60.0};
  std::optional<std::vector<double>> center_mhz;
  bool etalons_enabled = true;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto num = [](double& target, bool positive_required = false) -> Setter {
    return [&target, positive_required](const std::string& v, const std::string& w) {
      target = parse_double(v, w);
      if (!std::isfinite(target)) throw UsageError(w + ": value must be finite");
      if (positive_required && !(target > 0.0)) throw UsageError(w + ": value must be > 0");
    };
  };
  auto mhz_to_gamma = [](double& target) -> Setter {
    return [&target](const std::string& v, const std::string& w) {
      const double f = parse_double(v, w);
      if (!std::isfinite(f)) throw UsageError(w + ": value must be finite");
      target = units::from_mhz(f);
    };
  };
  auto opt = [](std::optional<double>& target) -> Setter {
    return [&target](const std::string& v, const std::string& w) {
      target = parse_double(v, w);
      if (!std::isfinite(*target)) throw UsageError(w + ": value must be finite");
    };
  };

  auto& m = c.medium;
  auto& dm = c.detection;
  const std::map<std::string, Setter> setters{
      {"medium.optical_depth_s", num(m.alpha_s)},
      {"medium.optical_depth_as", num(m.alpha_as)},
      {"medium.decoherence_mhz", mhz_to_gamma(m.gamma)},
      {"medium.doppler_width_mhz", mhz_to_gamma(m.gamma_doppler)},
      {"medium.decay_stokes_mhz", mhz_to_gamma(m.gamma3)},
      {"medium.decay_antistokes_mhz", mhz_to_gamma(m.gamma4)},
      {"drive.coupling_power_mw", opt(coupling_power)},
      {"drive.coupling_rabi_mhz", opt(coupling_rabi_mhz)},
      {"drive.pump_power_mw", opt(pump_power)},
      {"drive.pump_rabi_mhz", opt(pump_rabi_mhz)},
      {"drive.pump_detuning_mhz", mhz_to_gamma(c.drive.delta_p)},
      {"quadrature.half_range", num(c.quadrature.half_range)},
      {"quadrature.step_mhz", mhz_to_gamma(c.quadrature.step)},
      {"grid.half_width_mhz", mhz_to_gamma(c.grid.half_width)},
      {"grid.count", [&](const std::string& v, const std::string& w) { c.grid.count = parse_count(v, w); }},
      {"grid.edge_tolerance", num(c.grid.edge_tolerance, true)},
      {"delay.start_ns", num(c.tau.start_ns)},
      {"delay.step_ns", num(c.tau.step_ns, true)},
      {"delay.count", [&](const std::string& v, const std::string& w) { c.tau.count = parse_count(v, w); }},
      {"etalon.fwhm_mhz", [&](const std::string& v, const std::string& w) { fwhm_mhz = parse_list(v, w); }},
      {"etalon.center_mhz", [&](const std::string& v, const std::string& w) { center_mhz = parse_list(v, w); }},
      {"etalon.mode",
       [&](const std::string& v, const std::string& w) {
         if (v == "amplitude")
           c.etalons.mode = biphoton::FilterMode::amplitude;
         else if (v == "intensity")
           c.etalons.mode = biphoton::FilterMode::intensity;
         else
           throw UsageError(w + ": etalon mode must be 'amplitude' or 'intensity'");
       }},
      {"etalon.enabled", [&](const std::string& v, const std::string& w) { etalons_enabled = parse_bool(v, w); }},
      {"detection.eff_as", num(dm.eff_as)},
      {"detection.eff_s", num(dm.eff_s)},
      {"detection.dark_as_cps", num(dm.dark_as)},
      {"detection.dark_s_cps", num(dm.dark_s)},
      {"detection.trigger_rate_cps", num(dm.trigger_rate)},
      {"detection.bin_ns", num(dm.bin_ns, true)},
      {"detection.accumulation_s", num(dm.accumulation_s)},
      {"detection.window_ns", num(dm.window_ns, true)},
      {"detection.onset_delay_ns", num(dm.onset_delay_ns)},
      {"detection.rise_time_ns", num(c.rise_time_ns)},
      {"detection.fit_onset_ns", num(c.fit_onset_ns)},
      {"synth.shape",
       [&](const std::string& v, const std::string& w) {
         if (v == "physics")
           c.synth.shape = SynthShape::physics;
         else if (v == "exponential")
           c.synth.shape = SynthShape::exponential;
         else
           throw UsageError(w + ": synth shape must be 'physics' or 'exponential'");
       }},
      {"synth.tau_ns", num(c.synth.tau_ns, true)},
      {"synth.success_probability", opt(c.synth.success_probability)},
      {"synth.target_sbr", opt(c.synth.target_sbr)},
      {"synth.duration_s", num(c.synth.duration_s)},
      {"run.seed",
       [&](const std::string& v, const std::string& w) {
         try {
           if (v.empty() || !std::isdigit(static_cast<unsigned char>(v[0])))
             throw std::invalid_argument("sign");  // stoull would wrap "-3"
           std::size_t used = 0;
           dm.seed = std::stoull(v, &used);
           if (used != v.size()) throw std::invalid_argument("trailing");
         } catch (const std::exception&) {
           throw UsageError(w + ": seed must be an unsigned integer");
         }
       }},
      {"run.output_dir", [&](const std::string& v, const std::string&) { c.output_dir = v; }},
  };

  for (const auto& [key, value] : entries) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw UsageError("unknown config key '" + key + "'");
    it->second(value, "config key " + key);
  }

  // Drive fields: explicit Rabi frequencies win over powers.
  if (coupling_power) {
    if (*coupling_power < 0.0) throw UsageError("coupling power must be >= 0");
    c.coupling_power_mw = *coupling_power;
  }
  if (coupling_rabi_mhz) {
    c.drive.omega_c = units::from_mhz(*coupling_rabi_mhz);
    if (!coupling_power) {
      const double r = c.drive.omega_c / analysis::kRabiPerSqrtMilliwatt;
      c.coupling_power_mw = r * r;
    }
  } else {
    c.drive.omega_c = analysis::omega_c_from_power(c.coupling_power_mw);
  }
  if (pump_power) {
    if (*pump_power < 0.0) throw UsageError("pump power must be >= 0");
    c.pump_power_mw = *pump_power;
  }
  c.drive.omega_p = pump_rabi_mhz ? units::from_mhz(*pump_rabi_mhz)
                                  : analysis::omega_p_from_power(c.pump_power_mw);

  if (etalons_enabled) {
    c.etalons.fwhm_hz.clear();
    for (double f : fwhm_mhz) c.etalons.fwhm_hz.push_back(f * 1e6);
    c.etalons.center_hz.assign(fwhm_mhz.size(), 0.0);
    if (center_mhz) {
      if (center_mhz->size() != fwhm_mhz.size())
        throw UsageError("etalon.center_mhz must have as many entries as etalon.fwhm_mhz");
      for (std::size_t i = 0; i < fwhm_mhz.size(); ++i) c.etalons.center_hz[i] = (*center_mhz)[i] * 1e6;
    }
  } else {
    c.etalons.fwhm_hz.clear();
    c.etalons.center_hz.clear();
  }
  if (c.synth.success_probability && c.synth.target_sbr)
    throw UsageError("set at most one of synth.success_probability and synth.target_sbr");

  try {
    physics::validate(c.medium);
    physics::validate(c.drive);
    physics::validate(c.quadrature);
    biphoton::validate(c.grid);
    biphoton::validate(c.etalons);
    expsim::validate(c.detection);
  } catch (const Error& e) {
    throw UsageError(std::string("invalid configuration: ") + e.what());
  }

  std::ostringstream canon;
  for (const auto& [key, value] : entries) canon << key << "=" << value << "\n";
  c.canonical = canon.str();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  return parse_config(in);
}

}  // namespace sfwm::io
