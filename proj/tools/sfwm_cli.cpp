// sfwm: command-line front end.
//
//   sfwm simulate-eit        EIT transmission spectrum
//   sfwm simulate-biphoton   predicted biphoton wave packet
//   sfwm fit-eit             (alpha_s, Omega_c, gamma) from a spectrum CSV
//   sfwm fit-biphoton        exponential fit of a coincidence histogram CSV
//   sfwm sweep               time constant, rate, brightness and SBR vs coupling power
//   sfwm synth               Poisson-sampled histogram and optional time tags
//
// Exit codes: 0 success, 2 usage or configuration error, 3 numerical error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sfwm/sfwm.hpp"

namespace {

using namespace sfwm;
using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config_path;
  std::string output_path;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Common& c, bool with_output = true) {
  sub->add_option("-c,--config", c.config_path, "Run configuration file")->check(CLI::ExistingFile);
  if (with_output) sub->add_option("-o,--output", c.output_path, "Output file (default: stdout)");
  sub->add_option("--seed", c.seed, "Override run.seed");
}

io::RunConfig load(const Common& c) {
  io::RunConfig cfg;
  if (c.config_path.empty()) {
    std::istringstream empty;
    cfg = io::parse_config(empty);
  } else {
    cfg = io::load_config(c.config_path);
  }
  if (c.seed) cfg.detection.seed = *c.seed;
  return cfg;
}

// Relative output paths are taken from run.output_dir.
std::string resolve(const io::RunConfig& cfg, const std::string& path) {
  if (path.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(cfg.output_dir) / path).string();
}

// Where data and summaries go. Summaries share stdout only when data go to a file.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw UsageError("cannot open output file '" + path + "'");
    }
  }
  std::ostream& data() { return file_ ? *file_ : std::cout; }
  std::ostream& summary() { return file_ ? std::cout : std::cerr; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

io::Metadata base_metadata(const std::string& command, const io::RunConfig& cfg) {
  return {{"version", kVersion},
          {"command", command},
          {"config_hash", expsim::hex64(expsim::fnv1a(cfg.canonical))},
          {"seed", std::to_string(cfg.detection.seed)}};
}

std::string num(double v) { return io::format_number(v); }

// --- simulate-eit ----------------------------------------------------------

struct EitArgs {
  Common common;
  std::vector<double> range_mhz{-12.0, 12.0};
  std::size_t points = 801;
};

int simulate_eit(const EitArgs& a) {
  const auto cfg = load(a.common);
  if (a.range_mhz.size() != 2 || !(a.range_mhz[0] < a.range_mhz[1]) || a.points < 2)
    throw UsageError("detuning range must be lo < hi with at least 2 points");
  const auto grid = physics::linspace(units::from_mhz(a.range_mhz[0]),
                                      units::from_mhz(a.range_mhz[1]), a.points);
  const auto s = physics::eit_spectrum(grid, cfg.medium, cfg.drive, cfg.quadrature);

  io::Table t{{"detuning_hz", "transmission"}, {}};
  for (std::size_t i = 0; i < s.size(); ++i)
    t.rows.push_back({units::to_hz(s.delta[i]), s.value[i]});
  auto meta = base_metadata("simulate-eit", cfg);
  meta.emplace_back("coupling_rabi_mhz", num(units::to_mhz(cfg.drive.omega_c)));

  Sink out(resolve(cfg, a.common.output_path));
  io::write_csv(out.data(), meta, t);
  out.summary() << "baseline transmission: " << num(physics::spectrum_baseline(s)) << "\n";
  if (cfg.drive.omega_c == 0.0) {
    out.summary() << "no transparency window (coupling Rabi frequency is zero)\n";
    return 0;
  }
  out.summary() << "EIT FWHM: " << num(physics::spectrum_fwhm(s) / 1e3) << " kHz\n";
  return 0;
}

// --- simulate-biphoton -----------------------------------------------------

struct BiphotonArgs {
  Common common;
  std::optional<double> tau_step_ns;
  std::optional<std::size_t> tau_count;
};

biphoton::WavePacket predicted_packet(const io::RunConfig& cfg) {
  const auto amp =
      biphoton::spectral_amplitude(cfg.grid, cfg.medium, cfg.drive, cfg.quadrature, cfg.etalons);
  return biphoton::wavepacket(amp, cfg.tau);
}

int simulate_biphoton(const BiphotonArgs& a) {
  auto cfg = load(a.common);
  if (a.tau_step_ns) cfg.tau.step_ns = *a.tau_step_ns;
  if (a.tau_count) cfg.tau.count = *a.tau_count;
  if (!(cfg.tau.step_ns > 0.0) || cfg.tau.count < 2)
    throw UsageError("delay grid needs a positive step and >= 2 points");
  const auto w = predicted_packet(cfg);

  io::Table t{{"delay_ns", "g2_arb"}, {}};
  for (std::size_t k = 0; k < w.size(); ++k) t.rows.push_back({w.tau_ns[k], w.g2[k]});
  auto meta = base_metadata("simulate-biphoton", cfg);
  meta.emplace_back("coupling_power_mw", num(cfg.coupling_power_mw));

  Sink out(resolve(cfg, a.common.output_path));
  io::write_csv(out.data(), meta, t);
  if (cfg.drive.omega_p == 0.0) {
    out.summary() << "pump Rabi frequency is zero: no biphotons generated\n";
    return 0;
  }
  if (cfg.drive.omega_c == 0.0) {
    out.summary() << "coupling Rabi frequency is zero: no biphotons generated\n";
    return 0;
  }
  const auto fit =
      analysis::fit_prediction(w, cfg.detection.onset_delay_ns, cfg.fit_onset_ns, cfg.detection.bin_ns,
                               cfg.detection.bin_count());
  out.summary() << "fitted time constant: " << num(fit.tau_ns) << " ns\n"
                << "linewidth: " << num(analysis::linewidth_from_tau(fit.tau_ns) / 1e3) << " kHz\n";

  // Predicted SBR, normalized so that the same medium gives the reference SBR
  // at the anchor coupling power.
  analysis::SweepOptions o;
  o.medium = cfg.medium;
  o.alpha_s = cfg.medium.alpha_s;
  o.gamma = cfg.medium.gamma;
  o.pump_mw = cfg.pump_power_mw;
  o.delta_p = cfg.drive.delta_p;
  o.grid = cfg.grid;
  o.quadrature = cfg.quadrature;
  o.etalons = cfg.etalons;
  o.tau = cfg.tau;
  o.rise_time_ns = cfg.rise_time_ns;
  const auto anchor = analysis::predict_power(o.anchor_power_mw, o, false);
  const auto convolved = biphoton::rise_time_convolve(w, cfg.rise_time_ns);
  const double peak = *std::max_element(convolved.g2.begin(), convolved.g2.end());
  const double predicted_sbr = peak / analysis::background_rate(cfg.coupling_power_mw) * o.anchor_sbr *
                               analysis::background_rate(o.anchor_power_mw) / anchor.peak_convolved;
  out.summary() << "predicted SBR: " << num(predicted_sbr) << "\n"
                << "Cauchy-Schwarz violation: " << num(analysis::cs_violation(predicted_sbr)) << "\n";
  return 0;
}

// --- fit-eit ---------------------------------------------------------------

struct FitEitArgs {
  Common common;
  std::string input;
  double alpha = 80.0;
  double rabi_mhz = 15.6;
  double decoherence_mhz = 0.15;
};

io::Table read_table(const std::string& path, io::Metadata* meta = nullptr) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open input file '" + path + "'");
  return io::read_csv(in, meta);
}

int fit_eit(const FitEitArgs& a) {
  const auto cfg = load(a.common);
  const auto table = read_table(a.input);
  physics::Spectrum s;
  s.delta = table.values(table.column("detuning_hz"));
  s.value = table.values(table.column("transmission"));
  for (auto& d : s.delta) d = units::from_hz(d);
  for (std::size_t i = 1; i < s.delta.size(); ++i)
    if (!(s.delta[i] > s.delta[i - 1])) throw UsageError("detuning column must be strictly increasing");

  physics::MediumParams m0 = cfg.medium;
  m0.alpha_s = a.alpha;
  m0.gamma = units::from_mhz(a.decoherence_mhz);
  physics::DriveParams d0 = cfg.drive;
  d0.omega_c = units::from_mhz(a.rabi_mhz);

  json report;
  auto fill = [&](const analysis::EitFit& f) {
    report["alpha_s"] = f.alpha_s;
    report["omega_c_gamma"] = f.omega_c;
    report["omega_c_mhz"] = units::to_mhz(f.omega_c);
    report["gamma_gamma"] = f.gamma;
    report["gamma_mhz"] = units::to_mhz(f.gamma);
    report["residual_norm"] = f.residual_norm;
    report["iterations"] = f.iterations;
    report["converged"] = f.converged;
    report["version"] = kVersion;
  };
  Sink out(resolve(cfg, a.common.output_path));
  try {
    fill(analysis::fit_eit(s, m0, d0, cfg.quadrature));
  } catch (const FitError<analysis::EitFit>& e) {
    fill(e.best_iterate());
    out.data() << report.dump(2) << "\n";
    throw;
  }
  try {
    report["fwhm_hz"] = physics::spectrum_fwhm(s);
  } catch (const ShapeError&) {
    report["fwhm_hz"] = nullptr;
  }
  out.data() << report.dump(2) << "\n";
  return 0;
}

// --- fit-biphoton ----------------------------------------------------------

struct FitBiphotonArgs {
  Common common;
  std::string input;
  std::optional<double> x0_ns;
  std::string column;
};

std::optional<double> meta_number(const io::Metadata& meta, const std::string& key) {
  for (const auto& [k, v] : meta)
    if (k == key) return io::parse_double(v, "metadata " + key);
  return std::nullopt;
}

int fit_biphoton(const FitBiphotonArgs& a) {
  const auto cfg = load(a.common);
  io::Metadata meta;
  const auto table = read_table(a.input, &meta);
  std::size_t col = 1;
  if (!a.column.empty()) {
    col = table.column(a.column);
  } else {
    for (const char* name : {"counts", "g2_arb"})
      for (std::size_t i = 0; i < table.columns.size(); ++i)
        if (table.columns[i] == name) col = i;
  }
  if (table.columns.size() < 2 || col >= table.columns.size())
    throw UsageError("histogram CSV needs a delay column and a value column");

  biphoton::WavePacket w;
  w.tau_ns = table.values(table.column("delay_ns"));
  w.g2 = table.values(col);
  w.bin_width_ns = meta_number(meta, "bin_ns").value_or(
      w.size() > 1 ? w.tau_ns[1] - w.tau_ns[0] : cfg.detection.bin_ns);

  const auto fit = analysis::fit_exponential(w, a.x0_ns.value_or(cfg.fit_onset_ns));
  json report;
  report["y0"] = fit.y0;
  report["amplitude"] = fit.amplitude;
  report["x0_ns"] = fit.x0_ns;
  report["sigma_y0"] = fit.sigma_y0;
  report["sigma_amplitude"] = fit.sigma_amplitude;
  report["signal_detected"] = fit.signal_detected;
  report["residual_norm"] = fit.residual_norm;
  report["iterations"] = fit.iterations;
  report["version"] = kVersion;
  const double ratio = analysis::sbr(fit);
  report["sbr"] = std::isfinite(ratio) ? json(ratio) : json("inf");
  report["cs_violation"] =
      std::isfinite(ratio) ? json(analysis::cs_violation(ratio)) : json("inf");
  if (fit.signal_detected) {
    report["tau_ns"] = fit.tau_ns;
    report["sigma_tau_ns"] = fit.sigma_tau_ns;
    report["linewidth_hz"] = analysis::linewidth_from_tau(fit.tau_ns);
    report["sbr_sigma"] = analysis::sbr_sigma(fit);
  } else {
    report["tau_ns"] = nullptr;
    report["linewidth_hz"] = nullptr;
  }
  if (const auto acc = meta_number(meta, "accumulation_s"); acc && *acc > 0.0) {
    const double detected = analysis::detected_pair_rate(w, fit.y0, *acc);
    report["detected_pairs_per_s"] = detected;
    report["generation_rate_pairs_per_s"] =
        analysis::generation_rate(detected, cfg.detection.eff_as, cfg.detection.eff_s);
  }
  Sink out(resolve(cfg, a.common.output_path));
  out.data() << report.dump(2) << "\n";
  return 0;
}

// --- sweep -----------------------------------------------------------------

struct SweepArgs {
  Common common;
  std::vector<double> powers;
};

int sweep(const SweepArgs& a) {
  const auto cfg = load(a.common);
  const auto powers = a.powers.empty() ? analysis::standard_coupling_powers() : a.powers;
  for (double p : powers)
    if (!(std::isfinite(p) && p > 0.0)) throw UsageError("coupling powers must be > 0");

  analysis::SweepOptions o;
  o.medium = cfg.medium;
  o.alpha_s = cfg.medium.alpha_s;
  o.gamma = cfg.medium.gamma;
  o.pump_mw = cfg.pump_power_mw;
  o.delta_p = cfg.drive.delta_p;
  o.grid = cfg.grid;
  o.quadrature = cfg.quadrature;
  o.etalons = cfg.etalons;
  o.tau = cfg.tau;
  o.onset_ns = cfg.detection.onset_delay_ns;
  o.x0_ns = cfg.fit_onset_ns;
  o.rise_time_ns = cfg.rise_time_ns;
  const auto s = analysis::sweep_predict(powers, o);

  io::Table t{{"coupling_mw", "omega_c_mhz", "tau_ns", "linewidth_hz", "eit_fwhm_hz",
               "rate_pairs_per_s", "brightness", "sbr"},
              {}};
  for (std::size_t i = 0; i < powers.size(); ++i)
    t.rows.push_back({powers[i], units::to_mhz(s.omega_c[i]), s.tau_ns[i], s.linewidth_hz[i],
                      s.eit_fwhm_hz[i], s.rate[i], s.brightness[i], s.sbr[i]});
  auto meta = base_metadata("sweep", cfg);
  meta.emplace_back("pump_mw", num(o.pump_mw));
  meta.emplace_back("rate_normalization", num(s.rate_normalization));
  meta.emplace_back("sbr_normalization", num(s.sbr_normalization));

  Sink out(resolve(cfg, a.common.output_path));
  io::write_csv(out.data(), meta, t);
  std::size_t best = 0;
  for (std::size_t i = 1; i < powers.size(); ++i)
    if (s.brightness[i] > s.brightness[best]) best = i;
  out.summary() << "maximum spectral brightness " << num(s.brightness[best])
                << " pairs/(s mW MHz) at " << num(powers[best]) << " mW\n";
  return 0;
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
  Common common;
  std::string timetags_path;
};

int synth(const SynthArgs& a) {
  const auto cfg = load(a.common);
  const auto& dm = cfg.detection;

  biphoton::WavePacket w;
  if (cfg.synth.shape == io::SynthShape::exponential)
    w = expsim::exponential_wavepacket(cfg.synth.tau_ns, dm.window_ns);
  else
    w = predicted_packet(cfg);
  w = biphoton::rise_time_convolve(w, cfg.rise_time_ns);

  expsim::SignalScale scale = expsim::SuccessProbability{cfg.synth.success_probability.value_or(0.0088)};
  if (cfg.synth.target_sbr) scale = expsim::TargetSbr{*cfg.synth.target_sbr};

  auto meta = base_metadata("synth", cfg);
  meta.emplace_back("coupling_power_mw", num(cfg.coupling_power_mw));
  meta.emplace_back("bin_ns", num(dm.bin_ns));
  meta.emplace_back("accumulation_s", num(dm.accumulation_s));
  meta.emplace_back("model", "poisson-per-bin");
  meta.emplace_back("model_hash", expsim::hex64(expsim::fnv1a(expsim::describe(dm))));

  io::Table t{{"delay_ns", "counts"}, {}};
  if (dm.accumulation_s > 0.0) {
    const auto h = expsim::synth_histogram(w, dm, cfg.coupling_power_mw, scale);
    for (std::size_t k = 0; k < h.size(); ++k)
      t.rows.push_back({h.delay_ns[k], static_cast<double>(h.counts[k])});
  }
  Sink out(resolve(cfg, a.common.output_path));
  io::write_csv(out.data(), meta, t);

  if (!a.timetags_path.empty()) {
    if (cfg.synth.target_sbr)
      throw UsageError("time tags need synth.success_probability, not synth.target_sbr");
    const auto tags_path = resolve(cfg, a.timetags_path);
    std::ofstream tags(tags_path);
    if (!tags) throw UsageError("cannot open time-tag file '" + tags_path + "'");
    const auto streams = expsim::generate_timetags(
        w, dm, cfg.coupling_power_mw, cfg.synth.duration_s, cfg.synth.success_probability.value_or(0.0088));
    expsim::write_timetags(tags, streams, dm.seed, expsim::fnv1a(expsim::describe(dm)));
    out.summary() << "time tags: " << streams.triggers_ps.size() << " starts, "
                  << streams.partners_ps.size() << " stops\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Biphoton source simulation and analysis"};
  app.set_version_flag("--version", std::string(sfwm::kVersion));
  app.require_subcommand(1);

  EitArgs eit;
  auto* c_eit = app.add_subcommand("simulate-eit", "EIT transmission spectrum (CSV)");
  add_common(c_eit, eit.common);
  c_eit->add_option("--range-mhz", eit.range_mhz, "Two-photon detuning range lo hi")->expected(2);
  c_eit->add_option("--points", eit.points, "Number of detuning samples");

  BiphotonArgs bi;
  auto* c_bi = app.add_subcommand("simulate-biphoton", "Predicted biphoton wave packet (CSV)");
  add_common(c_bi, bi.common);
  c_bi->add_option("--tau-step-ns", bi.tau_step_ns, "Delay step");
  c_bi->add_option("--tau-count", bi.tau_count, "Number of delay samples");

  FitEitArgs fe;
  auto* c_fe = app.add_subcommand("fit-eit", "Fit (alpha_s, Omega_c, gamma) to a spectrum CSV");
  add_common(c_fe, fe.common);
  c_fe->add_option("input", fe.input, "CSV with detuning_hz,transmission")->required();
  c_fe->add_option("--alpha", fe.alpha, "Initial optical depth");
  c_fe->add_option("--rabi-mhz", fe.rabi_mhz, "Initial coupling Rabi frequency / 2pi");
  c_fe->add_option("--decoherence-mhz", fe.decoherence_mhz, "Initial decoherence rate / 2pi");

  FitBiphotonArgs fb;
  auto* c_fb = app.add_subcommand("fit-biphoton", "Exponential fit of a coincidence histogram CSV");
  add_common(c_fb, fb.common);
  c_fb->add_option("input", fb.input, "CSV with delay_ns and counts (or g2_arb)")->required();
  c_fb->add_option("--x0-ns", fb.x0_ns, "Fit onset");
  c_fb->add_option("--column", fb.column, "Value column name");

  SweepArgs sw;
  auto* c_sw = app.add_subcommand("sweep", "Predictions versus coupling power (CSV)");
  add_common(c_sw, sw.common);
  c_sw->add_option("--powers", sw.powers, "Coupling powers in mW")->delimiter(',');

  SynthArgs sy;
  auto* c_sy = app.add_subcommand("synth", "Synthetic coincidence histogram (CSV)");
  add_common(c_sy, sy.common);
  c_sy->add_option("--timetags", sy.timetags_path, "Also write a time-tag file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*c_eit) return simulate_eit(eit);
    if (*c_bi) return simulate_biphoton(bi);
    if (*c_fe) return fit_eit(fe);
    if (*c_fb) return fit_biphoton(fb);
    if (*c_sw) return sweep(sw);
    if (*c_sy) return synth(sy);
  } catch (const sfwm::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const sfwm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}
