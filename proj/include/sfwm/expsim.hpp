#pragma once

// Synthetic detector data: Poisson-sampled coincidence histograms and
// start/stop time-tag streams generated from a predicted wave packet.
//
// Random numbers come from boost::random::mt19937_64 and Boost.Random
// distributions, whose algorithms are fixed in source, so a seed reproduces
// the same events on every platform.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "sfwm/analysis/metrics.hpp"
#include "sfwm/analysis/sweep.hpp"
#include "sfwm/biphoton.hpp"
#include "sfwm/errors.hpp"

namespace sfwm::expsim {

using biphoton::WavePacket;

struct DetectionModel {
  double eff_as = 0.084;
  double eff_s = 0.13;
  double dark_as = 140.0;        // counts/s, anti-Stokes (start) detector
  double dark_s = 220.0;         // counts/s, Stokes detector (contained in the background law)
  double trigger_rate = 840.0;   // anti-Stokes detections/s, dark counts excluded
  double bin_ns = 25.6;
  double accumulation_s = 1200.0;
  double window_ns = 8192.0;     // histogram span
  double onset_delay_ns = analysis::kOnsetDelayNs;  // physical tau = 0 in the frame
  std::uint64_t seed = 1;

  // Starts per second: signal triggers plus anti-Stokes dark counts.
  double start_rate() const { return trigger_rate + dark_as; }
  std::size_t bin_count() const {
    return static_cast<std::size_t>(std::floor(window_ns / bin_ns + 1e-9));
  }
};

inline void validate(const DetectionModel& dm) {
  if (!(dm.eff_as > 0.0 && dm.eff_as <= 1.0 && dm.eff_s > 0.0 && dm.eff_s <= 1.0))
    throw ModelError("collection efficiencies must lie in (0, 1]");
  if (!(dm.dark_as >= 0.0 && dm.dark_s >= 0.0 && dm.trigger_rate >= 0.0))
    throw ModelError("rates must be >= 0");
  if (!(dm.bin_ns > 0.0)) throw ModelError("bin width must be > 0");
  if (!(dm.accumulation_s >= 0.0)) throw ModelError("accumulation time must be >= 0");
  if (!(dm.window_ns >= dm.bin_ns)) throw ModelError("window must hold at least one bin");
  if (!(dm.onset_delay_ns >= 0.0)) throw ModelError("onset delay must be >= 0");
}

struct CoincidenceHistogram {
  std::vector<double> delay_ns;  // left bin edges
  std::vector<std::uint64_t> counts;
  double bin_ns = 25.6;
  double accumulation_s = 0.0;
  std::uint64_t seed = 0;
  std::string model;  // free-form description of the generating model

  std::size_t size() const noexcept { return counts.size(); }
};

inline WavePacket to_wavepacket(const CoincidenceHistogram& h) {
  WavePacket w;
  w.tau_ns = h.delay_ns;
  w.bin_width_ns = h.bin_ns;
  w.g2.assign(h.counts.begin(), h.counts.end());
  return w;
}

/// Pure exponential packet g(tau) = exp(-tau/tau0) on [0, span_ns].
inline WavePacket exponential_wavepacket(double tau0_ns, double span_ns, double step_ns = 1.0) {
  if (!(tau0_ns > 0.0 && span_ns > 0.0 && step_ns > 0.0))
    throw DomainError("exponential packet needs positive tau, span and step");
  WavePacket w;
  w.bin_width_ns = step_ns;
  const auto count = static_cast<std::size_t>(std::floor(span_ns / step_ns + 1e-9)) + 1;
  for (std::size_t k = 0; k < count; ++k) {
    const double t = step_ns * static_cast<double>(k);
    w.tau_ns.push_back(t);
    w.g2.push_back(std::exp(-t / tau0_ns));
  }
  return w;
}

// How the wave packet is converted to counts.
struct SuccessProbability {
  double value;  // Stokes detections per signal trigger
};
struct TargetSbr {
  double value;  // peak signal bin mean / background bin mean
};
using SignalScale = std::variant<SuccessProbability, TargetSbr>;

// Flat accidental background per bin: starts/s x Stokes background rate x bin x time.
inline double background_per_bin(const DetectionModel& dm, double p_mw) {
  return dm.start_rate() * analysis::background_rate(p_mw) * dm.bin_ns * 1e-9 *
         dm.accumulation_s;
}

/// Expected counts per histogram bin (signal shape plus flat background).
inline std::vector<double> histogram_means(const WavePacket& w, const DetectionModel& dm,
                                           double p_mw, const SignalScale& scale) {
  validate(dm);
  const std::size_t bins = dm.bin_count();
  const double background = background_per_bin(dm, p_mw);
  std::vector<double> signal =
      biphoton::bin_to_frame(w, dm.onset_delay_ns, dm.bin_ns, bins).g2;
  const double total = std::accumulate(signal.begin(), signal.end(), 0.0);
  if (total > 0.0) {
    for (double& s : signal) s /= total;
    double factor = 0.0;
    if (const auto* p = std::get_if<SuccessProbability>(&scale)) {
      if (!(p->value >= 0.0 && p->value <= 1.0))
        throw ModelError("success probability must lie in [0, 1]");
      factor = dm.trigger_rate * dm.accumulation_s * p->value;
    } else {
      const double target = std::get<TargetSbr>(scale).value;
      if (!(target >= 0.0)) throw ModelError("target SBR must be >= 0");
      const double peak = *std::max_element(signal.begin(), signal.end());
      factor = peak > 0.0 ? target * background / peak : 0.0;
    }
    for (double& s : signal) s *= factor;
  }
  std::vector<double> means(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    means[k] = signal[k] + background;
    if (!(means[k] >= 0.0) || !std::isfinite(means[k]))
      throw ModelError("negative or non-finite bin mean");
  }
  return means;
}

inline CoincidenceHistogram empty_histogram(const DetectionModel& dm, std::size_t bins) {
  CoincidenceHistogram h;
  h.bin_ns = dm.bin_ns;
  h.accumulation_s = dm.accumulation_s;
  h.seed = dm.seed;
  h.delay_ns.resize(bins);
  h.counts.assign(bins, 0);
  for (std::size_t k = 0; k < bins; ++k) h.delay_ns[k] = dm.bin_ns * static_cast<double>(k);
  return h;
}

/// Poisson-sampled coincidence histogram; bins are sampled independently in
/// order from one generator seeded with dm.seed.
inline CoincidenceHistogram synth_histogram(const WavePacket& w, const DetectionModel& dm,
                                            double p_mw, const SignalScale& scale) {
  const auto means = histogram_means(w, dm, p_mw, scale);
  auto h = empty_histogram(dm, means.size());
  h.model = "poisson-per-bin";
  boost::random::mt19937_64 rng(dm.seed);
  for (std::size_t k = 0; k < means.size(); ++k) {
    if (means[k] > 0.0) {
      boost::random::poisson_distribution<std::uint64_t, double> draw(means[k]);
      h.counts[k] = draw(rng);
    }
  }
  return h;
}

struct TimeTagStreams {
  std::vector<std::int64_t> triggers_ps;  // stream 0: anti-Stokes starts
  std::vector<std::int64_t> partners_ps;  // stream 1: Stokes detections
};

/// Event-level generator. Starts form a homogeneous Poisson process at
/// dm.start_rate(); a start is a signal trigger with probability
/// trigger_rate/start_rate, and a signal trigger produces a partner with
/// probability success_probability at a delay drawn from the packet
/// (shifted by the onset delay). Background partners at background_rate(p_mw)
/// are superposed. Timestamps are integer picoseconds, sorted.
inline TimeTagStreams generate_timetags(const WavePacket& w, const DetectionModel& dm,
                                        double p_mw, double duration_s,
                                        double success_probability) {
  validate(dm);
  if (!(duration_s >= 0.0)) throw ModelError("duration must be >= 0");
  if (!(success_probability >= 0.0 && success_probability <= 1.0))
    throw ModelError("success probability must lie in [0, 1]");
  TimeTagStreams out;
  if (duration_s == 0.0) return out;

  boost::random::mt19937_64 rng(dm.seed);
  boost::random::uniform_01<double> uniform;
  const biphoton::PacketIntegral integral(w);
  const double duration_ps = duration_s * 1e12;
  const double signal_fraction = dm.trigger_rate / dm.start_rate();

  if (dm.start_rate() > 0.0) {
    boost::random::exponential_distribution<double> gap(dm.start_rate() / 1e12);
    for (double t = gap(rng); t < duration_ps; t += gap(rng)) {
      out.triggers_ps.push_back(static_cast<std::int64_t>(std::floor(t)));
      const bool signal = uniform(rng) < signal_fraction;
      if (signal && integral.total() > 0.0 && uniform(rng) < success_probability) {
        const double delay_ns = integral.inverse(uniform(rng)) + dm.onset_delay_ns;
        const double tp = t + delay_ns * 1e3;
        if (tp < duration_ps) out.partners_ps.push_back(static_cast<std::int64_t>(std::floor(tp)));
      }
    }
  }
  const double bg = analysis::background_rate(p_mw);
  if (bg > 0.0) {
    boost::random::exponential_distribution<double> gap(bg / 1e12);
    for (double t = gap(rng); t < duration_ps; t += gap(rng))
      out.partners_ps.push_back(static_cast<std::int64_t>(std::floor(t)));
  }
  std::sort(out.partners_ps.begin(), out.partners_ps.end());
  return out;
}

/// Start-stop multiscaler histogram: every partner event in [0, window) after
/// each trigger is counted (not only the first one).
inline CoincidenceHistogram build_histogram(const std::vector<std::int64_t>& triggers_ps,
                                            const std::vector<std::int64_t>& partners_ps,
                                            double window_ns, double bin_ns = 25.6) {
  if (!std::is_sorted(triggers_ps.begin(), triggers_ps.end()) ||
      !std::is_sorted(partners_ps.begin(), partners_ps.end()))
    throw UsageError("time-tag streams must be sorted");
  if (!(bin_ns > 0.0 && window_ns >= bin_ns)) throw UsageError("invalid histogram window");
  const auto bins = static_cast<std::size_t>(std::floor(window_ns / bin_ns + 1e-9));
  CoincidenceHistogram h;
  h.bin_ns = bin_ns;
  h.model = "timetags";
  h.delay_ns.resize(bins);
  h.counts.assign(bins, 0);
  for (std::size_t k = 0; k < bins; ++k) h.delay_ns[k] = bin_ns * static_cast<double>(k);

  const double bin_ps = bin_ns * 1e3;
  const auto window_ps = static_cast<std::int64_t>(std::llround(bin_ps * static_cast<double>(bins)));
  auto first = partners_ps.begin();
  for (const auto t : triggers_ps) {
    first = std::lower_bound(first, partners_ps.end(), t);
    for (auto it = first; it != partners_ps.end() && *it - t < window_ps; ++it) {
      const auto k = static_cast<std::size_t>(static_cast<double>(*it - t) / bin_ps);
      if (k < bins) ++h.counts[k];
    }
  }
  return h;
}

// 64-bit FNV-1a, used to stamp files with a model fingerprint.
inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string describe(const DetectionModel& dm) {
  std::ostringstream s;
  s.precision(17);
  s << "eff_as=" << dm.eff_as << ";eff_s=" << dm.eff_s << ";dark_as=" << dm.dark_as
    << ";dark_s=" << dm.dark_s << ";trigger_rate=" << dm.trigger_rate << ";bin_ns=" << dm.bin_ns
    << ";accumulation_s=" << dm.accumulation_s << ";window_ns=" << dm.window_ns
    << ";onset_delay_ns=" << dm.onset_delay_ns;
  return s.str();
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex;
  s.width(16);
  s.fill('0');
  s << v;
  return s.str();
}

/// Text time-tag file:
///
///   # sfwm-timetags 1
///   # seed=<u64>
///   # model_hash=<16 hex digits>
///   # records=<count>
///   stream,timestamp_ps
///   0,<int64>
///   1,<int64>
///
/// Records are merged in timestamp order; ties put stream 0 first.
inline void write_timetags(std::ostream& os, const TimeTagStreams& s, std::uint64_t seed,
                           std::uint64_t model_hash) {
  os << "# sfwm-timetags 1\n"
     << "# seed=" << seed << "\n"
     << "# model_hash=" << hex64(model_hash) << "\n"
     << "# records=" << s.triggers_ps.size() + s.partners_ps.size() << "\n"
     << "stream,timestamp_ps\n";
  std::size_t i = 0, j = 0;
  while (i < s.triggers_ps.size() || j < s.partners_ps.size()) {
    if (j == s.partners_ps.size() ||
        (i < s.triggers_ps.size() && s.triggers_ps[i] <= s.partners_ps[j]))
      os << "0," << s.triggers_ps[i++] << "\n";
    else
      os << "1," << s.partners_ps[j++] << "\n";
  }
}

struct TimeTagFile {
  TimeTagStreams streams;
  std::uint64_t seed = 0;
  std::string model_hash;
};

inline TimeTagFile read_timetags(std::istream& is) {
  TimeTagFile f;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# seed=", 0) == 0) f.seed = std::stoull(line.substr(7));
      if (line.rfind("# model_hash=", 0) == 0) f.model_hash = line.substr(13);
      continue;
    }
    if (!header_seen) {
      if (line != "stream,timestamp_ps")
        throw UsageError("time-tag file: missing 'stream,timestamp_ps' header");
      header_seen = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw UsageError("time-tag file: malformed record on line " + std::to_string(line_no));
    const std::string id = line.substr(0, comma);
    std::int64_t t = 0;
    try {
      std::size_t used = 0;
      t = std::stoll(line.substr(comma + 1), &used);
      if (used != line.size() - comma - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw UsageError("time-tag file: bad timestamp on line " + std::to_string(line_no));
    }
    if (id == "0")
      f.streams.triggers_ps.push_back(t);
    else if (id == "1")
      f.streams.partners_ps.push_back(t);
    else
      throw UsageError("time-tag file: unknown stream id on line " + std::to_string(line_no));
  }
  if (!header_seen) throw UsageError("time-tag file: no header");
  return f;
}

}  // namespace sfwm::expsim
