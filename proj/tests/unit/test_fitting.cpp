#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include "sfwm/analysis/fitting.hpp"
#include "sfwm/analysis/sweep.hpp"
#include "sfwm/expsim.hpp"

using namespace sfwm;
using namespace sfwm::analysis;

namespace {

// 320 bins of 25.6 ns; y0 before x0 and y0 + S exp(-(x - x0)/tau) after.
WavePacket model_histogram(double y0, double s, double tau, double x0 = 200.0) {
  WavePacket w;
  w.bin_width_ns = 25.6;
  for (int k = 0; k < 320; ++k) {
    const double x = 25.6 * k;
    w.tau_ns.push_back(x);
    w.g2.push_back(x < x0 ? y0 : y0 + s * std::exp(-(x - x0) / tau));
  }
  return w;
}

MediumParams medium(double alpha, double gamma) {
  MediumParams m;
  m.alpha_s = alpha;
  m.alpha_as = alpha;
  m.gamma = gamma;
  return m;
}

Spectrum spectrum(double alpha, double omega_c, double gamma) {
  return physics::eit_spectrum(physics::linspace(-2.0, 2.0, 401), medium(alpha, gamma),
                               {omega_c, 2.0, -333.3}, {});
}

}  // namespace

// --- exponential fit ---

TEST(FitExponential, RecoversNoiselessModel) {
  const auto fit = fit_exponential(model_histogram(100.0, 500.0, 260.0));
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.y0, 100.0, 1e-6 * 100.0);
  EXPECT_NEAR(fit.amplitude, 500.0, 1e-6 * 500.0);
  EXPECT_NEAR(fit.tau_ns, 260.0, 1e-6 * 260.0);
  EXPECT_EQ(fit.x0_ns, 200.0);
}

TEST(FitExponential, PredictedStrongCouplingPacketWithBackground) {
  MediumParams m = medium(80, 0.028);
  const auto amp = biphoton::spectral_amplitude({}, m, {2.6, 2.0, -333.3}, {}, biphoton::EtalonChain::standard());
  auto h = biphoton::bin_to_frame(biphoton::wavepacket(amp, {0.0, 2.0, 3000}), kOnsetDelayNs, 25.6, 320);
  const double peak = *std::max_element(h.g2.begin(), h.g2.end());
  for (double& v : h.g2) v += peak / 42.0;
  const auto fit = fit_exponential(h);
  EXPECT_NEAR(fit.tau_ns, 260.0, 0.15 * 260.0);
  EXPECT_NEAR(fit.y0, peak / 42.0, 1e-3 * peak / 42.0);
}

TEST(FitExponential, PoissonSamplesAtWeakCouplingStatistics) {
  // 2400 s accumulation, SBR about 5.4, tau 560 ns.
  const auto shape = expsim::exponential_wavepacket(560.0, 8192.0);
  expsim::DetectionModel dm;
  dm.accumulation_s = 2400.0;
  const double p_mw = std::pow(0.65 / 2.7, 2.0);
  int successes = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    dm.seed = seed;
    const auto h = expsim::synth_histogram(shape, dm, p_mw, expsim::TargetSbr{5.4});
    const auto fit = fit_exponential(expsim::to_wavepacket(h));
    if (std::abs(fit.tau_ns - 560.0) <= 3.0 * fit.sigma_tau_ns) ++successes;
  }
  EXPECT_GE(successes, 95);
}

TEST(FitExponential, FlatDataHasNoSignal) {
  const auto fit = fit_exponential(model_histogram(20.0, 0.0, 100.0));
  EXPECT_FALSE(fit.signal_detected);
  EXPECT_EQ(sbr(fit), 0.0);
  EXPECT_TRUE(std::isnan(fit.tau_ns));
}

TEST(FitExponential, AllZeroDataIsDegenerate) {
  EXPECT_THROW(fit_exponential(model_histogram(0.0, 0.0, 100.0)), DegenerateDataError);
}

TEST(FitExponential, NeedsTenBinsAfterOnset) {
  auto w = model_histogram(10.0, 50.0, 100.0);
  w.tau_ns.resize(15);
  w.g2.resize(15);
  EXPECT_THROW(fit_exponential(w), UsageError);
}

TEST(FitExponential, SbrFromFit) {
  const auto fit = fit_exponential(model_histogram(10.0, 420.0, 260.0));
  EXPECT_NEAR(sbr(fit), 42.0, 1e-6 * 42.0);
  EXPECT_NEAR(cs_violation(sbr(fit)), 441.0, 1e-5 * 441.0);
}

TEST(FitError, CarriesBestIterate) {
  ExpFit best;
  best.tau_ns = 123.0;
  const FitError<ExpFit> e("no convergence", best);
  EXPECT_EQ(e.best_iterate().tau_ns, 123.0);
  EXPECT_STREQ(e.what(), "no convergence");
}

TEST(DetectedPairRate, SubtractsBaseline) {
  WavePacket w{{0, 1, 2, 3}, {5, 15, 10, 5}, 1.0};
  EXPECT_DOUBLE_EQ(detected_pair_rate(w, 5.0, 10.0), 1.5);
  EXPECT_THROW(detected_pair_rate(w, 5.0, 0.0), DomainError);
}

// --- EIT fit ---

TEST(FitEit, RecoversNoiselessWeakCouplingSpectrum) {
  const auto data = spectrum(82, 0.65, 0.024);
  const auto fit = fit_eit(data, medium(70, 0.04), {1.0, 2.0, -333.3});
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.alpha_s, 82.0, 0.82);
  EXPECT_NEAR(fit.omega_c, 0.65, 0.0065);
  EXPECT_NEAR(fit.gamma, 0.024, 0.00024);
}

TEST(FitEit, RecoversStrongCouplingSpectrum) {
  const auto data = spectrum(80, 2.6, 0.028);
  const auto fit = fit_eit(data, medium(82, 0.025), {2.7, 2.0, -333.3});
  EXPECT_NEAR(fit.alpha_s, 80.0, 0.8);
  EXPECT_NEAR(fit.omega_c, 2.6, 0.026);
  EXPECT_NEAR(fit.gamma, 0.028, 0.00028);
}

TEST(FitEit, NoisySpectraMostlyRecoverParameters) {
  const auto clean = spectrum(80, 2.6, 0.028);
  int successes = 0;
  const int seeds = 10;
  for (int seed = 1; seed <= seeds; ++seed) {
    boost::random::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    boost::random::normal_distribution<double> noise(0.0, 0.005);
    auto data = clean;
    for (double& v : data.value) v += noise(rng);
    try {
      const auto fit = fit_eit(data, medium(82, 0.025), {2.7, 2.0, -333.3});
      if (std::abs(fit.alpha_s / 80.0 - 1.0) < 0.05 && std::abs(fit.omega_c / 2.6 - 1.0) < 0.05 &&
          std::abs(fit.gamma / 0.028 - 1.0) < 0.05)
        ++successes;
    } catch (const Error&) {
    }
  }
  EXPECT_GE(successes, 9);
}

TEST(FitEit, IsAFixedPoint) {
  const auto first = fit_eit(spectrum(81, 1.3, 0.026), medium(82, 0.025), {1.0, 2.0, -333.3});
  const auto again = fit_eit(spectrum(first.alpha_s, first.omega_c, first.gamma),
                             medium(82, 0.025), {1.0, 2.0, -333.3});
  EXPECT_NEAR(again.alpha_s, first.alpha_s, 0.01 * first.alpha_s);
  EXPECT_NEAR(again.omega_c, first.omega_c, 0.01 * first.omega_c);
  EXPECT_NEAR(again.gamma, first.gamma, 0.01 * first.gamma);
}

TEST(FitEit, BaselineOutsideModelRangeIsAnInversionError) {
  auto data = spectrum(80, 2.6, 0.028);
  for (double& v : data.value) v = 1.0;
  EXPECT_THROW(fit_eit(data, medium(82, 0.025), {2.7, 2.0, -333.3}), InversionError);
}

TEST(FitEit, NonPositiveGuessesAreRejected) {
  const auto data = spectrum(80, 2.6, 0.028);
  EXPECT_THROW(fit_eit(data, medium(82, 0.025), {0.0, 2.0, -333.3}), UsageError);
}

TEST(SweepGamma, AveragesThreeLowestPowers) {
  std::vector<EitFit> fits(5);
  const std::vector<double> powers{1.0, 0.02, 0.5, 0.05, 0.1};
  const std::vector<double> gammas{0.9, 0.024, 0.5, 0.025, 0.026};
  for (std::size_t i = 0; i < fits.size(); ++i) fits[i].gamma = gammas[i];
  EXPECT_NEAR(sweep_gamma(powers, fits), 0.025, 1e-15);
}
