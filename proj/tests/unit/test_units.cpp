#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sfwm/units.hpp"

using namespace sfwm::units;

TEST(Units, GammaIsSixMegahertz) {
  EXPECT_DOUBLE_EQ(to_hz(1.0), 6.0e6);
  EXPECT_DOUBLE_EQ(to_mhz(1.0), 6.0);
  EXPECT_DOUBLE_EQ(to_hz(-333.3), -1.9998e9);
}

TEST(Units, InverseGammaInNanoseconds) {
  // 1/Gamma = 1/(2 pi 6 MHz) = 26.5258 ns
  EXPECT_NEAR(to_ns(1.0), 26.52582384864922, 1e-12);
}

TEST(Units, RoundTripsAreExactToMachinePrecision) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng);
    EXPECT_NEAR(from_hz(to_hz(x)), x, 4 * std::numeric_limits<double>::epsilon() * std::abs(x));
    EXPECT_NEAR(from_mhz(to_mhz(x)), x, 4 * std::numeric_limits<double>::epsilon() * std::abs(x));
    EXPECT_NEAR(from_ns(to_ns(x)), x, 4 * std::numeric_limits<double>::epsilon() * std::abs(x));
  }
}
