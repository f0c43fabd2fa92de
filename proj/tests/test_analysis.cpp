#include <franson/analysis.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace franson::analysis;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<FringePoint> fringe(double a, double v, double b, double c, double sign = 1.0, int n = 12) {
  std::vector<FringePoint> pts;
  for (int i = 0; i < n; ++i) {
    const double phi = 2 * kPi * i / (n - 1);
    pts.push_back({phi, a * (1.0 + sign * v * std::sin(b * phi + c))});
  }
  return pts;
}

std::vector<FringePoint> poisson(const std::vector<FringePoint>& clean, std::mt19937_64& rng) {
  auto out = clean;
  for (auto& p : out) {
    std::poisson_distribution<long> d(p.count);
    p.count = static_cast<double>(d(rng));
  }
  return out;
}

PlateSpec plate(double wavelength) {
  PlateSpec p;
  p.wavelength = wavelength;
  return p;
}

} // namespace

TEST(Plate, ReferenceValues) {
  // Reference values from an independent arbitrary-precision evaluation of the refraction formula.
  EXPECT_NEAR(plate_angle_to_phase(2 * kDegree, plate(1570e-9)), 2.43875313910391092, 1e-9);
  EXPECT_NEAR(plate_angle_to_phase(4 * kDegree, plate(1570e-9)), 9.76194847515193833, 1e-9);
  EXPECT_NEAR(plate_angle_to_phase(5 * kDegree, plate(842e-9)) - plate_angle_to_phase(4 * kDegree, plate(842e-9)),
              10.2539066264481497, 1e-9);
}

TEST(Plate, Properties) {
  const auto p = plate(1570e-9);
  EXPECT_DOUBLE_EQ(plate_angle_to_phase(0.0, p), 0.0);
  for (double a : {0.01, 0.05, 0.2}) {
    EXPECT_NEAR(plate_angle_to_phase(a, p), plate_angle_to_phase(-a, p), 1e-12);
    EXPECT_NEAR(plate_angle_to_phase(a, plate(842e-9)) / plate_angle_to_phase(a, p), 1570.0 / 842.0, 1e-12);
  }
  EXPECT_THROW(plate_angle_to_phase(kPi / 2, p), std::invalid_argument);
  EXPECT_DOUBLE_EQ(relative_phase(0.0, p), 0.0);
}

TEST(Plate, AngleInversionAndScan) {
  const auto p = plate(1570e-9);
  for (double phase : {0.0, 0.5, 2 * kPi, 9.0}) EXPECT_NEAR(relative_phase(angle_for_phase(phase, p), p), phase, 1e-9);
  const auto angles = scan_angles(p, 12);
  ASSERT_EQ(angles.size(), 12u);
  EXPECT_DOUBLE_EQ(angles.front(), 0.0);
  EXPECT_NEAR(relative_phase(angles.back(), p), 2 * kPi, 1e-9);
  for (std::size_t i = 1; i < angles.size(); ++i) EXPECT_GT(angles[i], angles[i - 1]);
  // The shorter wavelength needs roughly half the tilt range for one fringe.
  const double ratio = scan_angles(plate(842e-9), 12).back() / angles.back();
  EXPECT_GT(ratio, 0.4);
  EXPECT_LT(ratio, 0.6);
}

TEST(Fit, NoiselessRecovery) {
  const auto pts = fringe(50, 0.9, 1.0, 0.0);
  const auto f = fit_fringe(pts);
  EXPECT_NEAR(f.visibility, 0.9, 1e-6);
  EXPECT_NEAR(f.a, 50.0, 1e-6);
  EXPECT_NEAR(f.b, 1.0, 1e-6);
  EXPECT_NEAR(std::remainder(f.c, 2 * kPi), 0.0, 1e-6);
  EXPECT_FALSE(f.degenerate);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
}

TEST(Fit, NoiselessRecoveryAtOtherPhases) {
  for (double c : {0.7, 2.0, 3.5, 5.9}) {
    const auto f = fit_fringe(fringe(80, 0.6, 1.1, c));
    EXPECT_NEAR(f.visibility, 0.6, 1e-6) << "c " << c;
    EXPECT_NEAR(f.b, 1.1, 1e-6);
    EXPECT_NEAR(std::remainder(f.c - c, 2 * kPi), 0.0, 1e-6);
  }
}

TEST(Fit, ConstantCountsGiveZeroVisibility) {
  std::vector<FringePoint> pts;
  for (int i = 0; i < 12; ++i) pts.push_back({0.5 * i, 40.0});
  const auto f = fit_fringe(pts);
  EXPECT_EQ(f.visibility, 0.0);
  EXPECT_TRUE(f.degenerate);
  EXPECT_DOUBLE_EQ(f.a, 40.0);
}

TEST(Fit, TooFewPointsRejected) {
  const auto pts = fringe(50, 0.9, 1.0, 0.0, 1.0, 4);
  EXPECT_THROW(fit_fringe(pts), std::invalid_argument);
}

TEST(Fit, PhaseLockedPair) {
  const auto bbb = fringe(50, 0.9, 1.0, 0.3);
  const auto aaa = fringe(45, 0.8, 1.0, 0.3, -1.0);
  const auto pair = fit_fringe_pair(bbb, aaa);
  EXPECT_TRUE(pair.aaa.locked);
  EXPECT_FALSE(pair.bbb.locked);
  EXPECT_EQ(pair.aaa.b, pair.bbb.b);
  EXPECT_EQ(pair.aaa.c, pair.bbb.c);
  EXPECT_NEAR(pair.bbb.visibility, 0.9, 1e-6);
  EXPECT_NEAR(pair.aaa.visibility, 0.8, 1e-6);
  EXPECT_NEAR(pair.aaa.a, 45.0, 1e-6);

  const auto swapped = fit_fringe_pair(bbb, aaa, FitMode::PhaseLocked, FitOrder::AaaFirst);
  EXPECT_TRUE(swapped.bbb.locked);
  EXPECT_NEAR(swapped.bbb.visibility, 0.9, 1e-6);
  EXPECT_NEAR(swapped.aaa.visibility, 0.8, 1e-6);

  const auto free = fit_fringe_pair(bbb, aaa, FitMode::Independent);
  EXPECT_FALSE(free.aaa.locked);
  EXPECT_NEAR(free.aaa.visibility, 0.8, 1e-6);
}

TEST(Fit, LockedFitWithWrongPhaseClampsToZero) {
  // AAA in phase with BBB: the complementary model needs a negative visibility.
  const auto bbb = fringe(50, 0.9, 1.0, 0.3);
  const auto same = fringe(50, 0.9, 1.0, 0.3);
  const auto f = fit_locked(same, 1.0, 0.3, -1.0);
  EXPECT_NEAR(f.raw_visibility, -0.9, 1e-9);
  EXPECT_EQ(f.visibility, 0.0);
  EXPECT_TRUE(f.clamped);
}

TEST(VisibilityError, HighCountsGiveSmallSigma) {
  const auto bbb = fringe(1e6, 0.9, 1.0, 0.3);
  const auto aaa = fringe(1e6, 0.9, 1.0, 0.3, -1.0);
  const auto e = visibility_error(bbb, aaa, 10, 5);
  EXPECT_LT(e.sigma_bbb, 0.01);
  EXPECT_LT(e.sigma_aaa, 0.01);
  EXPECT_GT(e.sigma_bbb, 0.0);
  EXPECT_EQ(e.samples_used, 10);
}

TEST(VisibilityError, DeterministicForSeed) {
  std::mt19937_64 rng(8);
  const auto bbb = poisson(fringe(40, 0.85, 1.0, 1.0), rng);
  const auto aaa = poisson(fringe(40, 0.85, 1.0, 1.0, -1.0), rng);
  const auto a = visibility_error(bbb, aaa, 10, 1234);
  const auto b = visibility_error(bbb, aaa, 10, 1234);
  EXPECT_EQ(a.sigma_bbb, b.sigma_bbb);
  EXPECT_EQ(a.sigma_aaa, b.sigma_aaa);
  const auto c = visibility_error(bbb, aaa, 10, 1235);
  EXPECT_NE(a.sigma_bbb, c.sigma_bbb);
}

TEST(VisibilityError, ShrinksWithStatistics) {
  // Median over several noisy data sets so the comparison is not at the mercy of one draw.
  auto median_sigma = [](double a) {
    std::mt19937_64 rng(17);
    std::vector<double> s;
    for (int k = 0; k < 15; ++k) {
      const auto bbb = poisson(fringe(a, 0.9, 1.0, 0.4), rng);
      const auto aaa = poisson(fringe(a, 0.9, 1.0, 0.4, -1.0), rng);
      const auto e = visibility_error(bbb, aaa, 30, 100 + k);
      s.push_back(0.5 * (e.sigma_aaa + e.sigma_bbb));
    }
    std::sort(s.begin(), s.end());
    return s[s.size() / 2];
  };
  EXPECT_LT(median_sigma(120.0), median_sigma(30.0));
}

TEST(Average, Examples) {
  const auto a = average_visibility(0.928, 0.066, 0.927, 0.064);
  EXPECT_NEAR(a.value, 0.9275, 1e-12);
  EXPECT_NEAR(a.sigma, 0.046, 5e-4);
  const auto e = average_visibility(0.7, 0.1, 0.7, 0.1);
  EXPECT_NEAR(e.value, 0.7, 1e-12);
  EXPECT_NEAR(e.sigma, 0.1 / std::sqrt(2.0), 1e-12);
  const auto h = average_visibility(1.0, 0.02, 0.0, 0.02);
  EXPECT_NEAR(h.value, 0.5, 1e-12);
  EXPECT_NEAR(h.sigma, 0.5 * std::hypot(0.02, 0.02), 1e-12);
}

TEST(Bound, FromCar) {
  EXPECT_NEAR(visibility_bound_from_car(14.0), 0.9333, 1e-4);
  EXPECT_DOUBLE_EQ(visibility_bound_from_car(std::numeric_limits<double>::infinity()), 1.0);
  EXPECT_THROW(visibility_bound_from_car(1.0), std::invalid_argument);
  EXPECT_THROW(visibility_bound_from_car(0.5), std::invalid_argument);
}

TEST(Modulation, FlatAndModulated) {
  std::vector<FringePoint> flat;
  for (int i = 0; i < 12; ++i) flat.push_back({0.5 * i, 1000.0});
  EXPECT_NEAR(modulation_at(flat, 1.0), 0.0, 1e-12);
  EXPECT_NEAR(modulation_at(fringe(500, 0.04, 1.0, 1.2), 1.0), 0.04, 1e-9);
}

TEST(OrderSensitivity, SmallOnFullVisibilityData) {
  std::mt19937_64 rng(12);
  const auto bbb = poisson(fringe(150, 1.0, 1.0, 0.5), rng);
  const auto aaa = poisson(fringe(150, 1.0, 1.0, 0.5, -1.0), rng);
  const auto s = order_sensitivity(bbb, aaa);
  EXPECT_LE(s.shift_aaa, 0.02);
  EXPECT_LE(s.shift_bbb, 0.02);
  EXPECT_FALSE(s.complementary_fit_fails);
  EXPECT_GT(s.best_locked_r2, 0.9);
}

TEST(OrderSensitivity, FlatDataFailsComplementaryFit) {
  std::mt19937_64 rng(13);
  const auto bbb = poisson(fringe(60, 0.0, 1.0, 0.0), rng);
  const auto aaa = poisson(fringe(60, 0.0, 1.0, 0.0), rng);
  EXPECT_TRUE(order_sensitivity(bbb, aaa).complementary_fit_fails);
}
