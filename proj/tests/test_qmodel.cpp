#include "oracles.hpp"

#include <franson/qmodel.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace franson::qmodel;

namespace {

constexpr double kPi = std::numbers::pi;

std::array<std::array<double, 2>, 3> unit_arms() { return {{{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}}}; }

PhaseConfig phases(double a, double b, double c) { return {{a, b, c}, 3.7e-9}; }

} // namespace

TEST(PathAmplitude, Examples) {
  const auto sa = path_amplitude(Path::Short, Port::A, 1.3);
  EXPECT_DOUBLE_EQ(sa.real(), 0.5);
  EXPECT_DOUBLE_EQ(sa.imag(), 0.0);
  const auto la = path_amplitude(Path::Long, Port::A, 0.0);
  EXPECT_NEAR(la.real(), -0.5, 1e-15);
  EXPECT_NEAR(la.imag(), 0.0, 1e-15);
  const auto lb = path_amplitude(Path::Long, Port::B, kPi / 2);
  EXPECT_NEAR(lb.real(), -0.5, 1e-15);
  EXPECT_NEAR(lb.imag(), 0.0, 1e-15);
  for (double phi : {0.0, 0.4, 2.0, -5.0})
    for (auto path : {Path::Short, Path::Long})
      for (auto port : {Port::A, Port::B}) {
        EXPECT_NEAR(std::abs(path_amplitude(path, port, phi)), 0.5, 1e-15);
        const auto o = oracle::amplitude(path == Path::Long, port == Port::B, phi);
        EXPECT_NEAR(std::abs(path_amplitude(path, port, phi) - o), 0.0, 1e-15);
      }
}

TEST(ParitySet, PaperExamples) {
  auto ports = [](Port a, Port b, Port c) { return PortChoice{{a, b, c}}; };
  EXPECT_EQ(parity_set(ports(Port::A, Port::A, Port::A)), ParitySet::AAA);
  EXPECT_EQ(parity_set(ports(Port::B, Port::B, Port::B)), ParitySet::BBB);
  EXPECT_EQ(parity_set(ports(Port::A, Port::A, Port::B)), ParitySet::BBB);
  EXPECT_EQ(parity_set(ports(Port::A, Port::B, Port::B)), ParitySet::AAA);
  EXPECT_EQ(parity_set(ports(Port::B, Port::A, Port::B)), ParitySet::AAA);
  EXPECT_EQ(parity_set(ports(Port::B, Port::B, Port::A)), ParitySet::AAA);
  int aaa = 0;
  for (unsigned i = 0; i < 8; ++i) aaa += parity_set(PortChoice::from_index(i)) == ParitySet::AAA;
  EXPECT_EQ(aaa, 4);
}

TEST(Peak, ReachableOffsets) {
  EXPECT_THROW(Peak(1, -1), std::invalid_argument);
  EXPECT_THROW(Peak(-1, 1), std::invalid_argument);
  EXPECT_THROW(Peak(2, 0), std::invalid_argument);
  EXPECT_THROW(Peak::from_index(7), std::out_of_range);
  for (int i = 0; i < kPeakCount; ++i) EXPECT_EQ(Peak::from_index(i).index(), i);
  EXPECT_TRUE(Peak::of(PathChoice::from_index(0)).is_central());
  EXPECT_TRUE(Peak::of(PathChoice::from_index(7)).is_central());
  const PathChoice l1{{Path::Long, Path::Short, Path::Short}};
  EXPECT_EQ(Peak::of(l1), Peak(-1, -1));
}

TEST(TripleBinProbability, MatchesAmplitudeOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2 * kPi, 2 * kPi);
  for (double mu : {1.0, 0.957, 0.3, 0.0}) {
    for (int g = 0; g < 16; ++g) {
      const std::array<double, 3> phi{u(rng), u(rng), u(rng)};
      for (int p = 0; p < kPeakCount; ++p) {
        const auto peak = Peak::from_index(p);
        for (unsigned q = 0; q < 8; ++q) {
          const double lib = triple_bin_probability(peak, PortChoice::from_index(q),
                                                    phases(phi[0], phi[1], phi[2]), {mu, 0.0});
          const double ref = oracle::bin_probability(peak.d12(), peak.d13(), q, phi, mu, unit_arms());
          ASSERT_NEAR(lib, ref, 1e-12) << "peak " << p << " ports " << q;
        }
      }
    }
  }
}

TEST(TripleBinProbability, MatchesOracleWithLossyArms) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    ArmTransmission arms;
    std::array<std::array<double, 2>, 3> t{};
    for (int n = 0; n < 3; ++n)
      for (int k = 0; k < 2; ++k) t[n][k] = arms.t[n][k] = (trial % 4 == 0 && k == 1) ? 0.0 : u(rng);
    const std::array<double, 3> phi{6 * u(rng), 6 * u(rng), 6 * u(rng)};
    for (int p = 0; p < kPeakCount; ++p)
      for (unsigned q = 0; q < 8; ++q) {
        const auto peak = Peak::from_index(p);
        const double lib = triple_bin_probability(peak, PortChoice::from_index(q),
                                                  phases(phi[0], phi[1], phi[2]), {0.8, 0.0}, arms);
        ASSERT_NEAR(lib, oracle::bin_probability(peak.d12(), peak.d13(), q, phi, 0.8, t), 1e-12);
      }
  }
}

TEST(TripleBinProbability, Examples) {
  const PortChoice aaa{{Port::A, Port::A, Port::A}};
  const PortChoice bbb{{Port::B, Port::B, Port::B}};
  EXPECT_NEAR(triple_bin_probability(Peak::central(), aaa, phases(0, 0, 0), {1.0, 0.0}), 0.0, 1e-15);
  EXPECT_NEAR(triple_bin_probability(Peak::central(), bbb, phases(0, 0, 0), {1.0, 0.0}), 1.0 / 16, 1e-15);
  for (unsigned q = 0; q < 8; ++q)
    EXPECT_NEAR(triple_bin_probability(Peak(-1, -1), PortChoice::from_index(q), phases(0.3, 2, 5), {1.0, 0.0}),
                1.0 / 64, 1e-15);
}

TEST(TripleBinProbability, NormalizationAndComplementarity) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int trial = 0; trial < 200; ++trial) {
    const double mu = (trial % 5) / 4.0;
    const auto ph = phases(u(rng), u(rng), u(rng));
    double total = 0.0, central_aaa = 0.0, central_bbb = 0.0;
    for (int p = 0; p < kPeakCount; ++p)
      for (unsigned q = 0; q < 8; ++q) {
        const auto ports = PortChoice::from_index(q);
        const double v = triple_bin_probability(Peak::from_index(p), ports, ph, {mu, 0.0});
        total += v;
        if (Peak::from_index(p).is_central())
          (parity_set(ports) == ParitySet::AAA ? central_aaa : central_bbb) += v;
      }
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_NEAR(central_aaa + central_bbb, 0.25, 1e-12);
    EXPECT_NEAR(central_aaa, 0.125 * (1.0 - mu * std::cos(ph.phase_sum())), 1e-12);
  }
}

TEST(TripleBinProbability, DependsOnlyOnPhaseSum) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-4, 4);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = u(rng), b = u(rng), c = u(rng), shift1 = u(rng), shift2 = u(rng);
    for (unsigned q = 0; q < 8; ++q) {
      const auto ports = PortChoice::from_index(q);
      const double x = triple_bin_probability(Peak::central(), ports, phases(a, b, c), {0.9, 0.0});
      const double y = triple_bin_probability(Peak::central(), ports,
                                              phases(a + shift1, b + shift2, c - shift1 - shift2), {0.9, 0.0});
      EXPECT_NEAR(x, y, 1e-12);
    }
  }
}

TEST(Marginals, FlatWithoutPairCoherence) {
  const PhotonPair pairs[] = {{0, 1}, {0, 2}, {1, 2}};
  for (const auto& pair : pairs)
    for (int offset = -1; offset <= 1; ++offset)
      for (auto pa : {Port::A, Port::B})
        for (auto pb : {Port::A, Port::B}) {
          double lo = 1.0, hi = 0.0;
          for (int g = 0; g < 24; ++g) {
            const double s = 2 * kPi * g / 24;
            const double v = two_photon_marginal(pair, offset, pa, pb, phases(s, 0.7 * s, -0.2), {1.0, 0.0});
            lo = std::min(lo, v);
            hi = std::max(hi, v);
          }
          EXPECT_LT(hi - lo, 1e-12);
        }
}

TEST(Marginals, PairMarginalIsSumOfTripleCells) {
  // Brute-force: sum triple cells over the traced photon's port, keeping the pair offset.
  const PhotonPair pair{0, 1};
  for (double mu : {0.0, 1.0}) {
    const auto ph = phases(0.4, 1.1, 2.5);
    for (int offset = -1; offset <= 1; ++offset)
      for (auto p1 : {Port::A, Port::B})
        for (auto p2 : {Port::A, Port::B}) {
          double sum = 0.0;
          for (int k = 0; k < kPeakCount; ++k) {
            const auto peak = Peak::from_index(k);
            if (peak.d12() != offset) continue;
            for (auto p3 : {Port::A, Port::B})
              sum += triple_bin_probability(peak, PortChoice{{p1, p2, p3}}, ph, {mu, 0.0});
          }
          EXPECT_NEAR(two_photon_marginal(pair, offset, p1, p2, ph, {mu, 0.0}), sum, 1e-12);
        }
  }
}

TEST(Marginals, PairCoherenceProducesTwoPhotonFringe) {
  const PhotonPair pair{1, 2};
  const double a = two_photon_marginal(pair, 0, Port::A, Port::A, phases(0, 0, 0), {1.0, 1.0});
  const double b = two_photon_marginal(pair, 0, Port::A, Port::A, phases(0, kPi, 0), {1.0, 1.0});
  EXPECT_GT(std::abs(a - b), 0.01);
}

TEST(Marginals, SinglePhoton) {
  for (int n = 0; n < 3; ++n)
    for (auto port : {Port::A, Port::B}) EXPECT_DOUBLE_EQ(single_photon_marginal(n, port), 0.5);
}

TEST(Coherence, Lengths) {
  EXPECT_NEAR(coherence_length(1530e-9, 51e-9) * 1e6, 14.61, 0.01);
  EXPECT_NEAR(coherence_length(842e-9, 0.86e-9) * 1e6, 262.4, 0.1);
  EXPECT_NEAR(coherence_length(1e-6, 1e-6 / kPi), 1e-6, 1e-18);
  EXPECT_THROW(coherence_length(0.0, 1e-9), std::invalid_argument);
  EXPECT_THROW(coherence_length(1e-6, -1e-9), std::invalid_argument);
}

TEST(Coherence, Weights) {
  EXPECT_NEAR(interference_weight(25.0, 1.11), std::exp(-1.11 / 25.0), 1e-15);
  EXPECT_NEAR(interference_weight(25.0, 1.11), 0.957, 5e-4);
  EXPECT_LT(interference_weight(15e-6, 1.11), 1e-300 + 1e-12);
  EXPECT_DOUBLE_EQ(interference_weight(1e-3, 0.0), 1.0);
  double prev = 1.0;
  for (double d = 0.1; d < 5.0; d += 0.1) {
    const double w = interference_weight(2.0, d);
    EXPECT_LT(w, prev);
    prev = w;
  }
  const auto w = weights_from(CoherenceSpec{});
  EXPECT_NEAR(w.triple, 0.957, 1e-3);
  EXPECT_LT(w.pair, 1e-100);
}
