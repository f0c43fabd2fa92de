#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <string>

namespace franson::qmodel {

inline constexpr double kSpeedOfLight = 299'792'458.0;
inline constexpr int kPhotons = 3;

enum class Path : std::uint8_t { Short = 0, Long = 1 };
enum class Port : std::uint8_t { A = 0, B = 1 };
enum class ParitySet : std::uint8_t { AAA = 0, BBB = 1 };

std::string to_string(ParitySet set);

/// One interferometer arm choice per photon. Index bit n set <=> photon n+1 took the long arm.
struct PathChoice {
  std::array<Path, kPhotons> paths{Path::Short, Path::Short, Path::Short};

  static PathChoice from_index(unsigned index);
  unsigned index() const;
  int long_count() const;
  std::string label() const; ///< e.g. "S1L2S3"

  friend bool operator==(const PathChoice&, const PathChoice&) = default;
};

/// One detector port per photon. Index bit n set <=> photon n+1 exited port B.
struct PortChoice {
  std::array<Port, kPhotons> ports{Port::A, Port::A, Port::A};

  static PortChoice from_index(unsigned index);
  unsigned index() const;
  int b_count() const;
  std::string label() const; ///< e.g. "A1B2A3"

  friend bool operator==(const PortChoice&, const PortChoice&) = default;
};

/// Relative arrival-time offset of a three-fold event in units of the path delay:
/// d12 = L2 - L1, d13 = L3 - L1. Seven values are reachable; (1,-1) and (-1,1) are not.
class Peak {
public:
  /// Throws std::invalid_argument for an unreachable offset pair.
  Peak(int d12, int d13);

  static Peak central() { return Peak(0, 0); }
  static Peak of(const PathChoice& paths);
  /// Peaks are indexed 0..6 in row-major (d12, d13) order; throws std::out_of_range otherwise.
  static Peak from_index(int index);

  int d12() const { return d12_; }
  int d13() const { return d13_; }
  int index() const;
  bool is_central() const { return d12_ == 0 && d13_ == 0; }

  friend bool operator==(const Peak&, const Peak&) = default;

private:
  int d12_;
  int d13_;
};

inline constexpr int kPeakCount = 7;
inline constexpr int kPortCombinations = 8;
inline constexpr int kPathCombinations = 8;

struct PhaseConfig {
  std::array<double, kPhotons> phi{0.0, 0.0, 0.0}; ///< radians, stored unreduced
  double tau = 3.7e-9;                             ///< seconds

  double phase_sum() const { return phi[0] + phi[1] + phi[2]; }
  void validate() const;
};

/// Coherence weights applied to cross terms between path superpositions.
struct InterferenceWeights {
  double triple = 1.0; ///< S1S2S3 with L1L2L3
  double pair = 0.0;   ///< SS with LL of one pair when the third photon is traced out
  void validate() const;
};

/// Per-arm intensity transmission; 0 blocks the arm. Amplitudes scale by sqrt(t).
struct ArmTransmission {
  std::array<std::array<double, 2>, kPhotons> t{{{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}}};

  double of(int photon, Path path) const { return t[photon][static_cast<int>(path)]; }
  bool blocked(int photon, Path path) const { return of(photon, path) <= 0.0; }
  void validate() const;
};

enum class CoherenceModel : std::uint8_t { Exponential, Gaussian };

struct CoherenceSpec {
  double pump_coherence_length = 25.0;             ///< metres
  double intermediate_coherence_length = 255.9e-6; ///< metres
  double path_difference_length = kSpeedOfLight * 3.7e-9;
  void validate() const;
};

/// Single-photon amplitude for traversing `path` and exiting `port`.
/// Short: 1/2 (A), i/2 (B). Long: -e^{i phase}/2 (A), +i e^{i phase}/2 (B).
std::complex<double> path_amplitude(Path path, Port port, double phase);

/// Even number of B outcomes -> AAA set, odd -> BBB set.
ParitySet parity_set(const PortChoice& ports);

/// Probability per emitted triplet of landing in `peak` with detector ports `ports`,
/// assuming unit detection efficiency. With unit transmission the 56 cells sum to one:
/// the central peak carries 1/4 (with the phase-sum fringe) and each side peak 1/8.
double triple_bin_probability(const Peak& peak, const PortChoice& ports,
                              const PhaseConfig& phases, const InterferenceWeights& weights,
                              const ArmTransmission& arms = {});

/// Pair of photon indices (0-based), first < second.
struct PhotonPair {
  int first = 1;
  int second = 2;
  int traced() const { return 3 - first - second; }
  void validate() const;
};

/// Two-fold probability with the third photon traced out. `offset` = L(second) - L(first)
/// in units of tau. Cross terms between SS and LL of the pair carry `weights.pair`.
double two_photon_marginal(const PhotonPair& pair, int offset, Port first_port, Port second_port,
                           const PhaseConfig& phases, const InterferenceWeights& weights,
                           const ArmTransmission& arms = {});

/// Single-photon detection probability at `port`, summed over both arms.
double single_photon_marginal(int photon, Port port, const ArmTransmission& arms = {});

/// lambda^2 / (pi * delta_lambda), i.e. c / (pi * delta_nu). Throws on non-positive input.
double coherence_length(double center_wavelength, double fwhm_bandwidth);

/// exp(-dL / l_c) (or exp(-(dL/l_c)^2) for the Gaussian model). Monotone decreasing in dL.
double interference_weight(double coherence_length, double path_difference,
                           CoherenceModel model = CoherenceModel::Exponential);

InterferenceWeights weights_from(const CoherenceSpec& spec,
                                 CoherenceModel model = CoherenceModel::Exponential);

} // namespace franson::qmodel
