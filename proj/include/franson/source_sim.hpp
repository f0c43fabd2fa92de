#pragma once

#include <franson/qmodel.hpp>
#include <franson/timetag.hpp>

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace franson::sim {

/// Photon groups: 0 = 842 nm, 1 = 1530 nm, 2 = 1570 nm.
inline constexpr int kGroup842 = 0;
inline constexpr int kGroup1530 = 1;
inline constexpr int kGroup1570 = 2;

struct SourceConfig {
  double triplet_rate = 2.0e5; ///< Hz, emitted triplets
  double pair_rate = 1.9e6;    ///< Hz, first-stage 842/776 pairs whose 776 photon does not convert
  /// Target coincidences-to-accidentals ratio of 842-vs-infrared two-folds. Values <= 1
  /// disable the extra multi-pair 842 background.
  double car_target = 14.0;
  double car_window = 3.125e-9; ///< seconds, slot width used when calibrating CAR
  qmodel::CoherenceSpec coherence{};
  qmodel::CoherenceModel coherence_model = qmodel::CoherenceModel::Exponential;
  /// When set, overrides the coherence-derived triple weight (tests, ideal scans).
  double triple_weight_override = -1.0;
};

struct DetectorConfig {
  /// A1, B1, A2, B2, A3, B3
  std::array<double, kChannelCount> efficiency{0.65, 0.65, 0.80, 0.48, 0.60, 0.85};
  std::array<double, kChannelCount> dark_rate{2400.0, 2400.0, 150.0, 250.0, 300.0, 400.0};
  double jitter_fwhm = 1.0e-9; ///< seconds, total system jitter per detection
  double dead_time = 0.0;      ///< seconds; 0 disables
};

struct InterferometerSetting {
  double tau = 3.7e-9;
  std::array<double, 3> phase{0.0, 0.0, 0.0}; ///< radians
  /// blocked[photon][0 = short, 1 = long]
  std::array<std::array<bool, 2>, 3> blocked{};
  std::array<std::array<double, 2>, 3> transmission{{{0.44, 0.44}, {0.44, 0.44}, {0.44, 0.44}}};

  /// Transmission with blocked arms zeroed.
  qmodel::ArmTransmission arms() const;
  qmodel::PhaseConfig phases() const { return {phase, tau}; }
  /// Path combinations with every arm open.
  std::vector<qmodel::PathChoice> surviving_paths() const;
};

struct ExperimentConfig {
  SourceConfig source;
  DetectorConfig detector;
  InterferometerSetting interferometer;

  qmodel::InterferenceWeights weights() const;
  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const;
};

enum class BlockedPreset { AllOpen, Block842Long, Block842And1530Long, BlockAllShort };

/// Parses "all-open", "block-842-long", "block-842+1530-long", "block-all-short".
BlockedPreset parse_blocked_preset(std::string_view name);
std::string_view to_string(BlockedPreset preset);
const std::array<BlockedPreset, 4>& all_blocked_presets();

/// Blocking flags for the preset on top of `base` (phases, tau and transmissions kept).
InterferometerSetting blocked_scenario(BlockedPreset preset, InterferometerSetting base = {});
InterferometerSetting blocked_scenario(std::string_view name, InterferometerSetting base = {});

/// Analytic expectations used for CAR calibration and rate checks.
struct RateModel {
  std::array<double, kChannelCount> singles{};   ///< Hz, per channel, dead time ignored
  std::array<double, 3> group_detection{};        ///< per-triplet detection probability per group
  double extra_842_rate = 0.0;                    ///< Hz, emitted multi-pair 842 photons added
  double expected_car = 0.0;                      ///< of 842-vs-infrared two-folds
  bool car_reachable = true;                      ///< false if base background already exceeds target
  double car_signal_half_width = 0.0;             ///< seconds, |dt| <= tau + car_window/2
};

RateModel rate_model(const ExperimentConfig& config);

struct RunSummary {
  double duration = 0.0;
  std::uint64_t triplets_emitted = 0;
  std::array<std::uint64_t, kChannelCount> singles{};
  RateModel rates;
};

/// Streams a simulated run in fixed, seeded time slices. The concatenation of all blocks is
/// sorted by (timestamp, channel) and depends only on (config, duration, seed).
class TagGenerator {
public:
  /// Slice length in ticks.
  static constexpr std::uint64_t kSliceTicks = std::uint64_t{1} << 26;

  TagGenerator(const ExperimentConfig& config, double duration, std::uint64_t seed);

  /// Replaces `out` with the next block; returns false once the run is exhausted.
  bool next(TagStream& out);
  const RunSummary& summary() const { return summary_; }

private:
  void generate_slice(std::uint64_t slice, TagStream& fresh);
  void emit_photon(std::mt19937_64& rng, int group, qmodel::Path path, qmodel::Port port,
                   double emission_tick, TagStream& fresh);

  ExperimentConfig config_;
  RunSummary summary_;
  std::uint64_t seed_;
  std::uint64_t end_tick_;
  std::uint64_t slice_count_;
  std::uint64_t next_slice_ = 0;
  TagStream carry_;
  std::array<std::uint64_t, kChannelCount> last_kept_{};
  std::array<bool, kChannelCount> has_last_{};

  // precomputed per-run constants
  qmodel::ArmTransmission arms_;
  std::array<double, qmodel::kPortCombinations> central_port_cdf_{};
  double tau_ticks_ = 0.0;
  double sigma_ticks_ = 0.0;
  double latency_ticks_ = 0.0;
  std::uint64_t dead_ticks_ = 0;
  double pair_842_rate_ = 0.0;
  ChannelMap channels_ = ChannelMap::standard();
};

/// Whole run in memory.
TagStream simulate_run(const ExperimentConfig& config, double duration, std::uint64_t seed,
                       RunSummary* summary = nullptr);

/// Conditional port distribution of the central (S1S2S3 / L1L2L3) cell, normalized to one.
std::array<double, qmodel::kPortCombinations>
central_port_distribution(const qmodel::PhaseConfig& phases, const qmodel::InterferenceWeights& w,
                          const qmodel::ArmTransmission& arms);

} // namespace franson::sim
