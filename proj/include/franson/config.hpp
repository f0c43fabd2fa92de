#pragma once

#include <franson/analysis.hpp>
#include <franson/coincidence.hpp>
#include <franson/source_sim.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace franson {

/// Invalid configuration. what() carries "file:line:col: message" when a location is known.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Which photon's phase a scan drives, and how the settings are laid out.
struct ScanPlan {
  int photon = sim::kGroup1570;
  /// Explicit plate tilt offsets (radians, relative to the pre-tilt). Takes precedence.
  std::vector<double> angles;
  /// Explicit phases (radians), used when no angles are given.
  std::vector<double> phases;
  /// Generated layout when neither list is set: `settings` tilts spanning `fringes` fringes of
  /// the reference photon's plate, scaled by `range_fraction`.
  int settings = 12;
  double fringes = 1.0;
  int reference_photon = -1; ///< -1 = same as `photon`
  double range_fraction = 1.0;
  double dwell = 0.8;        ///< seconds per setting, before the statistics multiplier
  double stats_multiplier = 1.0;
  std::uint64_t seed = 1;
  int resamples = 10;
  analysis::FitMode fit_mode = analysis::FitMode::PhaseLocked;
  analysis::FitOrder fit_order = analysis::FitOrder::BbbFirst;

  int setting_count() const;
  double effective_dwell() const { return dwell * stats_multiplier; }
  void validate() const;
};

struct AppConfig {
  sim::ExperimentConfig experiment;
  std::array<analysis::PlateSpec, 3> plates{};
  engine::CoincidenceWindowSpec window;
  double car_slot = 3.125e-9;
  ScanPlan scan;

  /// Tilt offsets and phases for every scan setting.
  struct Setting {
    double angle = 0.0; ///< radians; NaN when phases were given directly
    double phase = 0.0;
  };
  std::vector<Setting> scan_settings() const;

  void validate() const;
};

/// Named baselines: "desk" (default) and "paper" (paper-matched central-bin statistics).
AppConfig profile(std::string_view name);
std::vector<std::string> profile_names();

/// Parses YAML text on top of the profile named by its optional top-level `profile:` key.
/// Unknown keys and wrong types raise ConfigError with a line number.
AppConfig parse_config(const std::string& text, const std::string& source_name = "<config>");
AppConfig load_config(const std::filesystem::path& path);

/// 842 / 1530 / 1570 by group index.
std::string_view photon_label(int group);
/// Accepts "842", "1530", "1570" or a group index 0..2.
int parse_photon(std::string_view text);

} // namespace franson
