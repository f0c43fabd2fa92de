#pragma once

#include <franson/analysis.hpp>
#include <franson/coincidence.hpp>
#include <franson/config.hpp>
#include <franson/source_sim.hpp>

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace franson::pipeline {

struct AnalyzeResult {
  engine::StreamReport report;
  engine::Histogram2D histogram;
  engine::PeakSummary peaks;
};

/// Streams a tag file through the analyzer in fixed-size chunks.
AnalyzeResult analyze_file(const std::filesystem::path& path, const AppConfig& config);
/// Simulates and analyzes one setting without materializing the run.
AnalyzeResult simulate_and_analyze(const AppConfig& config, const sim::ExperimentConfig& experiment,
                                   double duration, std::uint64_t seed,
                                   sim::RunSummary* summary = nullptr);

struct SettingResult {
  int index = 0;
  double angle = 0.0; ///< radians, NaN for direct phases
  double phase = 0.0;
  std::uint64_t seed = 0;
  double duration = 0.0;
  std::uint64_t triplets_emitted = 0;
  engine::StreamReport report;
};

struct Flatness {
  std::string name; ///< e.g. "pairs_12_aa", "singles_842"
  double mean = 0.0;
  double modulation = 0.0;
};

struct ScanResult {
  std::string label;      ///< "scan-1570", "blocked-block-842-long", ...
  int photon = sim::kGroup1570;
  std::vector<SettingResult> settings;
  std::vector<analysis::FringePoint> aaa;
  std::vector<analysis::FringePoint> bbb;
  std::optional<analysis::FringePairFit> fit; ///< empty if the fit did not converge
  std::optional<analysis::VisibilityError> errors;
  analysis::Averaged average;
  std::string fit_failure;                     ///< non-empty when fit or errors failed
  std::optional<analysis::OrderSensitivity> order; ///< filled by run_blocked
  std::vector<Flatness> flatness;
  engine::Histogram2D histogram{0.78e-9, 20e-9};
  engine::PeakSummary peaks;
  engine::CarMeasurement car;
  double visibility_bound = 0.0; ///< from the measured CAR; 0 when CAR <= 1

  double max_flat_modulation(std::string_view prefix) const;
};

/// Runs every scan setting, fits the fringes and reports flatness of two-folds and singles.
/// Throws analysis::ConvergenceError when the fringe fit fails.
ScanResult run_scan(const AppConfig& config);

/// A scan under a blocked-path preset, 8 settings unless the plan lists its own, with the
/// fit-order diagnostic. Fit failures are recorded, not thrown.
ScanResult run_blocked(AppConfig config, sim::BlockedPreset preset);

/// Columns: cell12, cell13, dt12_ns, dt13_ns, count (rows in cell12-major order).
void write_histogram_csv(std::ostream& out, const engine::Histogram2D& hist);
/// Columns: setting, angle_deg, phase_rad, aaa, bbb, then pair and singles columns.
void write_fringe_csv(std::ostream& out, const ScanResult& result);

/// Reads (phase, aaa, bbb) rows from a CSV with header; extra columns are ignored.
struct FringeData {
  std::vector<analysis::FringePoint> aaa;
  std::vector<analysis::FringePoint> bbb;
};
FringeData read_fringe_csv(const std::filesystem::path& path);

nlohmann::json to_json(const analysis::FringeFit& fit);
nlohmann::json to_json(const engine::StreamReport& report);
nlohmann::json to_json(const engine::PeakSummary& peaks);
nlohmann::json to_json(const ScanResult& result);

} // namespace franson::pipeline
