#pragma once

#include <franson/qmodel.hpp>
#include <franson/timetag.hpp>

#include <array>
#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <vector>

namespace franson::engine {

struct CoincidenceWindowSpec {
  double coarse_window = 20e-9; ///< seconds, applied to every pairwise gap
  double bin_width = 0.78e-9;   ///< seconds
  double tau = 3.7e-9;          ///< expected peak separation, seconds
  int central_radius = 0;       ///< central region half-size in cells; 0 = single cell

  /// Pairwise window in whole ticks.
  std::int64_t window_ticks() const;
  /// Throws std::invalid_argument unless bin_width < tau and coarse_window >= 2 tau + bin_width.
  void validate() const;
};

struct TripleEvent {
  std::array<TimeTag, 3> tags{};         ///< ordered by photon group
  std::array<std::uint64_t, 3> index{};  ///< position of each tag in the input stream
  std::int64_t dt12_ticks = 0;           ///< t(photon 2) - t(photon 1)
  std::int64_t dt13_ticks = 0;           ///< t(photon 3) - t(photon 1)
  qmodel::PortChoice ports;
  qmodel::ParitySet parity = qmodel::ParitySet::AAA;

  double dt12() const { return ticks_to_seconds(static_cast<double>(dt12_ticks)); }
  double dt13() const { return ticks_to_seconds(static_cast<double>(dt13_ticks)); }

  friend bool operator==(const TripleEvent&, const TripleEvent&) = default;
};

/// Streaming three-fold finder with greedy earliest-first matching: tags are visited in stream
/// order; an unused tag becomes the anchor of a triple with the earliest unused later tag of
/// each of the two other groups, provided the span stays within the coarse window. Each tag
/// appears in at most one triple. Feeding the stream in any chunking gives identical output.
class TripleFinder {
public:
  TripleFinder(const CoincidenceWindowSpec& spec, const ChannelMap& channels);

  /// Appends triples whose anchor window is complete. Throws std::invalid_argument on
  /// unsorted input (also across chunks) or an unknown channel.
  void push(std::span<const TimeTag> chunk, std::vector<TripleEvent>& out);
  /// Flushes the remaining anchors.
  void finish(std::vector<TripleEvent>& out);

private:
  struct Entry {
    TimeTag tag;
    int group;
    qmodel::Port port;
    bool used;
  };

  void process_anchor(std::vector<TripleEvent>& out);
  Entry& at(std::uint64_t index) { return buffer_[index - base_]; }
  void compact();

  ChannelMap channels_;
  std::int64_t window_;
  std::deque<Entry> buffer_;
  std::uint64_t base_ = 0;   ///< stream index of buffer_.front()
  std::uint64_t total_ = 0;  ///< tags received
  std::uint64_t anchor_ = 0; ///< next anchor index
  std::array<std::deque<std::uint64_t>, 3> queues_;
  std::uint64_t last_timestamp_ = 0;
};

std::vector<TripleEvent> find_triples(std::span<const TimeTag> stream,
                                      const CoincidenceWindowSpec& spec,
                                      const ChannelMap& channels = ChannelMap::standard());

/// Two-fold counts split by port parity: AA (A/A or B/B) and AB (mixed).
struct PairCounts {
  std::uint64_t aa = 0;
  std::uint64_t ab = 0;
  std::uint64_t total() const { return aa + ab; }
  friend bool operator==(const PairCounts&, const PairCounts&) = default;
};

/// Signed window on dt = t(second group) - t(first group), in ticks, inclusive.
struct PairWindow {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

/// Streaming all-combinations two-fold counter for one group pair and several windows.
class PairCounter {
public:
  PairCounter(int first_group, int second_group, std::vector<PairWindow> windows,
              const ChannelMap& channels);

  void push(std::span<const TimeTag> chunk);
  const std::vector<PairCounts>& counts() const { return counts_; }

private:
  struct Recent {
    std::uint64_t t;
    qmodel::Port port;
  };

  ChannelMap channels_;
  int first_;
  int second_;
  std::vector<PairWindow> windows_;
  std::int64_t reach_ = 0;
  std::vector<PairCounts> counts_;
  std::deque<Recent> recent_first_;
  std::deque<Recent> recent_second_;
  std::uint64_t last_timestamp_ = 0;
  bool started_ = false;
};

/// Pairs of `group pair` with |dt| <= coarse window, keyed AA/AB.
PairCounts find_pairs(std::span<const TimeTag> stream, const CoincidenceWindowSpec& spec,
                      int first_group, int second_group,
                      const ChannelMap& channels = ChannelMap::standard());

/// Square grid over (dt12, dt13). Cell k covers [(k - 1/2) w, (k + 1/2) w) so the origin is
/// a cell centre.
class Histogram2D {
public:
  Histogram2D(double bin_width, double half_range);

  /// Signed cell offset of a time difference in seconds; 0 is the origin cell.
  int cell_of(double dt) const;
  int cell_of_ticks(std::int64_t dt) const;
  int bins_per_axis() const { return 2 * half_bins_ + 1; }
  int half_bins() const { return half_bins_; }
  double bin_width() const { return bin_width_; }
  /// Lower edge of axis cell `k` (0-based), seconds.
  double edge(int k) const;

  void add(const TripleEvent& event);
  /// Adds another histogram with identical binning.
  void merge(const Histogram2D& other);
  /// Count at signed cell offsets (c12, c13) from the origin cell; 0 outside the grid.
  std::uint64_t at(int c12, int c13) const;
  std::uint64_t total() const { return total_; }
  std::uint64_t sum() const;
  const std::vector<std::uint64_t>& counts() const { return counts_; }

private:
  double bin_width_;
  double bin_ticks_;
  int half_bins_ = 0;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

Histogram2D histogram2d(std::span<const TripleEvent> triples, const CoincidenceWindowSpec& spec);

struct ParityCounts {
  std::uint64_t aaa = 0;
  std::uint64_t bbb = 0;
  std::uint64_t total() const { return aaa + bbb; }
  friend bool operator==(const ParityCounts&, const ParityCounts&) = default;
};

/// Splits the triples falling in the central region of `hist` by parity set.
ParityCounts central_bin_counts(const Histogram2D& hist, std::span<const TripleEvent> triples,
                                int central_radius = 0);

/// Totals and maxima of each of the 7 peak regions, plus the two unreachable corners.
struct PeakSummary {
  std::array<std::uint64_t, qmodel::kPeakCount> total{}; ///< indexed by qmodel::Peak::index()
  std::array<std::uint64_t, qmodel::kPeakCount> max_cell{};
  std::array<std::uint64_t, 2> corner_total{};           ///< (+1,-1), (-1,+1)

  std::uint64_t central_total() const { return total[qmodel::Peak::central().index()]; }
  double side_total_mean() const;
  double side_max_mean() const;
};

/// `radius` is the half-size of each square peak region in cells.
PeakSummary summarize_peaks(const Histogram2D& hist, double tau, int radius);

/// signal / accidental; +infinity when no accidentals were seen.
double compute_car(double signal, double accidental_mean);

struct CarMeasurement {
  std::uint64_t signal = 0;
  std::array<std::uint64_t, 3> accidental{};
  double accidental_mean() const;
  double car() const { return compute_car(static_cast<double>(signal), accidental_mean()); }
};

/// Offsets (in units of tau) of the accidental windows used for CAR.
inline constexpr std::array<int, 3> kAccidentalOffsets{6, 9, 12};

/// 842-vs-infrared CAR: pairs of group 0 with groups 1 and 2 inside |dt| <= tau + slot/2,
/// against three windows of the same width displaced by 6, 9 and 12 tau.
class CarEstimator {
public:
  CarEstimator(double tau, double slot_width, const ChannelMap& channels);
  void push(std::span<const TimeTag> chunk);
  CarMeasurement result() const;

private:
  std::vector<PairCounter> counters_;
};

/// Everything the analyze stage reports for one stream.
struct StreamReport {
  std::array<std::uint64_t, kChannelCount> singles{};
  std::uint64_t tags = 0;
  std::uint64_t triples = 0;
  ParityCounts central;
  /// Pairs within the coarse window for (1,2), (1,3), (2,3).
  std::array<PairCounts, 3> pairs{};
  CarMeasurement car;
  std::uint64_t first_timestamp = 0;
  std::uint64_t last_timestamp = 0;
};

/// One-pass analyzer combining the triple finder, histogram, pair counters and CAR.
class StreamAnalyzer {
public:
  explicit StreamAnalyzer(const CoincidenceWindowSpec& spec, double car_slot_width = 3.125e-9,
                          const ChannelMap& channels = ChannelMap::standard(),
                          bool keep_triples = false);

  void push(std::span<const TimeTag> chunk);
  void finish();

  const StreamReport& report() const { return report_; }
  const Histogram2D& histogram() const { return hist_; }
  /// Only populated when constructed with keep_triples.
  const std::vector<TripleEvent>& triples() const { return kept_; }

private:
  void consume(const std::vector<TripleEvent>& fresh);

  CoincidenceWindowSpec spec_;
  ChannelMap channels_;
  TripleFinder finder_;
  Histogram2D hist_;
  std::vector<PairCounter> pairs_;
  CarEstimator car_;
  StreamReport report_;
  bool keep_;
  std::vector<TripleEvent> kept_;
  std::vector<TripleEvent> scratch_;
  bool finished_ = false;
};

} // namespace franson::engine
