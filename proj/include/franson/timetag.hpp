#pragma once

#include <franson/qmodel.hpp>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace franson {

/// Tagger resolution in picoseconds.
inline constexpr std::uint32_t kTaggerResolutionPs = 78;
inline constexpr double kTickSeconds = kTaggerResolutionPs * 1e-12;
inline constexpr int kChannelCount = 6;

/// One detection event. Channels 0..5 are A1, B1, A2, B2, A3, B3.
struct TimeTag {
  std::uint8_t channel = 0;
  std::uint64_t timestamp = 0; ///< tagger ticks

  friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

using TagStream = std::vector<TimeTag>;

inline double ticks_to_seconds(double ticks) { return ticks * kTickSeconds; }
inline double seconds_to_ticks(double seconds) { return seconds / kTickSeconds; }

/// Assignment of a tagger channel to a photon group (0..2) and output port.
struct ChannelRole {
  int group = -1;
  qmodel::Port port = qmodel::Port::A;
  bool valid() const { return group >= 0; }
};

/// Maps tagger channels onto photon groups. Unmapped channels are rejected by the engine.
class ChannelMap {
public:
  /// A1,B1,A2,B2,A3,B3 on channels 0..5.
  static ChannelMap standard();

  void assign(std::uint8_t channel, int group, qmodel::Port port);
  const ChannelRole& role(std::uint8_t channel) const;
  bool contains(std::uint8_t channel) const { return channel < roles_.size() && roles_[channel].valid(); }
  /// Channel carrying (group, port), or -1.
  int channel_of(int group, qmodel::Port port) const;
  /// Throws std::invalid_argument unless each of the three groups has a channel.
  void validate() const;

private:
  std::array<ChannelRole, 256> roles_{};
};

/// Throws std::invalid_argument with the first offending index when not sorted by timestamp.
void require_sorted(std::span<const TimeTag> tags);

} // namespace franson
