#include <franson/timetag.hpp>

#include <stdexcept>
#include <string>

namespace franson {

ChannelMap ChannelMap::standard() {
  ChannelMap map;
  for (int group = 0; group < 3; ++group) {
    map.assign(static_cast<std::uint8_t>(2 * group), group, qmodel::Port::A);
    map.assign(static_cast<std::uint8_t>(2 * group + 1), group, qmodel::Port::B);
  }
  return map;
}

void ChannelMap::assign(std::uint8_t channel, int group, qmodel::Port port) {
  if (group < 0 || group > 2) throw std::invalid_argument("photon group must be 0, 1 or 2");
  roles_[channel] = ChannelRole{group, port};
}

const ChannelRole& ChannelMap::role(std::uint8_t channel) const {
  const auto& r = roles_[channel];
  if (!r.valid()) throw std::invalid_argument("unknown channel id " + std::to_string(channel));
  return r;
}

int ChannelMap::channel_of(int group, qmodel::Port port) const {
  for (std::size_t c = 0; c < roles_.size(); ++c)
    if (roles_[c].valid() && roles_[c].group == group && roles_[c].port == port)
      return static_cast<int>(c);
  return -1;
}

void ChannelMap::validate() const {
  std::array<bool, 3> seen{};
  for (const auto& r : roles_)
    if (r.valid()) seen[r.group] = true;
  for (int g = 0; g < 3; ++g)
    if (!seen[g])
      throw std::invalid_argument("photon group " + std::to_string(g + 1) + " has no channel");
}

void require_sorted(std::span<const TimeTag> tags) {
  for (std::size_t i = 1; i < tags.size(); ++i) {
    if (tags[i].timestamp < tags[i - 1].timestamp)
      throw std::invalid_argument("tag stream not sorted: record " + std::to_string(i) + " (t=" +
                                  std::to_string(tags[i].timestamp) + ") precedes record " +
                                  std::to_string(i - 1) + " (t=" +
                                  std::to_string(tags[i - 1].timestamp) + ")");
  }
}

} // namespace franson
