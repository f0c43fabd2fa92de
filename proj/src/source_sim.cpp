#include <franson/source_sim.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace franson::sim {

namespace {

constexpr double kFwhmToSigma = 1.0 / 2.3548200450309493; // 1 / (2 sqrt(2 ln 2))
constexpr double kJitterTruncation = 5.0;                 // in sigma

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

/// Probability that a photon of `group` is detected (any channel) per emitted triplet.
double group_detection(const ExperimentConfig& c, int group) {
  const auto arms = c.interferometer.arms();
  const double through = 0.25 * (arms.of(group, qmodel::Path::Short) +
                                 arms.of(group, qmodel::Path::Long));
  return through * (c.detector.efficiency[2 * group] + c.detector.efficiency[2 * group + 1]);
}

/// P(|dt| <= h) for the true 842-vs-group two-fold given path delays and jitter.
double pair_capture(const ExperimentConfig& c, int group, double half_width) {
  const auto arms = c.interferometer.arms();
  const double tau = c.interferometer.tau;
  const double sigma = c.detector.jitter_fwhm * kFwhmToSigma * std::numbers::sqrt2;
  auto path_weights = [&](int n) {
    const double s = arms.of(n, qmodel::Path::Short);
    const double l = arms.of(n, qmodel::Path::Long);
    const double tot = s + l;
    return tot > 0.0 ? std::array<double, 2>{s / tot, l / tot} : std::array<double, 2>{0.0, 0.0};
  };
  const auto w0 = path_weights(0);
  const auto wg = path_weights(group);
  double capture = 0.0;
  for (int p0 = 0; p0 < 2; ++p0)
    for (int pg = 0; pg < 2; ++pg) {
      const double mean = (pg - p0) * tau;
      double inside = 1.0;
      if (sigma > 0.0) {
        inside = 0.5 * (std::erf((half_width - mean) / (sigma * std::numbers::sqrt2)) -
                        std::erf((-half_width - mean) / (sigma * std::numbers::sqrt2)));
      } else {
        inside = std::abs(mean) <= half_width ? 1.0 : 0.0;
      }
      capture += w0[p0] * wg[pg] * inside;
    }
  return capture;
}

} // namespace

qmodel::ArmTransmission InterferometerSetting::arms() const {
  qmodel::ArmTransmission a;
  for (int n = 0; n < 3; ++n)
    for (int p = 0; p < 2; ++p) a.t[n][p] = blocked[n][p] ? 0.0 : transmission[n][p];
  return a;
}

std::vector<qmodel::PathChoice> InterferometerSetting::surviving_paths() const {
  std::vector<qmodel::PathChoice> out;
  for (unsigned i = 0; i < qmodel::kPathCombinations; ++i) {
    const auto paths = qmodel::PathChoice::from_index(i);
    bool open = true;
    for (int n = 0; n < 3; ++n) open = open && !blocked[n][static_cast<int>(paths.paths[n])];
    if (open) out.push_back(paths);
  }
  return out;
}

qmodel::InterferenceWeights ExperimentConfig::weights() const {
  auto coherence = source.coherence;
  auto w = qmodel::weights_from(coherence, source.coherence_model);
  if (source.triple_weight_override >= 0.0) w.triple = source.triple_weight_override;
  return w;
}

void ExperimentConfig::validate() const {
  require(source.triplet_rate >= 0.0, "source.triplet_rate must be >= 0");
  require(source.pair_rate >= 0.0, "source.pair_rate must be >= 0");
  require(source.car_window > 0.0, "source.car_window must be > 0");
  require(source.triple_weight_override <= 1.0, "source.triple_weight_override must be <= 1");
  source.coherence.validate();
  for (int c = 0; c < kChannelCount; ++c) {
    require(in_unit(detector.efficiency[c]), "detector efficiency must lie in [0, 1]");
    require(detector.dark_rate[c] >= 0.0, "detector dark rate must be >= 0");
  }
  require(detector.jitter_fwhm >= 0.0, "detector.jitter_fwhm must be >= 0");
  require(detector.dead_time >= 0.0, "detector.dead_time must be >= 0");
  require(interferometer.tau > 0.0, "interferometer.tau must be > 0");
  require(detector.jitter_fwhm < interferometer.tau,
          "detector jitter FWHM must be smaller than the path delay tau");
  for (const auto& photon : interferometer.transmission)
    for (double t : photon) require(in_unit(t), "arm transmission must lie in [0, 1]");
  for (double p : interferometer.phase) require(std::isfinite(p), "phases must be finite");
}

BlockedPreset parse_blocked_preset(std::string_view name) {
  for (auto p : all_blocked_presets())
    if (to_string(p) == name) return p;
  throw std::invalid_argument("unknown blocked-path preset '" + std::string(name) + "'");
}

std::string_view to_string(BlockedPreset preset) {
  switch (preset) {
  case BlockedPreset::AllOpen: return "all-open";
  case BlockedPreset::Block842Long: return "block-842-long";
  case BlockedPreset::Block842And1530Long: return "block-842+1530-long";
  case BlockedPreset::BlockAllShort: return "block-all-short";
  }
  return "?";
}

const std::array<BlockedPreset, 4>& all_blocked_presets() {
  static const std::array<BlockedPreset, 4> kAll{
      BlockedPreset::AllOpen, BlockedPreset::Block842Long, BlockedPreset::Block842And1530Long,
      BlockedPreset::BlockAllShort};
  return kAll;
}

InterferometerSetting blocked_scenario(BlockedPreset preset, InterferometerSetting base) {
  base.blocked = {};
  constexpr int kShort = 0;
  constexpr int kLong = 1;
  switch (preset) {
  case BlockedPreset::AllOpen: break;
  case BlockedPreset::Block842Long: base.blocked[kGroup842][kLong] = true; break;
  case BlockedPreset::Block842And1530Long:
    base.blocked[kGroup842][kLong] = true;
    base.blocked[kGroup1530][kLong] = true;
    break;
  case BlockedPreset::BlockAllShort:
    for (auto& photon : base.blocked) photon[kShort] = true;
    break;
  }
  return base;
}

InterferometerSetting blocked_scenario(std::string_view name, InterferometerSetting base) {
  return blocked_scenario(parse_blocked_preset(name), base);
}

RateModel rate_model(const ExperimentConfig& config) {
  config.validate();
  RateModel m;
  const auto arms = config.interferometer.arms();
  for (int g = 0; g < 3; ++g) m.group_detection[g] = group_detection(config, g);

  auto singles_for = [&](double extra) {
    std::array<double, kChannelCount> s{};
    for (int g = 0; g < 3; ++g) {
      const double through =
          0.25 * (arms.of(g, qmodel::Path::Short) + arms.of(g, qmodel::Path::Long));
      double emitted = config.source.triplet_rate;
      if (g == kGroup842) emitted += config.source.pair_rate + extra;
      for (int port = 0; port < 2; ++port) {
        const int ch = 2 * g + port;
        s[ch] = emitted * through * config.detector.efficiency[ch] + config.detector.dark_rate[ch];
      }
    }
    return s;
  };

  const double half = config.interferometer.tau + 0.5 * config.source.car_window;
  m.car_signal_half_width = half;
  const double window = 2.0 * half;
  double true_rate = 0.0;
  for (int g : {kGroup1530, kGroup1570})
    true_rate += config.source.triplet_rate * m.group_detection[kGroup842] * m.group_detection[g] *
                 pair_capture(config, g, half);

  auto car_of = [&](const std::array<double, kChannelCount>& s) {
    const double r842 = s[0] + s[1];
    const double rir = s[2] + s[3] + s[4] + s[5];
    const double acc = r842 * rir * window;
    return acc > 0.0 ? (true_rate + acc) / acc : std::numeric_limits<double>::infinity();
  };

  const auto base = singles_for(0.0);
  const double target = config.source.car_target;
  double extra = 0.0;
  if (target > 1.0) {
    const double d842 = 0.25 *
                        (arms.of(kGroup842, qmodel::Path::Short) +
                         arms.of(kGroup842, qmodel::Path::Long)) *
                        (config.detector.efficiency[0] + config.detector.efficiency[1]);
    const double rir = base[2] + base[3] + base[4] + base[5];
    const double r842_base = base[0] + base[1];
    if (rir > 0.0 && d842 > 0.0 && true_rate > 0.0) {
      const double r842_needed = true_rate / ((target - 1.0) * rir * window);
      if (r842_needed >= r842_base) {
        extra = (r842_needed - r842_base) / d842;
      } else {
        m.car_reachable = false;
      }
    } else {
      m.car_reachable = false;
    }
  }
  m.extra_842_rate = extra;
  m.singles = singles_for(extra);
  m.expected_car = car_of(m.singles);
  return m;
}

std::array<double, qmodel::kPortCombinations>
central_port_distribution(const qmodel::PhaseConfig& phases, const qmodel::InterferenceWeights& w,
                          const qmodel::ArmTransmission& arms) {
  std::array<double, qmodel::kPortCombinations> p{};
  double total = 0.0;
  for (unsigned q = 0; q < qmodel::kPortCombinations; ++q) {
    p[q] = qmodel::triple_bin_probability(qmodel::Peak::central(), qmodel::PortChoice::from_index(q),
                                          phases, w, arms);
    total += p[q];
  }
  if (total <= 0.0) {
    p.fill(1.0 / qmodel::kPortCombinations);
    return p;
  }
  for (auto& v : p) v /= total;
  return p;
}

TagGenerator::TagGenerator(const ExperimentConfig& config, double duration, std::uint64_t seed)
    : config_(config), seed_(seed) {
  config_.validate();
  if (!(duration > 0.0)) throw std::invalid_argument("run duration must be positive");
  summary_.duration = duration;
  summary_.rates = rate_model(config_);
  end_tick_ = static_cast<std::uint64_t>(std::ceil(seconds_to_ticks(duration)));
  slice_count_ = (end_tick_ + kSliceTicks - 1) / kSliceTicks;

  arms_ = config_.interferometer.arms();
  const auto dist =
      central_port_distribution(config_.interferometer.phases(), config_.weights(), arms_);
  double acc = 0.0;
  for (std::size_t q = 0; q < dist.size(); ++q) {
    acc += dist[q];
    central_port_cdf_[q] = acc;
  }
  central_port_cdf_.back() = 1.0;
  tau_ticks_ = seconds_to_ticks(config_.interferometer.tau);
  sigma_ticks_ = seconds_to_ticks(config_.detector.jitter_fwhm * kFwhmToSigma);
  latency_ticks_ = kJitterTruncation * sigma_ticks_;
  dead_ticks_ = static_cast<std::uint64_t>(std::llround(seconds_to_ticks(config_.detector.dead_time)));
  pair_842_rate_ = config_.source.pair_rate + summary_.rates.extra_842_rate;
}

void TagGenerator::emit_photon(std::mt19937_64& rng, int group, qmodel::Path path,
                               qmodel::Port port, double emission_tick, TagStream& fresh) {
  const int channel = channels_.channel_of(group, port);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (!(unit(rng) < config_.detector.efficiency[channel])) return;
  double jitter = 0.0;
  if (sigma_ticks_ > 0.0) {
    std::normal_distribution<double> normal(0.0, sigma_ticks_);
    do {
      jitter = normal(rng);
    } while (std::abs(jitter) > kJitterTruncation * sigma_ticks_);
  }
  const double t = emission_tick + (path == qmodel::Path::Long ? tau_ticks_ : 0.0) +
                   latency_ticks_ + jitter;
  fresh.push_back({static_cast<std::uint8_t>(channel), static_cast<std::uint64_t>(std::llround(t))});
}

void TagGenerator::generate_slice(std::uint64_t slice, TagStream& fresh) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(slice), static_cast<std::uint32_t>(slice >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::uint64_t start = slice * kSliceTicks;
  const std::uint64_t stop = std::min(end_tick_, start + kSliceTicks);
  const double span_ticks = static_cast<double>(stop - start);
  const double span_seconds = ticks_to_seconds(span_ticks);
  auto draw_count = [&](double rate) -> std::uint64_t {
    if (rate <= 0.0) return 0;
    std::poisson_distribution<std::uint64_t> poisson(rate * span_seconds);
    return poisson(rng);
  };
  auto arm_of = [&](double u) { return u < 0.5 ? qmodel::Path::Short : qmodel::Path::Long; };

  const std::uint64_t n_triplets = draw_count(config_.source.triplet_rate);
  summary_.triplets_emitted += n_triplets;
  for (std::uint64_t k = 0; k < n_triplets; ++k) {
    const double t0 = static_cast<double>(start) + unit(rng) * span_ticks;
    std::array<qmodel::Path, 3> paths{};
    bool all_survive = true;
    std::array<bool, 3> survives{};
    for (int n = 0; n < 3; ++n) {
      paths[n] = arm_of(unit(rng));
      survives[n] = unit(rng) < arms_.of(n, paths[n]);
      all_survive = all_survive && survives[n];
    }
    const bool central = paths[0] == paths[1] && paths[1] == paths[2];
    qmodel::PortChoice ports;
    if (all_survive && central) {
      const double u = unit(rng);
      const auto it = std::upper_bound(central_port_cdf_.begin(), central_port_cdf_.end(), u);
      const auto q = static_cast<unsigned>(std::min<std::ptrdiff_t>(
          it - central_port_cdf_.begin(), qmodel::kPortCombinations - 1));
      ports = qmodel::PortChoice::from_index(q);
    } else {
      for (int n = 0; n < 3; ++n) ports.ports[n] = unit(rng) < 0.5 ? qmodel::Port::A : qmodel::Port::B;
    }
    for (int n = 0; n < 3; ++n)
      if (survives[n]) emit_photon(rng, n, paths[n], ports.ports[n], t0, fresh);
  }

  const std::uint64_t n_pairs = draw_count(pair_842_rate_);
  for (std::uint64_t k = 0; k < n_pairs; ++k) {
    const double t0 = static_cast<double>(start) + unit(rng) * span_ticks;
    const auto path = arm_of(unit(rng));
    const bool survives = unit(rng) < arms_.of(kGroup842, path);
    const auto port = unit(rng) < 0.5 ? qmodel::Port::A : qmodel::Port::B;
    if (survives) emit_photon(rng, kGroup842, path, port, t0, fresh);
  }

  for (int ch = 0; ch < kChannelCount; ++ch) {
    const std::uint64_t n = draw_count(config_.detector.dark_rate[ch]);
    for (std::uint64_t k = 0; k < n; ++k) {
      const auto t = start + static_cast<std::uint64_t>(unit(rng) * span_ticks);
      fresh.push_back({static_cast<std::uint8_t>(ch), std::min(t, stop - 1)});
    }
  }
}

bool TagGenerator::next(TagStream& out) {
  out.clear();
  if (next_slice_ >= slice_count_ && carry_.empty()) return false;

  TagStream block;
  block.swap(carry_);
  if (next_slice_ < slice_count_) generate_slice(next_slice_++, block);

  auto by_time = [](const TimeTag& a, const TimeTag& b) {
    return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.channel < b.channel;
  };
  std::sort(block.begin(), block.end(), by_time);

  // Tags beyond the generated horizon may still be joined by later slices.
  const bool last = next_slice_ >= slice_count_;
  const std::uint64_t horizon = last ? UINT64_MAX : next_slice_ * kSliceTicks;
  const auto split = std::lower_bound(block.begin(), block.end(), horizon,
                                      [](const TimeTag& t, std::uint64_t h) { return t.timestamp < h; });
  carry_.assign(split, block.end());
  block.erase(split, block.end());

  out.reserve(block.size());
  for (const auto& tag : block) {
    if (dead_ticks_ > 0) {
      if (has_last_[tag.channel] && tag.timestamp - last_kept_[tag.channel] < dead_ticks_) continue;
      has_last_[tag.channel] = true;
      last_kept_[tag.channel] = tag.timestamp;
    }
    ++summary_.singles[tag.channel];
    out.push_back(tag);
  }
  return true;
}

TagStream simulate_run(const ExperimentConfig& config, double duration, std::uint64_t seed,
                       RunSummary* summary) {
  TagGenerator gen(config, duration, seed);
  TagStream all;
  TagStream block;
  while (gen.next(block)) all.insert(all.end(), block.begin(), block.end());
  if (summary) *summary = gen.summary();
  return all;
}

} // namespace franson::sim
