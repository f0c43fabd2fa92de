#include <franson/coincidence.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace franson::engine {

namespace {

std::int64_t to_ticks_floor(double seconds) {
  return static_cast<std::int64_t>(std::floor(seconds_to_ticks(seconds) + 1e-9));
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

[[noreturn]] void unsorted(std::uint64_t index, std::uint64_t t, std::uint64_t prev) {
  throw std::invalid_argument("tag stream not sorted: record " + std::to_string(index) +
                              " has timestamp " + std::to_string(t) + " < previous " +
                              std::to_string(prev));
}

} // namespace

std::int64_t CoincidenceWindowSpec::window_ticks() const { return to_ticks_floor(coarse_window); }

void CoincidenceWindowSpec::validate() const {
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin width must be positive");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (!(bin_width < tau)) throw std::invalid_argument("bin width must be smaller than tau");
  if (!(coarse_window >= 2.0 * tau + bin_width))
    throw std::invalid_argument("coarse window must be at least 2 tau + one bin");
  if (central_radius < 0) throw std::invalid_argument("central radius must be >= 0");
}

// ---------------------------------------------------------------------------------------------

TripleFinder::TripleFinder(const CoincidenceWindowSpec& spec, const ChannelMap& channels)
    : channels_(channels), window_(spec.window_ticks()) {
  spec.validate();
  channels_.validate();
}

void TripleFinder::push(std::span<const TimeTag> chunk, std::vector<TripleEvent>& out) {
  for (const auto& tag : chunk) {
    const auto& role = channels_.role(tag.channel);
    if (total_ > 0 && tag.timestamp < last_timestamp_) unsorted(total_, tag.timestamp, last_timestamp_);
    last_timestamp_ = tag.timestamp;
    buffer_.push_back({tag, role.group, role.port, false});
    queues_[role.group].push_back(total_);
    ++total_;
    while (anchor_ < total_ &&
           tag.timestamp > at(anchor_).tag.timestamp + static_cast<std::uint64_t>(window_))
      process_anchor(out);
  }
  compact();
}

void TripleFinder::finish(std::vector<TripleEvent>& out) {
  while (anchor_ < total_) process_anchor(out);
  compact();
}

void TripleFinder::process_anchor(std::vector<TripleEvent>& out) {
  const std::uint64_t idx = anchor_++;
  Entry& anchor = at(idx);
  if (anchor.used) return;
  for (auto& q : queues_)
    while (!q.empty() && (q.front() <= idx || at(q.front()).used)) q.pop_front();

  std::array<std::uint64_t, 3> member{};
  member[anchor.group] = idx;
  for (int g = 0; g < 3; ++g) {
    if (g == anchor.group) continue;
    const auto& q = queues_[g];
    if (q.empty()) return;
    const auto& cand = at(q.front());
    if (cand.tag.timestamp - anchor.tag.timestamp > static_cast<std::uint64_t>(window_)) return;
    member[g] = q.front();
  }

  TripleEvent ev;
  for (int g = 0; g < 3; ++g) {
    Entry& e = at(member[g]);
    e.used = true;
    ev.tags[g] = e.tag;
    ev.index[g] = member[g];
    ev.ports.ports[g] = e.port;
    if (g != anchor.group) queues_[g].pop_front();
  }
  ev.dt12_ticks = static_cast<std::int64_t>(ev.tags[1].timestamp) -
                  static_cast<std::int64_t>(ev.tags[0].timestamp);
  ev.dt13_ticks = static_cast<std::int64_t>(ev.tags[2].timestamp) -
                  static_cast<std::int64_t>(ev.tags[0].timestamp);
  ev.parity = qmodel::parity_set(ev.ports);
  out.push_back(ev);
}

void TripleFinder::compact() {
  while (!buffer_.empty() && base_ < anchor_) {
    buffer_.pop_front();
    ++base_;
  }
}

std::vector<TripleEvent> find_triples(std::span<const TimeTag> stream,
                                      const CoincidenceWindowSpec& spec,
                                      const ChannelMap& channels) {
  TripleFinder finder(spec, channels);
  std::vector<TripleEvent> out;
  finder.push(stream, out);
  finder.finish(out);
  return out;
}

// ---------------------------------------------------------------------------------------------

PairCounter::PairCounter(int first_group, int second_group, std::vector<PairWindow> windows,
                         const ChannelMap& channels)
    : channels_(channels), first_(first_group), second_(second_group),
      windows_(std::move(windows)), counts_(windows_.size()) {
  if (first_ == second_ || first_ < 0 || first_ > 2 || second_ < 0 || second_ > 2)
    throw std::invalid_argument("pair counter needs two distinct photon groups");
  for (const auto& w : windows_) {
    if (w.lo > w.hi) throw std::invalid_argument("pair window lo > hi");
    reach_ = std::max({reach_, std::abs(w.lo), std::abs(w.hi)});
  }
}

void PairCounter::push(std::span<const TimeTag> chunk) {
  auto tally = [&](std::int64_t dt, qmodel::Port a, qmodel::Port b) {
    for (std::size_t w = 0; w < windows_.size(); ++w) {
      if (dt < windows_[w].lo || dt > windows_[w].hi) continue;
      if (a == b)
        ++counts_[w].aa;
      else
        ++counts_[w].ab;
    }
  };
  auto evict = [&](std::deque<Recent>& d, std::uint64_t now) {
    while (!d.empty() && now - d.front().t > static_cast<std::uint64_t>(reach_)) d.pop_front();
  };

  for (const auto& tag : chunk) {
    const auto& role = channels_.role(tag.channel);
    if (started_ && tag.timestamp < last_timestamp_) unsorted(0, tag.timestamp, last_timestamp_);
    started_ = true;
    last_timestamp_ = tag.timestamp;
    if (role.group != first_ && role.group != second_) continue;
    evict(recent_first_, tag.timestamp);
    evict(recent_second_, tag.timestamp);
    if (role.group == second_) {
      for (const auto& y : recent_first_)
        tally(static_cast<std::int64_t>(tag.timestamp - y.t), y.port, role.port);
      recent_second_.push_back({tag.timestamp, role.port});
    } else {
      for (const auto& y : recent_second_)
        tally(-static_cast<std::int64_t>(tag.timestamp - y.t), role.port, y.port);
      recent_first_.push_back({tag.timestamp, role.port});
    }
  }
}

PairCounts find_pairs(std::span<const TimeTag> stream, const CoincidenceWindowSpec& spec,
                      int first_group, int second_group, const ChannelMap& channels) {
  const auto w = spec.window_ticks();
  PairCounter counter(first_group, second_group, {{-w, w}}, channels);
  counter.push(stream);
  return counter.counts().front();
}

// ---------------------------------------------------------------------------------------------

namespace {

double snapped_ticks(double seconds) {
  const double t = seconds_to_ticks(seconds);
  const double r = std::round(t);
  return std::abs(t - r) < 1e-6 * std::max(1.0, r) ? r : t;
}

} // namespace

Histogram2D::Histogram2D(double bin_width, double half_range)
    : bin_width_(bin_width), bin_ticks_(snapped_ticks(bin_width)) {
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin width must be positive");
  half_bins_ = static_cast<int>(std::ceil(half_range / bin_width - 1e-9));
  half_bins_ = std::max(half_bins_, 0);
  counts_.assign(static_cast<std::size_t>(bins_per_axis()) * bins_per_axis(), 0);
}

int Histogram2D::cell_of_ticks(std::int64_t dt) const {
  if (bin_ticks_ == std::round(bin_ticks_)) {
    const auto b = static_cast<std::int64_t>(bin_ticks_);
    return static_cast<int>(floor_div(2 * dt + b, 2 * b));
  }
  return static_cast<int>(std::floor((static_cast<double>(dt) + 0.5 * bin_ticks_) / bin_ticks_));
}

int Histogram2D::cell_of(double dt) const {
  const double ticks = seconds_to_ticks(dt);
  const double whole = std::round(ticks);
  if (std::abs(ticks - whole) < 1e-6) return cell_of_ticks(static_cast<std::int64_t>(whole));
  return static_cast<int>(std::floor((ticks + 0.5 * bin_ticks_) / bin_ticks_));
}

double Histogram2D::edge(int k) const { return (k - half_bins_ - 0.5) * bin_width_; }

void Histogram2D::add(const TripleEvent& event) {
  ++total_;
  const int c12 = cell_of_ticks(event.dt12_ticks);
  const int c13 = cell_of_ticks(event.dt13_ticks);
  if (std::abs(c12) > half_bins_ || std::abs(c13) > half_bins_) return;
  counts_[static_cast<std::size_t>(c12 + half_bins_) * bins_per_axis() + (c13 + half_bins_)]++;
}

void Histogram2D::merge(const Histogram2D& other) {
  if (other.bin_ticks_ != bin_ticks_ || other.half_bins_ != half_bins_)
    throw std::invalid_argument("cannot merge histograms with different binning");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
}

std::uint64_t Histogram2D::at(int c12, int c13) const {
  if (std::abs(c12) > half_bins_ || std::abs(c13) > half_bins_) return 0;
  return counts_[static_cast<std::size_t>(c12 + half_bins_) * bins_per_axis() + (c13 + half_bins_)];
}

std::uint64_t Histogram2D::sum() const {
  std::uint64_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

Histogram2D histogram2d(std::span<const TripleEvent> triples, const CoincidenceWindowSpec& spec) {
  if (!(spec.bin_width > 0.0)) throw std::invalid_argument("bin width must be positive");
  Histogram2D h(spec.bin_width, ticks_to_seconds(static_cast<double>(spec.window_ticks())));
  for (const auto& t : triples) h.add(t);
  return h;
}

ParityCounts central_bin_counts(const Histogram2D& hist, std::span<const TripleEvent> triples,
                                int central_radius) {
  ParityCounts c;
  for (const auto& t : triples) {
    if (std::abs(hist.cell_of_ticks(t.dt12_ticks)) > central_radius ||
        std::abs(hist.cell_of_ticks(t.dt13_ticks)) > central_radius)
      continue;
    if (t.parity == qmodel::ParitySet::AAA)
      ++c.aaa;
    else
      ++c.bbb;
  }
  return c;
}

double PeakSummary::side_total_mean() const {
  double s = 0.0;
  for (int i = 0; i < qmodel::kPeakCount; ++i)
    if (i != qmodel::Peak::central().index()) s += static_cast<double>(total[i]);
  return s / 6.0;
}

double PeakSummary::side_max_mean() const {
  double s = 0.0;
  for (int i = 0; i < qmodel::kPeakCount; ++i)
    if (i != qmodel::Peak::central().index()) s += static_cast<double>(max_cell[i]);
  return s / 6.0;
}

PeakSummary summarize_peaks(const Histogram2D& hist, double tau, int radius) {
  PeakSummary s;
  const int step = hist.cell_of(tau);
  auto region = [&](int d12, int d13, std::uint64_t& total, std::uint64_t* max_cell) {
    for (int a = -radius; a <= radius; ++a)
      for (int b = -radius; b <= radius; ++b) {
        const auto c = hist.at(d12 * step + a, d13 * step + b);
        total += c;
        if (max_cell) *max_cell = std::max(*max_cell, c);
      }
  };
  for (int i = 0; i < qmodel::kPeakCount; ++i) {
    const auto peak = qmodel::Peak::from_index(i);
    region(peak.d12(), peak.d13(), s.total[i], &s.max_cell[i]);
  }
  region(1, -1, s.corner_total[0], nullptr);
  region(-1, 1, s.corner_total[1], nullptr);
  return s;
}

double compute_car(double signal, double accidental_mean) {
  if (!(accidental_mean > 0.0)) return std::numeric_limits<double>::infinity();
  return signal / accidental_mean;
}

double CarMeasurement::accidental_mean() const {
  double s = 0.0;
  for (auto a : accidental) s += static_cast<double>(a);
  return s / static_cast<double>(accidental.size());
}

CarEstimator::CarEstimator(double tau, double slot_width, const ChannelMap& channels) {
  if (!(tau > 0.0) || !(slot_width > 0.0))
    throw std::invalid_argument("CAR needs positive tau and slot width");
  const std::int64_t half = to_ticks_floor(tau + 0.5 * slot_width);
  std::vector<PairWindow> windows{{-half, half}};
  for (int k : kAccidentalOffsets) {
    const auto d = static_cast<std::int64_t>(std::llround(seconds_to_ticks(k * tau)));
    windows.push_back({d - half, d + half});
  }
  counters_.emplace_back(0, 1, windows, channels);
  counters_.emplace_back(0, 2, windows, channels);
}

void CarEstimator::push(std::span<const TimeTag> chunk) {
  for (auto& c : counters_) c.push(chunk);
}

CarMeasurement CarEstimator::result() const {
  CarMeasurement m;
  for (const auto& c : counters_) {
    const auto& counts = c.counts();
    m.signal += counts[0].total();
    for (std::size_t k = 0; k < m.accidental.size(); ++k) m.accidental[k] += counts[k + 1].total();
  }
  return m;
}

// ---------------------------------------------------------------------------------------------

StreamAnalyzer::StreamAnalyzer(const CoincidenceWindowSpec& spec, double car_slot_width,
                               const ChannelMap& channels, bool keep_triples)
    : spec_(spec), channels_(channels), finder_(spec, channels),
      hist_(spec.bin_width, ticks_to_seconds(static_cast<double>(spec.window_ticks()))),
      car_(spec.tau, car_slot_width, channels), keep_(keep_triples) {
  const auto w = spec.window_ticks();
  for (auto [a, b] : {std::pair{0, 1}, std::pair{0, 2}, std::pair{1, 2}})
    pairs_.emplace_back(a, b, std::vector<PairWindow>{{-w, w}}, channels_);
}

void StreamAnalyzer::push(std::span<const TimeTag> chunk) {
  if (finished_) throw std::logic_error("StreamAnalyzer already finished");
  if (chunk.empty()) return;
  scratch_.clear();
  finder_.push(chunk, scratch_);
  for (const auto& tag : chunk) ++report_.singles[tag.channel];
  if (report_.tags == 0) report_.first_timestamp = chunk.front().timestamp;
  report_.last_timestamp = chunk.back().timestamp;
  report_.tags += chunk.size();
  for (auto& p : pairs_) p.push(chunk);
  car_.push(chunk);
  consume(scratch_);
}

void StreamAnalyzer::finish() {
  if (finished_) return;
  scratch_.clear();
  finder_.finish(scratch_);
  consume(scratch_);
  for (std::size_t i = 0; i < pairs_.size(); ++i) report_.pairs[i] = pairs_[i].counts().front();
  report_.car = car_.result();
  finished_ = true;
}

void StreamAnalyzer::consume(const std::vector<TripleEvent>& fresh) {
  for (const auto& t : fresh) {
    hist_.add(t);
    ++report_.triples;
    const int c12 = hist_.cell_of_ticks(t.dt12_ticks);
    const int c13 = hist_.cell_of_ticks(t.dt13_ticks);
    if (std::abs(c12) <= spec_.central_radius && std::abs(c13) <= spec_.central_radius) {
      if (t.parity == qmodel::ParitySet::AAA)
        ++report_.central.aaa;
      else
        ++report_.central.bbb;
    }
  }
  if (keep_) kept_.insert(kept_.end(), fresh.begin(), fresh.end());
}

} // namespace franson::engine
