#include <franson/pipeline.hpp>
#include <franson/seeding.hpp>
#include <franson/tagfile.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace franson::pipeline {

using nlohmann::json;

namespace {

constexpr std::size_t kChunk = 1 << 16;
/// Seed stream index reserved for the Monte Carlo visibility errors of a scan.
constexpr std::uint64_t kResampleStream = 0xE5;

constexpr std::array<std::pair<int, int>, 3> kPairGroups{{{0, 1}, {0, 2}, {1, 2}}};

engine::Histogram2D empty_histogram(const AppConfig& c) {
  return engine::Histogram2D(c.window.bin_width,
                             ticks_to_seconds(static_cast<double>(c.window.window_ticks())));
}

AnalyzeResult finish_result(engine::StreamAnalyzer& an, const AppConfig& config) {
  an.finish();
  return {an.report(), an.histogram(),
          engine::summarize_peaks(an.histogram(), config.window.tau, config.window.central_radius)};
}

std::string pair_name(int k) {
  return std::to_string(kPairGroups[k].first + 1) + std::to_string(kPairGroups[k].second + 1);
}

double json_number(double v) { return std::isfinite(v) ? v : -1.0; }

void build_flatness(ScanResult& r) {
  if (!r.fit) return;
  const double b = r.fit->bbb.b;
  auto add = [&](std::string name, auto&& value_of) {
    std::vector<analysis::FringePoint> pts;
    double mean = 0.0;
    for (const auto& s : r.settings) {
      const double v = static_cast<double>(value_of(s.report));
      pts.push_back({s.phase, v});
      mean += v;
    }
    mean /= static_cast<double>(pts.size());
    r.flatness.push_back({std::move(name), mean, analysis::modulation_at(pts, b)});
  };
  for (int k = 0; k < 3; ++k) {
    add("pairs_" + pair_name(k) + "_aa", [k](const engine::StreamReport& rep) { return rep.pairs[k].aa; });
    add("pairs_" + pair_name(k) + "_ab", [k](const engine::StreamReport& rep) { return rep.pairs[k].ab; });
  }
  add("singles_842", [](const engine::StreamReport& rep) { return rep.singles[0] + rep.singles[1]; });
  for (int ch = 0; ch < kChannelCount; ++ch)
    add("singles_ch" + std::to_string(ch), [ch](const engine::StreamReport& rep) { return rep.singles[ch]; });
}

ScanResult execute(const AppConfig& config, std::string label) {
  config.validate();
  ScanResult r;
  r.label = std::move(label);
  r.photon = config.scan.photon;
  r.histogram = empty_histogram(config);
  const auto settings = config.scan_settings();
  const double dwell = config.scan.effective_dwell();
  for (std::size_t i = 0; i < settings.size(); ++i) {
    auto experiment = config.experiment;
    experiment.interferometer.phase[config.scan.photon] += settings[i].phase;
    SettingResult s;
    s.index = static_cast<int>(i);
    s.angle = settings[i].angle;
    s.phase = settings[i].phase;
    s.seed = derive_seed(config.scan.seed, i);
    s.duration = dwell;
    sim::RunSummary summary;
    auto res = simulate_and_analyze(config, experiment, dwell, s.seed, &summary);
    s.triplets_emitted = summary.triplets_emitted;
    s.report = res.report;
    r.histogram.merge(res.histogram);
    for (int k = 0; k < 3; ++k) r.car.accidental[k] += res.report.car.accidental[k];
    r.car.signal += res.report.car.signal;
    r.aaa.push_back({s.phase, static_cast<double>(s.report.central.aaa)});
    r.bbb.push_back({s.phase, static_cast<double>(s.report.central.bbb)});
    r.settings.push_back(std::move(s));
  }
  r.peaks = engine::summarize_peaks(r.histogram, config.window.tau, config.window.central_radius);
  const double car = r.car.car();
  r.visibility_bound = car > 1.0 ? analysis::visibility_bound_from_car(car) : 0.0;
  return r;
}

void fit_scan(ScanResult& r, const AppConfig& config) {
  const auto& plan = config.scan;
  r.fit = analysis::fit_fringe_pair(r.bbb, r.aaa, plan.fit_mode, plan.fit_order);
  r.errors = analysis::visibility_error(r.bbb, r.aaa, plan.resamples,
                                        derive_seed(plan.seed, kResampleStream << 32),
                                        plan.fit_mode, plan.fit_order);
  r.average = analysis::average_visibility(r.fit->aaa.visibility, r.errors->sigma_aaa,
                                           r.fit->bbb.visibility, r.errors->sigma_bbb);
}

} // namespace

AnalyzeResult analyze_file(const std::filesystem::path& path, const AppConfig& config) {
  TagFileReader reader(path);
  engine::StreamAnalyzer an(config.window, config.car_slot);
  TagStream chunk;
  for (;;) {
    chunk.clear();
    if (reader.read(chunk, kChunk) == 0) break;
    an.push(chunk);
  }
  return finish_result(an, config);
}

AnalyzeResult simulate_and_analyze(const AppConfig& config, const sim::ExperimentConfig& experiment,
                                   double duration, std::uint64_t seed, sim::RunSummary* summary) {
  sim::TagGenerator gen(experiment, duration, seed);
  engine::StreamAnalyzer an(config.window, config.car_slot);
  TagStream block;
  while (gen.next(block)) an.push(block);
  if (summary) *summary = gen.summary();
  return finish_result(an, config);
}

double ScanResult::max_flat_modulation(std::string_view prefix) const {
  double m = 0.0;
  for (const auto& f : flatness)
    if (std::string_view(f.name).substr(0, prefix.size()) == prefix) m = std::max(m, f.modulation);
  return m;
}

ScanResult run_scan(const AppConfig& config) {
  auto r = execute(config, "scan-" + std::string(photon_label(config.scan.photon)));
  fit_scan(r, config);
  build_flatness(r);
  return r;
}

ScanResult run_blocked(AppConfig config, sim::BlockedPreset preset) {
  config.experiment.interferometer = sim::blocked_scenario(preset, config.experiment.interferometer);
  if (config.scan.angles.empty() && config.scan.phases.empty()) config.scan.settings = 8;
  auto r = execute(config, "blocked-" + std::string(sim::to_string(preset)));
  try {
    fit_scan(r, config);
    r.order = analysis::order_sensitivity(r.bbb, r.aaa);
  } catch (const analysis::ConvergenceError& e) {
    r.fit_failure = e.what();
  } catch (const std::invalid_argument& e) {
    r.fit_failure = e.what();
  }
  build_flatness(r);
  return r;
}

void write_histogram_csv(std::ostream& out, const engine::Histogram2D& hist) {
  const int h = hist.half_bins();
  out << "cell12,cell13,dt12_ns,dt13_ns,count\n";
  std::ostringstream line;
  line << std::setprecision(6) << std::fixed;
  for (int i = -h; i <= h; ++i)
    for (int j = -h; j <= h; ++j) {
      line.str("");
      line << i << ',' << j << ',' << i * hist.bin_width() * 1e9 << ','
           << j * hist.bin_width() * 1e9 << ',' << hist.at(i, j) << '\n';
      out << line.str();
    }
}

void write_fringe_csv(std::ostream& out, const ScanResult& r) {
  out << "setting,angle_deg,phase_rad,aaa,bbb";
  for (int k = 0; k < 3; ++k) out << ",pairs_" << pair_name(k) << "_aa,pairs_" << pair_name(k) << "_ab";
  for (int ch = 0; ch < kChannelCount; ++ch) out << ",singles_ch" << ch;
  out << ",triples,duration_s\n";
  for (const auto& s : r.settings) {
    std::ostringstream line;
    line << std::setprecision(10);
    line << s.index << ',';
    if (std::isnan(s.angle)) line << "nan";
    else line << s.angle / analysis::kDegree;
    line << ',' << std::setprecision(17) << s.phase << std::setprecision(10) << ',' << s.report.central.aaa << ',' << s.report.central.bbb;
    for (const auto& p : s.report.pairs) line << ',' << p.aa << ',' << p.ab;
    for (auto n : s.report.singles) line << ',' << n;
    line << ',' << s.report.triples << ',' << s.duration << '\n';
    out << line.str();
  }
}

FringeData read_fringe_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty fringe CSV");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  auto column = [&](std::initializer_list<const char*> names) {
    for (std::size_t i = 0; i < header.size(); ++i)
      for (const char* n : names)
        if (header[i] == n) return static_cast<int>(i);
    throw FormatError(path.string() + ": missing column '" + *names.begin() + "'");
  };
  const int phase_col = column({"phase_rad", "phase"});
  const int aaa_col = column({"aaa"});
  const int bbb_col = column({"bbb"});
  FringeData d;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    const int need = std::max({phase_col, aaa_col, bbb_col});
    if (static_cast<int>(cells.size()) <= need)
      throw FormatError(path.string() + ":" + std::to_string(row) + ": too few columns");
    try {
      const double phase = std::stod(cells[phase_col]);
      d.aaa.push_back({phase, std::stod(cells[aaa_col])});
      d.bbb.push_back({phase, std::stod(cells[bbb_col])});
    } catch (const std::logic_error&) {
      throw FormatError(path.string() + ":" + std::to_string(row) + ": non-numeric value");
    }
  }
  return d;
}

json to_json(const analysis::FringeFit& f) {
  return json{{"a", f.a},
              {"visibility", f.visibility},
              {"raw_visibility", f.raw_visibility},
              {"b", f.b},
              {"c", f.c},
              {"sign", f.sign},
              {"sigma", {{"a", f.sigma_a}, {"visibility", f.sigma_visibility}, {"b", f.sigma_b}, {"c", f.sigma_c}}},
              {"sse", f.sse},
              {"chi2", f.chi2},
              {"dof", f.dof},
              {"r2", f.r2},
              {"iterations", f.iterations},
              {"flags", {{"locked", f.locked}, {"clamped", f.clamped}, {"degenerate", f.degenerate}}}};
}

json to_json(const engine::StreamReport& rep) {
  json pairs = json::object();
  for (int k = 0; k < 3; ++k) pairs[pair_name(k)] = {{"aa", rep.pairs[k].aa}, {"ab", rep.pairs[k].ab}};
  return json{{"tags", rep.tags},
              {"singles", rep.singles},
              {"triples", rep.triples},
              {"central", {{"aaa", rep.central.aaa}, {"bbb", rep.central.bbb}}},
              {"pairs", pairs},
              {"car",
               {{"signal", rep.car.signal},
                {"accidental", rep.car.accidental},
                {"value", json_number(rep.car.car())}}},
              {"first_timestamp", rep.first_timestamp},
              {"last_timestamp", rep.last_timestamp}};
}

json to_json(const engine::PeakSummary& p) {
  return json{{"total", p.total},
              {"max_cell", p.max_cell},
              {"corner_total", p.corner_total},
              {"central_total", p.central_total()},
              {"side_total_mean", p.side_total_mean()},
              {"side_max_mean", p.side_max_mean()}};
}

json to_json(const ScanResult& r) {
  json j;
  j["label"] = r.label;
  j["photon"] = std::string(photon_label(r.photon));
  json settings = json::array();
  for (const auto& s : r.settings)
    settings.push_back({{"index", s.index},
                        {"angle_deg", std::isnan(s.angle) ? json(nullptr) : json(s.angle / analysis::kDegree)},
                        {"phase", s.phase},
                        {"seed", s.seed},
                        {"duration", s.duration},
                        {"triplets_emitted", s.triplets_emitted},
                        {"report", to_json(s.report)}});
  j["settings"] = settings;
  if (r.fit) {
    j["fit"] = {{"mode", std::string(analysis::to_string(r.fit->mode))},
                {"order", std::string(analysis::to_string(r.fit->order))},
                {"aaa", to_json(r.fit->aaa)},
                {"bbb", to_json(r.fit->bbb)}};
  }
  if (r.errors)
    j["monte_carlo"] = {{"sigma_aaa", r.errors->sigma_aaa},
                        {"sigma_bbb", r.errors->sigma_bbb},
                        {"samples_used", r.errors->samples_used},
                        {"samples_dropped", r.errors->samples_dropped}};
  if (r.fit && r.errors) j["average_visibility"] = {{"value", r.average.value}, {"sigma", r.average.sigma}};
  if (!r.fit_failure.empty()) j["fit_failure"] = r.fit_failure;
  if (r.order)
    j["order_sensitivity"] = {{"v_aaa_bbb_first", r.order->bbb_first.aaa.visibility},
                              {"v_bbb_bbb_first", r.order->bbb_first.bbb.visibility},
                              {"v_aaa_aaa_first", r.order->aaa_first.aaa.visibility},
                              {"v_bbb_aaa_first", r.order->aaa_first.bbb.visibility},
                              {"shift_aaa", r.order->shift_aaa},
                              {"shift_bbb", r.order->shift_bbb},
                              {"best_locked_r2", r.order->best_locked_r2},
                              {"complementary_fit_fails", r.order->complementary_fit_fails}};
  json flat = json::object();
  for (const auto& f : r.flatness) flat[f.name] = {{"mean", f.mean}, {"modulation", f.modulation}};
  j["flatness"] = flat;
  j["peaks"] = to_json(r.peaks);
  j["car"] = {{"signal", r.car.signal}, {"accidental", r.car.accidental}, {"value", json_number(r.car.car())}};
  j["visibility_bound_from_car"] = r.visibility_bound;
  return j;
}

} // namespace franson::pipeline
