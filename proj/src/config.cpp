#include <franson/config.hpp>

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>

namespace franson {

namespace {

std::string where(const std::string& source, const YAML::Mark& mark) {
  if (mark.is_null()) return source;
  return source + ":" + std::to_string(mark.line + 1) + ":" + std::to_string(mark.column + 1);
}

class Reader {
public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& msg) const {
    throw ConfigError(where(source_, node.Mark()) + ": " + msg);
  }

  void expect_map(const YAML::Node& node, const std::string& name) const {
    if (!node.IsMap()) fail(node, "'" + name + "' must be a mapping");
  }

  void allow_only(const YAML::Node& node, const std::string& section,
                  std::initializer_list<std::string_view> keys) const {
    for (const auto& kv : node) {
      const auto key = kv.first.as<std::string>();
      bool known = false;
      for (auto k : keys) known = known || key == k;
      if (!known) fail(kv.first, "unknown key '" + key + "' in section '" + section + "'");
    }
  }

  template <typename T>
  T scalar(const YAML::Node& node, const std::string& key) const {
    if (!node.IsScalar()) fail(node, "'" + key + "' must be a scalar");
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      fail(node, "'" + key + "' has the wrong type (got '" + node.Scalar() + "')");
    }
  }

  template <typename T>
  void read(const YAML::Node& parent, const char* key, T& target) const {
    const auto node = parent[key];
    if (node) target = scalar<T>(node, key);
  }

  template <typename T, std::size_t N>
  void read_array(const YAML::Node& parent, const char* key, std::array<T, N>& target) const {
    const auto node = parent[key];
    if (!node) return;
    if (!node.IsSequence() || node.size() != N)
      fail(node, std::string("'") + key + "' must be a list of " + std::to_string(N) + " values");
    for (std::size_t i = 0; i < N; ++i) target[i] = scalar<T>(node[i], key);
  }

  std::vector<double> read_list(const YAML::Node& node, const char* key) const {
    if (!node.IsSequence()) fail(node, std::string("'") + key + "' must be a list");
    std::vector<double> out;
    for (const auto& v : node) out.push_back(scalar<double>(v, key));
    return out;
  }

  const std::string& source() const { return source_; }

private:
  std::string source_;
};

void read_source(const Reader& r, const YAML::Node& n, sim::SourceConfig& s) {
  r.expect_map(n, "source");
  r.allow_only(n, "source",
               {"triplet_rate", "pair_rate", "car_target", "car_window", "pump_coherence_length",
                "intermediate_coherence_length", "path_difference_length", "coherence_model",
                "triple_weight"});
  r.read(n, "triplet_rate", s.triplet_rate);
  r.read(n, "pair_rate", s.pair_rate);
  r.read(n, "car_target", s.car_target);
  r.read(n, "car_window", s.car_window);
  r.read(n, "pump_coherence_length", s.coherence.pump_coherence_length);
  r.read(n, "intermediate_coherence_length", s.coherence.intermediate_coherence_length);
  r.read(n, "path_difference_length", s.coherence.path_difference_length);
  r.read(n, "triple_weight", s.triple_weight_override);
  if (const auto m = n["coherence_model"]) {
    const auto v = r.scalar<std::string>(m, "coherence_model");
    if (v == "exponential") s.coherence_model = qmodel::CoherenceModel::Exponential;
    else if (v == "gaussian") s.coherence_model = qmodel::CoherenceModel::Gaussian;
    else r.fail(m, "coherence_model must be 'exponential' or 'gaussian'");
  }
}

void read_detector(const Reader& r, const YAML::Node& n, sim::DetectorConfig& d) {
  r.expect_map(n, "detector");
  r.allow_only(n, "detector", {"efficiency", "dark_rate", "jitter_fwhm", "dead_time"});
  r.read_array(n, "efficiency", d.efficiency);
  r.read_array(n, "dark_rate", d.dark_rate);
  r.read(n, "jitter_fwhm", d.jitter_fwhm);
  r.read(n, "dead_time", d.dead_time);
}

void read_interferometer(const Reader& r, const YAML::Node& n, sim::InterferometerSetting& s) {
  r.expect_map(n, "interferometer");
  r.allow_only(n, "interferometer", {"tau", "phase", "transmission", "blocked"});
  r.read(n, "tau", s.tau);
  r.read_array(n, "phase", s.phase);
  if (const auto t = n["transmission"]) {
    if (t.IsScalar()) {
      const double v = r.scalar<double>(t, "transmission");
      for (auto& photon : s.transmission) photon = {v, v};
    } else if (t.IsSequence() && t.size() == 3) {
      for (int i = 0; i < 3; ++i) {
        if (!t[i].IsSequence() || t[i].size() != 2)
          r.fail(t[i], "each transmission entry must be [short, long]");
        s.transmission[i] = {r.scalar<double>(t[i][0], "transmission"),
                             r.scalar<double>(t[i][1], "transmission")};
      }
    } else {
      r.fail(t, "transmission must be a number or three [short, long] pairs");
    }
  }
  if (const auto b = n["blocked"]) {
    if (b.IsScalar()) {
      const auto name = r.scalar<std::string>(b, "blocked");
      try {
        s = sim::blocked_scenario(name, s);
      } catch (const std::invalid_argument& e) {
        r.fail(b, e.what());
      }
    } else if (b.IsSequence() && b.size() == 3) {
      for (int i = 0; i < 3; ++i) {
        if (!b[i].IsSequence() || b[i].size() != 2)
          r.fail(b[i], "each blocked entry must be [short, long]");
        s.blocked[i] = {r.scalar<bool>(b[i][0], "blocked"), r.scalar<bool>(b[i][1], "blocked")};
      }
    } else {
      r.fail(b, "blocked must be a preset name or three [short, long] pairs");
    }
  }
}

void read_plates(const Reader& r, const YAML::Node& n, std::array<analysis::PlateSpec, 3>& plates) {
  r.expect_map(n, "plates");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    int group = -1;
    try {
      group = parse_photon(key);
    } catch (const std::invalid_argument&) {
      r.fail(kv.first, "plate key must be 842, 1530 or 1570, got '" + key + "'");
    }
    const auto& p = kv.second;
    r.expect_map(p, "plates." + key);
    r.allow_only(p, "plates." + key,
                 {"thickness", "n_ambient", "n_glass", "wavelength", "pretilt_deg"});
    auto& plate = plates[group];
    r.read(p, "thickness", plate.thickness);
    r.read(p, "n_ambient", plate.n_ambient);
    r.read(p, "n_glass", plate.n_glass);
    r.read(p, "wavelength", plate.wavelength);
    if (const auto t = p["pretilt_deg"]) plate.pretilt = r.scalar<double>(t, "pretilt_deg") * analysis::kDegree;
  }
}

void read_window(const Reader& r, const YAML::Node& n, AppConfig& c) {
  r.expect_map(n, "window");
  r.allow_only(n, "window", {"coarse", "bin", "central_radius", "car_slot"});
  r.read(n, "coarse", c.window.coarse_window);
  r.read(n, "bin", c.window.bin_width);
  r.read(n, "central_radius", c.window.central_radius);
  r.read(n, "car_slot", c.car_slot);
}

void read_scan(const Reader& r, const YAML::Node& n, ScanPlan& s) {
  r.expect_map(n, "scan");
  r.allow_only(n, "scan",
               {"photon", "angles_deg", "phases", "settings", "fringes", "reference_photon",
                "range_fraction", "dwell", "stats_multiplier", "seed", "resamples", "fit_mode",
                "fit_order"});
  auto photon = [&](const char* key, int& target) {
    if (const auto p = n[key]) {
      try {
        target = parse_photon(r.scalar<std::string>(p, key));
      } catch (const std::invalid_argument& e) {
        r.fail(p, e.what());
      }
    }
  };
  photon("photon", s.photon);
  photon("reference_photon", s.reference_photon);
  if (const auto a = n["angles_deg"]) {
    s.angles = r.read_list(a, "angles_deg");
    for (auto& v : s.angles) v *= analysis::kDegree;
  }
  if (const auto p = n["phases"]) s.phases = r.read_list(p, "phases");
  r.read(n, "settings", s.settings);
  r.read(n, "fringes", s.fringes);
  r.read(n, "range_fraction", s.range_fraction);
  r.read(n, "dwell", s.dwell);
  r.read(n, "stats_multiplier", s.stats_multiplier);
  r.read(n, "seed", s.seed);
  r.read(n, "resamples", s.resamples);
  if (const auto m = n["fit_mode"]) {
    const auto v = r.scalar<std::string>(m, "fit_mode");
    if (v == "phase-locked") s.fit_mode = analysis::FitMode::PhaseLocked;
    else if (v == "independent") s.fit_mode = analysis::FitMode::Independent;
    else r.fail(m, "fit_mode must be 'phase-locked' or 'independent'");
  }
  if (const auto o = n["fit_order"]) {
    const auto v = r.scalar<std::string>(o, "fit_order");
    if (v == "bbb-first") s.fit_order = analysis::FitOrder::BbbFirst;
    else if (v == "aaa-first") s.fit_order = analysis::FitOrder::AaaFirst;
    else r.fail(o, "fit_order must be 'bbb-first' or 'aaa-first'");
  }
}

} // namespace

int ScanPlan::setting_count() const {
  if (!angles.empty()) return static_cast<int>(angles.size());
  if (!phases.empty()) return static_cast<int>(phases.size());
  return settings;
}

void ScanPlan::validate() const {
  if (photon < 0 || photon > 2) throw std::invalid_argument("scan.photon must be 842, 1530 or 1570");
  if (reference_photon < -1 || reference_photon > 2)
    throw std::invalid_argument("scan.reference_photon must be 842, 1530 or 1570");
  if (setting_count() < 5) throw std::invalid_argument("a scan needs at least 5 settings");
  if (!(dwell > 0.0)) throw std::invalid_argument("scan.dwell must be > 0");
  if (!(stats_multiplier > 0.0)) throw std::invalid_argument("stats multiplier must be > 0");
  if (!(fringes > 0.0)) throw std::invalid_argument("scan.fringes must be > 0");
  if (!(range_fraction > 0.0)) throw std::invalid_argument("scan.range_fraction must be > 0");
  if (resamples < 2) throw std::invalid_argument("scan.resamples must be >= 2");
}

std::vector<AppConfig::Setting> AppConfig::scan_settings() const {
  std::vector<Setting> out;
  const auto& plate = plates[scan.photon];
  if (!scan.angles.empty()) {
    for (double a : scan.angles) out.push_back({a, analysis::relative_phase(a, plate)});
  } else if (!scan.phases.empty()) {
    for (double p : scan.phases) out.push_back({std::numeric_limits<double>::quiet_NaN(), p});
  } else {
    const int ref = scan.reference_photon < 0 ? scan.photon : scan.reference_photon;
    for (double a : analysis::scan_angles(plates[ref], scan.settings, scan.fringes)) {
      const double tilt = a * scan.range_fraction;
      out.push_back({tilt, analysis::relative_phase(tilt, plate)});
    }
  }
  return out;
}

void AppConfig::validate() const {
  experiment.validate();
  for (const auto& p : plates) p.validate();
  window.validate();
  if (!(car_slot > 0.0)) throw std::invalid_argument("window.car_slot must be > 0");
  scan.validate();
}

std::vector<std::string> profile_names() { return {"desk", "paper"}; }

AppConfig profile(std::string_view name) {
  AppConfig c;
  c.plates[sim::kGroup842].wavelength = 842e-9;
  c.plates[sim::kGroup1530].wavelength = 1530e-9;
  c.plates[sim::kGroup1570].wavelength = 1570e-9;
  if (name == "desk") return c;
  if (name == "paper") {
    // Central-bin statistics of the reported 12-setting scan (about 300 triplets in the bin).
    c.scan.dwell = 0.075;
    return c;
  }
  throw ConfigError("unknown profile '" + std::string(name) + "' (expected desk or paper)");
}

AppConfig parse_config(const std::string& text, const std::string& source_name) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(where(source_name, e.mark) + ": " + e.msg);
  }
  Reader r(source_name);
  if (root.IsNull()) return profile("desk");
  r.expect_map(root, "top level");
  r.allow_only(root, "top level",
               {"profile", "source", "detector", "interferometer", "plates", "window", "scan"});
  AppConfig c;
  {
    std::string base = "desk";
    if (const auto p = root["profile"]) base = r.scalar<std::string>(p, "profile");
    try {
      c = profile(base);
    } catch (const ConfigError& e) {
      r.fail(root["profile"], e.what());
    }
  }
  if (const auto n = root["source"]) read_source(r, n, c.experiment.source);
  if (const auto n = root["detector"]) read_detector(r, n, c.experiment.detector);
  if (const auto n = root["interferometer"]) read_interferometer(r, n, c.experiment.interferometer);
  if (const auto n = root["plates"]) read_plates(r, n, c.plates);
  if (const auto n = root["window"]) read_window(r, n, c);
  if (const auto n = root["scan"]) read_scan(r, n, c.scan);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source_name + ": " + e.what());
  }
  return c;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string_view photon_label(int group) {
  switch (group) {
  case sim::kGroup842: return "842";
  case sim::kGroup1530: return "1530";
  case sim::kGroup1570: return "1570";
  }
  throw std::invalid_argument("photon group must be 0, 1 or 2");
}

int parse_photon(std::string_view text) {
  if (text == "842" || text == "0") return sim::kGroup842;
  if (text == "1530" || text == "1") return sim::kGroup1530;
  if (text == "1570" || text == "2") return sim::kGroup1570;
  throw std::invalid_argument("unknown photon '" + std::string(text) + "' (expected 842, 1530 or 1570)");
}

} // namespace franson
