#include <franson/cli.hpp>
#include <franson/config.hpp>
#include <franson/pipeline.hpp>
#include <franson/qmodel.hpp>
#include <franson/tagfile.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>

namespace franson::cli {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> stats_multiplier;
  std::string output_dir = ".";
  std::string profile;
};

AppConfig load(const Common& c) {
  AppConfig cfg = c.config_path.empty() ? profile(c.profile.empty() ? "desk" : c.profile)
                                        : load_config(c.config_path);
  if (!c.config_path.empty() && !c.profile.empty())
    throw UsageError("--profile and --config are mutually exclusive (set 'profile:' in the file)");
  if (c.seed) cfg.scan.seed = *c.seed;
  if (c.stats_multiplier) {
    if (!(*c.stats_multiplier > 0.0)) throw UsageError("--stats-multiplier must be > 0");
    cfg.scan.stats_multiplier = *c.stats_multiplier;
  }
  return cfg;
}

fs::path ensure_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw IoError("cannot create output directory " + dir);
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed on " + path.string());
}

template <typename Fn>
void write_with(const fs::path& path, Fn&& fn) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  fn(f);
  if (!f) throw IoError("write failed on " + path.string());
}

void add_common(CLI::App* sub, Common& c, bool with_stats) {
  sub->add_option("--config", c.config_path, "YAML configuration file");
  sub->add_option("--profile", c.profile, "built-in profile (desk, paper) when no --config is given");
  sub->add_option("--seed", c.seed, "master seed");
  sub->add_option("--output-dir", c.output_dir, "directory for output files");
  if (with_stats)
    sub->add_option("--stats-multiplier", c.stats_multiplier, "scales the dwell per setting");
}

void print_scan(std::ostream& out, const pipeline::ScanResult& r) {
  out << r.label << ": " << r.settings.size() << " settings\n";
  out << std::fixed << std::setprecision(4);
  if (r.fit && r.errors) {
    out << "  V_AAA = " << r.fit->aaa.visibility << " +- " << r.errors->sigma_aaa << "\n";
    out << "  V_BBB = " << r.fit->bbb.visibility << " +- " << r.errors->sigma_bbb << "\n";
    out << "  average = " << r.average.value << " +- " << r.average.sigma << "\n";
  }
  if (!r.fit_failure.empty()) out << "  fit failed: " << r.fit_failure << "\n";
  if (r.order)
    out << "  order shift: AAA " << r.order->shift_aaa << ", BBB " << r.order->shift_bbb
        << "; complementary locked fit " << (r.order->complementary_fit_fails ? "fails" : "holds")
        << " (best R2 " << r.order->best_locked_r2 << ")\n";
  out << "  max two-fold modulation " << r.max_flat_modulation("pairs_")
      << ", 842 singles modulation " << r.max_flat_modulation("singles_842") << "\n";
  out << "  CAR " << r.car.car() << ", visibility bound " << r.visibility_bound << "\n";
  out.unsetf(std::ios::floatfield);
}

void emit_scan(const fs::path& dir, const std::string& stem, const pipeline::ScanResult& r) {
  write_with(dir / (stem + "_fringe.csv"), [&](std::ostream& o) { pipeline::write_fringe_csv(o, r); });
  write_with(dir / (stem + "_histogram.csv"),
             [&](std::ostream& o) { pipeline::write_histogram_csv(o, r.histogram); });
  write_text(dir / (stem + "_report.json"), pipeline::to_json(r).dump(2) + "\n");
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Three-photon Franson interference simulator and time-tag coincidence toolkit",
               "franson"};
  app.require_subcommand(1);

  Common common;
  double duration = 0.0;
  std::string output_file;
  auto* simulate = app.add_subcommand("simulate", "simulate a run and write an F3TT tag file");
  add_common(simulate, common, false);
  simulate->add_option("--duration", duration, "seconds of acquisition")->required();
  simulate->add_option("--output", output_file, "tag file path (default <output-dir>/run.f3tt)");

  std::string input;
  auto* analyze = app.add_subcommand("analyze", "analyze an F3TT tag file");
  add_common(analyze, common, false);
  analyze->add_option("input", input, "F3TT tag file")->required();

  std::string photon;
  auto* scan = app.add_subcommand("scan", "run a phase scan and fit the three-fold fringes");
  add_common(scan, common, true);
  scan->add_option("--photon", photon, "scanned photon: 842, 1530 or 1570");

  std::string preset;
  auto* blocked = app.add_subcommand("blocked", "phase scan with blocked interferometer paths");
  add_common(blocked, common, true);
  blocked->add_option("--preset", preset,
                      "all-open, block-842-long, block-842+1530-long, block-all-short or all")
      ->required();

  std::string fit_input;
  std::string fit_mode = "phase-locked";
  std::string fit_order = "bbb-first";
  int resamples = 10;
  auto* fit = app.add_subcommand("fit", "fit fringes from a CSV with phase, aaa and bbb columns");
  add_common(fit, common, false);
  fit->add_option("input", fit_input, "CSV file")->required();
  fit->add_option("--mode", fit_mode, "phase-locked or independent");
  fit->add_option("--order", fit_order, "bbb-first or aaa-first");
  fit->add_option("--resamples", resamples, "Poisson resamples for the visibility error");

  double wavelength_nm = 0.0;
  double bandwidth_nm = 0.0;
  std::optional<double> path_difference;
  auto* coherence = app.add_subcommand("coherence", "coherence length from centre wavelength and FWHM");
  coherence->add_option("--wavelength", wavelength_nm, "centre wavelength in nm")->required();
  coherence->add_option("--bandwidth", bandwidth_nm, "FWHM bandwidth in nm")->required();
  coherence->add_option("--path-difference", path_difference, "path difference in metres");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return kOk;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return kOk;
    } catch (const CLI::ParseError& e) {
      err << "error: " << e.what() << "\n";
      return kUsage;
    }

    if (*simulate) {
      if (!(duration > 0.0)) throw UsageError("--duration must be > 0");
      const auto cfg = load(common);
      const fs::path path =
          output_file.empty() ? ensure_dir(common.output_dir) / "run.f3tt" : fs::path(output_file);
      sim::TagGenerator gen(cfg.experiment, duration, cfg.scan.seed);
      TagFileWriter writer(path);
      TagStream block;
      while (gen.next(block)) writer.write(block);
      writer.close();
      const auto& s = gen.summary();
      out << "wrote " << writer.records_written() << " tags to " << path.string() << "\n";
      out << "duration " << duration << " s, seed " << cfg.scan.seed << ", triplets emitted "
          << s.triplets_emitted << "\n";
      for (int ch = 0; ch < kChannelCount; ++ch)
        out << "  channel " << ch << ": " << s.singles[ch] << " singles\n";
      return kOk;
    }

    if (*analyze) {
      const auto cfg = load(common);
      const auto res = pipeline::analyze_file(input, cfg);
      const auto dir = ensure_dir(common.output_dir);
      write_with(dir / "histogram.csv",
                 [&](std::ostream& o) { pipeline::write_histogram_csv(o, res.histogram); });
      nlohmann::json j = {{"input", input},
                          {"report", pipeline::to_json(res.report)},
                          {"peaks", pipeline::to_json(res.peaks)}};
      write_text(dir / "analysis.json", j.dump(2) + "\n");
      const auto& r = res.report;
      out << r.tags << " tags, " << r.triples << " three-folds; central AAA " << r.central.aaa
          << ", BBB " << r.central.bbb << "\n";
      for (int k = 0; k < 3; ++k)
        out << "  pairs " << k << ": AA " << r.pairs[k].aa << ", AB " << r.pairs[k].ab << "\n";
      out << "  CAR " << r.car.car() << "\n";
      return kOk;
    }

    if (*scan) {
      auto cfg = load(common);
      if (!photon.empty()) cfg.scan.photon = parse_photon(photon);
      const auto r = pipeline::run_scan(cfg);
      emit_scan(ensure_dir(common.output_dir), r.label, r);
      print_scan(out, r);
      return kOk;
    }

    if (*blocked) {
      const auto cfg = load(common);
      std::vector<sim::BlockedPreset> presets;
      if (preset == "all") {
        presets.assign(sim::all_blocked_presets().begin(), sim::all_blocked_presets().end());
      } else {
        try {
          presets.push_back(sim::parse_blocked_preset(preset));
        } catch (const std::invalid_argument& e) {
          throw UsageError(e.what());
        }
      }
      const auto dir = ensure_dir(common.output_dir);
      for (auto p : presets) {
        const auto r = pipeline::run_blocked(cfg, p);
        emit_scan(dir, r.label, r);
        print_scan(out, r);
      }
      return kOk;
    }

    if (*fit) {
      const auto cfg = load(common);
      const auto data = pipeline::read_fringe_csv(fit_input);
      analysis::FitMode mode;
      if (fit_mode == "phase-locked") mode = analysis::FitMode::PhaseLocked;
      else if (fit_mode == "independent") mode = analysis::FitMode::Independent;
      else throw UsageError("--mode must be phase-locked or independent");
      analysis::FitOrder order;
      if (fit_order == "bbb-first") order = analysis::FitOrder::BbbFirst;
      else if (fit_order == "aaa-first") order = analysis::FitOrder::AaaFirst;
      else throw UsageError("--order must be bbb-first or aaa-first");
      const auto f = analysis::fit_fringe_pair(data.bbb, data.aaa, mode, order);
      const auto e = analysis::visibility_error(data.bbb, data.aaa, resamples, cfg.scan.seed, mode, order);
      const auto avg = analysis::average_visibility(f.aaa.visibility, e.sigma_aaa, f.bbb.visibility, e.sigma_bbb);
      nlohmann::json j = {{"input", fit_input},
                          {"mode", std::string(analysis::to_string(mode))},
                          {"order", std::string(analysis::to_string(order))},
                          {"aaa", pipeline::to_json(f.aaa)},
                          {"bbb", pipeline::to_json(f.bbb)},
                          {"monte_carlo", {{"sigma_aaa", e.sigma_aaa}, {"sigma_bbb", e.sigma_bbb},
                                           {"samples_used", e.samples_used},
                                           {"samples_dropped", e.samples_dropped}}},
                          {"average_visibility", {{"value", avg.value}, {"sigma", avg.sigma}}}};
      write_text(ensure_dir(common.output_dir) / "fit_report.json", j.dump(2) + "\n");
      out << "V_AAA " << f.aaa.visibility << " +- " << e.sigma_aaa << ", V_BBB "
          << f.bbb.visibility << " +- " << e.sigma_bbb << ", average " << avg.value << " +- "
          << avg.sigma << "\n";
      return kOk;
    }

    if (*coherence) {
      const double lc = qmodel::coherence_length(wavelength_nm * 1e-9, bandwidth_nm * 1e-9);
      out << "coherence length " << lc * 1e6 << " um\n";
      if (path_difference)
        out << "interference weight at " << *path_difference << " m: "
            << qmodel::interference_weight(lc, *path_difference) << "\n";
      return kOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kIo;
  } catch (const analysis::ConvergenceError& e) {
    err << "convergence error: " << e.what() << "\n";
    return kConvergence;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}

} // namespace franson::cli
