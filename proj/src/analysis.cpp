#include <franson/analysis.hpp>
#include <franson/seeding.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace franson::analysis {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double c) {
  c = std::fmod(c, kTwoPi);
  if (c < 0.0) c += kTwoPi;
  return c;
}

void require_points(std::span<const FringePoint> points, std::size_t minimum) {
  if (points.size() < minimum)
    throw std::invalid_argument("fringe fit needs at least " + std::to_string(minimum) +
                                " points, got " + std::to_string(points.size()));
  for (const auto& p : points)
    if (!std::isfinite(p.phase) || !std::isfinite(p.count) || p.count < 0.0)
      throw std::invalid_argument("fringe points must be finite with non-negative counts");
}

double mean_count(std::span<const FringePoint> points) {
  double s = 0.0;
  for (const auto& p : points) s += p.count;
  return s / static_cast<double>(points.size());
}

bool all_equal(std::span<const FringePoint> points) {
  return std::all_of(points.begin(), points.end(),
                     [&](const FringePoint& p) { return p.count == points.front().count; });
}

FringeFit degenerate_fit(std::span<const FringePoint> points, bool locked, double b, double c) {
  FringeFit f;
  f.a = mean_count(points);
  f.b = b;
  f.c = c;
  f.locked = locked;
  f.degenerate = true;
  f.dof = static_cast<int>(points.size()) - (locked ? 2 : 4);
  return f;
}

void finish_stats(FringeFit& f, std::span<const FringePoint> points) {
  const double mean = mean_count(points);
  double sse = 0.0, sst = 0.0, chi2 = 0.0;
  for (const auto& p : points) {
    const double m = f.model(p.phase);
    const double r = p.count - m;
    sse += r * r;
    sst += (p.count - mean) * (p.count - mean);
    chi2 += r * r / std::max(m, 1.0);
  }
  f.sse = sse;
  f.chi2 = chi2;
  f.r2 = sst > 0.0 ? 1.0 - sse / sst : 0.0;
}

void clamp_visibility(FringeFit& f) {
  f.visibility = std::clamp(f.raw_visibility, 0.0, 1.0);
  f.clamped = f.visibility != f.raw_visibility;
}

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

struct LmResult {
  Vec4 p;
  double sse = 0.0;
  int iterations = 0;
  bool converged = false;
  Mat4 jtj;
};

double sse_of(std::span<const FringePoint> pts, const Vec4& p) {
  double s = 0.0;
  for (const auto& q : pts) {
    const double r = q.count - p[0] * (1.0 + p[1] * std::sin(p[2] * q.phase + p[3]));
    s += r * r;
  }
  return s;
}

void normal_equations(std::span<const FringePoint> pts, const Vec4& p, Mat4& jtj, Vec4& jtr) {
  jtj.setZero();
  jtr.setZero();
  for (const auto& q : pts) {
    const double th = p[2] * q.phase + p[3];
    const double s = std::sin(th);
    const double co = std::cos(th);
    const double r = q.count - p[0] * (1.0 + p[1] * s);
    Vec4 j;
    j << 1.0 + p[1] * s, p[0] * s, p[0] * p[1] * co * q.phase, p[0] * p[1] * co;
    jtj.noalias() += j * j.transpose();
    jtr += j * r;
  }
}

LmResult levenberg_marquardt(std::span<const FringePoint> pts, Vec4 p, const FitOptions& opt) {
  LmResult out;
  double lambda = 1e-3;
  double sse = sse_of(pts, p);
  Mat4 jtj;
  Vec4 jtr;
  normal_equations(pts, p, jtj, jtr);
  for (int it = 1; it <= opt.max_iterations; ++it) {
    out.iterations = it;
    if (sse == 0.0) {
      out.converged = true;
      break;
    }
    Mat4 damped = jtj;
    for (int k = 0; k < 4; ++k) damped(k, k) += lambda * std::max(jtj(k, k), 1e-12);
    const Vec4 step = damped.ldlt().solve(jtr);
    Vec4 trial = p + step;
    trial[2] = std::clamp(trial[2], opt.b_min, opt.b_max);
    const double trial_sse = sse_of(pts, trial);
    if (std::isfinite(trial_sse) && trial_sse <= sse) {
      const double change = (trial - p).norm();
      p = trial;
      const double prev = sse;
      sse = trial_sse;
      normal_equations(pts, p, jtj, jtr);
      lambda = std::max(lambda / 10.0, 1e-12);
      if (change <= opt.tolerance * (p.norm() + opt.tolerance) ||
          prev - sse <= 1e-15 * prev) {
        out.converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      // No descent direction left at machine precision: we sit on a minimum.
      if (lambda > 1e10) {
        out.converged = true;
        break;
      }
    }
  }
  out.p = p;
  out.sse = sse;
  out.jtj = jtj;
  return out;
}

} // namespace

void PlateSpec::validate() const {
  if (!(thickness > 0.0)) throw std::invalid_argument("plate thickness must be > 0");
  if (!(n_ambient >= 1.0)) throw std::invalid_argument("ambient index must be >= 1");
  if (!(n_glass > n_ambient)) throw std::invalid_argument("glass index must exceed ambient index");
  if (!(wavelength > 0.0)) throw std::invalid_argument("plate wavelength must be > 0");
  if (!(std::abs(pretilt) < std::numbers::pi / 2))
    throw std::invalid_argument("plate pre-tilt must satisfy |alpha| < pi/2");
}

double plate_angle_to_phase(double alpha, const PlateSpec& plate) {
  plate.validate();
  if (!(std::abs(alpha) < std::numbers::pi / 2))
    throw std::invalid_argument("plate angle must satisfy |alpha| < pi/2");
  const double n1 = plate.n_ambient;
  const double n2 = plate.n_glass;
  const double beta = std::asin(n1 * std::sin(alpha) / n2);
  const double k = kTwoPi / plate.wavelength;
  return k * plate.thickness * (n1 - n2 + (n2 - n1 * std::cos(alpha - beta)) / std::cos(beta));
}

double relative_phase(double delta, const PlateSpec& plate) {
  return plate_angle_to_phase(plate.pretilt + delta, plate) -
         plate_angle_to_phase(plate.pretilt, plate);
}

double angle_for_phase(double phase, const PlateSpec& plate) {
  if (!(phase >= 0.0)) throw std::invalid_argument("target phase must be >= 0");
  if (plate.pretilt < 0.0) throw std::invalid_argument("angle_for_phase needs pretilt >= 0");
  // relative_phase grows monotonically with delta for a non-negative pre-tilt.
  const double limit = std::numbers::pi / 2 - plate.pretilt;
  double lo = 0.0;
  double hi = std::min(1e-3, 0.5 * limit);
  while (relative_phase(hi, plate) < phase) {
    lo = hi;
    hi = std::min(2.0 * hi, lo + 0.5 * (limit - lo));
    if (limit - hi < 1e-12) throw std::invalid_argument("phase not reachable by tilting the plate");
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (relative_phase(mid, plate) < phase ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> scan_angles(const PlateSpec& plate, int count, double fringes) {
  if (count < 2) throw std::invalid_argument("a scan needs at least 2 angles");
  if (!(fringes > 0.0)) throw std::invalid_argument("fringe count must be > 0");
  const double span = angle_for_phase(kTwoPi * fringes, plate);
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out[i] = span * i / (count - 1);
  return out;
}

double FringeFit::model(double phi) const {
  return a * (1.0 + sign * raw_visibility * std::sin(b * phi + c));
}

FringeFit fit_fringe(std::span<const FringePoint> points, const FitOptions& options) {
  require_points(points, 5);
  if (all_equal(points)) return degenerate_fit(points, false, 1.0, 0.0);

  const auto [lo_it, hi_it] = std::minmax_element(
      points.begin(), points.end(),
      [](const FringePoint& l, const FringePoint& r) { return l.count < r.count; });
  const double a0 = mean_count(points);
  const double v0 = (hi_it->count - lo_it->count) / (hi_it->count + lo_it->count);
  const double b0 = std::clamp(1.0, options.b_min, options.b_max);

  LmResult best;
  bool have = false;
  for (int k = 0; k < 8; ++k) {
    Vec4 p0;
    p0 << a0, v0, b0, std::numbers::pi / 2 - b0 * hi_it->phase + k * std::numbers::pi / 4;
    auto r = levenberg_marquardt(points, p0, options);
    if (!r.converged || !std::isfinite(r.sse)) continue;
    if (!have || r.sse < best.sse) {
      best = r;
      have = true;
    }
  }
  if (!have)
    throw ConvergenceError("fringe fit did not converge within " +
                           std::to_string(options.max_iterations) + " iterations");

  FringeFit f;
  f.a = best.p[0];
  f.raw_visibility = best.p[1];
  f.b = best.p[2];
  f.c = best.p[3];
  f.iterations = best.iterations;
  if (f.raw_visibility < 0.0) {
    f.raw_visibility = -f.raw_visibility;
    f.c += std::numbers::pi;
  }
  f.c = wrap_angle(f.c);
  f.dof = static_cast<int>(points.size()) - 4;
  finish_stats(f, points);

  if (f.dof > 0) {
    const double s2 = f.sse / f.dof;
    const Mat4 cov = best.jtj.inverse() * s2;
    f.sigma_a = std::sqrt(std::abs(cov(0, 0)));
    f.sigma_visibility = std::sqrt(std::abs(cov(1, 1)));
    f.sigma_b = std::sqrt(std::abs(cov(2, 2)));
    f.sigma_c = std::sqrt(std::abs(cov(3, 3)));
  }
  clamp_visibility(f);
  return f;
}

FringeFit fit_locked(std::span<const FringePoint> points, double b, double c, double sign) {
  require_points(points, 3);
  if (sign != 1.0 && sign != -1.0) throw std::invalid_argument("locked fit sign must be +1 or -1");
  if (all_equal(points)) return degenerate_fit(points, true, b, c);

  // count = alpha + beta s, s = sin(b phi + c): ordinary linear regression.
  const double n = static_cast<double>(points.size());
  double ss = 0.0, sy = 0.0, sss = 0.0, ssy = 0.0;
  for (const auto& p : points) {
    const double s = std::sin(b * p.phase + c);
    ss += s;
    sy += p.count;
    sss += s * s;
    ssy += s * p.count;
  }
  const double det = n * sss - ss * ss;
  if (!(std::abs(det) > 1e-12 * n * n))
    throw ConvergenceError("locked fit is singular: the frozen sinusoid is constant on the data");
  const double alpha = (sss * sy - ss * ssy) / det;
  const double beta = (n * ssy - ss * sy) / det;
  if (!(alpha > 0.0)) throw ConvergenceError("locked fit produced a non-positive offset");

  FringeFit f;
  f.locked = true;
  f.a = alpha;
  f.b = b;
  f.c = c;
  f.sign = sign;
  f.raw_visibility = sign * beta / alpha;
  f.iterations = 1;
  f.dof = static_cast<int>(points.size()) - 2;
  finish_stats(f, points);
  if (f.dof > 0) {
    const double s2 = f.sse / f.dof;
    const double var_alpha = s2 * sss / det;
    const double var_beta = s2 * n / det;
    const double cov_ab = -s2 * ss / det;
    f.sigma_a = std::sqrt(var_alpha);
    // V = beta / alpha, first-order propagation.
    const double dv_db = sign / alpha;
    const double dv_da = -sign * beta / (alpha * alpha);
    f.sigma_visibility = std::sqrt(std::max(
        0.0, dv_db * dv_db * var_beta + dv_da * dv_da * var_alpha + 2.0 * dv_da * dv_db * cov_ab));
  }
  clamp_visibility(f);
  return f;
}

std::string_view to_string(FitMode mode) {
  return mode == FitMode::PhaseLocked ? "phase-locked" : "independent";
}

std::string_view to_string(FitOrder order) {
  return order == FitOrder::BbbFirst ? "bbb-first" : "aaa-first";
}

FringePairFit fit_fringe_pair(std::span<const FringePoint> bbb, std::span<const FringePoint> aaa,
                              FitMode mode, FitOrder order, const FitOptions& options) {
  require_points(bbb, 5);
  require_points(aaa, 5);
  FringePairFit out;
  out.mode = mode;
  out.order = order;
  if (mode == FitMode::Independent) {
    out.bbb = fit_fringe(bbb, options);
    out.aaa = fit_fringe(aaa, options);
    return out;
  }
  const bool bbb_first = order == FitOrder::BbbFirst;
  auto first_pts = bbb_first ? bbb : aaa;
  auto second_pts = bbb_first ? aaa : bbb;
  FringeFit first = fit_fringe(first_pts, options);
  FringeFit second = fit_locked(second_pts, first.b, first.c, -1.0);
  out.bbb = bbb_first ? first : second;
  out.aaa = bbb_first ? second : first;
  return out;
}

VisibilityError visibility_error(std::span<const FringePoint> bbb,
                                 std::span<const FringePoint> aaa, int n_samples,
                                 std::uint64_t seed, FitMode mode, FitOrder order,
                                 const FitOptions& options) {
  if (n_samples < 2) throw std::invalid_argument("visibility_error needs at least 2 samples");
  std::vector<double> vb, va;
  VisibilityError out;
  std::vector<FringePoint> rb(bbb.begin(), bbb.end());
  std::vector<FringePoint> ra(aaa.begin(), aaa.end());
  for (int k = 0; k < n_samples; ++k) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    auto draw = [&](double mean) {
      if (mean <= 0.0) return 0.0;
      std::poisson_distribution<std::int64_t> pd(mean);
      return static_cast<double>(pd(rng));
    };
    for (std::size_t i = 0; i < bbb.size(); ++i) rb[i].count = draw(bbb[i].count);
    for (std::size_t i = 0; i < aaa.size(); ++i) ra[i].count = draw(aaa[i].count);
    try {
      const auto fit = fit_fringe_pair(rb, ra, mode, order, options);
      vb.push_back(fit.bbb.visibility);
      va.push_back(fit.aaa.visibility);
    } catch (const ConvergenceError&) {
      ++out.samples_dropped;
    }
  }
  out.samples_used = static_cast<int>(vb.size());
  if (out.samples_used < 2 || 2 * out.samples_used < n_samples)
    throw ConvergenceError("visibility_error: only " + std::to_string(out.samples_used) + " of " +
                           std::to_string(n_samples) + " resamples could be refitted");
  auto sd = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  };
  out.sigma_bbb = sd(vb);
  out.sigma_aaa = sd(va);
  return out;
}

Averaged average_visibility(double v_aaa, double sigma_aaa, double v_bbb, double sigma_bbb) {
  return {0.5 * (v_aaa + v_bbb), 0.5 * std::sqrt(sigma_aaa * sigma_aaa + sigma_bbb * sigma_bbb)};
}

double visibility_bound_from_car(double car) {
  if (!(car > 1.0)) throw std::invalid_argument("CAR must exceed 1 to bound the visibility");
  if (std::isinf(car)) return 1.0;
  return car / (car + 1.0);
}

double modulation_at(std::span<const FringePoint> points, double b) {
  require_points(points, 3);
  Eigen::MatrixXd x(points.size(), 3);
  Eigen::VectorXd y(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = std::sin(b * points[i].phase);
    x(i, 2) = std::cos(b * points[i].phase);
    y(i) = points[i].count;
  }
  const Eigen::Vector3d beta = x.colPivHouseholderQr().solve(y);
  if (!(beta[0] > 0.0)) return 0.0;
  return std::hypot(beta[1], beta[2]) / beta[0];
}

OrderSensitivity order_sensitivity(std::span<const FringePoint> bbb,
                                   std::span<const FringePoint> aaa, const FitOptions& options) {
  OrderSensitivity out;
  out.bbb_first = fit_fringe_pair(bbb, aaa, FitMode::PhaseLocked, FitOrder::BbbFirst, options);
  out.aaa_first = fit_fringe_pair(bbb, aaa, FitMode::PhaseLocked, FitOrder::AaaFirst, options);
  out.shift_aaa = std::abs(out.bbb_first.aaa.visibility - out.aaa_first.aaa.visibility);
  out.shift_bbb = std::abs(out.bbb_first.bbb.visibility - out.aaa_first.bbb.visibility);
  auto credited = [](const FringeFit& f) { return f.raw_visibility > 0.0 ? f.r2 : 0.0; };
  out.best_locked_r2 = std::max(credited(out.bbb_first.aaa), credited(out.aaa_first.bbb));
  out.complementary_fit_fails = out.best_locked_r2 < 0.5;
  return out;
}

} // namespace franson::analysis
