#pragma once

#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace franson::analysis {

/// Raised when an iterative fit does not settle, or too many resamples fail.
class ConvergenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kDegree = std::numbers::pi / 180.0;

/// Tilted glass window in the long arm of one interferometer.
struct PlateSpec {
  double thickness = 3e-3;     ///< meters
  double n_ambient = 1.0;      ///< n1
  double n_glass = 1.5;        ///< n2
  double wavelength = 1570e-9; ///< meters
  double pretilt = 4.0 * kDegree;

  void validate() const;
};

/// Phase (radians) added by tilting the plate to absolute angle `alpha`.
double plate_angle_to_phase(double alpha, const PlateSpec& plate);
/// Phase relative to the pre-tilt zero position: phi(pretilt + delta) - phi(pretilt).
double relative_phase(double delta, const PlateSpec& plate);
/// Smallest delta >= 0 with relative_phase(delta) == phase (bisection). `phase` must be >= 0.
double angle_for_phase(double phase, const PlateSpec& plate);
/// `count` tilt offsets evenly spaced over [0, delta(2 pi * fringes)], end points included.
std::vector<double> scan_angles(const PlateSpec& plate, int count, double fringes = 1.0);

struct FringePoint {
  double phase = 0.0;
  double count = 0.0;
};

/// f(phi) = a [1 + sign V sin(b phi + c)]; sign is -1 only for a complementary locked fit.
struct FringeFit {
  double a = 0.0;
  double visibility = 0.0;     ///< clamped to [0, 1]
  double raw_visibility = 0.0; ///< before clamping; may be < 0 for a locked fit
  double b = 1.0;
  double c = 0.0;
  double sign = 1.0;
  double sigma_a = 0.0;
  double sigma_visibility = 0.0;
  double sigma_b = 0.0;
  double sigma_c = 0.0;
  double sse = 0.0;           ///< sum of squared residuals
  double chi2 = 0.0;          ///< Pearson, model as variance (floored at 1)
  int dof = 0;
  double r2 = 0.0;            ///< 1 - SSE / SST
  int iterations = 0;
  bool locked = false;        ///< b and c were taken from the partner fit
  bool clamped = false;
  bool degenerate = false;    ///< all counts equal; V forced to 0

  double model(double phi) const;
};

struct FitOptions {
  int max_iterations = 200;
  double tolerance = 1e-10;
  /// Bounds on the angular frequency; the phase axis is already in radians so b sits near 1.
  double b_min = 0.8;
  double b_max = 1.25;
};

/// Free four-parameter fit. Requires >= 5 points. Throws ConvergenceError if no start settles.
FringeFit fit_fringe(std::span<const FringePoint> points, const FitOptions& options = {});

/// Fit of a [1 + sign V sin(b phi + c)] with b and c frozen; sign = -1 fits the complementary set.
FringeFit fit_locked(std::span<const FringePoint> points, double b, double c, double sign = -1.0);

enum class FitMode { PhaseLocked, Independent };
enum class FitOrder { BbbFirst, AaaFirst };

std::string_view to_string(FitMode mode);
std::string_view to_string(FitOrder order);

struct FringePairFit {
  FringeFit bbb;
  FringeFit aaa;
  FitMode mode = FitMode::PhaseLocked;
  FitOrder order = FitOrder::BbbFirst;
};

/// BBB is fitted freely, then AAA with b, c frozen (complementary sign). AaaFirst swaps roles.
FringePairFit fit_fringe_pair(std::span<const FringePoint> bbb, std::span<const FringePoint> aaa,
                              FitMode mode = FitMode::PhaseLocked,
                              FitOrder order = FitOrder::BbbFirst, const FitOptions& options = {});

struct VisibilityError {
  double sigma_bbb = 0.0;
  double sigma_aaa = 0.0;
  int samples_used = 0;
  int samples_dropped = 0;
};

/// Standard deviation of the (clamped) visibilities refitted on Poisson resamples of the data.
VisibilityError visibility_error(std::span<const FringePoint> bbb,
                                 std::span<const FringePoint> aaa, int n_samples,
                                 std::uint64_t seed, FitMode mode = FitMode::PhaseLocked,
                                 FitOrder order = FitOrder::BbbFirst,
                                 const FitOptions& options = {});

struct Averaged {
  double value = 0.0;
  double sigma = 0.0;
};

Averaged average_visibility(double v_aaa, double sigma_aaa, double v_bbb, double sigma_bbb);

/// CAR / (CAR + 1). CAR must exceed 1; +inf gives 1.
double visibility_bound_from_car(double car);

/// Relative modulation of `points` at a fixed angular frequency: fits a + s sin(b phi) +
/// k cos(b phi) and returns sqrt(s^2 + k^2) / a. Used for flatness of two-folds and singles.
double modulation_at(std::span<const FringePoint> points, double b);

/// Both fit orders side by side, for the blocked-path diagnostic.
struct OrderSensitivity {
  FringePairFit bbb_first;
  FringePairFit aaa_first;
  double shift_aaa = 0.0; ///< |V_aaa(bbb first) - V_aaa(aaa first)|
  double shift_bbb = 0.0;
  /// Largest R^2 of the locked complementary fit over both orders (0 if its sign is wrong).
  double best_locked_r2 = 0.0;
  /// The locked fit to the complementary set explains less than half its variance in both orders.
  bool complementary_fit_fails = false;
};

OrderSensitivity order_sensitivity(std::span<const FringePoint> bbb,
                                   std::span<const FringePoint> aaa,
                                   const FitOptions& options = {});

} // namespace franson::analysis
