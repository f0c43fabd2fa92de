#include <franson/qmodel.hpp>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace franson::qmodel {

namespace {

double product_transmission(const ArmTransmission& arms, const PathChoice& paths) {
  double p = 1.0;
  for (int n = 0; n < kPhotons; ++n) p *= arms.of(n, paths.paths[n]);
  return p;
}

void require_unit_interval(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
}

} // namespace

std::string to_string(ParitySet set) { return set == ParitySet::AAA ? "AAA" : "BBB"; }

PathChoice PathChoice::from_index(unsigned index) {
  if (index >= kPathCombinations) throw std::out_of_range("path choice index out of range");
  PathChoice c;
  for (int n = 0; n < kPhotons; ++n) c.paths[n] = ((index >> n) & 1U) ? Path::Long : Path::Short;
  return c;
}

unsigned PathChoice::index() const {
  unsigned i = 0;
  for (int n = 0; n < kPhotons; ++n)
    if (paths[n] == Path::Long) i |= 1U << n;
  return i;
}

int PathChoice::long_count() const {
  int c = 0;
  for (auto p : paths) c += p == Path::Long;
  return c;
}

std::string PathChoice::label() const {
  std::string s;
  for (int n = 0; n < kPhotons; ++n) {
    s += paths[n] == Path::Long ? 'L' : 'S';
    s += static_cast<char>('1' + n);
  }
  return s;
}

PortChoice PortChoice::from_index(unsigned index) {
  if (index >= kPortCombinations) throw std::out_of_range("port choice index out of range");
  PortChoice c;
  for (int n = 0; n < kPhotons; ++n) c.ports[n] = ((index >> n) & 1U) ? Port::B : Port::A;
  return c;
}

unsigned PortChoice::index() const {
  unsigned i = 0;
  for (int n = 0; n < kPhotons; ++n)
    if (ports[n] == Port::B) i |= 1U << n;
  return i;
}

int PortChoice::b_count() const {
  int c = 0;
  for (auto p : ports) c += p == Port::B;
  return c;
}

std::string PortChoice::label() const {
  std::string s;
  for (int n = 0; n < kPhotons; ++n) {
    s += ports[n] == Port::B ? 'B' : 'A';
    s += static_cast<char>('1' + n);
  }
  return s;
}

Peak::Peak(int d12, int d13) : d12_(d12), d13_(d13) {
  if (d12 < -1 || d12 > 1 || d13 < -1 || d13 > 1 || (d12 == 1 && d13 == -1) ||
      (d12 == -1 && d13 == 1))
    throw std::invalid_argument("invalid peak identifier (" + std::to_string(d12) + ", " +
                                std::to_string(d13) + ")");
}

Peak Peak::of(const PathChoice& paths) {
  const int l1 = paths.paths[0] == Path::Long;
  const int l2 = paths.paths[1] == Path::Long;
  const int l3 = paths.paths[2] == Path::Long;
  return Peak(l2 - l1, l3 - l1);
}

Peak Peak::from_index(int index) {
  static constexpr std::array<std::array<int, 2>, kPeakCount> kOffsets{
      {{-1, -1}, {-1, 0}, {0, -1}, {0, 0}, {0, 1}, {1, 0}, {1, 1}}};
  if (index < 0 || index >= kPeakCount) throw std::out_of_range("peak index out of range");
  return Peak(kOffsets[index][0], kOffsets[index][1]);
}

int Peak::index() const {
  // row-major over the 3x3 grid with the two unreachable corners removed
  const int raw = (d12_ + 1) * 3 + (d13_ + 1);
  return raw < 2 ? raw : raw < 6 ? raw - 1 : raw - 2;
}

void PhaseConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  for (double p : phi)
    if (!std::isfinite(p)) throw std::invalid_argument("phases must be finite");
}

void InterferenceWeights::validate() const {
  require_unit_interval(triple, "triple interference weight");
  require_unit_interval(pair, "pair interference weight");
}

void ArmTransmission::validate() const {
  for (const auto& photon : t)
    for (double v : photon) require_unit_interval(v, "arm transmission");
}

void CoherenceSpec::validate() const {
  if (!(pump_coherence_length > 0.0) || !(intermediate_coherence_length > 0.0) ||
      !(path_difference_length > 0.0))
    throw std::invalid_argument("coherence lengths must be positive");
}

std::complex<double> path_amplitude(Path path, Port port, double phase) {
  using namespace std::complex_literals;
  if (path == Path::Short) return port == Port::A ? 0.5 + 0.0i : 0.5i;
  const std::complex<double> e = std::polar(1.0, phase);
  return port == Port::A ? -0.5 * e : 0.5i * e;
}

ParitySet parity_set(const PortChoice& ports) {
  return ports.b_count() % 2 == 0 ? ParitySet::AAA : ParitySet::BBB;
}

double triple_bin_probability(const Peak& peak, const PortChoice& ports, const PhaseConfig& phases,
                              const InterferenceWeights& weights, const ArmTransmission& arms) {
  weights.validate();
  constexpr double kCell = 1.0 / 64.0; // |(1/2)^3|^2
  if (!peak.is_central()) {
    // exactly one path combination feeds each side peak
    for (unsigned i = 0; i < kPathCombinations; ++i) {
      const auto paths = PathChoice::from_index(i);
      if (Peak::of(paths) == peak) return kCell * product_transmission(arms, paths);
    }
    throw std::logic_error("side peak without a path combination");
  }
  const double t_short = product_transmission(arms, PathChoice::from_index(0));
  const double t_long = product_transmission(arms, PathChoice::from_index(7));
  // Long/short amplitude ratio is (-1)^{#A} e^{i sum phi}; the AAA set has an odd number of A.
  const double sign = parity_set(ports) == ParitySet::AAA ? -1.0 : 1.0;
  const double cross = 2.0 * weights.triple * std::sqrt(t_short * t_long) * sign *
                       std::cos(phases.phase_sum());
  return kCell * (t_short + t_long + cross);
}

void PhotonPair::validate() const {
  if (first < 0 || second > 2 || first >= second)
    throw std::invalid_argument("photon pair must satisfy 0 <= first < second <= 2");
}

double two_photon_marginal(const PhotonPair& pair, int offset, Port first_port, Port second_port,
                           const PhaseConfig& phases, const InterferenceWeights& weights,
                           const ArmTransmission& arms) {
  pair.validate();
  weights.validate();
  if (offset < -1 || offset > 1) throw std::invalid_argument("pair offset must be -1, 0 or +1");
  const int k = pair.traced();
  const double traced_weight = single_photon_marginal(k, Port::A, arms) +
                               single_photon_marginal(k, Port::B, arms);

  auto pair_amplitude = [&](Path pi, Path pj) {
    return std::sqrt(arms.of(pair.first, pi) * arms.of(pair.second, pj)) *
           path_amplitude(pi, first_port, phases.phi[pair.first]) *
           path_amplitude(pj, second_port, phases.phi[pair.second]);
  };

  double incoherent = 0.0;
  for (Path pi : {Path::Short, Path::Long})
    for (Path pj : {Path::Short, Path::Long})
      if (static_cast<int>(pj) - static_cast<int>(pi) == offset)
        incoherent += std::norm(pair_amplitude(pi, pj));

  double cross = 0.0;
  if (offset == 0) {
    cross = 2.0 * weights.pair *
            std::real(pair_amplitude(Path::Short, Path::Short) *
                      std::conj(pair_amplitude(Path::Long, Path::Long)));
  }
  return traced_weight * (incoherent + cross);
}

double single_photon_marginal(int photon, Port /*port*/, const ArmTransmission& arms) {
  if (photon < 0 || photon >= kPhotons) throw std::invalid_argument("photon index out of range");
  // |amplitude|^2 = 1/4 for either arm and either port
  return 0.25 * (arms.of(photon, Path::Short) + arms.of(photon, Path::Long));
}

double coherence_length(double center_wavelength, double fwhm_bandwidth) {
  if (!(center_wavelength > 0.0) || !(fwhm_bandwidth > 0.0))
    throw std::invalid_argument("wavelength and bandwidth must be positive");
  return center_wavelength * center_wavelength / (std::numbers::pi * fwhm_bandwidth);
}

double interference_weight(double coherence_length, double path_difference, CoherenceModel model) {
  if (!(coherence_length > 0.0) || !(path_difference >= 0.0))
    throw std::invalid_argument("coherence length must be positive, path difference non-negative");
  const double x = path_difference / coherence_length;
  return model == CoherenceModel::Gaussian ? std::exp(-x * x) : std::exp(-x);
}

InterferenceWeights weights_from(const CoherenceSpec& spec, CoherenceModel model) {
  spec.validate();
  return {interference_weight(spec.pump_coherence_length, spec.path_difference_length, model),
          interference_weight(spec.intermediate_coherence_length, spec.path_difference_length,
                              model)};
}

} // namespace franson::qmodel
