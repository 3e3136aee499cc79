#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace hrisloc {

inline constexpr double kPi = 3.14159265358979323846;

// Wrap an angle to (-pi, pi].
inline double wrap_pi(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

enum class ErrorKind {
  kConfig,            // invalid configuration value
  kDegenerateGeometry,
  kInconsistentAngles,
  kSensingDisabled,   // rho = 0: no signal reaches the HRIS output
  kNoSignal,          // observation carries no usable energy for this stage
  kNoPeak,            // delay spectrum has no peak
  kRankDeficient,     // profiling system underdetermined
  kIllPosed,          // singular information matrix
  kUnidentifiable,    // nuisance block not invertible
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Deterministic RNG with explicit draw formulas so that a given seed produces
// the same stream on every platform (std:: distributions are not portable).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t raw() { return eng_(); }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform phase on [0, 2*pi).
  double angle() { return 2.0 * kPi * uniform(); }

  std::complex<double> unit_phasor() { return std::polar(1.0, -angle()); }

  // Circularly-symmetric complex Gaussian with E|w|^2 = var (polar Box-Muller).
  std::complex<double> cgauss(double var) {
    double u = 1.0 - uniform();  // (0, 1]: keeps log finite
    double r = std::sqrt(-var * std::log(u));
    return std::polar(r, angle());
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace hrisloc
