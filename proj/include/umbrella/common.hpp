#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace umbrella {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Errors. Every failure surfaced by the library derives from umbrella::Error so
// callers can catch the whole family or a specific condition.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& msg, int line, int column)
      : Error("syntax error at " + std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

class NonCoSafeError : public Error {
 public:
  using Error::Error;
};
class CapacityError : public Error {
 public:
  using Error::Error;
};
class EmptyLanguageError : public Error {
 public:
  using Error::Error;
};
class PosetError : public Error {
 public:
  using Error::Error;
};
class DegenerateFitError : public Error {
 public:
  using Error::Error;
};
class InsufficientCalibrationError : public Error {
 public:
  using Error::Error;
};
class InfeasibleError : public Error {
 public:
  using Error::Error;
};
class DeadlockError : public Error {
 public:
  using Error::Error;
};
class HorizonExceededError : public Error {
 public:
  using Error::Error;
};
class MissionTimeoutError : public Error {
 public:
  using Error::Error;
};
class ScenarioError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Planar geometry (meters).
// ---------------------------------------------------------------------------

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2& operator+=(const Vec2& o) noexcept {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2& operator-=(const Vec2& o) noexcept {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  friend constexpr Vec2 operator+(Vec2 a, const Vec2& b) noexcept { return a += b; }
  friend constexpr Vec2 operator-(Vec2 a, const Vec2& b) noexcept { return a -= b; }
  friend constexpr Vec2 operator*(double s, const Vec2& v) noexcept { return {s * v.x, s * v.y}; }
  friend constexpr Vec2 operator*(const Vec2& v, double s) noexcept { return {s * v.x, s * v.y}; }
  friend constexpr bool operator==(const Vec2&, const Vec2&) = default;

  double norm() const noexcept { return std::hypot(x, y); }
};

inline double distance(const Vec2& a, const Vec2& b) noexcept { return (a - b).norm(); }

inline Vec2 lerp(const Vec2& a, const Vec2& b, double w) noexcept { return a + w * (b - a); }

/// Moves `from` toward `to` by at most `step` meters, landing exactly on `to` when in reach.
inline Vec2 move_toward(const Vec2& from, const Vec2& to, double step) noexcept {
  const Vec2 d = to - from;
  const double len = d.norm();
  if (len <= step || len == 0.0) return to;
  return from + (step / len) * d;
}

// ---------------------------------------------------------------------------
// Random numbers. The engine is mt19937_64 (its output sequence is fixed by the
// standard); the distributions are written out here so sampled values are
// identical across standard library implementations.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a list of stream tags.
template <typename... Tags>
std::uint64_t derive_seed(std::uint64_t base, Tags... tags) noexcept {
  std::uint64_t s = splitmix64(base);
  ((s = splitmix64(s ^ static_cast<std::uint64_t>(tags))), ...);
  return s;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n).
  std::size_t index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::index on empty range");
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller (one value per call, the pair's twin is cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Smallest integer >= x, tolerant to floating error just above an integer.
inline long long robust_ceil(double x) noexcept { return static_cast<long long>(std::ceil(x - 1e-9)); }

inline constexpr double kTimeEps = 1e-9;

}  // namespace umbrella
