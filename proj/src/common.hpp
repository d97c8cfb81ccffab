#ifndef TOMOTRACE_COMMON_HPP
#define TOMOTRACE_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace tomo {

// ---------------------------------------------------------------------------
// Error taxonomy. Everything user-facing is reported through these so the CLI
// can map them to exit codes (usage/data errors -> 1, internal -> 2).
// ---------------------------------------------------------------------------

struct TomoError : std::runtime_error {
  explicit TomoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or truncated input files (bad MRC header, bad trace text, ...).
struct FormatError : TomoError {
  using TomoError::TomoError;
};

// Valid file, but a feature we deliberately do not handle (exotic MRC mode,
// anisotropic voxel spacing, ...).
struct UnsupportedError : TomoError {
  using TomoError::TomoError;
};

// Input exceeds configured resource limits.
struct CapacityError : TomoError {
  using TomoError::TomoError;
};

// Caller passed arguments that violate a documented precondition.
struct ArgError : TomoError {
  using TomoError::TomoError;
};

// ---------------------------------------------------------------------------
// Small vector types. Plain aggregates; the code mostly indexes flat arrays
// and only needs these at API boundaries.
// ---------------------------------------------------------------------------

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    double n = norm();
    return n > 0 ? *this / n : Vec3{0, 0, 0};
  }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
};

struct IVec3 {
  int x = 0, y = 0, z = 0;

  bool operator==(const IVec3& o) const { return x == o.x && y == o.y && z == o.z; }
  bool operator!=(const IVec3& o) const { return !(*this == o); }
  // Lexicographic (x, y, z) order; used for all deterministic tie-breaks.
  bool operator<(const IVec3& o) const {
    if (x != o.x) return x < o.x;
    if (y != o.y) return y < o.y;
    return z < o.z;
  }
  IVec3 operator+(const IVec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  IVec3 operator-(const IVec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 to_vec3() const { return {double(x), double(y), double(z)}; }
  int operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  int& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
};

inline int chebyshev(const IVec3& a, const IVec3& b) {
  return std::max({std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.z - b.z)});
}

enum class Axis : int { X = 0, Y = 1, Z = 2 };

inline const char* axis_name(Axis a) {
  switch (a) {
    case Axis::X: return "x";
    case Axis::Y: return "y";
    default: return "z";
  }
}

// Angle between two vectors in degrees, clamped for safety; returns 0 for
// degenerate (zero-length) inputs.
inline double angle_deg(const Vec3& a, const Vec3& b) {
  double na = a.norm(), nb = b.norm();
  if (na == 0 || nb == 0) return 0.0;
  double c = a.dot(b) / (na * nb);
  c = std::max(-1.0, std::min(1.0, c));
  return std::acos(c) * 180.0 / M_PI;
}

// ---------------------------------------------------------------------------
// Deterministic RNG. mt19937_64 has a standardized sequence, but the
// std::*_distribution adapters do not, so the mapping to doubles is done here.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform in [0, 1).
  double uniform() { return double(eng_() >> 11) * (1.0 / 9007199254740992.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (pairs cached).
  double gauss() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0;
  bool have_spare_ = false;
};

}  // namespace tomo

#endif
