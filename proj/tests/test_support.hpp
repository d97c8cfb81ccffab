#ifndef TOMOTRACE_TEST_SUPPORT_HPP
#define TOMOTRACE_TEST_SUPPORT_HPP

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "common.hpp"
#include "traceio.hpp"
#include "volgrid.hpp"

namespace tomo::test {

#ifndef TESTS_DATA_DIR
#define TESTS_DATA_DIR "."
#endif

inline std::string data_path(const std::string& name) {
  return std::string(TESTS_DATA_DIR) + "/" + name;
}

// Fresh path under a per-process scratch directory; files persist until the
// process exits so failures can be inspected.
inline std::string temp_path(const std::string& name) {
  static const std::filesystem::path root = [] {
    auto p = std::filesystem::temp_directory_path() /
             ("tomotrace-tests-" + std::to_string(::getpid()));
    std::filesystem::create_directories(p);
    return p;
  }();
  static std::atomic<int> counter{0};
  return (root / (std::to_string(counter++) + "-" + name)).string();
}

inline VoxelGrid random_grid(IVec3 dims, std::uint64_t seed, float lo = 0.0f, float hi = 1.0f) {
  VoxelGrid g(dims, 1.0);
  Rng rng(seed);
  for (auto& v : g.data()) v = float(rng.uniform(lo, hi));
  return g;
}

// Single straight filament along `axis` through the middle of the grid,
// value 1 on the centerline, 0 elsewhere.
inline VoxelGrid line_grid(IVec3 dims, Axis axis, float value = 1.0f) {
  VoxelGrid g(dims, 1.0);
  int ax = int(axis);
  IVec3 p{dims.x / 2, dims.y / 2, dims.z / 2};
  for (int t = 0; t < dims[ax]; ++t) {
    p[ax] = t;
    g.at(p) = value;
  }
  return g;
}

inline FilamentTrace make_trace(int id, std::vector<Vec3> pts) {
  FilamentTrace t;
  t.id = id;
  t.points = std::move(pts);
  return t;
}

inline bool bits_equal(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) return false;
  return a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

inline double max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i)
    m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

inline std::string slurp(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) return {};
  std::string s;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) s.append(buf, n);
  std::fclose(f);
  return s;
}

}  // namespace tomo::test

#endif
