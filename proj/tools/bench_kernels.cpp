// Times the OpenMP kernels against their serial reference implementations on
// a seeded phantom and reports the largest per-voxel deviation. The outputs
// must agree to float rounding; the wall times are informational.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "dpcore.hpp"
#include "phantom.hpp"
#include "volgrid.hpp"

using namespace tomo;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double max_abs_diff(const VoxelGrid& a, const VoxelGrid& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, double(std::fabs(a.data()[i] - b.data()[i])));
  return m;
}

void row(const char* kernel, double par_s, double ser_s, double diff) {
  std::printf("%-14s %10.3fs %10.3fs %8.2fx %12.3e\n", kernel, par_s, ser_s,
              par_s > 0 ? ser_s / par_s : 0.0, diff);
}

}  // namespace

int main(int argc, char** argv) {
  IVec3 dims{64, 64, 48};
  int length = 5;
  if (argc == 2 || argc > 5) {
    std::fprintf(stderr, "usage: bench_kernels [nx ny nz [length]]\n");
    return 1;
  }
  if (argc >= 4) {
    dims = {std::atoi(argv[1]), std::atoi(argv[2]), std::atoi(argv[3])};
    if (dims.x < 8 || dims.y < 8 || dims.z < 8) {
      std::fprintf(stderr, "dimensions must be at least 8\n");
      return 1;
    }
  }
  if (argc == 5) length = std::atoi(argv[4]);

  GridSpec spec{dims, 1.0, {}};
  auto truth = make_random_traces(spec, 20, 7);
  SimulationConfig sim;
  sim.noise_level = 0.5;
  sim.rng_seed = 7;
  VoxelGrid map = simulate_tomogram(spec, truth, sim);

  std::printf("phantom %dx%dx%d, segment length %d\n\n", dims.x, dims.y, dims.z, length);
  std::printf("%-14s %11s %11s %9s %12s\n", "kernel", "parallel", "serial", "speedup",
              "max |diff|");

  {
    auto t0 = Clock::now();
    VoxelGrid par = gaussian_blur(map, 5.0);
    double par_s = seconds_since(t0);
    t0 = Clock::now();
    VoxelGrid ser = gaussian_blur_serial(map, 5.0);
    double ser_s = seconds_since(t0);
    row("gaussian_blur", par_s, ser_s, max_abs_diff(par, ser));
  }
  {
    auto t0 = Clock::now();
    VoxelGrid par = enhance_map(map, length, BlendMode::Multiply);
    double par_s = seconds_since(t0);
    t0 = Clock::now();
    VoxelGrid ser = enhance_map_serial(map, length, BlendMode::Multiply);
    double ser_s = seconds_since(t0);
    row("enhance_map", par_s, ser_s, max_abs_diff(par, ser));
  }
  return 0;
}
