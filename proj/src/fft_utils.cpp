#include "fft_utils.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>

namespace tomo::fft {

namespace {
// FFTW plan creation is not thread-safe; execution of independent plans is.
std::mutex plan_mutex;
}  // namespace

Spectrum3D forward_r2c(const IVec3& dims, const std::vector<double>& real) {
  std::size_t n = std::size_t(dims.x) * dims.y * dims.z;
  if (real.size() != n) throw ArgError("forward_r2c: size mismatch");
  std::size_t nc = std::size_t(dims.x / 2 + 1) * dims.y * dims.z;

  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(nc);
  std::memcpy(in, real.data(), n * sizeof(double));

  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    // FFTW is row-major with the last dimension fastest; our X is fastest.
    plan = fftw_plan_dft_r2c_3d(dims.z, dims.y, dims.x, in, out, FFTW_ESTIMATE);
  }
  fftw_execute(plan);

  Spectrum3D spec;
  spec.dims = dims;
  spec.c.resize(nc);
  for (std::size_t i = 0; i < nc; ++i) spec.c[i] = {out[i][0], out[i][1]};

  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return spec;
}

std::vector<double> inverse_c2r(const Spectrum3D& spec) {
  const IVec3& dims = spec.dims;
  std::size_t n = std::size_t(dims.x) * dims.y * dims.z;
  std::size_t nc = std::size_t(dims.x / 2 + 1) * dims.y * dims.z;
  if (spec.c.size() != nc) throw ArgError("inverse_c2r: size mismatch");

  fftw_complex* in = fftw_alloc_complex(nc);
  double* out = fftw_alloc_real(n);
  std::memcpy(in, spec.c.data(), nc * sizeof(fftw_complex));

  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    plan = fftw_plan_dft_c2r_3d(dims.z, dims.y, dims.x, in, out, FFTW_ESTIMATE);
  }
  fftw_execute(plan);

  std::vector<double> real(n);
  double scale = 1.0 / double(n);
  for (std::size_t i = 0; i < n; ++i) real[i] = out[i] * scale;

  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return real;
}

Spectrum2D forward_r2c_2d(int nx, int ny, const std::vector<double>& real) {
  std::size_t n = std::size_t(nx) * ny;
  if (real.size() != n) throw ArgError("forward_r2c_2d: size mismatch");
  std::size_t nc = std::size_t(nx / 2 + 1) * ny;

  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(nc);
  std::memcpy(in, real.data(), n * sizeof(double));

  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    plan = fftw_plan_dft_r2c_2d(ny, nx, in, out, FFTW_ESTIMATE);
  }
  fftw_execute(plan);

  Spectrum2D spec;
  spec.nx = nx;
  spec.ny = ny;
  spec.c.resize(nc);
  for (std::size_t i = 0; i < nc; ++i) spec.c[i] = {out[i][0], out[i][1]};

  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return spec;
}

std::vector<double> inverse_c2r_2d(const Spectrum2D& spec) {
  std::size_t n = std::size_t(spec.nx) * spec.ny;
  std::size_t nc = std::size_t(spec.nx / 2 + 1) * spec.ny;
  if (spec.c.size() != nc) throw ArgError("inverse_c2r_2d: size mismatch");

  fftw_complex* in = fftw_alloc_complex(nc);
  double* out = fftw_alloc_real(n);
  std::memcpy(in, spec.c.data(), nc * sizeof(fftw_complex));

  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    plan = fftw_plan_dft_c2r_2d(spec.ny, spec.nx, in, out, FFTW_ESTIMATE);
  }
  fftw_execute(plan);

  std::vector<double> real(n);
  double scale = 1.0 / double(n);
  for (std::size_t i = 0; i < n; ++i) real[i] = out[i] * scale;

  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return real;
}

}  // namespace tomo::fft
