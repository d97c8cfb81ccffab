#ifndef TOMOTRACE_FFT_UTILS_HPP
#define TOMOTRACE_FFT_UTILS_HPP

#include <complex>
#include <vector>

#include "common.hpp"

namespace tomo::fft {

// Half-complex spectrum of a 3D real field stored X fastest. The redundant
// Hermitian half along X is dropped: kx runs over [0, nx/2].
struct Spectrum3D {
  IVec3 dims;  // real-space dimensions
  std::vector<std::complex<double>> c;

  int nxh() const { return dims.x / 2 + 1; }
  std::size_t index(int kx, int ky, int kz) const {
    return std::size_t(kx) + std::size_t(nxh()) * (std::size_t(ky) + std::size_t(dims.y) * std::size_t(kz));
  }
};

struct Spectrum2D {
  int nx = 0, ny = 0;  // real-space dimensions
  std::vector<std::complex<double>> c;

  int nxh() const { return nx / 2 + 1; }
  std::size_t index(int kx, int ky) const {
    return std::size_t(kx) + std::size_t(nxh()) * std::size_t(ky);
  }
};

// Unnormalized forward transforms; inverse transforms divide by the element
// count so inverse(forward(f)) == f up to rounding. All plans use
// FFTW_ESTIMATE on aligned scratch buffers and run single-threaded, which
// keeps results bit-stable regardless of the OpenMP thread count.
Spectrum3D forward_r2c(const IVec3& dims, const std::vector<double>& real);
std::vector<double> inverse_c2r(const Spectrum3D& spec);

Spectrum2D forward_r2c_2d(int nx, int ny, const std::vector<double>& real);
std::vector<double> inverse_c2r_2d(const Spectrum2D& spec);

// Signed frequency index for an unsigned FFT bin.
inline int signed_freq(int idx, int n) { return idx <= n / 2 ? idx : idx - n; }

// Number of full-spectrum coefficients an r2c bin stands for (its conjugate
// twin is implicit unless the bin is self-conjugate along X).
inline int hermitian_weight(int kx, int nx) { return (kx == 0 || 2 * kx == nx) ? 1 : 2; }

}  // namespace tomo::fft

#endif
