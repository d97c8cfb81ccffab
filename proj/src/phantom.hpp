#ifndef TOMOTRACE_PHANTOM_HPP
#define TOMOTRACE_PHANTOM_HPP

#include <cstdint>
#include <vector>

#include "traceio.hpp"
#include "volgrid.hpp"

namespace tomo {

// Radial shape of the synthetic noise power spectrum.
struct NoiseSpectrum {
  enum class Kind { PowerLaw, Tabulated };
  Kind kind = Kind::PowerLaw;
  // PowerLaw: power ~ r^-alpha over radius in frequency voxels; 0 = white.
  double alpha = 1.5;
  // Tabulated: mean power per 1-frequency-voxel shell, e.g. from
  // extract_radial_spectrum of a reference tomogram. Only the shape matters;
  // the synthesized field is always rescaled to unit sd.
  std::vector<double> profile;

  static NoiseSpectrum power_law(double a) {
    NoiseSpectrum s;
    s.kind = Kind::PowerLaw;
    s.alpha = a;
    return s;
  }
  static NoiseSpectrum tabulated(std::vector<double> p) {
    NoiseSpectrum s;
    s.kind = Kind::Tabulated;
    s.profile = std::move(p);
    return s;
  }
};

struct SimulationConfig {
  double fwhm = 5.0;                  // Gaussian blur FWHM, physical units
  double signal_amplification = 1.0;  // scales the rasterized filaments
  // Noise strength convention: the sd of the additive noise field equals
  // noise_level times the peak value of the blurred (noise-free) signal.
  double noise_level = 0.0;
  NoiseSpectrum noise_spectrum;
  double wedge_half_angle = 90.0;  // tilt range +-angle in degrees; 90 = off
  Axis wedge_axis = Axis::X;       // tilt axis (beam is always Z)
  std::uint64_t rng_seed = 0;
};

// Marks every voxel the trace polylines round into: each segment is walked
// through its half-integer rounding boundaries, so the cover is exact at any
// segment length. Out-of-grid points are clipped. Output is a binary 0/1
// grid on the given spec.
VoxelGrid rasterize_traces(const GridSpec& spec, const std::vector<FilamentTrace>& traces);

// Mean power |F|^2 per 1-frequency-voxel radial shell (Hermitian-weighted),
// shells 0..min(dims)/2, radius measured in index units. The absolute scale
// is arbitrary; compare shapes, not magnitudes.
std::vector<double> extract_radial_spectrum(const VoxelGrid& grid);

// Synthesizes a zero-mean, unit-sd real noise field with the requested radial
// power shape: every Fourier coefficient gets the exact target magnitude for
// its shell and a phase taken from a seeded white field, so measured shell
// means match the target by construction. Deterministic per seed.
VoxelGrid colored_noise(const GridSpec& spec, const NoiseSpectrum& spectrum, std::uint64_t seed);

// Zeroes all Fourier coefficients inside the missing wedge of a single-axis
// tilt series. With tilt axis X and beam Z, a direction is missing when the
// angle of its (fy, fz) component from the beam axis is below
// 90 - half_angle degrees; the wedge is invariant along the tilt axis.
// half_angle is the tilt half-range in (0, 90]; 90 disables the wedge.
VoxelGrid apply_missing_wedge(const VoxelGrid& grid, double half_angle_deg,
                              Axis tilt_axis = Axis::X);

// rasterize -> amplify -> blur -> add scaled colored noise -> missing wedge.
VoxelGrid simulate_tomogram(const GridSpec& spec, const std::vector<FilamentTrace>& traces,
                            const SimulationConfig& config);

// ---------------------------------------------------------------------------
// Synthetic ground-truth generators for validation phantoms and benchmarks.
// All coordinates are physical units on the given spec; deterministic per
// seed.
// ---------------------------------------------------------------------------

// Near-parallel filaments along `axis`, confined to an elliptical bundle in
// the orthogonal plane (leaving empty margins), with gentle sinusoidal
// lateral drift. Gives dominant-direction phantoms.
std::vector<FilamentTrace> make_parallel_traces(const GridSpec& spec, int count,
                                                std::uint64_t seed, Axis axis = Axis::Y,
                                                double drift_amplitude = 2.0);

// Straight filaments with uniformly random orientations, clipped to an inner
// box with 12% margins; lengths drawn from [min_len, max_len] voxels.
std::vector<FilamentTrace> make_random_traces(const GridSpec& spec, int count, std::uint64_t seed,
                                              double min_len = 40, double max_len = 120);

// Hexagonally packed bundle along Y: a center filament plus `rings` full
// rings (rings=2 gives 19), lattice constant `lattice_spacing` voxels, all
// filaments sharing a sinusoidal X drift of the given amplitude (voxels).
std::vector<FilamentTrace> make_hex_bundle_traces(const GridSpec& spec, int rings,
                                                  double lattice_spacing, double drift_amplitude,
                                                  double drift_period);

}  // namespace tomo

#endif
