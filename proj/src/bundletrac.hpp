#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "traceio.hpp"
#include "volgrid.hpp"

namespace tomo {

// Seed-based tracer for parallel filament bundles: estimates the bundle's
// bending axis from cross-section correlations, averages the map along it,
// and marches markers from user seeds guided by a hexagonal peak kernel.

enum class PeakMode { Seven, One };

// Piecewise-linear field of unit bundle directions sampled along Y.
struct BundleAxisField {
  // (y position, unit direction with positive Y component), ascending y.
  std::vector<std::pair<double, Vec3>> samples;

  // Linear interpolation between samples, clamped at the ends, renormalized.
  Vec3 direction_at(double y) const;
};

// Hexagonal arrangement of Gaussian peaks matching the bundle lattice: one
// central peak plus six vertices at distance `spacing`, rotated by
// `orientation`. One-peak mode keeps only the center.
struct HexKernel {
  double spacing = 12.6;   // voxels between neighboring filaments
  double sigma = 4.2;      // Gaussian width in voxels
  double orientation = 0;  // hexagon rotation, radians
  PeakMode mode = PeakMode::Seven;
};

// One XZ plane of a grid, X fastest.
struct Section2D {
  int nx = 0, nz = 0;
  std::vector<float> v;

  float at(int ix, int iz) const { return v[std::size_t(iz) * std::size_t(nx) + std::size_t(ix)]; }
  float& at(int ix, int iz) { return v[std::size_t(iz) * std::size_t(nx) + std::size_t(ix)]; }
};

Section2D extract_section(const VoxelGrid& grid, int y);

struct BundleConfig {
  int slice_stride = 55;        // Y distance between correlated cross-sections
  int slab_half_span = 2;       // cross-sections average 2*span+1 slices
  int average_half_window = 15; // longitudinal averaging reach, steps
  bool longitudinal = true;     // apply longitudinal averaging before tracing
  double spacing_nm = 12.6;     // filament-to-filament distance, nanometers
  double sigma_vox = 0;         // Gaussian width in voxels; 0 picks spacing/3
  PeakMode mode = PeakMode::Seven;
  double pre_blur_fwhm = 0;     // optional Gaussian blur of the raw map
  double orientation_deg = 0;   // hexagon rotation fallback, degrees
  int marker_interval = 15;     // Y slices between consecutive markers
  double search_radius = 2.0;   // allowed lateral drift per step, voxels
  double refine_step = 0.25;    // search grid pitch inside the disc, voxels
  // Cap on the per-stride correlation shift during axis detection, voxels.
  // Periodic bundles correlate equally well at whole lattice offsets; the cap
  // keeps the peak search in the gentle-bending regime. Negative derives
  // search_radius * slice_stride / marker_interval, 0 searches all shifts.
  double max_axis_shift = -1;
};

// Estimates the bundle direction per Y anchor by cross-correlating slab
// averaged XZ sections slice_stride apart (FFT correlation, parabolic
// sub-voxel peak refinement). max_shift > 0 restricts the admissible peak
// shift per axis (zero shift always qualifies); 0 searches all shifts.
// Throws when the grid spans fewer than 2 * slice_stride slices along Y.
BundleAxisField detect_bundle_axis(const VoxelGrid& grid, int slice_stride = 55,
                                   int slab_half_span = 2, double max_shift = 0);

// Replaces each voxel by the mean of itself and the trilinear samples taken
// 1..half_window unit steps along the local bundle direction both ways;
// samples outside the grid are excluded from the mean.
VoxelGrid longitudinal_average(const VoxelGrid& grid, const BundleAxisField& field,
                               int half_window = 15);

// Sum of Gaussian-weighted section densities around every kernel peak placed
// relative to (cx, cz); weights are truncated at three sigma and samples
// falling outside the section are dropped.
double seven_peak_response(const Section2D& section, const HexKernel& kernel, double cx,
                           double cz);

// Hexagon rotation (radians, 60-degree periodic) that best explains the
// pairwise XZ offsets of seeds spaced between 0.5 and 1.5 lattice spacings.
// Falls back when fewer than 3 seeds or no qualifying pair exists.
double estimate_hex_orientation(const std::vector<Vec3>& seeds_vox, double spacing_vox,
                                double fallback_rad);

struct BundleResult {
  std::vector<FilamentTrace> traces;      // one per usable seed, seed order
  std::vector<std::string> seed_errors;   // per-seed failures, seeds kept apart
  BundleAxisField axis;
};

// Marches markers from every seed in both Y directions in steps of
// marker_interval (final step truncated at the grid boundary), placing each
// marker at the kernel-response argmax within a disc of search_radius around
// the previous marker advanced along the bundle axis. Seeds are physical
// coordinates; traces come back in physical coordinates too.
BundleResult trace_bundle(const VoxelGrid& grid, const BundleAxisField& field,
                          const std::vector<Vec3>& seeds, const BundleConfig& cfg);

// Full pipeline: optional blur, axis detection, optional longitudinal
// averaging, then tracing.
BundleResult run_bundletrac(const VoxelGrid& raw, const std::vector<Vec3>& seeds,
                            const BundleConfig& cfg);

}  // namespace tomo
