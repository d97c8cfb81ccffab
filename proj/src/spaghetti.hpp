#pragma once

#include <cstddef>
#include <vector>

#include "dpcore.hpp"
#include "traceio.hpp"
#include "volgrid.hpp"

namespace tomo {

// Dense-bundle tracer: enhances the map with bidirectional path densities,
// traces short segments from per-cube seeds, screens them by an occupancy
// derived density threshold, then fuses the survivors into filament traces
// by a directional voxel walk.
struct SpaghettiConfig {
  int length = 5;                    // axial steps per traced segment
  Axis axis = Axis::Y;               // filament-dominant axis
  BlendMode blend = BlendMode::Multiply;
  bool enhance = true;               // skip map enhancement when false
  bool line_segments = false;        // trace straight lines instead of DP paths
  double backward_angle = 30.0;      // degrees, backward-retrace screen
  double collinear_angle = 6.0;      // degrees, collinear fusion
  double collinear_gap = 10.0;       // voxels, collinear fusion axial gap cap
  double isolation_radius = 20.0;    // voxels, isolation screen
  int isolation_min_neighbors = 3;   // neighbors required within the radius
  int extension_cap = 5;             // max extended length, in units of length
  double overlap_fraction = 0.9;     // redundancy pruning threshold
  int occupancy_cube = 100;          // cube edge for the occupancy screen
  int occupancy_min_count = 10;      // midpoints that make a cube "dense"
  double occupancy_fraction = 0.15;  // sparse-cube share required to pass
};

struct SpaghettiDiagnostics {
  std::size_t seeds = 0;
  std::size_t skipped_seeds = 0;
  std::size_t segments = 0;
  int threshold_bin = 0;  // 0: no segments, 11: every bin failed the screen
  std::size_t after_threshold = 0;
  std::size_t after_backward = 0;
  std::size_t after_collinear = 0;
  std::size_t after_isolation = 0;
  std::size_t after_extension = 0;
  std::size_t traces_walked = 0;
  std::size_t traces_kept = 0;
};

struct SpaghettiResult {
  std::vector<FilamentTrace> traces;
  SpaghettiDiagnostics diagnostics;
};

// Traces one forward segment per seed via the pyramid dynamic program.
// Seeds whose forward base leaves the grid are counted in *skipped.
std::vector<Cfs> trace_cfs(const VoxelGrid& grid, const std::vector<IVec3>& seeds,
                           const SpaghettiConfig& cfg, std::size_t* skipped = nullptr);

// Straight-line variant: scores every lateral endpoint in the forward
// pyramid base by the summed density along the interpolated line.
std::vector<Cfs> trace_cfs_line(const VoxelGrid& grid, const std::vector<IVec3>& seeds,
                                const SpaghettiConfig& cfg, std::size_t* skipped = nullptr);

// Decile of a normalized path density, 1 through 10.
int npd_bin(double npd);

// Lowest decile whose cumulative segment set still looks localized: for each
// bin b from 10 down, the midpoints of all segments with bin >= b must leave
// at least occupancy_fraction of the occupancy cubes holding fewer than
// occupancy_min_count midpoints. Returns the first b whose set fails plus
// one, 1 when every bin passes, 0 when there are no segments at all.
int find_threshold_bin(const std::vector<Cfs>& cfss, IVec3 dims, const SpaghettiConfig& cfg);

// Fuses near-collinear segments whose facing endpoints are within the axial
// gap cap, smallest gap first, repeating until no pair qualifies. Fused
// centerlines are smoothed. Survivors are returned sorted by (start, end).
std::vector<Cfs> fuse_collinear(std::vector<Cfs> cfss, const SpaghettiConfig& cfg);

// Drops segments with fewer than isolation_min_neighbors other midpoints
// within isolation_radius, rounds repeated until stable.
std::vector<Cfs> remove_isolated(std::vector<Cfs> cfss, const SpaghettiConfig& cfg);

// Grows each segment forward by further DP segments while the new segment's
// NPD stays at or above npd_floor, up to extension_cap * length axial steps.
std::vector<Cfs> extend_cfs(const VoxelGrid& grid, std::vector<Cfs> cfss, double npd_floor,
                            const SpaghettiConfig& cfg);

// Collects every segment voxel, scans them in axial-major order, and walks
// each unassigned voxel forward by one axial step (same lateral position) or
// two axial steps (lateral offsets up to one). Walks of at least two voxels
// become traces in physical coordinates.
std::vector<FilamentTrace> fuse_directional(const std::vector<Cfs>& cfss, const GridSpec& spec,
                                            Axis axis);

// Removes traces sharing more than overlap_fraction of their voxels with the
// one-voxel dilation of a longer kept trace. Ties on length keep the trace
// with the lexicographically smaller first voxel.
std::vector<FilamentTrace> prune_redundant(std::vector<FilamentTrace> traces,
                                           const GridSpec& spec, double overlap_fraction);

// Full pipeline on a raw map.
SpaghettiResult trace_spaghetti(const VoxelGrid& raw, const SpaghettiConfig& cfg = {});

}  // namespace tomo
