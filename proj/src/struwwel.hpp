#pragma once

#include <cstddef>
#include <vector>

#include "dpcore.hpp"
#include "traceio.hpp"
#include "volgrid.hpp"

namespace tomo {

// Tracer for unbundled, arbitrarily oriented filaments: per-seed segments are
// the best of three axis-aligned forward pyramids, screened by a fixed
// density threshold and fused across gaps by proximity and by a one-time
// extension pass.
struct StruwwelConfig {
  int length = 10;               // axial steps per traced segment
  int seed_spacing = 0;          // seed cube edge; 0 picks length / 2
  double backward_angle = 20.0;  // degrees, backward-retrace screen
  double threshold = -1.0;       // NPD cut in [0, 1]; must be set
  double fuse_angle = 30.0;      // degrees, both fusion passes
  double fuse_gap = 10.0;        // voxels, endpoint distance cap for fusion
};

struct StruwwelDiagnostics {
  std::size_t seeds = 0;
  std::size_t skipped_seeds = 0;
  std::size_t segments = 0;
  std::size_t after_backward = 0;
  std::size_t after_threshold = 0;
  std::size_t after_proximity = 0;
  std::size_t traces = 0;
};

struct StruwwelResult {
  std::vector<FilamentTrace> traces;
  // Per-voxel maximum segment NPD splatted over each segment's one-voxel
  // dilation, built from the screened segments before thresholding.
  VoxelGrid density_map;
  StruwwelDiagnostics diagnostics;
};

// Traces forward pyramids along +X, +Y and +Z from every seed and keeps the
// densest result per seed. Ties prefer the earlier axis (X before Y before
// Z); *skipped counts seeds with no in-grid pyramid base on any axis.
std::vector<Cfs> generate_cfs_multiaxis(const VoxelGrid& grid, const std::vector<IVec3>& seeds,
                                        int length, std::size_t* skipped = nullptr);

// Splats every segment's NPD onto the one-voxel Chebyshev dilation of its
// rounded points, keeping the per-voxel maximum.
VoxelGrid build_pruning_map(const GridSpec& spec, const std::vector<Cfs>& cfss);

// Keeps segments with NPD at or above the threshold.
std::vector<Cfs> segment_by_threshold(std::vector<Cfs> cfss, double threshold);

// Fuses segment pairs whose closest endpoints are within max_gap and whose
// oriented directions (and the connector, when longer than one voxel) agree
// within max_angle. The four endpoint pairings are all considered; merges
// run closest pair first and repeat until no pair qualifies.
std::vector<Cfs> fuse_proximity(std::vector<Cfs> cfss, double max_angle, double max_gap);

// One-time gap closing: extends each segment once from its end by a forward
// DP trace along its own axis and, where the extension lands within the
// fusion criteria of another segment, joins the two through the extension
// samples truncated at the landing point. Extensions that reach no segment
// are discarded.
std::vector<Cfs> fuse_by_extension(const VoxelGrid& grid, std::vector<Cfs> cfss, int length,
                                   double max_angle, double max_gap);

// Full pipeline on a raw map. Requires cfg.threshold in [0, 1].
StruwwelResult trace_struwwel(const VoxelGrid& raw, const StruwwelConfig& cfg);

}  // namespace tomo
