#ifndef TOMOTRACE_DPCORE_HPP
#define TOMOTRACE_DPCORE_HPP

#include <vector>

#include "volgrid.hpp"

namespace tomo {

// How forward and backward path densities are combined by enhance_map.
enum class BlendMode { Multiply, Add, GeometricMean, Minimum };

double blend(double fpd, double bpd, BlendMode mode);

// A search pyramid: `length` axial steps along `axis` in direction `sign`,
// with the lateral reach widening by one voxel per step (45 degree opening).
struct PyramidSpec {
  Axis axis = Axis::Y;
  int sign = 1;  // +1 forward, -1 backward
  int length = 5;
};

struct PathDensityResult {
  // False when the pyramid base slice lies outside the grid along the axis;
  // no other situation makes a voxel untraceable.
  bool traceable = false;
  // Best accumulated density over all monotone paths (one axial step, lateral
  // moves in {-1,0,1}^2, never leaving the grid). In [0, length+1] on a
  // unit-normalized grid.
  double value = 0;
  // Base voxel of the best path; ties resolved toward the lexicographically
  // smallest (i,j,k), and the same rule picks predecessors during backtrack.
  IVec3 endpoint{};
  // length+1 voxels from the origin to the endpoint.
  std::vector<IVec3> path;
};

// Dynamic program over the pyramid slices. Throws ArgError if the origin is
// outside the grid or the pyramid is degenerate.
PathDensityResult path_density(const VoxelGrid& grid, const IVec3& origin,
                               const PyramidSpec& pyramid);

// Exhaustive enumeration of all 9^length monotone paths; the testing oracle
// for path_density (keep length <= 6). Identical tie-break rules.
PathDensityResult brute_force_path_density(const VoxelGrid& grid, const IVec3& origin,
                                           const PyramidSpec& pyramid);

// Max path sum over `length`-step monotone paths starting at every voxel
// (the whole-volume form of path_density's value). Entries are -infinity
// where the base slice falls outside the grid. OpenMP-parallel; results are
// independent of the thread count.
std::vector<double> sweep_path_density(const VoxelGrid& grid, Axis axis, int sign, int length);

// Path-density enhancement: for every voxel blend the forward and backward
// pyramid densities along `axis`, zero voxels whose forward or backward base
// leaves the grid, then min-max normalize to [0,1].
VoxelGrid enhance_map(const VoxelGrid& grid, int length, BlendMode mode, Axis axis = Axis::Y);

// Reference implementation computing each voxel independently via
// path_density; O(N * l^3), test-sized grids only.
VoxelGrid enhance_map_serial(const VoxelGrid& grid, int length, BlendMode mode,
                             Axis axis = Axis::Y);

// One seed per cube of edge cube_len partitioning the grid: the
// lexicographically smallest voxel holding the cube's maximum value. Cubes
// are visited in ascending voxel order, so the seed list is deterministic.
std::vector<IVec3> select_seeds(const VoxelGrid& grid, int cube_len);

// A candidate filament segment traced from one seed.
struct Cfs {
  IVec3 start{}, end{};
  double npd = 0;  // normalized path density, value / (length + 1)
  Axis axis = Axis::Y;
  std::vector<Vec3> points;  // voxel coordinates; fractional once smoothed
};

// Backward-retrace screen shared by the tracers: from each segment's end,
// trace a backward pyramid along the segment's own axis and keep the segment
// only when the angle at the end between (start - end) and (backward endpoint
// - end) is at most max_angle_deg (0 means the retrace ran straight back).
std::vector<Cfs> refine_backward(const VoxelGrid& grid, std::vector<Cfs> cfss,
                                 double max_angle_deg, int length);

// Midpoint used by screening stages: rounded average of start and end.
inline IVec3 cfs_midpoint(const Cfs& c) {
  return {int(std::lround((c.start.x + c.end.x) / 2.0)),
          int(std::lround((c.start.y + c.end.y) / 2.0)),
          int(std::lround((c.start.z + c.end.z) / 2.0))};
}

}  // namespace tomo

#endif
