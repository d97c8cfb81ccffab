#ifndef TOMOTRACE_VOLGRID_HPP
#define TOMOTRACE_VOLGRID_HPP

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"

namespace tomo {

// Geometry of a grid without the voxel payload.
struct GridSpec {
  IVec3 dims{0, 0, 0};
  double spacing = 1.0;  // uniform physical unit per voxel edge
  Vec3 origin{0, 0, 0};  // physical position of the center of voxel (0,0,0)

  std::size_t voxel_count() const {
    return std::size_t(dims.x) * std::size_t(dims.y) * std::size_t(dims.z);
  }
};

// Dense scalar volume, X fastest (data[i + nx*(j + ny*k)]).
class VoxelGrid {
 public:
  VoxelGrid() = default;
  VoxelGrid(IVec3 dims, double spacing, Vec3 origin = {}, float fill = 0.0f)
      : spec_{dims, spacing, origin}, data_(checked_count(dims), fill) {}
  explicit VoxelGrid(const GridSpec& spec, float fill = 0.0f)
      : VoxelGrid(spec.dims, spec.spacing, spec.origin, fill) {}

  const GridSpec& spec() const { return spec_; }
  int nx() const { return spec_.dims.x; }
  int ny() const { return spec_.dims.y; }
  int nz() const { return spec_.dims.z; }
  IVec3 dims() const { return spec_.dims; }
  double spacing() const { return spec_.spacing; }
  const Vec3& origin() const { return spec_.origin; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(int i, int j, int k) const {
    return std::size_t(i) + std::size_t(spec_.dims.x) * (std::size_t(j) + std::size_t(spec_.dims.y) * std::size_t(k));
  }
  bool in_bounds(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < spec_.dims.x && j < spec_.dims.y && k < spec_.dims.z;
  }
  bool in_bounds(const IVec3& v) const { return in_bounds(v.x, v.y, v.z); }

  float at(int i, int j, int k) const { return data_[index(i, j, k)]; }
  float& at(int i, int j, int k) { return data_[index(i, j, k)]; }
  float at(const IVec3& v) const { return at(v.x, v.y, v.z); }
  float& at(const IVec3& v) { return at(v.x, v.y, v.z); }

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  // Physical <-> voxel coordinate maps. Voxel (i,j,k) is centered at
  // origin + (i,j,k)*spacing.
  Vec3 voxel_center(const IVec3& v) const {
    return spec_.origin + v.to_vec3() * spec_.spacing;
  }
  Vec3 to_voxel(const Vec3& p) const { return (p - spec_.origin) / spec_.spacing; }
  IVec3 nearest_voxel(const Vec3& p) const {
    Vec3 v = to_voxel(p);
    return {int(std::lround(v.x)), int(std::lround(v.y)), int(std::lround(v.z))};
  }

  // Trilinear sample at fractional voxel coordinates; voxels outside the grid
  // contribute zero.
  double sample_trilinear(const Vec3& voxel_coords) const;

 private:
  // Validates before data_ is sized: members initialize in declaration order,
  // and a negative dimension must not reach the allocator as a huge size_t.
  static std::size_t checked_count(IVec3 dims) {
    if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0)
      throw ArgError("VoxelGrid: dimensions must be positive");
    return std::size_t(dims.x) * std::size_t(dims.y) * std::size_t(dims.z);
  }

  GridSpec spec_;
  std::vector<float> data_;
};

struct GridStats {
  double min = 0, max = 0, mean = 0, sd = 0;
  // (requested percentile, value) pairs, nearest-rank convention.
  std::vector<std::pair<double, float>> percentiles;
};

// Refuse to allocate grids above this many voxels when reading maps.
inline constexpr std::size_t kDefaultVoxelBudget = 1000u * 1000u * 1000u;

// MRC2014 volume reader. Handles modes 0 (int8), 1 (int16) and 2 (float32),
// normalizes any mapc/mapr/maps axis order to X-fastest storage, and derives
// a uniform voxel spacing from cella/mx..mz. Anisotropic spacing is refused;
// resample such maps externally.
VoxelGrid read_map(const std::string& path, std::size_t voxel_budget = kDefaultVoxelBudget);

// Writes a mode-2 (float32) MRC2014 file with mapc/mapr/maps = 1/2/3 and
// dmin/dmax/dmean/rms computed from the payload. read_map(write_map(g)) is
// bit-exact on the payload.
void write_map(const std::string& path, const VoxelGrid& grid);

// Affine min-max rescale to [0,1]. A constant grid maps to all zeros.
VoxelGrid normalize_unit(const VoxelGrid& grid);

// Separable Gaussian blur with zero padding outside the grid. fwhm is in
// physical units; fwhm <= 0 returns the input unchanged. The 1D kernel is
// normalized to unit sum, so interior mass is conserved.
VoxelGrid gaussian_blur(const VoxelGrid& grid, double fwhm);

// Reference implementation: direct dense 3D convolution with the product
// kernel. O(N * k^3), only meant for small grids in tests and benchmarks.
VoxelGrid gaussian_blur_serial(const VoxelGrid& grid, double fwhm);

inline double fwhm_to_sigma(double fwhm) { return fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0))); }

// Percentile of a sample by the nearest-rank rule: the value at sorted index
// ceil(p/100 * N) (1-based), clamped to [1, N]; p = 0 gives the minimum.
// The input vector is sorted in place.
float percentile_nearest_rank(std::vector<float>& values, double p);

// min/max/mean/population-sd plus nearest-rank percentiles.
GridStats grid_stats(const VoxelGrid& grid, const std::vector<double>& pcts = {5, 25, 50, 75, 95});

}  // namespace tomo

#endif
