#ifndef TOMOTRACE_METRICS_HPP
#define TOMOTRACE_METRICS_HPP

#include <cstdint>
#include <vector>

#include "traceio.hpp"
#include "volgrid.hpp"

namespace tomo {

// Voxel-level precision/recall/F1. Denominator-free cases are flagged as
// undefined rather than reported as zero.
struct EvalReport {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0;
  bool precision_defined = false, recall_defined = false, f1_defined = false;
};

double f1_from_pr(double precision, double recall);

// Chebyshev (max-norm) dilation by `radius`, computed as three separable 1D
// max filters. OpenMP-parallel, thread-count independent.
std::vector<std::uint8_t> chebyshev_dilate(const std::vector<std::uint8_t>& mask, IVec3 dims,
                                           int radius);

// Mask-level scorer. TP: marked prediction voxels with a truth voxel within
// Chebyshev distance `neighborhood`; FP: the rest of the prediction voxels;
// FN: truth voxels with no prediction voxel within the neighborhood. When
// dilate_pred is set, predictions are first thickened by one voxel so that
// one-voxel centerlines compare fairly against tube-like ground truth.
EvalReport voxel_f1_masks(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& truth,
                          IVec3 dims, int neighborhood = 3, bool dilate_pred = true);

// Trace-level wrapper: rasterizes both sets onto the grid spec first.
EvalReport voxel_f1(const std::vector<FilamentTrace>& pred, const std::vector<FilamentTrace>& truth,
                    const GridSpec& spec, int neighborhood = 3, bool dilate_pred = true);

// Mean Euclidean distance (in voxels) between axially matched points of one
// predicted and one ground-truth filament. Each truth vertex is paired with
// the point on the predicted polyline nearest in the axial coordinate (the
// exact per-segment minimizer, so the result is the dense-resampling limit);
// pairs further than `axial_tol` apart axially are dropped, which also
// restricts scoring to the overlapping axial range.
struct CrossDistanceReport {
  double mean_distance = 0;
  std::size_t matched = 0;      // truth vertices that found a partner
  std::size_t truth_points = 0;
  bool defined = false;         // false when the axial ranges do not overlap
};

CrossDistanceReport cross_distance(const FilamentTrace& pred, const FilamentTrace& truth,
                                   const GridSpec& spec, Axis axis = Axis::Y,
                                   double axial_tol = 0.5);

// Pairs filaments by id when both sides carry unique matching ids, otherwise
// by position in the list; aggregate is the mean of the defined per-pair
// means.
struct CrossDistanceSetReport {
  std::vector<CrossDistanceReport> per_filament;
  double mean_distance = 0;
  std::size_t defined_pairs = 0;
  bool defined = false;
};

CrossDistanceSetReport cross_distance_set(const std::vector<FilamentTrace>& pred,
                                          const std::vector<FilamentTrace>& truth,
                                          const GridSpec& spec, Axis axis = Axis::Y,
                                          double axial_tol = 0.5);

}  // namespace tomo

#endif
