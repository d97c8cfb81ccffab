#ifndef TOMOTRACE_GEOM_HPP
#define TOMOTRACE_GEOM_HPP

#include <vector>

#include "common.hpp"

namespace tomo {

double polyline_length(const std::vector<Vec3>& pts);

// Distance from p to segment [a, b] (clamped projection).
double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b);

// Minimum distance from p to a polyline.
double point_polyline_distance(const Vec3& p, const std::vector<Vec3>& pts);

// Resample a polyline at a fixed arc-length step. The first and last input
// points are always kept.
std::vector<Vec3> resample_polyline(const std::vector<Vec3>& pts, double step);

// Moving average with an odd window. Endpoints are pinned; interior points
// use the largest symmetric window that fits, up to the requested one.
std::vector<Vec3> moving_average(const std::vector<Vec3>& pts, int window);

// Drop interior points that deviate less than tol from the segment joining
// their kept neighbors (greedy anchor sweep: every dropped point is within
// tol of the simplified polyline).
std::vector<Vec3> simplify_collinear(const std::vector<Vec3>& pts, double tol);

// resample(1 voxel) -> moving_average(5) -> simplify(0.25 voxel), the
// centerline cleanup applied to fused filament segments. Units are voxels.
std::vector<Vec3> smooth_centerline(const std::vector<Vec3>& pts, double resample_step = 1.0,
                                    int window = 5, double collinear_tol = 0.25);

}  // namespace tomo

#endif
