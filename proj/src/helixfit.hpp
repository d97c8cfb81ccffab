#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "volgrid.hpp"

namespace tomo {

// Cylindrical agreement scoring between helix density and an atomic model:
// the model's central axis defines nested cylinders (2.5 and 4 Angstrom
// radii) and the score is the harmonic mean of density precision inside the
// inner cylinder and model recall against it.

struct HelixModel {
  std::vector<Vec3> calphas;  // Angstroms, ascending residue order
  char chain_id = ' ';
  int res_first = 0, res_last = 0;
};

struct CylinderFitReport {
  double f1 = 0;
  double pden = 0;  // precision: inner hits / all hits within 4 A
  double rmod = 0;  // recall: inner hits / inner cylinder voxels
  std::int64_t vx_inner = 0;  // inner-cylinder voxels at or above threshold
  std::int64_t vx_out = 0;    // annulus voxels at or above threshold
  std::int64_t ex_mod = 0;    // inner-cylinder voxels below threshold
  double best_threshold = 0;
  double r_inner = 2.5, r_outer = 4.0;  // Angstroms
  bool degenerate = false;  // no voxel fell within the outer cylinder
};

// Minimal fixed-column PDB reader: ATOM records named CA with blank or 'A'
// altloc, filtered by chain and inclusive residue range, first model only.
// The first record per residue number wins. Throws FormatError with a line
// number on malformed records and ArgError when nothing matches.
HelixModel parse_calpha(const std::string& model_text, char chain, int res_first, int res_last);

// Central axis of a helix: means of every 4 consecutive C-alpha positions,
// resampled to 0.5 Angstrom arc spacing. Requires at least 4 atoms with
// consecutive spacing inside the [2.0, 4.5] Angstrom sanity band.
std::vector<Vec3> central_axis(const HelixModel& model);

// Classifies voxels against the axis cylinders at one threshold. Radial
// distance runs from the voxel center to the axis polyline, counting only
// voxels whose projection falls within a segment (flat end caps); a
// single-point axis degenerates to a sphere.
struct CylinderCounts {
  std::int64_t vx_inner = 0, vx_out = 0, ex_mod = 0;
};
CylinderCounts cylinder_counts(const VoxelGrid& grid, const std::vector<Vec3>& axis,
                               double threshold);

// Sweeps 64 equally spaced thresholds from the grid mean to the grid max and
// reports the scores at the F1-maximizing threshold (ties keep the lowest).
CylinderFitReport helix_f1(const VoxelGrid& grid, const std::vector<Vec3>& axis);

// Length-weighted mean F1 over (helix length, report) pairs.
double chain_score(const std::vector<std::pair<double, CylinderFitReport>>& reports);

// Copy of the grid keeping only voxels within `radius` of any atom (the
// usual way to isolate one chain's density before scoring).
VoxelGrid masked_by_atoms(const VoxelGrid& grid, const std::vector<Vec3>& atoms,
                          double radius = 5.0);

}  // namespace tomo
