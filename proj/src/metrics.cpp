#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "geom.hpp"
#include "phantom.hpp"

namespace tomo {

double f1_from_pr(double precision, double recall) {
  if (precision + recall <= 0) return 0;
  return 2.0 * precision * recall / (precision + recall);
}

namespace {

// 1D max filter along one axis of a 3D mask.
void dilate_pass(const std::vector<std::uint8_t>& in, std::vector<std::uint8_t>& out, IVec3 dims,
                 int axis, int radius) {
  int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
  int n_axis = dims[axis], n1 = dims[a1], n2 = dims[a2];
  std::size_t stride[3] = {1, std::size_t(dims.x), std::size_t(dims.x) * std::size_t(dims.y)};
  std::size_t s_ax = stride[axis], s1 = stride[a1], s2 = stride[a2];

#pragma omp parallel for collapse(2) schedule(static)
  for (int u2 = 0; u2 < n2; ++u2)
    for (int u1 = 0; u1 < n1; ++u1) {
      std::size_t base = std::size_t(u1) * s1 + std::size_t(u2) * s2;
      for (int t = 0; t < n_axis; ++t) {
        std::uint8_t v = 0;
        int lo = std::max(0, t - radius), hi = std::min(n_axis - 1, t + radius);
        for (int s = lo; s <= hi && !v; ++s) v = in[base + std::size_t(s) * s_ax];
        out[base + std::size_t(t) * s_ax] = v;
      }
    }
}

}  // namespace

std::vector<std::uint8_t> chebyshev_dilate(const std::vector<std::uint8_t>& mask, IVec3 dims,
                                           int radius) {
  if (radius < 0) throw ArgError("chebyshev_dilate: radius must be >= 0");
  if (mask.size() != std::size_t(dims.x) * dims.y * dims.z)
    throw ArgError("chebyshev_dilate: size mismatch");
  if (radius == 0) return mask;
  std::vector<std::uint8_t> a(mask), b(mask.size());
  dilate_pass(a, b, dims, 0, radius);
  dilate_pass(b, a, dims, 1, radius);
  dilate_pass(a, b, dims, 2, radius);
  return b;
}

EvalReport voxel_f1_masks(const std::vector<std::uint8_t>& pred_in,
                          const std::vector<std::uint8_t>& truth, IVec3 dims, int neighborhood,
                          bool dilate_pred) {
  if (neighborhood < 0) throw ArgError("voxel_f1: neighborhood must be >= 0");
  std::vector<std::uint8_t> pred = dilate_pred ? chebyshev_dilate(pred_in, dims, 1) : pred_in;
  auto truth_near = chebyshev_dilate(truth, dims, neighborhood);
  auto pred_near = chebyshev_dilate(pred, dims, neighborhood);

  // Deterministic fixed-order counting, partials per Z-slice.
  std::size_t slice = std::size_t(dims.x) * dims.y;
  std::vector<std::size_t> tp_part(dims.z, 0), fp_part(dims.z, 0), fn_part(dims.z, 0);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < dims.z; ++k) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = slice * k; i < slice * (k + 1); ++i) {
      if (pred[i]) {
        if (truth_near[i])
          ++tp;
        else
          ++fp;
      }
      if (truth[i] && !pred_near[i]) ++fn;
    }
    tp_part[k] = tp;
    fp_part[k] = fp;
    fn_part[k] = fn;
  }

  EvalReport r;
  for (int k = 0; k < dims.z; ++k) {
    r.tp += tp_part[k];
    r.fp += fp_part[k];
    r.fn += fn_part[k];
  }
  r.precision_defined = r.tp + r.fp > 0;
  r.recall_defined = r.tp + r.fn > 0;
  if (r.precision_defined) r.precision = double(r.tp) / double(r.tp + r.fp);
  if (r.recall_defined) r.recall = double(r.tp) / double(r.tp + r.fn);
  r.f1_defined = r.precision_defined && r.recall_defined && (r.precision + r.recall > 0);
  if (r.f1_defined) r.f1 = f1_from_pr(r.precision, r.recall);
  return r;
}

EvalReport voxel_f1(const std::vector<FilamentTrace>& pred, const std::vector<FilamentTrace>& truth,
                    const GridSpec& spec, int neighborhood, bool dilate_pred) {
  VoxelGrid pg = rasterize_traces(spec, pred);
  VoxelGrid tg = rasterize_traces(spec, truth);
  std::vector<std::uint8_t> pm(pg.size()), tm(tg.size());
  for (std::size_t i = 0; i < pg.size(); ++i) pm[i] = pg.data()[i] > 0 ? 1 : 0;
  for (std::size_t i = 0; i < tg.size(); ++i) tm[i] = tg.data()[i] > 0 ? 1 : 0;
  return voxel_f1_masks(pm, tm, spec.dims, neighborhood, dilate_pred);
}

CrossDistanceReport cross_distance(const FilamentTrace& pred, const FilamentTrace& truth,
                                   const GridSpec& spec, Axis axis, double axial_tol) {
  if (pred.points.size() < 2 || truth.points.size() < 2)
    throw ArgError("cross_distance: need at least 2 points per filament");

  auto to_voxel = [&](const Vec3& p) { return (p - spec.origin) / spec.spacing; };
  std::vector<Vec3> pv, tv;
  for (const auto& p : pred.points) pv.push_back(to_voxel(p));
  for (const auto& p : truth.points) tv.push_back(to_voxel(p));

  int ax = int(axis);

  CrossDistanceReport rep;
  rep.truth_points = tv.size();
  double sum = 0;
  for (const auto& t : tv) {
    double best_ax = 1e300;
    Vec3 best{};
    // Per segment, the axially nearest point is either the crossing of the
    // truth plane (axial distance zero) or the nearer endpoint. Strict <
    // keeps the earliest minimizer in walk order, so a plane crossed several
    // times pairs with the first crossing.
    for (std::size_t i = 1; i < pv.size(); ++i) {
      const Vec3& a = pv[i - 1];
      const Vec3& b = pv[i];
      double da = a[ax] - t[ax], db = b[ax] - t[ax];
      double d_ax;
      Vec3 cand;
      if ((da <= 0 && db >= 0) || (da >= 0 && db <= 0)) {
        d_ax = 0;
        if (a[ax] == b[ax]) {
          cand = a;  // whole segment lies on the plane: first point wins
        } else {
          double u = -da / (db - da);
          cand = a + (b - a) * std::clamp(u, 0.0, 1.0);
        }
      } else if (std::abs(da) <= std::abs(db)) {
        d_ax = std::abs(da);
        cand = a;
      } else {
        d_ax = std::abs(db);
        cand = b;
      }
      if (d_ax < best_ax) {
        best_ax = d_ax;
        best = cand;
      }
    }
    if (best_ax > axial_tol) continue;
    sum += (best - t).norm();
    ++rep.matched;
  }
  if (rep.matched > 0) {
    rep.defined = true;
    rep.mean_distance = sum / double(rep.matched);
  }
  return rep;
}

CrossDistanceSetReport cross_distance_set(const std::vector<FilamentTrace>& pred,
                                          const std::vector<FilamentTrace>& truth,
                                          const GridSpec& spec, Axis axis, double axial_tol) {
  // Prefer id-based pairing when ids are unique on both sides and overlap.
  std::unordered_map<int, const FilamentTrace*> by_id;
  bool ids_unique = true;
  for (const auto& t : truth)
    if (!by_id.emplace(t.id, &t).second) ids_unique = false;

  CrossDistanceSetReport rep;
  double sum = 0;
  auto add_pair = [&](const FilamentTrace& p, const FilamentTrace& t) {
    auto r = cross_distance(p, t, spec, axis, axial_tol);
    if (r.defined) {
      sum += r.mean_distance;
      ++rep.defined_pairs;
    }
    rep.per_filament.push_back(r);
  };

  bool use_ids = ids_unique && !pred.empty();
  if (use_ids)
    for (const auto& p : pred)
      if (!by_id.count(p.id)) {
        use_ids = false;
        break;
      }

  if (use_ids) {
    for (const auto& p : pred) add_pair(p, *by_id.at(p.id));
  } else {
    std::size_t n = std::min(pred.size(), truth.size());
    for (std::size_t i = 0; i < n; ++i) add_pair(pred[i], truth[i]);
  }

  if (rep.defined_pairs > 0) {
    rep.defined = true;
    rep.mean_distance = sum / double(rep.defined_pairs);
  }
  return rep;
}

}  // namespace tomo
