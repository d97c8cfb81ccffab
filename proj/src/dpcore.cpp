#include "dpcore.hpp"

#include <algorithm>
#include <limits>

namespace tomo {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double blend(double fpd, double bpd, BlendMode mode) {
  switch (mode) {
    case BlendMode::Multiply: return fpd * bpd;
    case BlendMode::Add: return fpd + bpd;
    case BlendMode::GeometricMean: return std::sqrt(std::max(0.0, fpd * bpd));
    default: return std::min(fpd, bpd);
  }
}

namespace {

void check_pyramid(const VoxelGrid& grid, const IVec3& origin, const PyramidSpec& p) {
  if (!grid.in_bounds(origin)) throw ArgError("path_density: origin outside grid");
  if (p.length < 1) throw ArgError("path_density: pyramid length must be >= 1");
  if (p.sign != 1 && p.sign != -1) throw ArgError("path_density: sign must be +1 or -1");
}

}  // namespace

PathDensityResult path_density(const VoxelGrid& grid, const IVec3& origin,
                               const PyramidSpec& pyramid) {
  check_pyramid(grid, origin, pyramid);
  int ax = int(pyramid.axis), a1 = (ax + 1) % 3, a2 = (ax + 2) % 3;
  int l = pyramid.length, sign = pyramid.sign;

  PathDensityResult res;
  int base_ax = origin[ax] + sign * l;
  if (base_ax < 0 || base_ax >= grid.dims()[ax]) return res;  // not traceable

  auto voxel_at = [&](int d, int m, int n) {
    int c[3];
    c[ax] = origin[ax] + sign * d;
    c[a1] = origin[a1] + m;
    c[a2] = origin[a2] + n;
    return IVec3{c[0], c[1], c[2]};
  };

  // Slice d holds (2d+1)^2 states, offset (m,n) at index (m+d)*(2d+1)+(n+d).
  std::vector<std::vector<double>> val(l + 1);
  std::vector<std::vector<int>> par(l + 1);
  val[0] = {double(grid.at(origin))};
  par[0] = {-1};

  for (int d = 1; d <= l; ++d) {
    int w = 2 * d + 1, wp = 2 * d - 1;
    val[d].assign(std::size_t(w) * w, kNegInf);
    par[d].assign(std::size_t(w) * w, -1);
    for (int m = -d; m <= d; ++m)
      for (int n = -d; n <= d; ++n) {
        IVec3 v = voxel_at(d, m, n);
        if (!grid.in_bounds(v)) continue;
        double best = kNegInf;
        int best_par = -1;
        IVec3 best_voxel{};
        for (int pm = std::max(m - 1, -(d - 1)); pm <= std::min(m + 1, d - 1); ++pm)
          for (int pn = std::max(n - 1, -(d - 1)); pn <= std::min(n + 1, d - 1); ++pn) {
            int pidx = (pm + d - 1) * wp + (pn + d - 1);
            double pv = val[d - 1][pidx];
            if (pv == kNegInf) continue;
            IVec3 pvox = voxel_at(d - 1, pm, pn);
            if (pv > best || (pv == best && pvox < best_voxel)) {
              best = pv;
              best_par = pidx;
              best_voxel = pvox;
            }
          }
        if (best_par < 0) continue;  // unreachable inside the pyramid
        val[d][(m + d) * w + (n + d)] = double(grid.at(v)) + best;
        par[d][(m + d) * w + (n + d)] = best_par;
      }
  }

  // Pick the base state: maximum value, lexicographically smallest voxel on
  // ties. The straight-line path guarantees at least one valid state.
  int wl = 2 * l + 1;
  double best = kNegInf;
  int best_idx = -1;
  IVec3 best_voxel{};
  for (int m = -l; m <= l; ++m)
    for (int n = -l; n <= l; ++n) {
      int idx = (m + l) * wl + (n + l);
      if (val[l][idx] == kNegInf) continue;
      IVec3 v = voxel_at(l, m, n);
      if (val[l][idx] > best || (val[l][idx] == best && v < best_voxel)) {
        best = val[l][idx];
        best_idx = idx;
        best_voxel = v;
      }
    }

  res.traceable = true;
  res.value = best;
  res.endpoint = best_voxel;
  res.path.resize(l + 1);
  int cur = best_idx;
  for (int d = l; d >= 1; --d) {
    int w = 2 * d + 1;
    res.path[d] = voxel_at(d, cur / w - d, cur % w - d);
    cur = par[d][cur];
  }
  res.path[0] = origin;
  return res;
}

PathDensityResult brute_force_path_density(const VoxelGrid& grid, const IVec3& origin,
                                           const PyramidSpec& pyramid) {
  check_pyramid(grid, origin, pyramid);
  if (pyramid.length > 6) throw ArgError("brute_force_path_density: length capped at 6");
  int ax = int(pyramid.axis), a1 = (ax + 1) % 3, a2 = (ax + 2) % 3;
  int l = pyramid.length, sign = pyramid.sign;

  PathDensityResult res;
  int base_ax = origin[ax] + sign * l;
  if (base_ax < 0 || base_ax >= grid.dims()[ax]) return res;

  std::vector<IVec3> cur(l + 1);
  cur[0] = origin;
  bool found = false;

  // Prefer larger sum, then smaller endpoint, then the path whose voxels are
  // smallest when compared from the endpoint backwards (matching the DP's
  // backtrack rule).
  auto better = [&](double sum) {
    if (!found || sum > res.value) return 1;
    if (sum < res.value) return 0;
    if (cur[l] < res.endpoint) return 1;
    if (res.endpoint < cur[l]) return 0;
    for (int d = l; d >= 0; --d) {
      if (cur[d] < res.path[d]) return 1;
      if (res.path[d] < cur[d]) return 0;
    }
    return 0;
  };

  auto rec = [&](auto&& self, int d, double sum) -> void {
    if (d == l) {
      if (better(sum)) {
        res.value = sum;
        res.endpoint = cur[l];
        res.path = cur;
        found = true;
      }
      return;
    }
    for (int dm = -1; dm <= 1; ++dm)
      for (int dn = -1; dn <= 1; ++dn) {
        int c[3] = {cur[d].x, cur[d].y, cur[d].z};
        c[ax] += sign;
        c[a1] += dm;
        c[a2] += dn;
        IVec3 nxt{c[0], c[1], c[2]};
        if (!grid.in_bounds(nxt)) continue;
        cur[d + 1] = nxt;
        self(self, d + 1, sum + grid.at(nxt));
      }
  };
  rec(rec, 0, double(grid.at(origin)));

  res.traceable = found;
  return res;
}

std::vector<double> sweep_path_density(const VoxelGrid& grid, Axis axis, int sign, int length) {
  if (length < 1) throw ArgError("sweep_path_density: length must be >= 1");
  if (sign != 1 && sign != -1) throw ArgError("sweep_path_density: sign must be +1 or -1");
  int ax = int(axis), a1 = (ax + 1) % 3, a2 = (ax + 2) % 3;
  IVec3 dims = grid.dims();
  std::int64_t n = std::int64_t(grid.size());

  std::vector<double> prev(grid.size()), cur(grid.size());
  for (std::int64_t i = 0; i < n; ++i) prev[i] = grid.data()[i];

  for (int d = 1; d <= length; ++d) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int k = 0; k < dims.z; ++k)
      for (int j = 0; j < dims.y; ++j)
        for (int i = 0; i < dims.x; ++i) {
          IVec3 v{i, j, k};
          int c[3] = {i, j, k};
          c[ax] += sign;
          double best = kNegInf;
          if (c[ax] >= 0 && c[ax] < dims[ax]) {
            for (int dm = -1; dm <= 1; ++dm) {
              int u1 = v[a1] + dm;
              if (u1 < 0 || u1 >= dims[a1]) continue;
              for (int dn = -1; dn <= 1; ++dn) {
                int u2 = v[a2] + dn;
                if (u2 < 0 || u2 >= dims[a2]) continue;
                int u[3];
                u[ax] = c[ax];
                u[a1] = u1;
                u[a2] = u2;
                double s = prev[grid.index(u[0], u[1], u[2])];
                if (s > best) best = s;
              }
            }
          }
          cur[grid.index(i, j, k)] =
              best == kNegInf ? kNegInf : double(grid.at(i, j, k)) + best;
        }
    std::swap(prev, cur);
  }
  return prev;
}

namespace {

VoxelGrid finish_enhance(const VoxelGrid& grid, const std::vector<double>& raw) {
  double mn = raw[0], mx = raw[0];
  for (double v : raw) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  VoxelGrid out(grid.spec());
  if (mx > mn) {
    double scale = 1.0 / (mx - mn);
    std::int64_t n = std::int64_t(raw.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) out.data()[i] = float((raw[i] - mn) * scale);
  }
  return out;
}

}  // namespace

VoxelGrid enhance_map(const VoxelGrid& grid, int length, BlendMode mode, Axis axis) {
  auto fwd = sweep_path_density(grid, axis, +1, length);
  auto bwd = sweep_path_density(grid, axis, -1, length);
  std::vector<double> raw(grid.size());
  std::int64_t n = std::int64_t(grid.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i)
    raw[i] = (fwd[i] == kNegInf || bwd[i] == kNegInf) ? 0.0 : blend(fwd[i], bwd[i], mode);
  return finish_enhance(grid, raw);
}

std::vector<IVec3> select_seeds(const VoxelGrid& grid, int cube_len) {
  if (cube_len < 1) throw ArgError("seed cube edge must be at least 1");
  IVec3 d = grid.dims();
  std::vector<IVec3> seeds;
  for (int k0 = 0; k0 < d.z; k0 += cube_len)
    for (int j0 = 0; j0 < d.y; j0 += cube_len)
      for (int i0 = 0; i0 < d.x; i0 += cube_len) {
        float best = -std::numeric_limits<float>::infinity();
        IVec3 best_v{};
        for (int k = k0; k < std::min(k0 + cube_len, d.z); ++k)
          for (int j = j0; j < std::min(j0 + cube_len, d.y); ++j)
            for (int i = i0; i < std::min(i0 + cube_len, d.x); ++i) {
              float v = grid.at(i, j, k);
              IVec3 p{i, j, k};
              if (v > best || (v == best && p < best_v)) {
                best = v;
                best_v = p;
              }
            }
        seeds.push_back(best_v);
      }
  return seeds;
}

std::vector<Cfs> refine_backward(const VoxelGrid& grid, std::vector<Cfs> cfss,
                                 double max_angle_deg, int length) {
  std::vector<Cfs> kept;
  kept.reserve(cfss.size());
  for (auto& c : cfss) {
    PathDensityResult bwd = path_density(grid, c.end, {c.axis, -1, length});
    if (!bwd.traceable) {
      kept.push_back(std::move(c));
      continue;
    }
    Vec3 fwd_rev = (c.start - c.end).to_vec3();
    Vec3 back = (bwd.endpoint - c.end).to_vec3();
    if (angle_deg(fwd_rev, back) <= max_angle_deg) kept.push_back(std::move(c));
  }
  return kept;
}

VoxelGrid enhance_map_serial(const VoxelGrid& grid, int length, BlendMode mode, Axis axis) {
  std::vector<double> raw(grid.size(), 0.0);
  PyramidSpec fwd{axis, +1, length}, bwd{axis, -1, length};
  for (int k = 0; k < grid.nz(); ++k)
    for (int j = 0; j < grid.ny(); ++j)
      for (int i = 0; i < grid.nx(); ++i) {
        auto f = path_density(grid, {i, j, k}, fwd);
        if (!f.traceable) continue;
        auto b = path_density(grid, {i, j, k}, bwd);
        if (!b.traceable) continue;
        raw[grid.index(i, j, k)] = blend(f.value, b.value, mode);
      }
  return finish_enhance(grid, raw);
}

}  // namespace tomo
