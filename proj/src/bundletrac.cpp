#include "bundletrac.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>

#include "fft_utils.hpp"

namespace tomo {

Vec3 BundleAxisField::direction_at(double y) const {
  if (samples.empty()) return {0, 1, 0};
  if (y <= samples.front().first) return samples.front().second;
  if (y >= samples.back().first) return samples.back().second;
  std::size_t hi = 1;
  while (samples[hi].first < y) ++hi;
  const auto& [y0, d0] = samples[hi - 1];
  const auto& [y1, d1] = samples[hi];
  double t = (y - y0) / (y1 - y0);
  Vec3 d = d0 * (1.0 - t) + d1 * t;
  return d.normalized();
}

Section2D extract_section(const VoxelGrid& grid, int y) {
  Section2D s;
  s.nx = grid.nx();
  s.nz = grid.nz();
  s.v.resize(std::size_t(s.nx) * std::size_t(s.nz));
  for (int k = 0; k < s.nz; ++k)
    for (int i = 0; i < s.nx; ++i) s.at(i, k) = grid.at(i, y, k);
  return s;
}

namespace {

// Slab-averaged XZ section around slice y, zero-mean for correlation.
std::vector<double> slab_section(const VoxelGrid& grid, int y, int half_span) {
  int nx = grid.nx(), nz = grid.nz();
  int lo = std::max(0, y - half_span), hi = std::min(grid.ny() - 1, y + half_span);
  std::vector<double> s(std::size_t(nx) * std::size_t(nz), 0.0);
  for (int j = lo; j <= hi; ++j)
    for (int k = 0; k < nz; ++k)
      for (int i = 0; i < nx; ++i) s[std::size_t(k) * nx + i] += grid.at(i, j, k);
  double inv = 1.0 / (hi - lo + 1);
  double mean = 0;
  for (auto& v : s) {
    v *= inv;
    mean += v;
  }
  mean /= double(s.size());
  for (auto& v : s) v -= mean;
  return s;
}

// Parabolic three-point peak refinement; returns an offset in [-0.5, 0.5].
double parabolic_offset(double cm, double c0, double cp) {
  double denom = cm - 2.0 * c0 + cp;
  if (denom == 0) return 0;
  double off = 0.5 * (cm - cp) / denom;
  return std::max(-0.5, std::min(0.5, off));
}

// Cross-correlation argmax of two equal-size zero-mean sections: the (dx,
// dz) maximizing sum over q of a(q) * b(q + d), circular, refined to
// sub-voxel by a separable parabolic fit. max_shift > 0 restricts the
// admissible wrapped shift per axis; shift (0, 0) is always admissible.
std::pair<double, double> correlation_shift(const std::vector<double>& a,
                                            const std::vector<double>& b, int nx, int nz,
                                            double max_shift) {
  fft::Spectrum2D fa = fft::forward_r2c_2d(nx, nz, a);
  fft::Spectrum2D fb = fft::forward_r2c_2d(nx, nz, b);
  for (std::size_t i = 0; i < fa.c.size(); ++i) fa.c[i] = std::conj(fa.c[i]) * fb.c[i];
  std::vector<double> corr = fft::inverse_c2r_2d(fa);

  auto wrapped = [](int p, int n) { return p > n / 2 ? p - n : p; };
  bool found = false;
  std::size_t best = 0;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    if (max_shift > 0) {
      int wx = wrapped(int(i % std::size_t(nx)), nx);
      int wz = wrapped(int(i / std::size_t(nx)), nz);
      if (std::abs(wx) > max_shift || std::abs(wz) > max_shift) continue;
    }
    if (!found || corr[i] > corr[best]) {
      best = i;
      found = true;
    }
  }
  int px = int(best % std::size_t(nx));
  int pz = int(best / std::size_t(nx));

  auto at = [&](int x, int z) {
    x = (x % nx + nx) % nx;
    z = (z % nz + nz) % nz;
    return corr[std::size_t(z) * nx + x];
  };
  double dx = px + parabolic_offset(at(px - 1, pz), at(px, pz), at(px + 1, pz));
  double dz = pz + parabolic_offset(at(px, pz - 1), at(px, pz), at(px, pz + 1));
  if (dx > nx / 2.0) dx -= nx;
  if (dz > nz / 2.0) dz -= nz;
  return {dx, dz};
}

}  // namespace

BundleAxisField detect_bundle_axis(const VoxelGrid& grid, int slice_stride, int slab_half_span,
                                   double max_shift) {
  if (slice_stride < 1) throw ArgError("slice stride must be at least 1");
  if (grid.ny() < 2 * slice_stride)
    throw ArgError("grid spans fewer than two correlation strides along Y");
  int nx = grid.nx(), nz = grid.nz();
  BundleAxisField field;
  for (int y = 0; y + slice_stride <= grid.ny() - 1; y += slice_stride) {
    std::vector<double> a = slab_section(grid, y, slab_half_span);
    std::vector<double> b = slab_section(grid, y + slice_stride, slab_half_span);
    auto [dx, dz] = correlation_shift(a, b, nx, nz, max_shift);
    Vec3 dir = Vec3{dx, double(slice_stride), dz}.normalized();
    field.samples.emplace_back(y + slice_stride / 2.0, dir);
  }
  return field;
}

VoxelGrid longitudinal_average(const VoxelGrid& grid, const BundleAxisField& field,
                               int half_window) {
  if (half_window < 0) throw ArgError("averaging window must be non-negative");
  VoxelGrid out(grid.spec());
  IVec3 d = grid.dims();
#pragma omp parallel for collapse(2) schedule(static)
  for (int k = 0; k < d.z; ++k)
    for (int j = 0; j < d.y; ++j) {
      Vec3 dir = field.direction_at(j);
      for (int i = 0; i < d.x; ++i) {
        double sum = grid.at(i, j, k);
        int count = 1;
        for (int s = -half_window; s <= half_window; ++s) {
          if (s == 0) continue;
          Vec3 q = Vec3{double(i), double(j), double(k)} + dir * double(s);
          if (q.x < 0 || q.y < 0 || q.z < 0 || q.x > d.x - 1 || q.y > d.y - 1 ||
              q.z > d.z - 1)
            continue;
          sum += grid.sample_trilinear(q);
          ++count;
        }
        out.at(i, j, k) = float(sum / count);
      }
    }
  return out;
}

double seven_peak_response(const Section2D& section, const HexKernel& kernel, double cx,
                           double cz) {
  if (kernel.spacing <= 0) throw ArgError("kernel spacing must be positive");
  if (kernel.sigma <= 0) throw ArgError("kernel sigma must be positive");
  int peaks = kernel.mode == PeakMode::Seven ? 7 : 1;
  double reach = 3.0 * kernel.sigma;
  double inv2s2 = 1.0 / (2.0 * kernel.sigma * kernel.sigma);
  double total = 0;
  for (int p = 0; p < peaks; ++p) {
    double px = cx, pz = cz;
    if (p > 0) {
      double ang = kernel.orientation + (p - 1) * (M_PI / 3.0);
      px += kernel.spacing * std::cos(ang);
      pz += kernel.spacing * std::sin(ang);
    }
    int x0 = std::max(0, int(std::ceil(px - reach)));
    int x1 = std::min(section.nx - 1, int(std::floor(px + reach)));
    int z0 = std::max(0, int(std::ceil(pz - reach)));
    int z1 = std::min(section.nz - 1, int(std::floor(pz + reach)));
    for (int z = z0; z <= z1; ++z)
      for (int x = x0; x <= x1; ++x) {
        double r2 = (x - px) * (x - px) + (z - pz) * (z - pz);
        if (r2 > reach * reach) continue;
        total += std::exp(-r2 * inv2s2) * section.at(x, z);
      }
  }
  return total;
}

double estimate_hex_orientation(const std::vector<Vec3>& seeds_vox, double spacing_vox,
                                double fallback_rad) {
  if (seeds_vox.size() < 3) return fallback_rad;
  double c6 = 0, s6 = 0;
  for (std::size_t i = 0; i < seeds_vox.size(); ++i)
    for (std::size_t j = i + 1; j < seeds_vox.size(); ++j) {
      double dx = seeds_vox[j].x - seeds_vox[i].x;
      double dz = seeds_vox[j].z - seeds_vox[i].z;
      double d = std::hypot(dx, dz);
      if (d < 0.5 * spacing_vox || d > 1.5 * spacing_vox) continue;
      double ang = std::atan2(dz, dx);
      c6 += std::cos(6.0 * ang);
      s6 += std::sin(6.0 * ang);
    }
  if (c6 * c6 + s6 * s6 < 1e-18) return fallback_rad;
  return std::atan2(s6, c6) / 6.0;
}

namespace {

struct Marker {
  double x = 0, z = 0;
  int y = 0;
};

// Argmax of the kernel response over the refinement lattice inside the
// search disc; scan order fixes ties toward the smaller lattice offset.
Marker best_in_disc(const Section2D& section, const HexKernel& kernel, double px, double pz,
                    int y, double radius, double step) {
  int reach = int(std::floor(radius / step));
  double best = -1e300;
  Marker m{px, pz, y};
  for (int j = -reach; j <= reach; ++j)
    for (int i = -reach; i <= reach; ++i) {
      double ox = i * step, oz = j * step;
      if (ox * ox + oz * oz > radius * radius) continue;
      double r = seven_peak_response(section, kernel, px + ox, pz + oz);
      if (r > best) {
        best = r;
        m.x = px + ox;
        m.z = pz + oz;
      }
    }
  return m;
}

}  // namespace

BundleResult trace_bundle(const VoxelGrid& grid, const BundleAxisField& field,
                          const std::vector<Vec3>& seeds, const BundleConfig& cfg) {
  if (cfg.marker_interval < 1) throw ArgError("marker interval must be at least 1");
  if (cfg.refine_step <= 0) throw ArgError("refine step must be positive");
  double spacing_vox = cfg.spacing_nm / grid.spacing();
  HexKernel kernel;
  kernel.spacing = spacing_vox;
  kernel.sigma = cfg.sigma_vox > 0 ? cfg.sigma_vox : spacing_vox / 3.0;
  kernel.mode = cfg.mode;

  std::vector<Vec3> seeds_vox(seeds.size());
  for (std::size_t s = 0; s < seeds.size(); ++s) seeds_vox[s] = grid.to_voxel(seeds[s]);
  kernel.orientation =
      estimate_hex_orientation(seeds_vox, spacing_vox, cfg.orientation_deg * M_PI / 180.0);

  BundleResult res;
  res.axis = field;
  IVec3 d = grid.dims();
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const Vec3& p = seeds_vox[s];
    if (p.x < 0 || p.y < 0 || p.z < 0 || p.x > d.x - 1 || p.y > d.y - 1 || p.z > d.z - 1) {
      res.seed_errors.push_back("seed " + std::to_string(s + 1) + " lies outside the grid");
      continue;
    }
    Marker first{p.x, p.z, int(std::lround(p.y))};
    std::vector<Marker> up, down;
    for (int sign : {+1, -1}) {
      Marker cur = first;
      for (;;) {
        int limit = sign > 0 ? d.y - 1 - cur.y : cur.y;
        int step = std::min(cfg.marker_interval, limit);
        if (step <= 0) break;
        int ny = cur.y + sign * step;
        Vec3 dir = field.direction_at(cur.y);
        double dt = sign * step / dir.y;
        double px = cur.x + dir.x * dt, pz = cur.z + dir.z * dt;
        px = std::max(0.0, std::min(double(d.x - 1), px));
        pz = std::max(0.0, std::min(double(d.z - 1), pz));
        Section2D section = extract_section(grid, ny);
        cur = best_in_disc(section, kernel, px, pz, ny, cfg.search_radius, cfg.refine_step);
        (sign > 0 ? up : down).push_back(cur);
      }
    }
    FilamentTrace t;
    t.id = int(s) + 1;
    t.points.reserve(down.size() + 1 + up.size());
    for (auto it = down.rbegin(); it != down.rend(); ++it)
      t.points.push_back(grid.spec().origin + Vec3{it->x, double(it->y), it->z} * grid.spacing());
    t.points.push_back(grid.spec().origin + Vec3{first.x, double(first.y), first.z} * grid.spacing());
    for (const auto& m : up)
      t.points.push_back(grid.spec().origin + Vec3{m.x, double(m.y), m.z} * grid.spacing());
    res.traces.push_back(std::move(t));
  }
  return res;
}

BundleResult run_bundletrac(const VoxelGrid& raw, const std::vector<Vec3>& seeds,
                            const BundleConfig& cfg) {
  const VoxelGrid* work = &raw;
  VoxelGrid blurred;
  if (cfg.pre_blur_fwhm > 0) {
    blurred = gaussian_blur(raw, cfg.pre_blur_fwhm);
    work = &blurred;
  }
  double max_shift = cfg.max_axis_shift;
  if (max_shift < 0)
    max_shift = cfg.search_radius * double(cfg.slice_stride) / std::max(1, cfg.marker_interval);
  BundleAxisField field = detect_bundle_axis(*work, cfg.slice_stride, cfg.slab_half_span, max_shift);
  VoxelGrid averaged;
  if (cfg.longitudinal) {
    averaged = longitudinal_average(*work, field, cfg.average_half_window);
    work = &averaged;
  }
  return trace_bundle(*work, field, seeds, cfg);
}

}  // namespace tomo
