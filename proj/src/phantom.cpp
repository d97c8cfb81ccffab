#include "phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "fft_utils.hpp"

namespace tomo {

VoxelGrid rasterize_traces(const GridSpec& spec, const std::vector<FilamentTrace>& traces) {
  VoxelGrid grid(spec);
  auto mark = [&](const IVec3& v) {
    if (grid.in_bounds(v)) grid.at(v) = 1.0f;
  };
  auto round3 = [](const Vec3& p) {
    return IVec3{int(std::lround(p.x)), int(std::lround(p.y)), int(std::lround(p.z))};
  };
  for (const auto& trace : traces) {
    if (trace.points.empty()) continue;
    mark(round3(grid.to_voxel(trace.points[0])));
    for (std::size_t i = 1; i < trace.points.size(); ++i) {
      Vec3 a = grid.to_voxel(trace.points[i - 1]);
      Vec3 b = grid.to_voxel(trace.points[i]);
      // Rounding switches exactly where a coordinate crosses a half-integer
      // plane, so stepping plane to plane in parameter order visits every
      // voxel the continuous segment rounds into, at any segment length.
      IVec3 cur = round3(a);
      mark(cur);
      Vec3 d = b - a;
      double t_next[3], t_step[3];
      int step[3];
      for (int c = 0; c < 3; ++c) {
        if (d[c] > 0) {
          step[c] = 1;
          t_next[c] = (cur[c] + 0.5 - a[c]) / d[c];
          t_step[c] = 1.0 / d[c];
        } else if (d[c] < 0) {
          step[c] = -1;
          t_next[c] = (cur[c] - 0.5 - a[c]) / d[c];
          t_step[c] = -1.0 / d[c];
        } else {
          step[c] = 0;
          t_next[c] = t_step[c] = std::numeric_limits<double>::infinity();
        }
      }
      while (true) {
        int c = 0;
        if (t_next[1] < t_next[c]) c = 1;
        if (t_next[2] < t_next[c]) c = 2;
        double t = t_next[c];
        if (!(t <= 1.0)) break;
        // Step every axis crossing at this exact parameter together: a
        // segment through a voxel corner rounds straight to the diagonal
        // neighbor, never into the voxels beside it.
        for (int c2 = 0; c2 < 3; ++c2) {
          if (t_next[c2] == t) {
            cur[c2] += step[c2];
            t_next[c2] += t_step[c2];
          }
        }
        mark(cur);
      }
    }
  }
  return grid;
}

std::vector<double> extract_radial_spectrum(const VoxelGrid& grid) {
  IVec3 d = grid.dims();
  std::vector<double> field(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) field[i] = grid.data()[i];
  auto spec = fft::forward_r2c(d, field);

  int rmax = std::min({d.x, d.y, d.z}) / 2;
  std::vector<double> power(rmax + 1, 0.0), weight(rmax + 1, 0.0);
  double norm = 1.0 / double(grid.size());
  for (int kz = 0; kz < d.z; ++kz)
    for (int ky = 0; ky < d.y; ++ky)
      for (int kx = 0; kx < spec.nxh(); ++kx) {
        double sx = fft::signed_freq(kx, d.x);
        double sy = fft::signed_freq(ky, d.y);
        double sz = fft::signed_freq(kz, d.z);
        double r = std::sqrt(sx * sx + sy * sy + sz * sz);
        int b = int(std::lround(r));
        if (b > rmax) continue;
        double w = fft::hermitian_weight(kx, d.x);
        power[b] += w * std::norm(spec.c[spec.index(kx, ky, kz)]) * norm;
        weight[b] += w;
      }
  for (int b = 0; b <= rmax; ++b)
    if (weight[b] > 0) power[b] /= weight[b];
  return power;
}

namespace {

double target_amplitude(const NoiseSpectrum& ns, double r) {
  if (r <= 0) return 0.0;  // DC removed: zero mean by construction
  if (ns.kind == NoiseSpectrum::Kind::PowerLaw) return std::pow(r, -ns.alpha / 2.0);
  int b = std::min(int(std::lround(r)), int(ns.profile.size()) - 1);
  return std::sqrt(std::max(0.0, ns.profile[b]));
}

}  // namespace

VoxelGrid colored_noise(const GridSpec& gspec, const NoiseSpectrum& ns, std::uint64_t seed) {
  if (ns.kind == NoiseSpectrum::Kind::PowerLaw && ns.alpha < 0)
    throw ArgError("colored_noise: alpha must be >= 0");
  if (ns.kind == NoiseSpectrum::Kind::Tabulated && ns.profile.empty())
    throw ArgError("colored_noise: empty tabulated profile");

  IVec3 d = gspec.dims;
  std::size_t n = gspec.voxel_count();

  // Seeded white field supplies the phases; magnitudes are then forced to
  // the exact shell target, which keeps Hermitian symmetry intact (conjugate
  // pairs share |.|, self-conjugate bins are real and stay real).
  Rng rng(seed);
  std::vector<double> white(n);
  for (double& v : white) v = rng.gauss();
  auto spec = fft::forward_r2c(d, white);

  for (int kz = 0; kz < d.z; ++kz)
    for (int ky = 0; ky < d.y; ++ky)
      for (int kx = 0; kx < spec.nxh(); ++kx) {
        double sx = fft::signed_freq(kx, d.x);
        double sy = fft::signed_freq(ky, d.y);
        double sz = fft::signed_freq(kz, d.z);
        double r = std::sqrt(sx * sx + sy * sy + sz * sz);
        double amp = target_amplitude(ns, r);
        auto& c = spec.c[spec.index(kx, ky, kz)];
        double mag = std::abs(c);
        c = mag > 0 ? c * (amp / mag) : std::complex<double>(amp, 0.0);
      }

  auto field = fft::inverse_c2r(spec);

  double var = 0;
  for (double v : field) var += v * v;  // mean is exactly zero (DC dropped)
  double sd = std::sqrt(var / double(n));

  VoxelGrid out(gspec);
  if (sd > 0) {
    double inv = 1.0 / sd;
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = float(field[i] * inv);
  }
  return out;
}

VoxelGrid apply_missing_wedge(const VoxelGrid& grid, double half_angle_deg, Axis tilt_axis) {
  if (!(half_angle_deg > 0.0 && half_angle_deg <= 90.0))
    throw ArgError("apply_missing_wedge: half angle must be in (0, 90]");
  if (tilt_axis == Axis::Z)
    throw ArgError("apply_missing_wedge: tilt axis must lie in the specimen plane (x or y)");

  IVec3 d = grid.dims();
  std::vector<double> field(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) field[i] = grid.data()[i];
  auto spec = fft::forward_r2c(d, field);

  double limit_deg = 90.0 - half_angle_deg;
  for (int kz = 0; kz < d.z; ++kz)
    for (int ky = 0; ky < d.y; ++ky)
      for (int kx = 0; kx < spec.nxh(); ++kx) {
        // Normalized physical frequencies; the wedge test only involves the
        // in-plane axis perpendicular to the tilt axis, and the beam axis.
        double lateral = tilt_axis == Axis::X ? double(fft::signed_freq(ky, d.y)) / d.y
                                              : double(fft::signed_freq(kx, d.x)) / d.x;
        double beam = double(fft::signed_freq(kz, d.z)) / d.z;
        if (lateral == 0.0 && beam == 0.0) continue;  // measured at every tilt
        double ang = std::atan2(std::abs(lateral), std::abs(beam)) * 180.0 / M_PI;
        if (ang < limit_deg) spec.c[spec.index(kx, ky, kz)] = 0.0;
      }

  auto out_field = fft::inverse_c2r(spec);
  VoxelGrid out(grid.spec());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = float(out_field[i]);
  return out;
}

VoxelGrid simulate_tomogram(const GridSpec& spec, const std::vector<FilamentTrace>& traces,
                            const SimulationConfig& config) {
  if (config.noise_level < 0) throw ArgError("simulate_tomogram: noise_level must be >= 0");
  if (config.signal_amplification <= 0)
    throw ArgError("simulate_tomogram: signal_amplification must be > 0");
  if (config.fwhm < 0) throw ArgError("simulate_tomogram: fwhm must be >= 0");
  if (!(config.wedge_half_angle > 0 && config.wedge_half_angle <= 90))
    throw ArgError("simulate_tomogram: wedge_half_angle must be in (0, 90]");

  VoxelGrid grid = rasterize_traces(spec, traces);
  if (config.signal_amplification != 1.0) {
    float amp = float(config.signal_amplification);
    for (float& v : grid.data()) v *= amp;
  }
  if (config.fwhm > 0) grid = gaussian_blur(grid, config.fwhm);

  if (config.noise_level > 0) {
    float peak = 0;
    for (float v : grid.data()) peak = std::max(peak, v);
    if (peak <= 0)
      throw ArgError("simulate_tomogram: no in-grid signal to scale the noise against");
    VoxelGrid noise = colored_noise(spec, config.noise_spectrum, config.rng_seed);
    float scale = float(config.noise_level * peak);
    for (std::size_t i = 0; i < grid.size(); ++i) grid.data()[i] += scale * noise.data()[i];
  }

  if (config.wedge_half_angle < 90.0)
    grid = apply_missing_wedge(grid, config.wedge_half_angle, config.wedge_axis);
  return grid;
}

// ---------------------------------------------------------------------------
// Phantom ground-truth generators
// ---------------------------------------------------------------------------

namespace {

Vec3 voxel_to_phys(const GridSpec& spec, const Vec3& v) { return spec.origin + v * spec.spacing; }

}  // namespace

std::vector<FilamentTrace> make_parallel_traces(const GridSpec& spec, int count,
                                                std::uint64_t seed, Axis axis,
                                                double drift_amplitude) {
  if (count < 1) throw ArgError("make_parallel_traces: count must be >= 1");
  Rng rng(seed);
  int ax = int(axis);
  int a1 = (ax + 1) % 3, a2 = (ax + 2) % 3;
  double n_ax = spec.dims[ax], n1 = spec.dims[a1], n2 = spec.dims[a2];

  // Bundle cross-section: an off-center ellipse, leaving part of the volume
  // empty so true filaments stay localized the way real bundles are.
  double c1 = n1 * 0.40, c2 = n2 * 0.48;
  double r1 = n1 * 0.30, r2 = n2 * 0.32;

  std::vector<std::pair<double, double>> centers;
  int tries = 0;
  double min_sep = 6.0;
  while (int(centers.size()) < count && tries < 20000) {
    ++tries;
    double u = rng.uniform(-1, 1), v = rng.uniform(-1, 1);
    if (u * u + v * v > 1) continue;
    double p1 = c1 + u * r1, p2 = c2 + v * r2;
    bool ok = true;
    for (auto& c : centers)
      if (std::hypot(c.first - p1, c.second - p2) < min_sep) {
        ok = false;
        break;
      }
    if (ok) centers.emplace_back(p1, p2);
    if (tries % 5000 == 0) min_sep *= 0.8;  // relax if the ellipse is crowded
  }
  if (int(centers.size()) < count)
    throw ArgError("make_parallel_traces: could not place filaments; too many for the volume");

  std::vector<FilamentTrace> traces;
  for (int f = 0; f < count; ++f) {
    double lo = n_ax * (0.03 + 0.07 * rng.uniform());
    double hi = n_ax * (0.97 - 0.07 * rng.uniform());
    double amp1 = drift_amplitude * rng.uniform(0.5, 1.0);
    double amp2 = 0.5 * drift_amplitude * rng.uniform(0.5, 1.0);
    double lam1 = n_ax * rng.uniform(1.5, 3.0), lam2 = n_ax * rng.uniform(1.5, 3.0);
    double ph1 = rng.uniform(0, 2 * M_PI), ph2 = rng.uniform(0, 2 * M_PI);

    FilamentTrace t;
    t.id = f + 1;
    for (double s = lo; s <= hi; s += 4.0) {
      double p[3];
      p[ax] = s;
      p[a1] = centers[f].first + amp1 * std::sin(2 * M_PI * s / lam1 + ph1);
      p[a2] = centers[f].second + amp2 * std::sin(2 * M_PI * s / lam2 + ph2);
      t.points.push_back(voxel_to_phys(spec, {p[0], p[1], p[2]}));
    }
    traces.push_back(std::move(t));
  }
  return traces;
}

std::vector<FilamentTrace> make_random_traces(const GridSpec& spec, int count, std::uint64_t seed,
                                              double min_len, double max_len) {
  if (count < 1) throw ArgError("make_random_traces: count must be >= 1");
  Rng rng(seed);
  Vec3 lo{spec.dims.x * 0.12, spec.dims.y * 0.12, spec.dims.z * 0.12};
  Vec3 hi{spec.dims.x * 0.88, spec.dims.y * 0.88, spec.dims.z * 0.88};

  std::vector<FilamentTrace> traces;
  int attempts = 0;
  while (int(traces.size()) < count && attempts < 100000) {
    ++attempts;
    Vec3 c{rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y), rng.uniform(lo.z, hi.z)};
    double cz = rng.uniform(-1, 1);
    double phi = rng.uniform(0, 2 * M_PI);
    double s = std::sqrt(std::max(0.0, 1 - cz * cz));
    Vec3 dir{s * std::cos(phi), s * std::sin(phi), cz};
    double half = rng.uniform(min_len, max_len) / 2.0;

    // shrink until both endpoints are inside the inner box
    auto inside = [&](const Vec3& p) {
      return p.x >= lo.x && p.y >= lo.y && p.z >= lo.z && p.x <= hi.x && p.y <= hi.y && p.z <= hi.z;
    };
    while (half > 1 && (!inside(c + dir * half) || !inside(c - dir * half))) half *= 0.85;
    if (2 * half < min_len * 0.6) continue;

    FilamentTrace t;
    t.id = int(traces.size()) + 1;
    int steps = std::max(1, int(std::ceil(2 * half / 5.0)));
    for (int i = 0; i <= steps; ++i) {
      Vec3 p = c + dir * (-half + 2 * half * double(i) / steps);
      t.points.push_back(voxel_to_phys(spec, p));
    }
    traces.push_back(std::move(t));
  }
  if (int(traces.size()) < count)
    throw ArgError("make_random_traces: could not place the requested filaments");
  return traces;
}

std::vector<FilamentTrace> make_hex_bundle_traces(const GridSpec& spec, int rings,
                                                  double lattice_spacing, double drift_amplitude,
                                                  double drift_period) {
  if (rings < 0) throw ArgError("make_hex_bundle_traces: rings must be >= 0");
  double cx = spec.dims.x / 2.0, cz = spec.dims.z / 2.0;

  // Axial hex coordinates (p, q) with |p|, |q|, |p+q| <= rings; basis vectors
  // 60 degrees apart so one lattice direction lies along +X.
  std::vector<std::pair<int, int>> cells;
  for (int p = -rings; p <= rings; ++p)
    for (int q = -rings; q <= rings; ++q)
      if (std::abs(p + q) <= rings) cells.emplace_back(p, q);
  // Center first, then ring by ring: trace 1 is the bundle center and ring
  // membership follows the hexagonal distance max(|p|, |q|, |p+q|).
  auto ring_of = [](const std::pair<int, int>& c) {
    return std::max({std::abs(c.first), std::abs(c.second), std::abs(c.first + c.second)});
  };
  std::sort(cells.begin(), cells.end(), [&](const auto& a, const auto& b) {
    return std::tuple(ring_of(a), a) < std::tuple(ring_of(b), b);
  });

  std::vector<FilamentTrace> traces;
  int id = 1;
  for (auto [p, q] : cells) {
    double x0 = cx + lattice_spacing * (p + 0.5 * q);
    double z0 = cz + lattice_spacing * (std::sqrt(3.0) / 2.0 * q);
    FilamentTrace t;
    t.id = id++;
    for (double y = 6.0; y <= spec.dims.y - 7.0; y += 3.0) {
      double x = x0 + drift_amplitude * std::sin(2 * M_PI * y / drift_period);
      t.points.push_back(voxel_to_phys(spec, {x, y, z0}));
    }
    traces.push_back(std::move(t));
  }
  return traces;
}

}  // namespace tomo
