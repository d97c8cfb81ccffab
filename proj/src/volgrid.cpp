#include "volgrid.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace tomo {

double VoxelGrid::sample_trilinear(const Vec3& vc) const {
  int i0 = int(std::floor(vc.x)), j0 = int(std::floor(vc.y)), k0 = int(std::floor(vc.z));
  double fx = vc.x - i0, fy = vc.y - j0, fz = vc.z - k0;
  double acc = 0;
  for (int dk = 0; dk < 2; ++dk)
    for (int dj = 0; dj < 2; ++dj)
      for (int di = 0; di < 2; ++di) {
        int i = i0 + di, j = j0 + dj, k = k0 + dk;
        if (!in_bounds(i, j, k)) continue;
        double w = (di ? fx : 1 - fx) * (dj ? fy : 1 - fy) * (dk ? fz : 1 - fz);
        acc += w * at(i, j, k);
      }
  return acc;
}

// ---------------------------------------------------------------------------
// MRC2014 I/O
// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kHeaderBytes = 1024;

std::int32_t rd_i32(const unsigned char* p, bool swap) {
  unsigned char b[4] = {p[0], p[1], p[2], p[3]};
  if (swap) std::swap(b[0], b[3]), std::swap(b[1], b[2]);
  std::int32_t v;
  std::memcpy(&v, b, 4);
  return v;
}

float rd_f32(const unsigned char* p, bool swap) {
  unsigned char b[4] = {p[0], p[1], p[2], p[3]};
  if (swap) std::swap(b[0], b[3]), std::swap(b[1], b[2]);
  float v;
  std::memcpy(&v, b, 4);
  return v;
}

void wr_i32(unsigned char* p, std::int32_t v) { std::memcpy(p, &v, 4); }
void wr_f32(unsigned char* p, float v) { std::memcpy(p, &v, 4); }

bool plausible_header(std::int32_t nx, std::int32_t ny, std::int32_t nz, std::int32_t mode) {
  auto dim_ok = [](std::int32_t d) { return d >= 1 && d <= 100000; };
  return dim_ok(nx) && dim_ok(ny) && dim_ok(nz) && mode >= 0 && mode <= 101;
}

}  // namespace

VoxelGrid read_map(const std::string& path, std::size_t voxel_budget) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open map file: " + path);

  unsigned char h[kHeaderBytes];
  f.read(reinterpret_cast<char*>(h), kHeaderBytes);
  if (f.gcount() != std::streamsize(kHeaderBytes))
    throw FormatError(path + ": truncated MRC header");

  // Endianness: trust the machine stamp when recognizable, otherwise fall
  // back to a plausibility check on the swapped header.
  bool swap = false;
  if (h[212] == 0x11) {
    swap = true;
  } else if (h[212] != 0x44 && h[212] != 0x41) {
    if (!plausible_header(rd_i32(h, false), rd_i32(h + 4, false), rd_i32(h + 8, false),
                          rd_i32(h + 12, false)) &&
        plausible_header(rd_i32(h, true), rd_i32(h + 4, true), rd_i32(h + 8, true),
                         rd_i32(h + 12, true)))
      swap = true;
  }

  std::int32_t ncol = rd_i32(h + 0, swap);
  std::int32_t nrow = rd_i32(h + 4, swap);
  std::int32_t nsec = rd_i32(h + 8, swap);
  std::int32_t mode = rd_i32(h + 12, swap);
  std::int32_t nstart[3] = {rd_i32(h + 16, swap), rd_i32(h + 20, swap), rd_i32(h + 24, swap)};
  std::int32_t m[3] = {rd_i32(h + 28, swap), rd_i32(h + 32, swap), rd_i32(h + 36, swap)};
  float cella[3] = {rd_f32(h + 40, swap), rd_f32(h + 44, swap), rd_f32(h + 48, swap)};
  std::int32_t mapc = rd_i32(h + 64, swap);
  std::int32_t mapr = rd_i32(h + 68, swap);
  std::int32_t maps = rd_i32(h + 72, swap);
  std::int32_t nsymbt = rd_i32(h + 92, swap);
  float forigin[3] = {rd_f32(h + 196, swap), rd_f32(h + 200, swap), rd_f32(h + 204, swap)};
  bool has_magic = std::memcmp(h + 208, "MAP ", 4) == 0;

  if (!has_magic && !plausible_header(ncol, nrow, nsec, mode))
    throw FormatError(path + ": not an MRC volume (bad magic and implausible header)");
  if (ncol < 1 || nrow < 1 || nsec < 1)
    throw FormatError(path + ": non-positive dimensions in header");
  if (mode != 0 && mode != 1 && mode != 2)
    throw UnsupportedError(path + ": MRC mode " + std::to_string(mode) +
                           " not supported (only 0, 1, 2)");
  if (nsymbt < 0 || nsymbt > (1 << 28)) throw FormatError(path + ": bad extended header size");

  // Axis assignment: column/row/section each name one of the crystal axes.
  if (mapc == 0 && mapr == 0 && maps == 0) mapc = 1, mapr = 2, maps = 3;
  auto perm_ok = [&] {
    int seen[4] = {0, 0, 0, 0};
    for (std::int32_t v : {mapc, mapr, maps}) {
      if (v < 1 || v > 3) return false;
      seen[v]++;
    }
    return seen[1] == 1 && seen[2] == 1 && seen[3] == 1;
  };
  if (!perm_ok()) throw FormatError(path + ": mapc/mapr/maps is not a permutation of 1,2,3");

  int col_axis = mapc - 1, row_axis = mapr - 1, sec_axis = maps - 1;
  std::int32_t dims[3];
  dims[col_axis] = ncol;
  dims[row_axis] = nrow;
  dims[sec_axis] = nsec;

  std::size_t count = std::size_t(ncol) * std::size_t(nrow) * std::size_t(nsec);
  if (count > voxel_budget)
    throw CapacityError(path + ": " + std::to_string(count) + " voxels exceeds budget of " +
                        std::to_string(voxel_budget));

  // Spacing per crystal axis; a uniform grid is required downstream.
  double spacing = 1.0;
  if (m[0] > 0 && m[1] > 0 && m[2] > 0 && cella[0] > 0 && cella[1] > 0 && cella[2] > 0) {
    double s[3] = {cella[0] / m[0], cella[1] / m[1], cella[2] / m[2]};
    double lo = std::min({s[0], s[1], s[2]}), hi = std::max({s[0], s[1], s[2]});
    double mid = (lo + hi) / 2;
    if (hi - lo > 1e-3 * mid)
      throw UnsupportedError(path + ": anisotropic voxel spacing (" + std::to_string(s[0]) + ", " +
                             std::to_string(s[1]) + ", " + std::to_string(s[2]) +
                             "); resample to an isotropic grid first");
    spacing = s[0];
  }

  Vec3 origin{forigin[0], forigin[1], forigin[2]};
  if (origin.x == 0 && origin.y == 0 && origin.z == 0 &&
      (nstart[0] != 0 || nstart[1] != 0 || nstart[2] != 0)) {
    // Legacy convention: location encoded as start indices in file axis order.
    double o[3] = {0, 0, 0};
    o[col_axis] = nstart[0] * spacing;
    o[row_axis] = nstart[1] * spacing;
    o[sec_axis] = nstart[2] * spacing;
    origin = {o[0], o[1], o[2]};
  }

  std::size_t elem = (mode == 0) ? 1 : (mode == 1 ? 2 : 4);
  f.seekg(std::streamoff(kHeaderBytes) + nsymbt, std::ios::beg);
  std::vector<unsigned char> payload(count * elem);
  f.read(reinterpret_cast<char*>(payload.data()), std::streamsize(payload.size()));
  if (f.gcount() != std::streamsize(payload.size()))
    throw FormatError(path + ": truncated payload (expected " + std::to_string(payload.size()) +
                      " bytes)");

  VoxelGrid grid(IVec3{dims[0], dims[1], dims[2]}, spacing, origin);
  float* out = grid.data().data();

  // File order is column-fastest; map each (c,r,s) to X-fastest storage.
  std::size_t stride[3] = {1, std::size_t(dims[0]), std::size_t(dims[0]) * std::size_t(dims[1])};
  std::size_t sc = stride[col_axis], sr = stride[row_axis], ss = stride[sec_axis];

  const unsigned char* p = payload.data();
  for (std::int32_t s = 0; s < nsec; ++s)
    for (std::int32_t r = 0; r < nrow; ++r) {
      std::size_t base = std::size_t(s) * ss + std::size_t(r) * sr;
      for (std::int32_t c = 0; c < ncol; ++c, p += elem) {
        float v;
        if (mode == 2) {
          v = rd_f32(p, swap);
        } else if (mode == 1) {
          unsigned char b[2] = {p[0], p[1]};
          if (swap) std::swap(b[0], b[1]);
          std::int16_t iv;
          std::memcpy(&iv, b, 2);
          v = float(iv);
        } else {
          v = float(*reinterpret_cast<const signed char*>(p));
        }
        out[base + std::size_t(c) * sc] = v;
      }
    }
  return grid;
}

void write_map(const std::string& path, const VoxelGrid& grid) {
  static_assert(std::endian::native == std::endian::little,
                "MRC writer assumes a little-endian host");

  double mean = 0;
  double mn = grid.data()[0], mx = grid.data()[0];
  for (float v : grid.data()) {
    mean += v;
    mn = std::min(mn, double(v));
    mx = std::max(mx, double(v));
  }
  mean /= double(grid.size());
  double var = 0;
  for (float v : grid.data()) var += (v - mean) * (v - mean);
  double rms = std::sqrt(var / double(grid.size()));

  unsigned char h[kHeaderBytes];
  std::memset(h, 0, sizeof(h));
  wr_i32(h + 0, grid.nx());
  wr_i32(h + 4, grid.ny());
  wr_i32(h + 8, grid.nz());
  wr_i32(h + 12, 2);  // mode 2: float32
  wr_i32(h + 28, grid.nx());
  wr_i32(h + 32, grid.ny());
  wr_i32(h + 36, grid.nz());
  wr_f32(h + 40, float(grid.nx() * grid.spacing()));
  wr_f32(h + 44, float(grid.ny() * grid.spacing()));
  wr_f32(h + 48, float(grid.nz() * grid.spacing()));
  wr_f32(h + 52, 90.0f);
  wr_f32(h + 56, 90.0f);
  wr_f32(h + 60, 90.0f);
  wr_i32(h + 64, 1);
  wr_i32(h + 68, 2);
  wr_i32(h + 72, 3);
  wr_f32(h + 76, float(mn));
  wr_f32(h + 80, float(mx));
  wr_f32(h + 84, float(mean));
  wr_i32(h + 88, 1);      // ispg: volume
  wr_i32(h + 108, 20140);  // nversion
  wr_f32(h + 196, float(grid.origin().x));
  wr_f32(h + 200, float(grid.origin().y));
  wr_f32(h + 204, float(grid.origin().z));
  std::memcpy(h + 208, "MAP ", 4);
  h[212] = 0x44;
  h[213] = 0x44;
  wr_f32(h + 216, float(rms));
  wr_i32(h + 220, 1);
  std::memcpy(h + 224, "tomotrace", 9);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(h), kHeaderBytes);
  f.write(reinterpret_cast<const char*>(grid.data().data()),
          std::streamsize(grid.size() * sizeof(float)));
  if (!f) throw FormatError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Normalization, blur, stats
// ---------------------------------------------------------------------------

VoxelGrid normalize_unit(const VoxelGrid& grid) {
  float mn = grid.data()[0], mx = grid.data()[0];
  for (float v : grid.data()) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  VoxelGrid out(grid.spec());
  if (mx > mn) {
    float scale = 1.0f / (mx - mn);
    const float* src = grid.data().data();
    float* dst = out.data().data();
    std::int64_t n = std::int64_t(grid.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) dst[i] = (src[i] - mn) * scale;
  }
  return out;
}

namespace {

std::vector<double> gauss_kernel(double sigma_vox) {
  int radius = std::max(1, int(std::ceil(4.0 * sigma_vox)));
  std::vector<double> w(2 * radius + 1);
  double sum = 0;
  for (int t = -radius; t <= radius; ++t) {
    w[t + radius] = std::exp(-0.5 * (t * t) / (sigma_vox * sigma_vox));
    sum += w[t + radius];
  }
  for (double& v : w) v /= sum;
  return w;
}

// One separable pass along `axis`, zero padding outside the grid.
void blur_pass(const VoxelGrid& in, VoxelGrid& out, int axis, const std::vector<double>& w) {
  int radius = (int(w.size()) - 1) / 2;
  IVec3 d = in.dims();
  int n_axis = d[axis];
  // The two orthogonal dimensions, iterated as an outer loop o1 x o2.
  int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
  int n1 = d[a1], n2 = d[a2];

#pragma omp parallel for collapse(2) schedule(static)
  for (int u2 = 0; u2 < n2; ++u2)
    for (int u1 = 0; u1 < n1; ++u1) {
      int idx[3];
      idx[a1] = u1;
      idx[a2] = u2;
      for (int t = 0; t < n_axis; ++t) {
        double acc = 0;
        int lo = std::max(0, t - radius), hi = std::min(n_axis - 1, t + radius);
        for (int s = lo; s <= hi; ++s) {
          idx[axis] = s;
          acc += w[s - t + radius] * in.at(idx[0], idx[1], idx[2]);
        }
        idx[axis] = t;
        out.at(idx[0], idx[1], idx[2]) = float(acc);
      }
    }
}

}  // namespace

VoxelGrid gaussian_blur(const VoxelGrid& grid, double fwhm) {
  if (fwhm <= 0) return grid;
  double sigma_vox = fwhm_to_sigma(fwhm) / grid.spacing();
  auto w = gauss_kernel(sigma_vox);
  VoxelGrid a(grid.spec()), b(grid.spec());
  blur_pass(grid, a, 0, w);
  blur_pass(a, b, 1, w);
  blur_pass(b, a, 2, w);
  return a;
}

VoxelGrid gaussian_blur_serial(const VoxelGrid& grid, double fwhm) {
  if (fwhm <= 0) return grid;
  double sigma_vox = fwhm_to_sigma(fwhm) / grid.spacing();
  auto w = gauss_kernel(sigma_vox);
  int radius = (int(w.size()) - 1) / 2;
  VoxelGrid out(grid.spec());
  for (int k = 0; k < grid.nz(); ++k)
    for (int j = 0; j < grid.ny(); ++j)
      for (int i = 0; i < grid.nx(); ++i) {
        double acc = 0;
        for (int dk = -radius; dk <= radius; ++dk)
          for (int dj = -radius; dj <= radius; ++dj)
            for (int di = -radius; di <= radius; ++di) {
              int ii = i + di, jj = j + dj, kk = k + dk;
              if (!grid.in_bounds(ii, jj, kk)) continue;
              acc += w[di + radius] * w[dj + radius] * w[dk + radius] * grid.at(ii, jj, kk);
            }
        out.at(i, j, k) = float(acc);
      }
  return out;
}

float percentile_nearest_rank(std::vector<float>& values, double p) {
  if (values.empty()) throw ArgError("percentile of empty sample");
  if (p < 0 || p > 100) throw ArgError("percentile must be in [0, 100]");
  std::sort(values.begin(), values.end());
  std::size_t rank = std::size_t(std::ceil(p / 100.0 * double(values.size())));
  rank = std::max<std::size_t>(1, std::min(rank, values.size()));
  return values[rank - 1];
}

GridStats grid_stats(const VoxelGrid& grid, const std::vector<double>& pcts) {
  GridStats st;
  double mean = 0;
  double mn = grid.data()[0], mx = grid.data()[0];
  for (float v : grid.data()) {
    mean += v;
    mn = std::min(mn, double(v));
    mx = std::max(mx, double(v));
  }
  mean /= double(grid.size());
  double var = 0;
  for (float v : grid.data()) var += (v - mean) * (v - mean);
  st.min = mn;
  st.max = mx;
  st.mean = mean;
  st.sd = std::sqrt(var / double(grid.size()));

  if (!pcts.empty()) {
    std::vector<float> sorted(grid.data());
    std::sort(sorted.begin(), sorted.end());
    for (double p : pcts) {
      std::size_t rank = std::size_t(std::ceil(p / 100.0 * double(sorted.size())));
      rank = std::max<std::size_t>(1, std::min(rank, sorted.size()));
      st.percentiles.emplace_back(p, sorted[rank - 1]);
    }
  }
  return st;
}

}  // namespace tomo
