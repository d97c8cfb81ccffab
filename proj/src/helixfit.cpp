#include "helixfit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "geom.hpp"

namespace tomo {

namespace {

std::string trimmed(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_coord(const std::string& field, int line_no) {
  try {
    std::size_t used = 0;
    double v = std::stod(trimmed(field), &used);
    if (used != trimmed(field).size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw FormatError("line " + std::to_string(line_no) + ": bad coordinate field '" +
                      trimmed(field) + "'");
  }
}

}  // namespace

HelixModel parse_calpha(const std::string& model_text, char chain, int res_first, int res_last) {
  HelixModel model;
  model.chain_id = chain;
  model.res_first = res_first;
  model.res_last = res_last;

  std::map<int, Vec3> by_residue;
  std::istringstream in(model_text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.rfind("ENDMDL", 0) == 0) break;
    if (line.rfind("ATOM", 0) != 0 || line.size() < 6 || line.substr(0, 6) != "ATOM  ") continue;
    if (line.size() < 54)
      throw FormatError("line " + std::to_string(line_no) + ": ATOM record too short");
    if (trimmed(line.substr(12, 4)) != "CA") continue;
    char altloc = line[16];
    if (altloc != ' ' && altloc != 'A') continue;
    if (line[21] != chain) continue;
    int resseq = 0;
    try {
      resseq = std::stoi(trimmed(line.substr(22, 4)));
    } catch (const std::exception&) {
      throw FormatError("line " + std::to_string(line_no) + ": bad residue number '" +
                        trimmed(line.substr(22, 4)) + "'");
    }
    if (resseq < res_first || resseq > res_last) continue;
    Vec3 p{parse_coord(line.substr(30, 8), line_no), parse_coord(line.substr(38, 8), line_no),
           parse_coord(line.substr(46, 8), line_no)};
    by_residue.emplace(resseq, p);  // first record per residue wins
  }
  if (by_residue.empty())
    throw ArgError("no CA atoms matched chain '" + std::string(1, chain) + "' residues " +
                   std::to_string(res_first) + "-" + std::to_string(res_last));
  model.calphas.reserve(by_residue.size());
  for (const auto& [res, p] : by_residue) model.calphas.push_back(p);
  return model;
}

std::vector<Vec3> central_axis(const HelixModel& model) {
  const auto& ca = model.calphas;
  if (ca.size() < 4) throw ArgError("central axis needs at least 4 CA atoms");
  for (std::size_t i = 1; i < ca.size(); ++i) {
    double d = (ca[i] - ca[i - 1]).norm();
    if (d < 2.0 || d > 4.5)
      throw ArgError("consecutive CA spacing " + std::to_string(d) +
                     " A outside the [2.0, 4.5] sanity band");
  }
  std::vector<Vec3> raw;
  raw.reserve(ca.size() - 3);
  for (std::size_t i = 0; i + 3 < ca.size(); ++i) {
    Vec3 m = (ca[i] + ca[i + 1] + ca[i + 2] + ca[i + 3]) / 4.0;
    raw.push_back(m);
  }
  return resample_polyline(raw, 0.5);
}

namespace {

// Radial distance from p to the axis under flat end caps: the minimum over
// segments whose projection parameter lands in [0, 1]. Negative when p
// projects beyond every segment. A single-point axis measures to the point.
double capped_radial_distance(const Vec3& p, const std::vector<Vec3>& axis) {
  if (axis.size() == 1) return (p - axis[0]).norm();
  double best = -1;
  for (std::size_t i = 0; i + 1 < axis.size(); ++i) {
    Vec3 ab = axis[i + 1] - axis[i];
    double len2 = ab.dot(ab);
    if (len2 == 0) continue;
    double t = (p - axis[i]).dot(ab) / len2;
    if (t < 0 || t > 1) continue;
    Vec3 foot = axis[i] + ab * t;
    double d = (p - foot).norm();
    if (best < 0 || d < best) best = d;
  }
  return best;
}

struct CylinderValues {
  std::vector<float> inner, annulus;  // density values by region
};

CylinderValues collect_cylinder_values(const VoxelGrid& grid, const std::vector<Vec3>& axis,
                                       double r_inner, double r_outer) {
  if (axis.empty()) throw ArgError("cylinder axis is empty");
  Vec3 lo = axis[0], hi = axis[0];
  for (const auto& a : axis) {
    lo = {std::min(lo.x, a.x), std::min(lo.y, a.y), std::min(lo.z, a.z)};
    hi = {std::max(hi.x, a.x), std::max(hi.y, a.y), std::max(hi.z, a.z)};
  }
  const GridSpec& spec = grid.spec();
  auto clamp_idx = [](double v, int n) { return std::max(0, std::min(n - 1, int(v))); };
  IVec3 vlo{clamp_idx(std::floor((lo.x - r_outer - spec.origin.x) / spec.spacing), spec.dims.x),
            clamp_idx(std::floor((lo.y - r_outer - spec.origin.y) / spec.spacing), spec.dims.y),
            clamp_idx(std::floor((lo.z - r_outer - spec.origin.z) / spec.spacing), spec.dims.z)};
  IVec3 vhi{clamp_idx(std::ceil((hi.x + r_outer - spec.origin.x) / spec.spacing), spec.dims.x),
            clamp_idx(std::ceil((hi.y + r_outer - spec.origin.y) / spec.spacing), spec.dims.y),
            clamp_idx(std::ceil((hi.z + r_outer - spec.origin.z) / spec.spacing), spec.dims.z)};

  CylinderValues vals;
  for (int k = vlo.z; k <= vhi.z; ++k)
    for (int j = vlo.y; j <= vhi.y; ++j)
      for (int i = vlo.x; i <= vhi.x; ++i) {
        Vec3 p = spec.origin + Vec3{double(i), double(j), double(k)} * spec.spacing;
        double d = capped_radial_distance(p, axis);
        if (d < 0 || d > r_outer) continue;
        if (d <= r_inner)
          vals.inner.push_back(grid.at(i, j, k));
        else
          vals.annulus.push_back(grid.at(i, j, k));
      }
  std::sort(vals.inner.begin(), vals.inner.end());
  std::sort(vals.annulus.begin(), vals.annulus.end());
  return vals;
}

std::int64_t count_at_least(const std::vector<float>& sorted, double threshold) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), threshold,
                             [](float v, double t) { return double(v) < t; });
  return std::int64_t(sorted.end() - it);
}

}  // namespace

CylinderCounts cylinder_counts(const VoxelGrid& grid, const std::vector<Vec3>& axis,
                               double threshold) {
  CylinderValues vals = collect_cylinder_values(grid, axis, 2.5, 4.0);
  CylinderCounts c;
  c.vx_inner = count_at_least(vals.inner, threshold);
  c.ex_mod = std::int64_t(vals.inner.size()) - c.vx_inner;
  c.vx_out = count_at_least(vals.annulus, threshold);
  return c;
}

CylinderFitReport helix_f1(const VoxelGrid& grid, const std::vector<Vec3>& axis) {
  CylinderFitReport rep;
  CylinderValues vals = collect_cylinder_values(grid, axis, rep.r_inner, rep.r_outer);

  double mean = 0, mx = grid.data().empty() ? 0 : grid.data()[0];
  for (float v : grid.data()) {
    mean += v;
    mx = std::max(mx, double(v));
  }
  mean /= double(grid.size());

  if (vals.inner.empty() && vals.annulus.empty()) {
    rep.degenerate = true;
    rep.best_threshold = mean;
    return rep;
  }

  const int kSteps = 64;
  std::int64_t inner_total = std::int64_t(vals.inner.size());
  bool have = false;
  for (int s = 0; s < kSteps; ++s) {
    double t = mean + (mx - mean) * double(s) / double(kSteps - 1);
    std::int64_t vi = count_at_least(vals.inner, t);
    std::int64_t vo = count_at_least(vals.annulus, t);
    std::int64_t ex = inner_total - vi;
    double pden = (vi + vo) > 0 ? double(vi) / double(vi + vo) : 0.0;
    double rmod = (vi + ex) > 0 ? double(vi) / double(vi + ex) : 0.0;
    double f1 = (pden + rmod) > 0 ? 2.0 * pden * rmod / (pden + rmod) : 0.0;
    if (!have || f1 > rep.f1) {
      have = true;
      rep.f1 = f1;
      rep.pden = pden;
      rep.rmod = rmod;
      rep.vx_inner = vi;
      rep.vx_out = vo;
      rep.ex_mod = ex;
      rep.best_threshold = t;
    }
  }
  return rep;
}

double chain_score(const std::vector<std::pair<double, CylinderFitReport>>& reports) {
  if (reports.empty()) throw ArgError("chain score needs at least one helix");
  double wsum = 0, fsum = 0;
  for (const auto& [len, rep] : reports) {
    if (len <= 0) throw ArgError("helix length weights must be positive");
    wsum += len;
    fsum += len * rep.f1;
  }
  return fsum / wsum;
}

VoxelGrid masked_by_atoms(const VoxelGrid& grid, const std::vector<Vec3>& atoms, double radius) {
  if (radius < 0) throw ArgError("mask radius must be non-negative");
  const GridSpec& spec = grid.spec();
  std::vector<char> keep(grid.size(), 0);
  double r_vox = radius / spec.spacing;
  double r2 = radius * radius;
  for (const auto& a : atoms) {
    Vec3 c = grid.to_voxel(a);
    int x0 = std::max(0, int(std::ceil(c.x - r_vox)));
    int x1 = std::min(spec.dims.x - 1, int(std::floor(c.x + r_vox)));
    int y0 = std::max(0, int(std::ceil(c.y - r_vox)));
    int y1 = std::min(spec.dims.y - 1, int(std::floor(c.y + r_vox)));
    int z0 = std::max(0, int(std::ceil(c.z - r_vox)));
    int z1 = std::min(spec.dims.z - 1, int(std::floor(c.z + r_vox)));
    for (int k = z0; k <= z1; ++k)
      for (int j = y0; j <= y1; ++j)
        for (int i = x0; i <= x1; ++i) {
          Vec3 p = spec.origin + Vec3{double(i), double(j), double(k)} * spec.spacing;
          Vec3 dd = p - a;
          if (dd.dot(dd) <= r2) keep[grid.index(i, j, k)] = 1;
        }
  }
  VoxelGrid out(spec);
  for (std::size_t i = 0; i < grid.size(); ++i)
    out.data()[i] = keep[i] ? grid.data()[i] : 0.0f;
  return out;
}

}  // namespace tomo
