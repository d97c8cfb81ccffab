#include "spaghetti.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <tuple>
#include <unordered_set>
#include <utility>

#include "geom.hpp"

namespace tomo {

namespace {

struct VoxelHash {
  std::size_t operator()(const IVec3& v) const {
    std::uint64_t h = std::uint64_t(std::uint32_t(v.x));
    h = h * 0x9e3779b97f4a7c15ull + std::uint64_t(std::uint32_t(v.y));
    h = h * 0x9e3779b97f4a7c15ull + std::uint64_t(std::uint32_t(v.z));
    h ^= h >> 31;
    return std::size_t(h * 0xbf58476d1ce4e5b9ull);
  }
};

using VoxelSet = std::unordered_set<IVec3, VoxelHash>;

std::tuple<int, int, int> start_key(const Cfs& c) {
  return {c.start.x, c.start.y, c.start.z};
}

bool cfs_order(const Cfs& a, const Cfs& b) {
  if (a.start != b.start) return a.start < b.start;
  return a.end < b.end;
}

IVec3 round_vec(const Vec3& p) {
  return {int(std::lround(p.x)), int(std::lround(p.y)), int(std::lround(p.z))};
}

double weighted_npd(const Cfs& a, const Cfs& b) {
  double wa = double(a.points.size()), wb = double(b.points.size());
  return (wa * a.npd + wb * b.npd) / (wa + wb);
}

}  // namespace

std::vector<Cfs> trace_cfs(const VoxelGrid& grid, const std::vector<IVec3>& seeds,
                           const SpaghettiConfig& cfg, std::size_t* skipped) {
  std::int64_t n = std::int64_t(seeds.size());
  std::vector<Cfs> tmp(seeds.size());
  std::vector<char> ok(seeds.size(), 0);
  PyramidSpec pyr{cfg.axis, +1, cfg.length};
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t s = 0; s < n; ++s) {
    PathDensityResult r = path_density(grid, seeds[s], pyr);
    if (!r.traceable) continue;
    Cfs c;
    c.start = seeds[s];
    c.end = r.endpoint;
    c.npd = r.value / (cfg.length + 1);
    c.axis = cfg.axis;
    c.points.reserve(r.path.size());
    for (const auto& p : r.path) c.points.push_back(p.to_vec3());
    tmp[s] = std::move(c);
    ok[s] = 1;
  }
  std::vector<Cfs> out;
  out.reserve(seeds.size());
  std::size_t miss = 0;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    if (ok[s])
      out.push_back(std::move(tmp[s]));
    else
      ++miss;
  }
  if (skipped) *skipped = miss;
  return out;
}

std::vector<Cfs> trace_cfs_line(const VoxelGrid& grid, const std::vector<IVec3>& seeds,
                                const SpaghettiConfig& cfg, std::size_t* skipped) {
  int ax = int(cfg.axis), a1 = (ax + 1) % 3, a2 = (ax + 2) % 3;
  int l = cfg.length;
  if (l < 1) throw ArgError("segment length must be at least 1");
  IVec3 d = grid.dims();
  std::int64_t n = std::int64_t(seeds.size());
  std::vector<Cfs> tmp(seeds.size());
  std::vector<char> ok(seeds.size(), 0);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t s = 0; s < n; ++s) {
    IVec3 o = seeds[s];
    int base = o[ax] + l;
    if (base < 0 || base >= d[ax]) continue;
    double best = -std::numeric_limits<double>::infinity();
    IVec3 best_e{};
    for (int du = -l; du <= l; ++du)
      for (int dv = -l; dv <= l; ++dv) {
        IVec3 e = o;
        e[ax] = base;
        e[a1] = o[a1] + du;
        e[a2] = o[a2] + dv;
        if (!grid.in_bounds(e)) continue;
        double sum = 0;
        for (int t = 0; t <= l; ++t) {
          IVec3 q = o;
          q[ax] = o[ax] + t;
          q[a1] = int(std::lround(o[a1] + double(du) * t / l));
          q[a2] = int(std::lround(o[a2] + double(dv) * t / l));
          sum += grid.at(q);
        }
        if (sum > best || (sum == best && e < best_e)) {
          best = sum;
          best_e = e;
        }
      }
    Cfs c;
    c.start = o;
    c.end = best_e;
    c.npd = best / (l + 1);
    c.axis = cfg.axis;
    c.points.reserve(l + 1);
    for (int t = 0; t <= l; ++t) {
      IVec3 q = o;
      q[ax] = o[ax] + t;
      q[a1] = int(std::lround(o[a1] + double(best_e[a1] - o[a1]) * t / l));
      q[a2] = int(std::lround(o[a2] + double(best_e[a2] - o[a2]) * t / l));
      c.points.push_back(q.to_vec3());
    }
    tmp[s] = std::move(c);
    ok[s] = 1;
  }
  std::vector<Cfs> out;
  out.reserve(seeds.size());
  std::size_t miss = 0;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    if (ok[s])
      out.push_back(std::move(tmp[s]));
    else
      ++miss;
  }
  if (skipped) *skipped = miss;
  return out;
}

int npd_bin(double npd) {
  double capped = std::min(std::max(npd, 0.0), std::nextafter(1.0, 0.0));
  return int(capped * 10.0) + 1;
}

int find_threshold_bin(const std::vector<Cfs>& cfss, IVec3 dims, const SpaghettiConfig& cfg) {
  if (cfss.empty()) return 0;
  if (cfg.occupancy_cube < 1) throw ArgError("occupancy cube edge must be at least 1");
  int cx = std::min(cfg.occupancy_cube, dims.x);
  int cy = std::min(cfg.occupancy_cube, dims.y);
  int cz = std::min(cfg.occupancy_cube, dims.z);
  int ncx = (dims.x + cx - 1) / cx;
  int ncy = (dims.y + cy - 1) / cy;
  int ncz = (dims.z + cz - 1) / cz;
  std::size_t total = std::size_t(ncx) * ncy * ncz;

  std::vector<std::vector<IVec3>> by_bin(11);
  for (const auto& c : cfss) by_bin[npd_bin(c.npd)].push_back(cfs_midpoint(c));

  std::vector<int> counts(total, 0);
  for (int b = 10; b >= 1; --b) {
    for (const auto& m : by_bin[b]) {
      std::size_t ci = std::size_t(m.x / cx) + std::size_t(ncx) * (std::size_t(m.y / cy) + std::size_t(ncy) * std::size_t(m.z / cz));
      ++counts[ci];
    }
    std::size_t sparse = 0;
    for (int c : counts)
      if (c < cfg.occupancy_min_count) ++sparse;
    // The small slack keeps the inclusive boundary exact when
    // occupancy_fraction * total is not representable.
    if (double(sparse) + 1e-9 < cfg.occupancy_fraction * double(total)) return b + 1;
  }
  return 1;
}

namespace {

// A qualifying ordered fusion pair: `first` ends, then after an axial gap of
// at most collinear_gap, `second` starts, with directions and the connector
// all within collinear_angle.
struct CollinearCand {
  int gap = 0;
  std::size_t first = 0, second = 0;
};

bool collinear_pair(const Cfs& a, const Cfs& b, int ax, const SpaghettiConfig& cfg, int* gap) {
  int g = b.start[ax] - a.end[ax];
  if (g < 0 || double(g) > cfg.collinear_gap) return false;
  Vec3 da = (a.end - a.start).to_vec3();
  Vec3 db = (b.end - b.start).to_vec3();
  if (angle_deg(da, db) > cfg.collinear_angle) return false;
  Vec3 conn = (b.start - a.end).to_vec3();
  if (conn.norm() > 1.0 &&
      (angle_deg(da, conn) > cfg.collinear_angle || angle_deg(db, conn) > cfg.collinear_angle))
    return false;
  *gap = g;
  return true;
}

Cfs merge_cfs(const Cfs& a, const Cfs& b, Axis axis) {
  Cfs m;
  m.npd = weighted_npd(a, b);
  m.axis = axis;
  std::vector<Vec3> pts = a.points;
  pts.insert(pts.end(), b.points.begin(), b.points.end());
  m.points = smooth_centerline(pts);
  m.start = round_vec(m.points.front());
  m.end = round_vec(m.points.back());
  return m;
}

}  // namespace

std::vector<Cfs> fuse_collinear(std::vector<Cfs> cfss, const SpaghettiConfig& cfg) {
  int ax = int(cfg.axis);
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<CollinearCand> cands;
    for (std::size_t i = 0; i < cfss.size(); ++i)
      for (std::size_t j = 0; j < cfss.size(); ++j) {
        if (i == j) continue;
        int gap = 0;
        if (collinear_pair(cfss[i], cfss[j], ax, cfg, &gap)) cands.push_back({gap, i, j});
      }
    std::sort(cands.begin(), cands.end(), [&](const CollinearCand& p, const CollinearCand& q) {
      if (p.gap != q.gap) return p.gap < q.gap;
      if (start_key(cfss[p.first]) != start_key(cfss[q.first]))
        return start_key(cfss[p.first]) < start_key(cfss[q.first]);
      return start_key(cfss[p.second]) < start_key(cfss[q.second]);
    });
    std::vector<char> dead(cfss.size(), 0);
    std::vector<Cfs> merged;
    for (const auto& c : cands) {
      if (dead[c.first] || dead[c.second]) continue;
      merged.push_back(merge_cfs(cfss[c.first], cfss[c.second], cfg.axis));
      dead[c.first] = dead[c.second] = 1;
      changed = true;
    }
    if (changed) {
      std::vector<Cfs> next;
      next.reserve(cfss.size());
      for (std::size_t i = 0; i < cfss.size(); ++i)
        if (!dead[i]) next.push_back(std::move(cfss[i]));
      for (auto& m : merged) next.push_back(std::move(m));
      cfss = std::move(next);
    }
  }
  std::sort(cfss.begin(), cfss.end(), cfs_order);
  return cfss;
}

std::vector<Cfs> remove_isolated(std::vector<Cfs> cfss, const SpaghettiConfig& cfg) {
  std::size_t n = cfss.size();
  std::vector<Vec3> mids(n);
  for (std::size_t i = 0; i < n; ++i) mids[i] = cfs_midpoint(cfss[i]).to_vec3();
  std::vector<char> alive(n, 1);
  double r2 = cfg.isolation_radius * cfg.isolation_radius;
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<char> next = alive;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      int neighbors = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i || !alive[j]) continue;
        Vec3 d = mids[i] - mids[j];
        if (d.dot(d) <= r2) ++neighbors;
      }
      if (neighbors < cfg.isolation_min_neighbors) {
        next[i] = 0;
        changed = true;
      }
    }
    alive = next;
  }
  std::vector<Cfs> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (alive[i]) out.push_back(std::move(cfss[i]));
  return out;
}

std::vector<Cfs> extend_cfs(const VoxelGrid& grid, std::vector<Cfs> cfss, double npd_floor,
                            const SpaghettiConfig& cfg) {
  if (cfg.extension_cap < 1) throw ArgError("extension cap must be at least 1");
  int ax = int(cfg.axis);
  int cap = cfg.extension_cap * cfg.length;
  PyramidSpec pyr{cfg.axis, +1, cfg.length};
  std::int64_t n = std::int64_t(cfss.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) {
    Cfs& c = cfss[i];
    int extent = c.end[ax] - c.start[ax];
    while (extent + cfg.length <= cap) {
      PathDensityResult r = path_density(grid, c.end, pyr);
      if (!r.traceable || r.value / (cfg.length + 1) < npd_floor) break;
      for (std::size_t t = 1; t < r.path.size(); ++t) c.points.push_back(r.path[t].to_vec3());
      c.end = r.endpoint;
      extent += cfg.length;
    }
  }
  return cfss;
}

std::vector<FilamentTrace> fuse_directional(const std::vector<Cfs>& cfss, const GridSpec& spec,
                                            Axis axis) {
  int ax = int(axis), av = (ax + 1) % 3, au = (ax + 2) % 3;
  // Lateral probe order for the two-step candidates, (du, dv) with u/v the
  // lateral axes in (axis+2, axis+1) order.
  static const int kProbe[9][2] = {{0, 0}, {0, 1},  {0, -1}, {1, 1},  {1, -1},
                                   {-1, -1}, {1, 0}, {-1, 0}, {-1, 1}};

  VoxelSet fv;
  std::vector<IVec3> all;
  for (const auto& c : cfss)
    for (const auto& p : c.points) {
      IVec3 q = round_vec(p);
      if (q.x < 0 || q.y < 0 || q.z < 0 || q.x >= spec.dims.x || q.y >= spec.dims.y ||
          q.z >= spec.dims.z)
        continue;
      if (fv.insert(q).second) all.push_back(q);
    }
  std::sort(all.begin(), all.end(), [ax](const IVec3& p, const IVec3& q) {
    if (p[ax] != q[ax]) return p[ax] < q[ax];
    return p < q;
  });

  VoxelSet assigned;
  std::vector<FilamentTrace> traces;
  for (const auto& v : all) {
    if (assigned.count(v)) continue;
    std::vector<IVec3> walk{v};
    assigned.insert(v);
    IVec3 cur = v;
    for (;;) {
      IVec3 next = cur;
      next[ax] += 1;
      bool found = fv.count(next) && !assigned.count(next);
      if (!found) {
        for (const auto& pr : kProbe) {
          IVec3 cand = cur;
          cand[ax] += 2;
          cand[au] += pr[0];
          cand[av] += pr[1];
          if (fv.count(cand) && !assigned.count(cand)) {
            next = cand;
            found = true;
            break;
          }
        }
      }
      if (!found) break;
      assigned.insert(next);
      walk.push_back(next);
      cur = next;
    }
    if (walk.size() < 2) continue;
    FilamentTrace t;
    t.id = int(traces.size()) + 1;
    t.points.reserve(walk.size());
    for (const auto& w : walk) t.points.push_back(spec.origin + w.to_vec3() * spec.spacing);
    traces.push_back(std::move(t));
  }
  return traces;
}

std::vector<FilamentTrace> prune_redundant(std::vector<FilamentTrace> traces,
                                           const GridSpec& spec, double overlap_fraction) {
  std::size_t n = traces.size();
  std::vector<std::vector<IVec3>> vox(n);
  for (std::size_t i = 0; i < n; ++i) {
    VoxelSet seen;
    for (const auto& p : traces[i].points) {
      IVec3 q = round_vec((p - spec.origin) / spec.spacing);
      if (seen.insert(q).second) vox[i].push_back(q);
    }
    std::sort(vox[i].begin(), vox[i].end());
  }
  // Longest first; stable so equal-length traces keep their walk order.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return vox[a].size() > vox[b].size(); });

  std::vector<VoxelSet> kept_dilated;
  std::vector<char> keep(n, 1);
  for (std::size_t oi : order) {
    bool redundant = false;
    for (const auto& dil : kept_dilated) {
      std::size_t shared = 0;
      for (const auto& q : vox[oi])
        if (dil.count(q)) ++shared;
      if (double(shared) > overlap_fraction * double(vox[oi].size())) {
        redundant = true;
        break;
      }
    }
    if (redundant) {
      keep[oi] = 0;
      continue;
    }
    VoxelSet dil;
    for (const auto& q : vox[oi])
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) dil.insert({q.x + dx, q.y + dy, q.z + dz});
    kept_dilated.push_back(std::move(dil));
  }

  std::vector<FilamentTrace> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i]) out.push_back(std::move(traces[i]));
  return out;
}

SpaghettiResult trace_spaghetti(const VoxelGrid& raw, const SpaghettiConfig& cfg) {
  if (cfg.length < 1) throw ArgError("segment length must be at least 1");
  SpaghettiResult res;
  SpaghettiDiagnostics& d = res.diagnostics;

  VoxelGrid norm = normalize_unit(raw);
  VoxelGrid work = cfg.enhance ? enhance_map(norm, cfg.length, cfg.blend, cfg.axis)
                               : std::move(norm);

  std::vector<IVec3> seeds = select_seeds(work, cfg.length);
  d.seeds = seeds.size();
  std::vector<Cfs> cfss = cfg.line_segments ? trace_cfs_line(work, seeds, cfg, &d.skipped_seeds)
                                            : trace_cfs(work, seeds, cfg, &d.skipped_seeds);
  d.segments = cfss.size();

  int tb = find_threshold_bin(cfss, work.dims(), cfg);
  d.threshold_bin = tb;
  std::vector<Cfs> kept;
  if (tb >= 1)
    for (auto& c : cfss)
      if (npd_bin(c.npd) >= tb) kept.push_back(std::move(c));
  d.after_threshold = kept.size();

  kept = refine_backward(work, std::move(kept), cfg.backward_angle, cfg.length);
  d.after_backward = kept.size();
  kept = fuse_collinear(std::move(kept), cfg);
  d.after_collinear = kept.size();
  kept = remove_isolated(std::move(kept), cfg);
  d.after_isolation = kept.size();
  kept = extend_cfs(work, std::move(kept), (tb - 1) / 10.0, cfg);
  d.after_extension = kept.size();

  std::vector<FilamentTrace> walked = fuse_directional(kept, work.spec(), cfg.axis);
  d.traces_walked = walked.size();
  res.traces = prune_redundant(std::move(walked), work.spec(), cfg.overlap_fraction);
  d.traces_kept = res.traces.size();
  return res;
}

}  // namespace tomo
