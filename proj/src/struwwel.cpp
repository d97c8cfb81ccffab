#include "struwwel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <tuple>
#include <utility>

#include "geom.hpp"

namespace tomo {

namespace {

IVec3 round_vec(const Vec3& p) {
  return {int(std::lround(p.x)), int(std::lround(p.y)), int(std::lround(p.z))};
}

std::tuple<int, int, int, int, int, int> cfs_key(const Cfs& c) {
  return {c.start.x, c.start.y, c.start.z, c.end.x, c.end.y, c.end.z};
}

// Endpoint pairing: P runs first, oriented toward the junction, then Q away
// from it. Returns the junction distance when the pairing qualifies.
bool pairing_fits(const std::vector<Vec3>& p_pts, const std::vector<Vec3>& q_pts,
                  double max_angle, double max_gap, double* dist) {
  Vec3 conn = q_pts.front() - p_pts.back();
  double d = conn.norm();
  if (d > max_gap) return false;
  Vec3 dp = p_pts.back() - p_pts.front();
  Vec3 dq = q_pts.back() - q_pts.front();
  if (angle_deg(dp, dq) > max_angle) return false;
  if (d > 1.0 && (angle_deg(dp, conn) > max_angle || angle_deg(dq, conn) > max_angle))
    return false;
  *dist = d;
  return true;
}

Cfs merge_points(const Cfs& a, const Cfs& b, std::vector<Vec3> pts) {
  Cfs m;
  double wa = double(a.points.size()), wb = double(b.points.size());
  m.npd = (wa * a.npd + wb * b.npd) / (wa + wb);
  m.axis = a.axis;
  m.points = smooth_centerline(std::move(pts));
  m.start = round_vec(m.points.front());
  m.end = round_vec(m.points.back());
  return m;
}

std::vector<Vec3> reversed(const std::vector<Vec3>& pts) {
  return {pts.rbegin(), pts.rend()};
}

}  // namespace

std::vector<Cfs> generate_cfs_multiaxis(const VoxelGrid& grid, const std::vector<IVec3>& seeds,
                                        int length, std::size_t* skipped) {
  std::int64_t n = std::int64_t(seeds.size());
  std::vector<Cfs> tmp(seeds.size());
  std::vector<char> ok(seeds.size(), 0);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t s = 0; s < n; ++s) {
    bool have = false;
    double best = 0;
    PathDensityResult best_r;
    Axis best_axis = Axis::X;
    for (int a = 0; a < 3; ++a) {
      PathDensityResult r = path_density(grid, seeds[s], {Axis(a), +1, length});
      if (!r.traceable) continue;
      if (!have || r.value > best) {
        have = true;
        best = r.value;
        best_r = std::move(r);
        best_axis = Axis(a);
      }
    }
    if (!have) continue;
    Cfs c;
    c.start = seeds[s];
    c.end = best_r.endpoint;
    c.npd = best / (length + 1);
    c.axis = best_axis;
    c.points.reserve(best_r.path.size());
    for (const auto& p : best_r.path) c.points.push_back(p.to_vec3());
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

VoxelGrid build_pruning_map(const GridSpec& spec, const std::vector<Cfs>& cfss) {
  VoxelGrid map(spec, 0.0f);
  IVec3 d = spec.dims;
  for (const auto& c : cfss) {
    float npd = float(c.npd);
    for (const auto& p : c.points) {
      IVec3 q = round_vec(p);
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            IVec3 u{q.x + dx, q.y + dy, q.z + dz};
            if (u.x < 0 || u.y < 0 || u.z < 0 || u.x >= d.x || u.y >= d.y || u.z >= d.z)
              continue;
            float& cell = map.at(u);
            cell = std::max(cell, npd);
          }
    }
  }
  return map;
}

std::vector<Cfs> segment_by_threshold(std::vector<Cfs> cfss, double threshold) {
  std::vector<Cfs> out;
  out.reserve(cfss.size());
  for (auto& c : cfss)
    if (c.npd >= threshold) out.push_back(std::move(c));
  return out;
}

namespace {

struct ProximityCand {
  double dist = 0;
  std::size_t a = 0, b = 0;
  int mode = 0;  // 0: a+b, 1: a+rev(b), 2: rev(a)+b, 3: b+a
};

bool best_pairing(const std::vector<Vec3>& ap, const std::vector<Vec3>& ar,
                  const std::vector<Vec3>& bp, const std::vector<Vec3>& br, double max_angle,
                  double max_gap, ProximityCand* cand) {
  const std::vector<Vec3>* firsts[4] = {&ap, &ap, &ar, &bp};
  const std::vector<Vec3>* seconds[4] = {&bp, &br, &bp, &ap};
  bool found = false;
  for (int m = 0; m < 4; ++m) {
    double d = 0;
    if (!pairing_fits(*firsts[m], *seconds[m], max_angle, max_gap, &d)) continue;
    if (!found || d < cand->dist) {
      found = true;
      cand->dist = d;
      cand->mode = m;
    }
  }
  return found;
}

std::vector<Vec3> concat(const std::vector<Vec3>& p, const std::vector<Vec3>& q) {
  std::vector<Vec3> out = p;
  out.insert(out.end(), q.begin(), q.end());
  return out;
}

Cfs merge_by_mode(const Cfs& a, const Cfs& b, int mode) {
  switch (mode) {
    case 0: return merge_points(a, b, concat(a.points, b.points));
    case 1: return merge_points(a, b, concat(a.points, reversed(b.points)));
    case 2: return merge_points(a, b, concat(reversed(a.points), b.points));
    default: return merge_points(a, b, concat(b.points, a.points));
  }
}

}  // namespace

std::vector<Cfs> fuse_proximity(std::vector<Cfs> cfss, double max_angle, double max_gap) {
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<std::vector<Vec3>> rev(cfss.size());
    for (std::size_t i = 0; i < cfss.size(); ++i) rev[i] = reversed(cfss[i].points);
    std::vector<ProximityCand> cands;
    for (std::size_t i = 0; i < cfss.size(); ++i)
      for (std::size_t j = i + 1; j < cfss.size(); ++j) {
        ProximityCand c;
        if (best_pairing(cfss[i].points, rev[i], cfss[j].points, rev[j], max_angle, max_gap,
                         &c)) {
          c.a = i;
          c.b = j;
          cands.push_back(c);
        }
      }
    std::sort(cands.begin(), cands.end(), [&](const ProximityCand& p, const ProximityCand& q) {
      if (p.dist != q.dist) return p.dist < q.dist;
      if (cfs_key(cfss[p.a]) != cfs_key(cfss[q.a])) return cfs_key(cfss[p.a]) < cfs_key(cfss[q.a]);
      if (cfs_key(cfss[p.b]) != cfs_key(cfss[q.b])) return cfs_key(cfss[p.b]) < cfs_key(cfss[q.b]);
      return p.mode < q.mode;
    });
    std::vector<char> dead(cfss.size(), 0);
    std::vector<Cfs> merged;
    for (const auto& c : cands) {
      if (dead[c.a] || dead[c.b]) continue;
      merged.push_back(merge_by_mode(cfss[c.a], cfss[c.b], c.mode));
      dead[c.a] = dead[c.b] = 1;
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
  std::sort(cfss.begin(), cfss.end(),
            [](const Cfs& a, const Cfs& b) { return cfs_key(a) < cfs_key(b); });
  return cfss;
}

namespace {

struct ExtensionCand {
  double dist = 0;
  std::size_t a = 0, b = 0;
  std::size_t cut = 0;   // extension sample joining the two
  bool b_reversed = false;
};

}  // namespace

std::vector<Cfs> fuse_by_extension(const VoxelGrid& grid, std::vector<Cfs> cfss, int length,
                                   double max_angle, double max_gap) {
  std::size_t n = cfss.size();
  std::vector<std::vector<Vec3>> ext(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Cfs& c = cfss[i];
    int ax = int(c.axis);
    int sign = c.points.back()[ax] >= c.points.front()[ax] ? +1 : -1;
    IVec3 from = round_vec(c.points.back());
    if (!grid.in_bounds(from)) continue;
    PathDensityResult r = path_density(grid, from, {c.axis, sign, length});
    if (!r.traceable) continue;
    ext[i].reserve(r.path.size() - 1);
    for (std::size_t t = 1; t < r.path.size(); ++t) ext[i].push_back(r.path[t].to_vec3());
  }

  std::vector<ExtensionCand> cands;
  for (std::size_t i = 0; i < n; ++i) {
    if (ext[i].empty()) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      for (int rev = 0; rev < 2; ++rev) {
        Vec3 target = rev ? cfss[j].points.back() : cfss[j].points.front();
        std::size_t cut = 0;
        double best = 0;
        bool have = false;
        for (std::size_t t = 0; t < ext[i].size(); ++t) {
          double d = (ext[i][t] - target).norm();
          if (!have || d < best) {
            have = true;
            best = d;
            cut = t;
          }
        }
        if (!have || best > max_gap) continue;
        std::vector<Vec3> grown = cfss[i].points;
        grown.insert(grown.end(), ext[i].begin(), ext[i].begin() + cut + 1);
        std::vector<Vec3> other = rev ? reversed(cfss[j].points) : cfss[j].points;
        double d = 0;
        if (!pairing_fits(grown, other, max_angle, max_gap, &d)) continue;
        cands.push_back({d, i, j, cut, rev != 0});
      }
    }
  }
  std::sort(cands.begin(), cands.end(), [&](const ExtensionCand& p, const ExtensionCand& q) {
    if (p.dist != q.dist) return p.dist < q.dist;
    if (cfs_key(cfss[p.a]) != cfs_key(cfss[q.a])) return cfs_key(cfss[p.a]) < cfs_key(cfss[q.a]);
    if (cfs_key(cfss[p.b]) != cfs_key(cfss[q.b])) return cfs_key(cfss[p.b]) < cfs_key(cfss[q.b]);
    return p.b_reversed < q.b_reversed;
  });

  std::vector<char> dead(n, 0);
  std::vector<Cfs> merged;
  for (const auto& c : cands) {
    if (dead[c.a] || dead[c.b]) continue;
    std::vector<Vec3> pts = cfss[c.a].points;
    pts.insert(pts.end(), ext[c.a].begin(), ext[c.a].begin() + c.cut + 1);
    const std::vector<Vec3>& bp = cfss[c.b].points;
    if (c.b_reversed) {
      std::vector<Vec3> r = reversed(bp);
      pts.insert(pts.end(), r.begin(), r.end());
    } else {
      pts.insert(pts.end(), bp.begin(), bp.end());
    }
    merged.push_back(merge_points(cfss[c.a], cfss[c.b], std::move(pts)));
    dead[c.a] = dead[c.b] = 1;
  }
  std::vector<Cfs> out;
  out.reserve(n + merged.size());
  for (std::size_t i = 0; i < n; ++i)
    if (!dead[i]) out.push_back(std::move(cfss[i]));
  for (auto& m : merged) out.push_back(std::move(m));
  std::sort(out.begin(), out.end(),
            [](const Cfs& a, const Cfs& b) { return cfs_key(a) < cfs_key(b); });
  return out;
}

StruwwelResult trace_struwwel(const VoxelGrid& raw, const StruwwelConfig& cfg) {
  if (cfg.length < 1) throw ArgError("segment length must be at least 1");
  if (!(cfg.threshold >= 0.0 && cfg.threshold <= 1.0))
    throw ArgError("density threshold must be set, in [0, 1]");
  StruwwelResult res;
  StruwwelDiagnostics& d = res.diagnostics;

  VoxelGrid norm = normalize_unit(raw);
  int spacing = cfg.seed_spacing > 0 ? cfg.seed_spacing : std::max(1, cfg.length / 2);
  std::vector<IVec3> seeds = select_seeds(norm, spacing);
  d.seeds = seeds.size();

  std::vector<Cfs> cfss = generate_cfs_multiaxis(norm, seeds, cfg.length, &d.skipped_seeds);
  d.segments = cfss.size();
  cfss = refine_backward(norm, std::move(cfss), cfg.backward_angle, cfg.length);
  d.after_backward = cfss.size();

  res.density_map = build_pruning_map(norm.spec(), cfss);

  cfss = segment_by_threshold(std::move(cfss), cfg.threshold);
  d.after_threshold = cfss.size();
  cfss = fuse_proximity(std::move(cfss), cfg.fuse_angle, cfg.fuse_gap);
  d.after_proximity = cfss.size();
  cfss = fuse_by_extension(norm, std::move(cfss), cfg.length, cfg.fuse_angle, cfg.fuse_gap);

  res.traces.reserve(cfss.size());
  for (const auto& c : cfss) {
    FilamentTrace t;
    t.id = int(res.traces.size()) + 1;
    t.points.reserve(c.points.size());
    for (const auto& p : c.points)
      t.points.push_back(norm.spec().origin + p * norm.spec().spacing);
    res.traces.push_back(std::move(t));
  }
  d.traces = res.traces.size();
  return res;
}

}  // namespace tomo
