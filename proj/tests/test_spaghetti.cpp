#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "metrics.hpp"
#include "phantom.hpp"
#include "spaghetti.hpp"
#include "test_support.hpp"

using namespace tomo;
using namespace tomo::test;

namespace {

Cfs segment_y(IVec3 start, int len, double npd) {
  Cfs c;
  c.start = start;
  c.end = {start.x, start.y + len, start.z};
  c.npd = npd;
  c.axis = Axis::Y;
  for (int t = 0; t <= len; ++t) c.points.push_back({double(start.x), double(start.y + t), double(start.z)});
  return c;
}

// Plain O(n^2) isolation filter re-derived from the documented rule.
std::vector<std::size_t> isolation_oracle(const std::vector<Cfs>& cfss, double radius,
                                          int min_neighbors) {
  std::size_t n = cfss.size();
  std::vector<char> alive(n, 1);
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<char> next = alive;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      int neighbors = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j || !alive[j]) continue;
        Vec3 d = cfs_midpoint(cfss[i]).to_vec3() - cfs_midpoint(cfss[j]).to_vec3();
        if (d.norm() <= radius) ++neighbors;
      }
      if (neighbors < min_neighbors) {
        next[i] = 0;
        changed = true;
      }
    }
    alive = next;
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (alive[i]) out.push_back(i);
  return out;
}

std::multiset<std::pair<IVec3, IVec3>> endpoint_set(const std::vector<Cfs>& cfss) {
  std::multiset<std::pair<IVec3, IVec3>> s;
  for (const auto& c : cfss) s.insert({c.start, c.end});
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("spaghetti");

TEST_CASE("a straight unit line scores full normalized path density") {
  VoxelGrid g = line_grid({12, 24, 12}, Axis::Y);
  SpaghettiConfig cfg;
  std::size_t skipped = 0;
  auto cfss = trace_cfs(g, {{6, 8, 6}}, cfg, &skipped);
  REQUIRE(cfss.size() == 1);
  CHECK(skipped == 0);
  CHECK(cfss[0].npd == doctest::Approx(1.0));
  CHECK(cfss[0].start == IVec3{6, 8, 6});
  CHECK(cfss[0].end == IVec3{6, 13, 6});
}

TEST_CASE("seeds whose forward base leaves the grid are skipped and counted") {
  VoxelGrid g(IVec3{10, 10, 10}, 1.0, {}, 1.0f);
  SpaghettiConfig cfg;
  std::size_t skipped = 0;
  auto cfss = trace_cfs(g, {{5, 8, 5}, {5, 2, 5}}, cfg, &skipped);
  CHECK(cfss.size() == 1);
  CHECK(skipped == 1);
}

TEST_CASE("line-mode segments follow a straight bright line") {
  VoxelGrid g = line_grid({12, 24, 12}, Axis::Y);
  SpaghettiConfig cfg;
  cfg.line_segments = true;
  std::size_t skipped = 0;
  auto cfss = trace_cfs_line(g, {{6, 8, 6}}, cfg, &skipped);
  REQUIRE(cfss.size() == 1);
  CHECK(cfss[0].npd == doctest::Approx(1.0));
  CHECK(cfss[0].end == IVec3{6, 13, 6});
}

TEST_CASE("decile binning follows the floor formula exactly") {
  for (double npd : {0.0, 0.05, 0.1, 0.15, 0.3, 0.45, 0.6, 0.75, 0.9, 0.95, 0.9999, 1.0}) {
    int expect = int(std::min(std::max(npd, 0.0), std::nextafter(1.0, 0.0)) * 10.0) + 1;
    CHECK(npd_bin(npd) == expect);
  }
  CHECK(npd_bin(0.9) == 10);
  CHECK(npd_bin(1.0) == 10);
  CHECK(npd_bin(0.0) == 1);
  CHECK(npd_bin(0.099) == 1);
}

TEST_CASE("threshold bin: empty, uniform-sparse, all-dense, and graded inputs") {
  SpaghettiConfig cfg;
  cfg.occupancy_cube = 50;
  IVec3 dims{100, 100, 100};  // 8 occupancy cubes
  CHECK(find_threshold_bin({}, dims, cfg) == 0);

  // Two midpoints per cube: every cube stays sparse, every decile passes.
  std::vector<Cfs> sparse;
  for (int cz = 0; cz < 2; ++cz)
    for (int cy = 0; cy < 2; ++cy)
      for (int cx = 0; cx < 2; ++cx)
        for (int r = 0; r < 2; ++r)
          sparse.push_back(segment_y({cx * 50 + 10 + r * 4, cy * 50 + 10, cz * 50 + 10}, 4, 0.95));
  CHECK(find_threshold_bin(sparse, dims, cfg) == 1);

  // Ten top-decile midpoints in every cube: even decile 10 looks dense.
  std::vector<Cfs> dense;
  for (int cz = 0; cz < 2; ++cz)
    for (int cy = 0; cy < 2; ++cy)
      for (int cx = 0; cx < 2; ++cx)
        for (int r = 0; r < 10; ++r)
          dense.push_back(segment_y({cx * 50 + 5 + r * 3, cy * 50 + 20, cz * 50 + 20}, 4, 0.95));
  CHECK(find_threshold_bin(dense, dims, cfg) == 11);

  // Sparse high deciles over a dense decile-5 carpet: the scan fails first
  // at bin 5, so the reported threshold is 6.
  std::vector<Cfs> graded = sparse;
  for (int cz = 0; cz < 2; ++cz)
    for (int cy = 0; cy < 2; ++cy)
      for (int cx = 0; cx < 2; ++cx)
        for (int r = 0; r < 10; ++r)
          graded.push_back(segment_y({cx * 50 + 5 + r * 3, cy * 50 + 30, cz * 50 + 30}, 4, 0.45));
  CHECK(find_threshold_bin(graded, dims, cfg) == 6);
}

TEST_CASE("collinear chain of four segments fuses into one") {
  SpaghettiConfig cfg;
  std::vector<Cfs> chain;
  for (int s = 0; s < 4; ++s) chain.push_back(segment_y({20, 5 + s * 8, 20}, 5, 0.8));
  // Gaps of 3 axial voxels between consecutive end/start pairs.
  auto fused = fuse_collinear(chain, cfg);
  REQUIRE(fused.size() == 1);
  CHECK(fused[0].start.y <= 6);
  CHECK(fused[0].end.y >= 28);
  CHECK(fused[0].start.x == 20);
  CHECK(fused[0].end.x == 20);
}

TEST_CASE("fusion outcome is independent of input order") {
  SpaghettiConfig cfg;
  std::vector<Cfs> chain;
  for (int s = 0; s < 4; ++s) chain.push_back(segment_y({20, 5 + s * 8, 20}, 5, 0.8));
  chain.push_back(segment_y({40, 10, 40}, 5, 0.7));  // unrelated segment
  auto sorted_in = fuse_collinear(chain, cfg);
  std::reverse(chain.begin(), chain.end());
  auto reversed_in = fuse_collinear(chain, cfg);
  CHECK(endpoint_set(sorted_in) == endpoint_set(reversed_in));
}

TEST_CASE("fusion respects the gap cap and the angle cap") {
  SpaghettiConfig cfg;  // gap cap 10, angle cap 6 degrees
  std::vector<Cfs> wide_gap = {segment_y({10, 5, 10}, 5, 0.8), segment_y({10, 21, 10}, 5, 0.8)};
  CHECK(fuse_collinear(wide_gap, cfg).size() == 2);  // gap 11 > 10

  std::vector<Cfs> at_cap = {segment_y({10, 5, 10}, 5, 0.8), segment_y({10, 20, 10}, 5, 0.8)};
  CHECK(fuse_collinear(at_cap, cfg).size() == 1);  // gap 10 passes (inclusive)

  // Parallel but laterally offset: the connector bends more than 6 degrees.
  std::vector<Cfs> offset = {segment_y({10, 5, 10}, 5, 0.8), segment_y({14, 13, 10}, 5, 0.8)};
  CHECK(fuse_collinear(offset, cfg).size() == 2);
}

TEST_CASE("exhaustive pairing check on small random segment sets") {
  // Independent oracle: enumerate candidate pairs each round, apply the
  // documented order (smallest axial gap first), and merge by endpoint
  // bookkeeping only. Verified on sets of at most 6 segments.
  SpaghettiConfig cfg;
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Cfs> set;
    int n = 3 + int(rng.uniform() * 4);
    for (int s = 0; s < n; ++s)
      set.push_back(segment_y({int(rng.uniform() * 6) * 4, int(rng.uniform() * 5) * 7,
                               int(rng.uniform() * 6) * 4},
                              5, 0.8));
    auto got = fuse_collinear(set, cfg);

    // Count how many merges the oracle performs.
    std::vector<std::pair<IVec3, IVec3>> spans;
    for (const auto& c : set) spans.push_back({c.start, c.end});
    bool changed = true;
    while (changed) {
      changed = false;
      int best_gap = 1 << 30;
      std::size_t bi = 0, bj = 0;
      for (std::size_t i = 0; i < spans.size(); ++i)
        for (std::size_t j = 0; j < spans.size(); ++j) {
          if (i == j) continue;
          int gap = spans[j].first.y - spans[i].second.y;
          if (gap < 0 || gap > int(cfg.collinear_gap)) continue;
          if (spans[i].second.x != spans[j].first.x || spans[i].second.z != spans[j].first.z)
            continue;  // straight test segments: any lateral offset bends > 6 degrees
          if (gap < best_gap) {
            best_gap = gap;
            bi = i;
            bj = j;
            changed = true;
          }
        }
      if (changed) {
        spans[bi].second = spans[bj].second;
        spans.erase(spans.begin() + bj);
      }
    }
    CHECK(got.size() == spans.size());
  }
}

TEST_CASE("isolation filter matches the quadratic oracle and is idempotent") {
  SpaghettiConfig cfg;
  cfg.isolation_radius = 12;
  cfg.isolation_min_neighbors = 2;
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Cfs> set;
    for (int s = 0; s < 14; ++s)
      set.push_back(segment_y({int(rng.uniform() * 40), int(rng.uniform() * 40),
                               int(rng.uniform() * 40)},
                              4, 0.5));
    auto kept = remove_isolated(set, cfg);
    auto oracle = isolation_oracle(set, cfg.isolation_radius, cfg.isolation_min_neighbors);
    REQUIRE(kept.size() == oracle.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
      CHECK(kept[i].start == set[oracle[i]].start);
      CHECK(kept[i].end == set[oracle[i]].end);
    }
    auto again = remove_isolated(kept, cfg);
    CHECK(endpoint_set(again) == endpoint_set(kept));
  }
}

TEST_CASE("extension stops exactly at the configured cap") {
  // A long bright line, one short seed segment at its foot; the extension
  // must stop at extension_cap * length axial steps despite density ahead.
  VoxelGrid g = line_grid({12, 64, 12}, Axis::Y);
  SpaghettiConfig cfg;  // length 5, cap 5 -> 25 axial steps
  Cfs seed = segment_y({6, 2, 6}, 5, 1.0);
  auto grown = extend_cfs(g, {seed}, 0.9, cfg);
  REQUIRE(grown.size() == 1);
  CHECK(grown[0].end.y - grown[0].start.y == 25);
  CHECK(grown[0].end == IVec3{6, 27, 6});
}

TEST_CASE("extension halts where density falls below the floor") {
  VoxelGrid g(IVec3{12, 64, 12}, 1.0);
  for (int y = 0; y <= 20; ++y) g.at(6, y, 6) = 1.0f;  // line ends at y=20
  SpaghettiConfig cfg;
  Cfs seed = segment_y({6, 2, 6}, 5, 1.0);
  auto grown = extend_cfs(g, {seed}, 0.9, cfg);
  REQUIRE(grown.size() == 1);
  // Steps beyond y=17 would include off-line zeros and dip under the floor.
  CHECK(grown[0].end.y <= 20);
  CHECK(grown[0].end.y >= 12);
}

TEST_CASE("directional walk bridges a two-step gap with one-voxel lateral offset") {
  GridSpec spec{{24, 24, 24}, 1.0, {0, 0, 0}};
  std::vector<Cfs> cfss = {segment_y({10, 2, 10}, 4, 0.9)};
  Cfs second = segment_y({11, 8, 10}, 4, 0.9);  // starts 2 above the first's end
  cfss.push_back(second);
  auto traces = fuse_directional(cfss, spec, Axis::Y);
  REQUIRE(traces.size() == 1);
  CHECK(traces[0].points.size() == 10);
  CHECK(traces[0].points.front().y == doctest::Approx(2));
  CHECK(traces[0].points.back().y == doctest::Approx(12));
}

TEST_CASE("directional walk does not bridge larger gaps or offsets") {
  GridSpec spec{{24, 32, 24}, 1.0, {0, 0, 0}};
  // Three-step axial gap.
  std::vector<Cfs> far = {segment_y({10, 2, 10}, 4, 0.9), segment_y({10, 9, 10}, 4, 0.9)};
  CHECK(fuse_directional(far, spec, Axis::Y).size() == 2);
  // Two-step gap but two voxels of lateral offset.
  std::vector<Cfs> wide = {segment_y({10, 2, 10}, 4, 0.9), segment_y({12, 8, 10}, 4, 0.9)};
  CHECK(fuse_directional(wide, spec, Axis::Y).size() == 2);
}

TEST_CASE("redundancy pruning keeps an exact 0.9 overlap and drops higher") {
  GridSpec spec{{40, 40, 40}, 1.0, {0, 0, 0}};
  FilamentTrace primary = make_trace(1, {{10, 0, 10}, {10, 20, 10}});  // 21 voxels

  // 18 of 20 voxels inside the primary's dilation: exactly 0.9.
  FilamentTrace at_cap;
  at_cap.id = 2;
  for (int y = 0; y <= 17; ++y) at_cap.points.push_back({11, double(y), 10});
  at_cap.points.push_back({30, 18, 30});
  at_cap.points.push_back({30, 19, 30});

  // 19 of 20 voxels inside: 0.95, pruned.
  FilamentTrace over_cap;
  over_cap.id = 3;
  for (int y = 0; y <= 18; ++y) over_cap.points.push_back({11, double(y), 10});
  over_cap.points.push_back({30, 25, 30});

  auto kept = prune_redundant({primary, at_cap, over_cap}, spec, 0.9);
  std::set<int> ids;
  for (const auto& t : kept) ids.insert(t.id);
  CHECK(ids == std::set<int>{1, 2});
}

TEST_CASE("redundancy pruning is idempotent") {
  GridSpec spec{{32, 32, 32}, 1.0, {0, 0, 0}};
  auto traces = make_random_traces(spec, 8, 77, 10, 24);
  auto once = prune_redundant(traces, spec, 0.9);
  auto twice = prune_redundant(once, spec, 0.9);
  REQUIRE(once.size() == twice.size());
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(once[i].id == twice[i].id);
}

TEST_CASE("noise-free phantom traced without enhancement reaches full recall") {
  GridSpec spec{{48, 96, 48}, 1.0, {0, 0, 0}};
  auto truth = make_parallel_traces(spec, 8, 5, Axis::Y);
  SimulationConfig sim;
  sim.fwhm = 4.0;
  sim.rng_seed = 5;
  VoxelGrid vol = simulate_tomogram(spec, truth, sim);

  SpaghettiConfig cfg;
  cfg.enhance = false;
  cfg.occupancy_cube = 24;
  SpaghettiResult res = trace_spaghetti(vol, cfg);
  REQUIRE_FALSE(res.traces.empty());
  EvalReport r = voxel_f1(res.traces, truth, spec);
  REQUIRE(r.recall_defined);
  CHECK(r.recall == doctest::Approx(1.0));
  CHECK(r.f1 >= 0.95);
}

TEST_CASE("pipeline diagnostics reflect the stage flow") {
  GridSpec spec{{48, 96, 48}, 1.0, {0, 0, 0}};
  auto truth = make_parallel_traces(spec, 8, 5, Axis::Y);
  SimulationConfig sim;
  sim.fwhm = 4.0;
  sim.noise_level = 0.3;
  sim.rng_seed = 6;
  VoxelGrid vol = simulate_tomogram(spec, truth, sim);
  SpaghettiConfig cfg;
  cfg.occupancy_cube = 24;
  SpaghettiResult res = trace_spaghetti(vol, cfg);
  const auto& d = res.diagnostics;
  CHECK(d.seeds > 0);
  CHECK(d.segments <= d.seeds);
  CHECK(d.after_threshold <= d.segments);
  CHECK(d.after_backward <= d.after_threshold);
  CHECK(d.after_isolation <= d.after_collinear);
  CHECK(d.traces_kept <= d.traces_walked);
  CHECK(d.traces_kept == res.traces.size());
  CHECK(d.threshold_bin >= 1);
  CHECK(d.threshold_bin <= 11);
}

TEST_SUITE_END();
