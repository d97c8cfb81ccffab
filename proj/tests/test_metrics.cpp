#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "metrics.hpp"
#include "phantom.hpp"
#include "test_support.hpp"

using namespace tomo;
using namespace tomo::test;

namespace {

// Direct O(P*T) scorer over the same masks, sharing only the definitions:
// dilate the prediction, then classify every marked voxel by a full distance
// scan against the other side.
EvalReport brute_force_f1(std::vector<std::uint8_t> pred, const std::vector<std::uint8_t>& truth,
                          IVec3 dims, int neighborhood, bool dilate_pred) {
  auto collect = [&](const std::vector<std::uint8_t>& m) {
    std::vector<IVec3> out;
    for (int z = 0; z < dims.z; ++z)
      for (int y = 0; y < dims.y; ++y)
        for (int x = 0; x < dims.x; ++x)
          if (m[std::size_t(x) + std::size_t(dims.x) * (y + std::size_t(dims.y) * z)])
            out.push_back({x, y, z});
    return out;
  };
  if (dilate_pred) {
    std::vector<std::uint8_t> fat(pred.size(), 0);
    for (const auto& p : collect(pred))
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            IVec3 q{p.x + dx, p.y + dy, p.z + dz};
            if (q.x >= 0 && q.y >= 0 && q.z >= 0 && q.x < dims.x && q.y < dims.y && q.z < dims.z)
              fat[std::size_t(q.x) + std::size_t(dims.x) * (q.y + std::size_t(dims.y) * q.z)] = 1;
          }
    pred = std::move(fat);
  }
  auto pv = collect(pred);
  auto tv = collect(truth);
  auto near_any = [&](const IVec3& a, const std::vector<IVec3>& side) {
    for (const auto& b : side)
      if (chebyshev(a, b) <= neighborhood) return true;
    return false;
  };
  EvalReport r;
  for (const auto& p : pv) (near_any(p, tv) ? r.tp : r.fp)++;
  for (const auto& t : tv)
    if (!near_any(t, pv)) r.fn++;
  r.precision_defined = r.tp + r.fp > 0;
  r.recall_defined = r.tp + r.fn > 0;
  if (r.precision_defined) r.precision = double(r.tp) / double(r.tp + r.fp);
  if (r.recall_defined) r.recall = double(r.tp) / double(r.tp + r.fn);
  r.f1_defined = r.precision_defined && r.recall_defined && r.precision + r.recall > 0;
  if (r.f1_defined) r.f1 = 2 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

std::vector<std::uint8_t> random_mask(IVec3 dims, std::uint64_t seed, double fill) {
  std::vector<std::uint8_t> m(std::size_t(dims.x) * dims.y * dims.z, 0);
  Rng rng(seed);
  for (auto& v : m) v = rng.uniform() < fill ? 1 : 0;
  return m;
}

// Independent cross-distance: resample the prediction at very fine steps and
// match truth vertices by nearest axial coordinate.
double dense_cross_distance(const FilamentTrace& pred, const FilamentTrace& truth,
                            const GridSpec& spec, Axis axis, double axial_tol) {
  int ax = int(axis);
  std::vector<Vec3> samples;
  for (std::size_t i = 1; i < pred.points.size(); ++i) {
    Vec3 a = (pred.points[i - 1] - spec.origin) / spec.spacing;
    Vec3 b = (pred.points[i] - spec.origin) / spec.spacing;
    double len = (b - a).norm();
    int n = std::max(1, int(std::ceil(len / 0.01)));
    for (int t = (i == 1 ? 0 : 1); t <= n; ++t) samples.push_back(a + (b - a) * (double(t) / n));
  }
  double sum = 0;
  std::size_t matched = 0;
  for (const auto& tp : truth.points) {
    Vec3 t = (tp - spec.origin) / spec.spacing;
    double best_ax = 1e300;
    Vec3 best{};
    for (const auto& s : samples) {
      double d = std::abs(s[ax] - t[ax]);
      if (d < best_ax) {
        best_ax = d;
        best = s;
      }
    }
    if (best_ax <= axial_tol) {
      sum += (best - t).norm();
      ++matched;
    }
  }
  return matched ? sum / double(matched) : -1.0;
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("harmonic mean reproduces the published score rows") {
  CHECK(f1_from_pr(0.945, 0.994) == doctest::Approx(0.969).epsilon(0.001));
  CHECK(f1_from_pr(0.97, 0.85) == doctest::Approx(0.906).epsilon(0.001));
  CHECK(f1_from_pr(0.613, 0.809) == doctest::Approx(0.698).epsilon(0.001));
}

TEST_CASE("identical prediction and truth score perfectly") {
  GridSpec spec{{24, 24, 24}, 1.0, {0, 0, 0}};
  auto traces = {make_trace(1, {{4, 2, 5}, {4, 20, 5}}), make_trace(2, {{12, 3, 12}, {16, 19, 12}})};
  EvalReport r = voxel_f1(traces, traces, spec);
  CHECK(r.precision == doctest::Approx(1.0));
  CHECK(r.recall == doctest::Approx(1.0));
  CHECK(r.f1 == doctest::Approx(1.0));
  CHECK(r.fp == 0);
  CHECK(r.fn == 0);
}

TEST_CASE("undefined sides are flagged, not zeroed") {
  GridSpec spec{{10, 10, 10}, 1.0, {0, 0, 0}};
  auto some = {make_trace(1, {{2, 2, 2}, {2, 7, 2}})};
  EvalReport no_truth = voxel_f1(some, {}, spec);
  CHECK_FALSE(no_truth.recall_defined);
  CHECK_FALSE(no_truth.f1_defined);
  CHECK(no_truth.precision_defined);
  EvalReport no_pred = voxel_f1({}, some, spec);
  CHECK_FALSE(no_pred.precision_defined);
  CHECK(no_pred.recall_defined);
  CHECK(no_pred.recall == doctest::Approx(0.0));
}

TEST_CASE("chebyshev_dilate equals the stencil oracle") {
  IVec3 dims{9, 8, 7};
  for (int radius : {1, 2}) {
    auto mask = random_mask(dims, 100 + radius, 0.08);
    auto fast = chebyshev_dilate(mask, dims, radius);
    std::vector<std::uint8_t> slow(mask.size(), 0);
    for (int z = 0; z < dims.z; ++z)
      for (int y = 0; y < dims.y; ++y)
        for (int x = 0; x < dims.x; ++x) {
          bool hit = false;
          for (int dz = -radius; dz <= radius && !hit; ++dz)
            for (int dy = -radius; dy <= radius && !hit; ++dy)
              for (int dx = -radius; dx <= radius && !hit; ++dx) {
                int qx = x + dx, qy = y + dy, qz = z + dz;
                if (qx < 0 || qy < 0 || qz < 0 || qx >= dims.x || qy >= dims.y || qz >= dims.z)
                  continue;
                hit = mask[std::size_t(qx) + std::size_t(dims.x) * (qy + std::size_t(dims.y) * qz)];
              }
          slow[std::size_t(x) + std::size_t(dims.x) * (y + std::size_t(dims.y) * z)] = hit;
        }
    CHECK(fast == slow);
  }
}

TEST_CASE("mask scorer equals the brute-force scorer on random masks") {
  IVec3 dims{12, 10, 9};
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    auto pred = random_mask(dims, seed * 2 + 1, 0.05);
    auto truth = random_mask(dims, seed * 2 + 2, 0.05);
    for (bool dilate : {true, false}) {
      EvalReport fast = voxel_f1_masks(pred, truth, dims, 3, dilate);
      EvalReport slow = brute_force_f1(pred, truth, dims, 3, dilate);
      CHECK(fast.tp == slow.tp);
      CHECK(fast.fp == slow.fp);
      CHECK(fast.fn == slow.fn);
    }
  }
}

TEST_CASE("an isolated prediction four voxels out, checked against brute force") {
  // After the one-voxel dilation the prediction's near face sits at Chebyshev
  // distance 3 from the truth voxel, so that face still counts as matched;
  // the far slabs do not. The brute-force scan fixes the exact counts.
  IVec3 dims{24, 24, 24};
  std::vector<std::uint8_t> pred(std::size_t(24) * 24 * 24, 0), truth = pred;
  auto idx = [&](int x, int y, int z) {
    return std::size_t(x) + 24u * (std::size_t(y) + 24u * std::size_t(z));
  };
  truth[idx(10, 10, 10)] = 1;
  pred[idx(14, 10, 10)] = 1;
  EvalReport fast = voxel_f1_masks(pred, truth, dims, 3, true);
  EvalReport slow = brute_force_f1(pred, truth, dims, 3, true);
  CHECK(fast.tp == slow.tp);
  CHECK(fast.fp == slow.fp);
  CHECK(fast.fn == slow.fn);
  CHECK(fast.tp == 9);
  CHECK(fast.fp == 18);
  CHECK(fast.fn == 0);

  // One voxel further out nothing matches in either direction.
  pred[idx(14, 10, 10)] = 0;
  pred[idx(15, 10, 10)] = 1;
  EvalReport far = voxel_f1_masks(pred, truth, dims, 3, true);
  CHECK(far.tp == 0);
  CHECK(far.fp == 27);
  CHECK(far.fn == 1);
  CHECK(far.f1 == doctest::Approx(0.0));
}

TEST_CASE("scoring is not symmetric in its counts") {
  // One thick prediction blob against a single truth voxel: swapping the
  // roles changes tp/fp/fn even though the distance predicate is symmetric.
  IVec3 dims{16, 16, 16};
  std::vector<std::uint8_t> a(std::size_t(16) * 16 * 16, 0), b = a;
  auto idx = [&](int x, int y, int z) {
    return std::size_t(x) + 16u * (std::size_t(y) + 16u * std::size_t(z));
  };
  for (int x = 4; x <= 8; ++x) a[idx(x, 8, 8)] = 1;
  b[idx(6, 8, 8)] = 1;
  EvalReport ab = voxel_f1_masks(a, b, dims, 3, false);
  EvalReport ba = voxel_f1_masks(b, a, dims, 3, false);
  CHECK(ab.tp != ba.tp);
  CHECK(ab.tp == 5);
  CHECK(ba.tp == 1);
  CHECK(ab.fn == ba.fn);
}

TEST_CASE("trace scoring is invariant to list order") {
  GridSpec spec{{32, 32, 32}, 1.0, {0, 0, 0}};
  auto truth = make_random_traces(spec, 5, 3, 10, 25);
  auto pred = truth;
  std::reverse(pred.begin(), pred.end());
  EvalReport fwd = voxel_f1(truth, truth, spec);
  EvalReport rev = voxel_f1(pred, truth, spec);
  CHECK(fwd.tp == rev.tp);
  CHECK(fwd.fp == rev.fp);
  CHECK(fwd.fn == rev.fn);
}

TEST_CASE("cross distance of a trace with itself is zero") {
  GridSpec spec{{32, 64, 32}, 1.0, {0, 0, 0}};
  FilamentTrace t = make_trace(1, {{10, 5, 12}, {12, 30, 14}, {11, 55, 16}});
  CrossDistanceReport r = cross_distance(t, t, spec);
  REQUIRE(r.defined);
  CHECK(r.mean_distance == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(r.matched == 3);
}

TEST_CASE("constant lateral offset gives exactly its norm") {
  GridSpec spec{{32, 64, 32}, 1.0, {0, 0, 0}};
  FilamentTrace truth = make_trace(1, {{10, 5, 12}, {10, 55, 12}});
  FilamentTrace pred = make_trace(1, {{11, 5, 13}, {11, 55, 13}});
  CrossDistanceReport r = cross_distance(pred, truth, spec);
  REQUIRE(r.defined);
  CHECK(r.mean_distance == doctest::Approx(std::sqrt(2.0)).epsilon(1e-6));
}

TEST_CASE("lateral translation shifts the mean by exactly the offset") {
  GridSpec spec{{48, 64, 48}, 1.0, {0, 0, 0}};
  FilamentTrace truth = make_trace(1, {{20, 4, 20}, {24, 30, 22}, {21, 60, 26}});
  FilamentTrace pred = truth;
  for (auto& p : pred.points) {
    p.x += 2.0;
    p.z -= 1.0;
  }
  CrossDistanceReport r = cross_distance(pred, truth, spec);
  REQUIRE(r.defined);
  CHECK(r.mean_distance == doctest::Approx(std::sqrt(5.0)).epsilon(0.01));
}

TEST_CASE("disjoint axial ranges are reported undefined") {
  GridSpec spec{{32, 64, 32}, 1.0, {0, 0, 0}};
  FilamentTrace low = make_trace(1, {{10, 2, 10}, {10, 20, 10}});
  FilamentTrace high = make_trace(1, {{10, 40, 10}, {10, 60, 10}});
  CrossDistanceReport r = cross_distance(low, high, spec);
  CHECK_FALSE(r.defined);
  CHECK(r.matched == 0);
}

TEST_CASE("cross distance matches an independent dense resampling") {
  GridSpec spec{{48, 80, 48}, 1.0, {0, 0, 0}};
  Rng rng(9);
  for (int trial = 0; trial < 4; ++trial) {
    // Smooth wavy pair with gentle lateral jitter.
    FilamentTrace truth, pred;
    truth.id = pred.id = 1;
    for (int y = 8; y <= 70; y += 4) {
      double phase = y / 12.0;
      truth.points.push_back({24 + 3 * std::sin(phase + trial), double(y), 24 + 2 * std::cos(phase)});
      pred.points.push_back({24 + 3 * std::sin(phase + trial) + rng.uniform(-0.8, 0.8), double(y),
                             24 + 2 * std::cos(phase) + rng.uniform(-0.8, 0.8)});
    }
    CrossDistanceReport r = cross_distance(pred, truth, spec);
    REQUIRE(r.defined);
    double oracle = dense_cross_distance(pred, truth, spec, Axis::Y, 0.5);
    CHECK(r.mean_distance == doctest::Approx(oracle).epsilon(1e-3));
  }
}

TEST_CASE("set scorer pairs filaments by id") {
  GridSpec spec{{32, 64, 32}, 1.0, {0, 0, 0}};
  FilamentTrace a1 = make_trace(1, {{10, 5, 10}, {10, 55, 10}});
  FilamentTrace a2 = make_trace(2, {{20, 5, 20}, {20, 55, 20}});
  FilamentTrace b1 = make_trace(1, {{11, 5, 10}, {11, 55, 10}});
  FilamentTrace b2 = make_trace(2, {{22, 5, 20}, {22, 55, 20}});
  // Present the prediction in reverse order; ids should still pair 1-1, 2-2.
  CrossDistanceSetReport r = cross_distance_set({b2, b1}, {a1, a2}, spec);
  REQUIRE(r.defined);
  CHECK(r.defined_pairs == 2);
  CHECK(r.mean_distance == doctest::Approx(1.5).epsilon(1e-6));
}

TEST_SUITE_END();
