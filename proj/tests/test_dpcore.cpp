#include <doctest.h>

#include <cmath>

#include "dpcore.hpp"
#include "test_support.hpp"

using namespace tomo;
using namespace tomo::test;

TEST_SUITE_BEGIN("dpcore");

TEST_CASE("blend arithmetic") {
  CHECK(blend(2, 3, BlendMode::Multiply) == doctest::Approx(6));
  CHECK(blend(2, 3, BlendMode::Add) == doctest::Approx(5));
  CHECK(blend(2, 3, BlendMode::Minimum) == doctest::Approx(2));
  CHECK(blend(4, 9, BlendMode::GeometricMean) == doctest::Approx(6));
}

TEST_CASE("squared geometric mean equals the product") {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    double a = rng.uniform() * 10, b = rng.uniform() * 10;
    double g = blend(a, b, BlendMode::GeometricMean);
    CHECK(std::abs(g * g - blend(a, b, BlendMode::Multiply)) <= 1e-12 * std::max(1.0, a * b));
  }
}

TEST_CASE("all-ones grid: a two-step pyramid accumulates three voxels") {
  VoxelGrid g(IVec3{9, 9, 9}, 1.0, {}, 1.0f);
  PathDensityResult r = path_density(g, {4, 4, 4}, {Axis::Y, +1, 2});
  REQUIRE(r.traceable);
  CHECK(r.value == doctest::Approx(3.0));
  CHECK(r.path.size() == 3);
}

TEST_CASE("origin outside the grid or degenerate pyramids are rejected") {
  VoxelGrid g(IVec3{6, 6, 6}, 1.0, {}, 1.0f);
  CHECK_THROWS_AS(path_density(g, {6, 0, 0}, {Axis::Y, +1, 2}), ArgError);
  CHECK_THROWS_AS(path_density(g, {-1, 0, 0}, {Axis::Y, +1, 2}), ArgError);
  CHECK_THROWS_AS(path_density(g, {2, 2, 2}, {Axis::Y, +1, 0}), ArgError);
  CHECK_THROWS_AS(path_density(g, {2, 2, 2}, {Axis::Y, 0, 3}), ArgError);
}

TEST_CASE("base slice outside the grid marks the origin untraceable") {
  VoxelGrid g(IVec3{6, 6, 6}, 1.0, {}, 1.0f);
  PathDensityResult r = path_density(g, {3, 4, 3}, {Axis::Y, +1, 3});
  CHECK_FALSE(r.traceable);
  PathDensityResult b = brute_force_path_density(g, {3, 4, 3}, {Axis::Y, +1, 3});
  CHECK_FALSE(b.traceable);
}

TEST_CASE("dynamic program equals the exhaustive oracle, values paths and ties") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    VoxelGrid g = random_grid({7, 7, 7}, seed);
    for (Axis axis : {Axis::X, Axis::Y, Axis::Z})
      for (int sign : {+1, -1})
        for (int x = 1; x < 6; ++x)
          for (int y = 1; y < 6; ++y)
            for (int z = 1; z < 6; ++z) {
              PyramidSpec pyr{axis, sign, 3};
              PathDensityResult fast = path_density(g, {x, y, z}, pyr);
              PathDensityResult slow = brute_force_path_density(g, {x, y, z}, pyr);
              REQUIRE(fast.traceable == slow.traceable);
              if (!fast.traceable) continue;
              CHECK(std::abs(fast.value - slow.value) <= 1e-12);
              CHECK(fast.endpoint == slow.endpoint);
              REQUIRE(fast.path.size() == slow.path.size());
              for (std::size_t i = 0; i < fast.path.size(); ++i)
                CHECK(fast.path[i] == slow.path[i]);
            }
  }
}

TEST_CASE("ties fall to the lexicographically smallest base voxel") {
  // Constant grid: every path has the same value, so tie-breaking fully
  // determines the endpoint.
  VoxelGrid g(IVec3{9, 9, 9}, 1.0, {}, 0.5f);
  PathDensityResult r = path_density(g, {4, 2, 4}, {Axis::Y, +1, 3});
  REQUIRE(r.traceable);
  CHECK(r.endpoint == IVec3{1, 5, 1});
  for (std::size_t i = 0; i < r.path.size(); ++i) {
    CHECK(r.path[i].x == std::max(4 - int(i), 1));
    CHECK(r.path[i].z == std::max(4 - int(i), 1));
  }
}

TEST_CASE("path structure: one axial step per slice, lateral drift at most one") {
  VoxelGrid g = random_grid({9, 9, 9}, 33);
  for (int sign : {+1, -1}) {
    PathDensityResult r = path_density(g, {4, 4, 4}, {Axis::X, sign, 4});
    REQUIRE(r.traceable);
    REQUIRE(r.path.size() == 5);
    CHECK(r.path.front() == IVec3{4, 4, 4});
    CHECK(r.path.back() == r.endpoint);
    for (std::size_t i = 1; i < r.path.size(); ++i) {
      IVec3 d = r.path[i] - r.path[i - 1];
      CHECK(d.x == sign);
      CHECK(std::abs(d.y) <= 1);
      CHECK(std::abs(d.z) <= 1);
    }
    CHECK(std::abs(r.endpoint.y - 4) <= 4);
    CHECK(std::abs(r.endpoint.z - 4) <= 4);
  }
}

TEST_CASE("value grows with pyramid length on non-negative grids") {
  VoxelGrid g = random_grid({11, 11, 11}, 8);
  double prev = -1;
  for (int len = 1; len <= 4; ++len) {
    PathDensityResult r = path_density(g, {5, 1, 5}, {Axis::Y, +1, len});
    REQUIRE(r.traceable);
    CHECK(r.value >= prev);
    prev = r.value;
  }
}

TEST_CASE("uniform grid: every interior origin scores the same") {
  VoxelGrid g(IVec3{10, 10, 10}, 1.0, {}, 0.25f);
  double expect = 0.25 * 4;
  for (int x = 1; x < 9; ++x)
    for (int z = 1; z < 9; ++z) {
      PathDensityResult r = path_density(g, {x, 2, z}, {Axis::Y, +1, 3});
      REQUIRE(r.traceable);
      CHECK(r.value == doctest::Approx(expect));
    }
}

TEST_CASE("sweep_path_density matches per-voxel path_density") {
  VoxelGrid g = random_grid({8, 9, 7}, 21);
  for (Axis axis : {Axis::X, Axis::Y, Axis::Z})
    for (int sign : {+1, -1}) {
      std::vector<double> sweep = sweep_path_density(g, axis, sign, 3);
      for (int z = 0; z < 7; ++z)
        for (int y = 0; y < 9; ++y)
          for (int x = 0; x < 8; ++x) {
            PyramidSpec pyr{axis, sign, 3};
            PathDensityResult r = path_density(g, {x, y, z}, pyr);
            double s = sweep[g.index(x, y, z)];
            if (!r.traceable)
              CHECK(s == -std::numeric_limits<double>::infinity());
            else
              CHECK(s == doctest::Approx(r.value).epsilon(1e-12));
          }
    }
}

TEST_CASE("enhance_map matches the serial reference bit for bit") {
  VoxelGrid g = random_grid({10, 12, 8}, 19);
  for (BlendMode mode : {BlendMode::Multiply, BlendMode::Add, BlendMode::GeometricMean,
                         BlendMode::Minimum}) {
    VoxelGrid fast = enhance_map(g, 3, mode);
    VoxelGrid slow = enhance_map_serial(g, 3, mode);
    CHECK(bits_equal(fast.data(), slow.data()));
  }
}

TEST_CASE("enhancement lifts a single filament to full score") {
  VoxelGrid g = line_grid({12, 20, 12}, Axis::Y);
  VoxelGrid e = enhance_map(g, 4, BlendMode::Multiply);
  // On-line voxels far enough from both ends score the maximum.
  for (int y = 4; y <= 15; ++y) CHECK(e.at(6, y, 6) == doctest::Approx(1.0));
  // Laterally out of pyramid reach (> 4 voxels from the line): exactly zero.
  CHECK(e.at(0, 10, 0) == doctest::Approx(0.0));
  CHECK(e.at(11, 10, 0) == doctest::Approx(0.0));
  // Within reach the pyramid clips the line once, scoring low but not zero.
  CHECK(e.at(6, 10, 9) > 0.0f);
  CHECK(e.at(6, 10, 9) < 0.2f);
}

TEST_CASE("enhance_map zeroes voxels whose pyramids leave the grid") {
  VoxelGrid g(IVec3{8, 10, 8}, 1.0, {}, 1.0f);
  VoxelGrid e = enhance_map(g, 3, BlendMode::Multiply);
  CHECK(e.at(4, 0, 4) == 0.0f);
  CHECK(e.at(4, 9, 4) == 0.0f);
  CHECK(e.at(4, 2, 4) == 0.0f);   // backward base at -1
  CHECK(e.at(4, 5, 4) > 0.0f);
}

TEST_CASE("select_seeds: one per cube, 10^3 with edge 5 gives 8") {
  VoxelGrid g = random_grid({10, 10, 10}, 55);
  std::vector<IVec3> seeds = select_seeds(g, 5);
  CHECK(seeds.size() == 8);
  // Each seed is its cube's maximum; ties toward the smallest index.
  for (const auto& s : seeds) {
    IVec3 c{s.x / 5 * 5, s.y / 5 * 5, s.z / 5 * 5};
    float best = -1;
    IVec3 arg{};
    for (int z = c.z; z < c.z + 5; ++z)
      for (int y = c.y; y < c.y + 5; ++y)
        for (int x = c.x; x < c.x + 5; ++x)
          if (g.at(x, y, z) > best) {
            best = g.at(x, y, z);
            arg = {x, y, z};
          }
    CHECK(g.at(s) == best);
    CHECK(s == arg);
  }
}

TEST_CASE("select_seeds covers partial boundary cubes") {
  VoxelGrid g = random_grid({11, 10, 10}, 56);
  // 3 cubes along X (5+5+1), 2 along Y and Z.
  CHECK(select_seeds(g, 5).size() == 12);
  CHECK_THROWS_AS(select_seeds(g, 0), ArgError);
}

TEST_CASE("refine_backward keeps straight segments and drops skewed ones") {
  VoxelGrid g = line_grid({12, 24, 12}, Axis::Y);
  Cfs straight;
  straight.start = {6, 4, 6};
  straight.end = {6, 12, 6};
  straight.axis = Axis::Y;
  straight.npd = 1.0;

  Cfs skewed = straight;
  skewed.start = {10, 8, 6};  // claims a start far off the ridge

  auto kept = refine_backward(g, {straight, skewed}, 30.0, 4);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].start == straight.start);
}

TEST_CASE("cfs midpoint rounds the endpoint average") {
  Cfs c;
  c.start = {1, 2, 3};
  c.end = {4, 5, 8};
  CHECK(cfs_midpoint(c) == IVec3{3, 4, 6});
}

TEST_SUITE_END();
