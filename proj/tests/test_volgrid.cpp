#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "test_support.hpp"
#include "volgrid.hpp"

using namespace tomo;
using namespace tomo::test;

TEST_SUITE_BEGIN("volgrid");

TEST_CASE("grid construction rejects non-positive dimensions") {
  CHECK_THROWS_AS(VoxelGrid(IVec3{0, 3, 3}, 1.0), ArgError);
  CHECK_THROWS_AS(VoxelGrid(IVec3{3, -1, 3}, 1.0), ArgError);
}

TEST_CASE("voxel/physical coordinate maps invert each other") {
  VoxelGrid g(IVec3{5, 6, 7}, 2.5, Vec3{10, -4, 0.5});
  IVec3 v{3, 1, 6};
  Vec3 p = g.voxel_center(v);
  CHECK(p.x == doctest::Approx(10 + 3 * 2.5));
  CHECK(g.nearest_voxel(p) == v);
  Vec3 back = g.to_voxel(p);
  CHECK(back.x == doctest::Approx(3));
  CHECK(back.y == doctest::Approx(1));
  CHECK(back.z == doctest::Approx(6));
}

TEST_CASE("trilinear sampling: voxel centers, midpoints, and the outside") {
  VoxelGrid g(IVec3{4, 4, 4}, 1.0);
  g.at(1, 1, 1) = 8.0f;
  g.at(2, 1, 1) = 4.0f;
  CHECK(g.sample_trilinear({1, 1, 1}) == doctest::Approx(8.0));
  CHECK(g.sample_trilinear({1.5, 1, 1}) == doctest::Approx(6.0));
  CHECK(g.sample_trilinear({1.25, 1, 1}) == doctest::Approx(7.0));
  // Samples off the grid blend toward zero and vanish entirely outside.
  CHECK(g.sample_trilinear({-5, 1, 1}) == doctest::Approx(0.0));
  CHECK(g.sample_trilinear({1, 1, 9}) == doctest::Approx(0.0));
}

TEST_CASE("write_map then read_map preserves the payload bit-exactly") {
  VoxelGrid g = random_grid({7, 5, 3}, 42, -3.0f, 5.0f);
  g.data()[0] = 0.0f;
  g.data()[1] = -0.0f;
  g.data()[2] = 1e-30f;
  std::string path = temp_path("roundtrip.mrc");
  write_map(path, g);
  VoxelGrid r = read_map(path);
  CHECK(r.dims() == g.dims());
  CHECK(r.spacing() == doctest::Approx(g.spacing()));
  CHECK(bits_equal(r.data(), g.data()));
}

TEST_CASE("round trip keeps spacing and origin") {
  VoxelGrid g(IVec3{6, 4, 5}, 3.25, Vec3{-12.5, 8, 100});
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = float(i) * 0.25f;
  std::string path = temp_path("header.mrc");
  write_map(path, g);
  VoxelGrid r = read_map(path);
  CHECK(r.spacing() == doctest::Approx(3.25));
  CHECK(r.origin().x == doctest::Approx(-12.5));
  CHECK(r.origin().y == doctest::Approx(8));
  CHECK(r.origin().z == doctest::Approx(100));
}

TEST_CASE("reference map, float32 with canonical axis order") {
  VoxelGrid g = read_map(data_path("ref_mode2_xyz.mrc"));
  REQUIRE(g.dims() == IVec3{4, 3, 2});
  CHECK(g.spacing() == doctest::Approx(1.5));
  CHECK(g.origin().x == doctest::Approx(3.0));
  CHECK(g.origin().y == doctest::Approx(-4.5));
  CHECK(g.origin().z == doctest::Approx(6.0));
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 4; ++x)
        CHECK(g.at(x, y, z) == doctest::Approx(x + 10 * y + 100 * z - 2.5));
}

TEST_CASE("reference map, int16 with permuted axis order") {
  VoxelGrid g = read_map(data_path("ref_mode1_permuted.mrc"));
  REQUIRE(g.dims() == IVec3{4, 3, 2});
  CHECK(g.spacing() == doctest::Approx(2.0));
  CHECK(g.origin().x == doctest::Approx(1.0));
  CHECK(g.origin().y == doctest::Approx(2.0));
  CHECK(g.origin().z == doctest::Approx(3.0));
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 4; ++x)
        CHECK(g.at(x, y, z) == doctest::Approx(x + 10 * y + 100 * z - 5));
}

TEST_CASE("read_map rejects junk, truncation, and oversized volumes") {
  CHECK_THROWS_AS(read_map(temp_path("missing.mrc")), FormatError);

  std::string junk = temp_path("junk.mrc");
  std::ofstream(junk, std::ios::binary) << "this is not a density map";
  CHECK_THROWS_AS(read_map(junk), FormatError);

  std::string trunc = temp_path("trunc.mrc");
  {
    VoxelGrid g(IVec3{8, 8, 8}, 1.0, {}, 1.0f);
    write_map(trunc, g);
    std::filesystem::resize_file(trunc, 1024 + 100);
  }
  CHECK_THROWS_AS(read_map(trunc), FormatError);

  std::string small = temp_path("budget.mrc");
  write_map(small, VoxelGrid(IVec3{4, 4, 4}, 1.0));
  CHECK_THROWS_AS(read_map(small, 63), CapacityError);
  CHECK_NOTHROW(read_map(small, 64));
}

TEST_CASE("normalize_unit maps {2,4,6} to {0,0.5,1} and constants to zero") {
  VoxelGrid g(IVec3{3, 1, 1}, 1.0);
  g.at(0, 0, 0) = 2;
  g.at(1, 0, 0) = 4;
  g.at(2, 0, 0) = 6;
  VoxelGrid n = normalize_unit(g);
  CHECK(n.at(0, 0, 0) == doctest::Approx(0.0));
  CHECK(n.at(1, 0, 0) == doctest::Approx(0.5));
  CHECK(n.at(2, 0, 0) == doctest::Approx(1.0));

  VoxelGrid c(IVec3{4, 4, 4}, 1.0, {}, 7.5f);
  VoxelGrid nc = normalize_unit(c);
  for (float v : nc.data()) CHECK(v == 0.0f);
}

TEST_CASE("gaussian_blur conserves the mass of an interior impulse") {
  VoxelGrid g(IVec3{33, 33, 33}, 1.0);
  g.at(16, 16, 16) = 1.0f;
  VoxelGrid b = gaussian_blur(g, 4.0);
  double sum = std::accumulate(b.data().begin(), b.data().end(), 0.0);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("gaussian_blur of an impulse halves at the FWHM radius") {
  VoxelGrid g(IVec3{41, 41, 41}, 1.0);
  g.at(20, 20, 20) = 1.0f;
  double fwhm = 6.0;
  VoxelGrid b = gaussian_blur(g, fwhm);
  double peak = b.at(20, 20, 20);
  double half = b.sample_trilinear({20 + fwhm / 2, 20, 20});
  // The discrete kernel is a sampled Gaussian, so the ratio is near but not
  // exactly one half.
  CHECK(half / peak == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("gaussian_blur commutes with integer shifts away from the boundary") {
  IVec3 dims{24, 20, 18};
  VoxelGrid g(dims, 1.0);
  Rng rng(7);
  // Sparse content well inside the volume so the zero padding never matters.
  for (int t = 0; t < 30; ++t) {
    int x = 8 + int(rng.uniform() * 8), y = 7 + int(rng.uniform() * 6),
        z = 7 + int(rng.uniform() * 5);
    g.at(x, y, z) = float(rng.uniform());
  }
  IVec3 shift{2, -1, 1};
  VoxelGrid shifted(dims, 1.0);
  for (int z = 0; z < dims.z; ++z)
    for (int y = 0; y < dims.y; ++y)
      for (int x = 0; x < dims.x; ++x) {
        IVec3 src{x - shift.x, y - shift.y, z - shift.z};
        if (g.in_bounds(src)) shifted.at(x, y, z) = g.at(src);
      }
  VoxelGrid a = gaussian_blur(shifted, 3.0);
  VoxelGrid b = gaussian_blur(g, 3.0);
  double worst = 0;
  for (int z = 5; z < dims.z - 5; ++z)
    for (int y = 5; y < dims.y - 5; ++y)
      for (int x = 5; x < dims.x - 5; ++x) {
        IVec3 src{x - shift.x, y - shift.y, z - shift.z};
        worst = std::max(worst, std::abs(double(a.at(x, y, z)) - double(b.at(src))));
      }
  CHECK(worst <= 1e-6);
}

TEST_CASE("gaussian_blur matches the dense serial reference") {
  VoxelGrid g = random_grid({14, 12, 10}, 99);
  VoxelGrid fast = gaussian_blur(g, 3.5);
  VoxelGrid slow = gaussian_blur_serial(g, 3.5);
  CHECK(max_abs_diff(fast.data(), slow.data()) <= 1e-5);
}

TEST_CASE("gaussian_blur with non-positive width is the identity") {
  VoxelGrid g = random_grid({6, 5, 4}, 3);
  CHECK(bits_equal(gaussian_blur(g, 0.0).data(), g.data()));
  CHECK(bits_equal(gaussian_blur(g, -2.0).data(), g.data()));
}

TEST_CASE("percentile_nearest_rank on 1..100") {
  std::vector<float> v(100);
  for (int i = 0; i < 100; ++i) v[i] = float(100 - i);  // reverse order on purpose
  CHECK(percentile_nearest_rank(v, 0) == 1.0f);
  CHECK(percentile_nearest_rank(v, 1) == 1.0f);
  CHECK(percentile_nearest_rank(v, 50) == 50.0f);
  CHECK(percentile_nearest_rank(v, 95) == 95.0f);
  CHECK(percentile_nearest_rank(v, 100) == 100.0f);
  // 50.5% of 100 ranks -> ceil(50.5) = rank 51.
  CHECK(percentile_nearest_rank(v, 50.5) == 51.0f);
}

TEST_CASE("percentile_nearest_rank rejects empty input and bad percentiles") {
  std::vector<float> empty;
  CHECK_THROWS_AS(percentile_nearest_rank(empty, 50), ArgError);
  std::vector<float> one{3.0f};
  CHECK_THROWS_AS(percentile_nearest_rank(one, -1), ArgError);
  CHECK_THROWS_AS(percentile_nearest_rank(one, 101), ArgError);
}

TEST_CASE("grid_stats on a known sample") {
  VoxelGrid g(IVec3{4, 1, 1}, 1.0);
  g.at(0, 0, 0) = 1;
  g.at(1, 0, 0) = 2;
  g.at(2, 0, 0) = 3;
  g.at(3, 0, 0) = 6;
  GridStats s = grid_stats(g, {50});
  CHECK(s.min == doctest::Approx(1));
  CHECK(s.max == doctest::Approx(6));
  CHECK(s.mean == doctest::Approx(3.0));
  CHECK(s.sd == doctest::Approx(std::sqrt((4 + 1 + 0 + 9) / 4.0)));
  REQUIRE(s.percentiles.size() == 1);
  CHECK(s.percentiles[0].second == 2.0f);
}

TEST_SUITE_END();
