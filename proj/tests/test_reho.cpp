#include "test_util.hpp"

#include "twoscale/reho.hpp"
#include "twoscale/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

using namespace twoscale;
using namespace twoscale::reho;

namespace {

std::vector<double> noise(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

VoxelBlock cube(std::size_t side, std::size_t n) {
  VoxelBlock b;
  b.dims = {side, side, side};
  b.series.assign(side * side * side, std::vector<double>(n, 0.0));
  return b;
}

}  // namespace

TEST_CASE("mid ranks") {
  CHECK(rank_transform(std::vector<double>{3.0, 1.0, 2.0}) == std::vector<double>{3, 1, 2});
  CHECK(rank_transform(std::vector<double>{5.0, 5.0, 1.0}) == std::vector<double>{2.5, 2.5, 1});
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(40);
    std::vector<double> v(n);
    // Coarse values force frequent ties.
    for (auto& x : v) x = std::floor(rng.uniform() * 6.0);
    const auto r = rank_transform(v);
    CHECK(std::accumulate(r.begin(), r.end(), 0.0) == static_cast<double>(n * (n + 1)) / 2.0);
  }
}

TEST_CASE("Kendall W") {
  SUBCASE("identical rankings") {
    const std::vector<std::vector<double>> rows(27, std::vector<double>{1, 2, 3, 4, 5});
    CHECK(kendall_w(rows) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("hand-evaluated three raters") {
    // Rank sums 5, 6, 7 around mean 6: S = 2; W = 12*2 / (9*24) = 1/9.
    const std::vector<std::vector<double>> rows = {{1, 2, 3}, {1, 2, 3}, {3, 2, 1}};
    CHECK(kendall_w(rows) == doctest::Approx(1.0 / 9.0).epsilon(1e-15));
  }
  SUBCASE("tie correction") {
    // Rows of ranks with a tie group of 2 in each: T = 2 * (8 - 2) = 12.
    const std::vector<std::vector<double>> rows = {{1.5, 1.5, 3}, {1.5, 1.5, 3}};
    // R = 3, 3, 6; mean 4; S = 1 + 1 + 4 = 6; W = 72 / (4*24 - 24) = 1.
    CHECK(kendall_w(rows) == doctest::Approx(1.0));
  }
  SUBCASE("fully tied rows are degenerate") {
    const std::vector<std::vector<double>> rows(3, std::vector<double>{2, 2, 2});
    CHECK_ERROR_CODE(kendall_w(rows), ErrorCode::DegenerateInput);
  }
  SUBCASE("random permutations stay below 0.15") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<std::vector<double>> rows;
      for (int m = 0; m < 27; ++m) rows.push_back(rank_transform(noise(rng, 190)));
      const double w = kendall_w(rows);
      CHECK(w >= 0.0);
      CHECK(w < 0.15);
    }
  }
  SUBCASE("monotone transform invariance is exact") {
    Rng rng(9);
    std::vector<std::vector<double>> a, b;
    for (int m = 0; m < 7; ++m) {
      auto x = noise(rng, 50);
      a.push_back(rank_transform(x));
      for (auto& v : x) v = std::exp(3.0 * v) + 2.0;
      b.push_back(rank_transform(x));
    }
    CHECK(kendall_w(a) == kendall_w(b));
  }
}

TEST_CASE("ReHo map") {
  SUBCASE("single voxel is undefined") {
    VoxelBlock b = cube(1, 10);
    std::iota(b.series[0].begin(), b.series[0].end(), 0.0);
    const auto map = reho_map(b);
    CHECK_FALSE(map.defined[0]);
    CHECK(map.w[0] == 0.0);
    CHECK_ERROR_CODE(select_representative(b, map), ErrorCode::NoDefinedReho);
  }
  SUBCASE("shared increasing series gives W = 1") {
    VoxelBlock b = cube(3, 12);
    for (auto& s : b.series) std::iota(s.begin(), s.end(), 1.0);
    const auto map = reho_map(b);
    CHECK(map.defined[b.index(1, 1, 1)]);
    CHECK(map.w[b.index(1, 1, 1)] == doctest::Approx(1.0));
    const auto rep = select_representative(b, map);
    CHECK(rep.values == b.series[0]);
  }
  SUBCASE("independent noise stays low and within [0, 1]") {
    Rng rng(21);
    VoxelBlock b = cube(3, 190);
    for (auto& s : b.series) s = noise(rng, 190);
    const auto map = reho_map(b);
    CHECK(map.w[b.index(1, 1, 1)] < 0.15);
    for (double w : map.w) {
      CHECK(w >= 0.0);
      CHECK(w <= 1.0);
    }
  }
  SUBCASE("neighbours-only clusters differ from the default") {
    Rng rng(3);
    VoxelBlock b = cube(3, 40);
    for (auto& s : b.series) s = noise(rng, 40);
    const auto with = reho_map(b);
    const auto without = reho_map(b, RehoOptions{false});
    CHECK(with.w[b.index(1, 1, 1)] != without.w[b.index(1, 1, 1)]);
  }
}

TEST_CASE("representative selection") {
  SUBCASE("two voxels, one above the mean") {
    VoxelBlock b;
    b.dims = {2, 1, 1};
    b.series = {{1, 2, 3}, {4, 5, 6}};
    RehoMap map;
    map.dims = b.dims;
    map.w = {0.9, 0.1};
    map.defined = {true, true};
    CHECK(select_representative(b, map).values == std::vector<double>{1, 2, 3});
  }
  SUBCASE("sine voxels beat noise voxels") {
    Rng rng(8);
    const std::size_t n = 120;
    VoxelBlock b = cube(3, n);
    std::vector<bool> is_sine(27, false);
    for (std::size_t v = 0; v < 27; ++v) {
      is_sine[v] = v % 2 == 0;  // 14 sine voxels
      for (std::size_t t = 0; t < n; ++t) {
        b.series[v][t] = is_sine[v] ? std::sin(2 * M_PI * static_cast<double>(t) / 20.0) + 0.1 * rng.normal()
                                    : rng.normal();
      }
    }
    const auto map = reho_map(b);
    double sum[2] = {0, 0};
    double count[2] = {0, 0};
    for (std::size_t v = 0; v < 27; ++v) {
      REQUIRE(map.defined[v]);
      sum[is_sine[v]] += map.w[v];
      count[is_sine[v]] += 1;
    }
    CHECK(sum[1] / count[1] > sum[0] / count[0]);
  }
  SUBCASE("common offset shifts the representative exactly") {
    Rng rng(4);
    VoxelBlock b = cube(3, 30);
    for (auto& s : b.series) {
      for (auto& x : s) x = static_cast<double>(rng.below(64));  // integers keep sums exact
    }
    VoxelBlock shifted = b;
    for (auto& s : shifted.series) {
      for (auto& x : s) x += 256.0;
    }
    const auto a = select_representative(b, reho_map(b));
    const auto c = select_representative(shifted, reho_map(shifted));
    REQUIRE(a.values.size() == 30);
    for (std::size_t t = 0; t < 30; ++t) CHECK(c.values[t] == doctest::Approx(a.values[t] + 256.0).epsilon(1e-14));
  }
}

TEST_CASE("voxel CSV round trip") {
  TempDir dir;
  {
    std::ofstream out(dir / "block.csv");
    out << "x,y,z,t0,t1,t2,t3\n";
    for (int z = 0; z < 2; ++z)
      for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) out << x << ',' << y << ',' << z << ",1," << x + 2 << ",3," << y + 4 << '\n';
  }
  const auto block = read_voxel_block(dir / "block.csv");
  CHECK(block.dims == std::array<std::size_t, 3>{2, 2, 2});
  CHECK(block.series[block.index(1, 0, 1)] == std::vector<double>{1, 3, 3, 4});
  const auto map = reho_map(block);
  write_reho_map(dir / "map.csv", map);
  std::ifstream in(dir / "map.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "x,y,z,w,defined");
}
