#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "cimllm/error.hpp"
#include "cimllm/voxel_ops.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace cimllm;
using voxel::Connectivity;

TEST_CASE("squared EDT matches brute force bit for bit") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> sp(0.4, 3.0);
  std::uniform_int_distribution<std::size_t> dim(1, 9);
  for (int trial = 0; trial < 60; ++trial) {
    const auto g = fixture::grid({dim(rng), dim(rng), dim(rng)}, {sp(rng), sp(rng), sp(rng)});
    auto m = fixture::random_mask(g, rng, trial % 3 == 0 ? 0.02 : 0.2);
    if (m.empty()) m.set(0);
    const auto got = voxel::squared_edt(m);
    const auto want = oracle::squared_edt(m);
    REQUIRE(got.size() == want.size());
    for (std::size_t v = 0; v < got.size(); ++v) {
      CAPTURE(trial);
      CAPTURE(v);
      REQUIRE(got[v] == want[v]);
    }
  }
}

TEST_CASE("EDT edge cases") {
  const auto g = fixture::grid({4, 3, 2}, {2.0, 1.0, 0.5});
  CHECK_THROWS_AS(voxel::squared_edt(BinaryMask(g)), Error);

  BinaryMask one(g);
  one.set(0, 0, 0);
  const auto d = voxel::edt(one);
  CHECK(d[0] == 0.0);
  CHECK(d[g.index(3, 0, 0)] == doctest::Approx(6.0));
  CHECK(d[g.index(0, 2, 1)] == doctest::Approx(std::sqrt(4.0 + 0.25)));

  BinaryMask full(g);
  for (std::size_t v = 0; v < full.size(); ++v) full.set(v);
  for (double x : voxel::squared_edt(full)) CHECK(x == 0.0);
}

TEST_CASE("component labelling matches flood fill") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const auto g = fixture::grid({12, 10, 8});
    const auto m = fixture::random_mask(g, rng, 0.15 + 0.01 * trial);
    for (auto conn : {Connectivity::Six, Connectivity::TwentySix}) {
      auto want = oracle::component_sizes(m, static_cast<int>(conn));
      std::stable_sort(want.begin(), want.end(), std::greater<>());
      const auto lab = voxel::label_components(m, conn);
      CHECK(lab.sizes == want);
      for (std::size_t min : {1u, 2u, 5u}) {
        CHECK(voxel::count_components(m, conn, min) == oracle::component_count(m, static_cast<int>(conn), min));
      }
      const auto comps = voxel::connected_components(m, conn, 3);
      CHECK(comps.size() == oracle::component_count(m, static_cast<int>(conn), 3));
      std::size_t total = 0;
      for (const auto& c : comps) {
        CHECK(oracle::component_sizes(c, static_cast<int>(conn)).size() == 1);
        total += c.count();
      }
      std::size_t kept = 0;
      for (auto s : want) kept += s >= 3 ? s : 0;
      CHECK(total == kept);
    }
  }
}

TEST_CASE("diagonal neighbours join only under 26-connectivity") {
  const auto g = fixture::grid({3, 3, 3});
  BinaryMask m(g);
  m.set(0, 0, 0);
  m.set(1, 1, 1);
  m.set(2, 2, 2);
  CHECK(voxel::count_components(m, Connectivity::Six, 1) == 3);
  CHECK(voxel::count_components(m, Connectivity::TwentySix, 1) == 1);
  CHECK(voxel::count_components(BinaryMask(g), Connectivity::Six, 1) == 0);
}

TEST_CASE("boundary matches neighbour scan") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = fixture::grid({9, 8, 7});
    const auto m = fixture::random_mask(g, rng, 0.6);
    CHECK(voxel::boundary(m, Connectivity::Six) == oracle::boundary(m, 6));
    CHECK(voxel::boundary(m, Connectivity::TwentySix) == oracle::boundary(m, 26));
  }
  const auto g = fixture::grid({5, 5, 5});
  const auto cube = fixture::box(g, {1, 1, 1}, {4, 4, 4});
  CHECK(voxel::boundary(cube).count() == 26);
}

TEST_CASE("surface area and sphericity") {
  const auto g = fixture::grid({4, 4, 4}, {1.0, 2.0, 3.0});
  BinaryMask one(g);
  one.set(1, 1, 1);
  CHECK(voxel::surface_area(one) == doctest::Approx(2 * (2.0 + 3.0 + 6.0)));
  CHECK_THROWS_AS(voxel::surface_area(BinaryMask(g)), Error);
  CHECK_THROWS_AS(voxel::sphericity(BinaryMask(g)), Error);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = fixture::random_mask(g, rng, 0.4);
    if (m.empty()) continue;
    CHECK(voxel::surface_area(m) == doctest::Approx(oracle::face_area(m)));
    CHECK(voxel::sphericity(m) > 0.0);
  }

  const auto unit = fixture::grid({3, 3, 3});
  BinaryMask v(unit);
  v.set(1, 1, 1);
  CHECK(voxel::sphericity(v) ==
        doctest::Approx(std::cbrt(std::numbers::pi) * std::pow(6.0, 2.0 / 3.0) / 6.0).epsilon(1e-12));

  // face counting inflates a sphere's area by the mean of |nx|+|ny|+|nz|, 3/2
  const auto big = fixture::grid({48, 48, 48});
  const double ball = voxel::sphericity(fixture::ball(big, {24, 24, 24}, 20.0));
  CHECK(ball == doctest::Approx(2.0 / 3.0).epsilon(0.01));
  CHECK(voxel::sphericity(fixture::ball(big, {25, 23, 26}, 20.0)) == ball);
}

TEST_CASE("gradient magnitude") {
  const auto g = fixture::grid({5, 4, 3}, {2.0, 1.0, 1.0});
  std::vector<double> v(g.voxel_count());
  for (std::size_t f = 0; f < v.size(); ++f) v[f] = 3.0 * static_cast<double>(g.coords(f)[0]);
  const VoxelGrid ramp(g, v);
  // 3 per voxel over 2 mm
  for (std::size_t f = 0; f < v.size(); ++f) {
    const auto c = g.coords(f);
    CHECK(voxel::gradient_magnitude_at(ramp, c[0], c[1], c[2]) == doctest::Approx(1.5));
  }
  CHECK(voxel::gradient_magnitude(ramp).geometry() == g);
  const VoxelGrid flat = voxel::gradient_magnitude(fixture::constant(g, 7.0));
  for (double x : flat.data()) CHECK(x == 0.0);
}

TEST_CASE("reachable from border") {
  const auto g = fixture::grid({7, 7, 7});
  const auto shell = fixture::box(g, {1, 1, 1}, {6, 6, 6}).minus(fixture::box(g, {2, 2, 2}, {5, 5, 5}));
  const auto passable = shell.complement();
  const auto reach = voxel::reachable_from_border(passable);
  CHECK(!reach.at(3, 3, 3));
  CHECK(reach.at(0, 0, 0));
  CHECK(reach.count() == 343 - 125);

  auto holed = shell;
  holed.set(3, 1, 3, false);
  CHECK(voxel::reachable_from_border(holed.complement()).at(3, 3, 3));
}

TEST_CASE("crop keeps world coordinates") {
  const auto g = fixture::grid({6, 5, 4}, {1.0, 2.0, 3.0}, {10, 20, 30});
  auto m = fixture::box(g, {2, 1, 1}, {4, 3, 2});
  const Box bb = m.bounding_box(1);
  CHECK(bb.lo == Index3{1, 0, 0});
  CHECK(bb.hi == Index3{5, 4, 3});
  const auto c = m.crop(bb);
  CHECK(c.count() == m.count());
  CHECK(c.geometry().world(1, 1, 1) == g.world(2, 1, 1));
  CHECK(BinaryMask(g).bounding_box().empty());
}
