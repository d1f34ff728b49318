#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cimllm/error.hpp"
#include "cimllm/features.hpp"
#include "cimllm/synthetic.hpp"
#include "cimllm/voxel_ops.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/segmentations.hpp"

using namespace cimllm;

namespace {

SegmentationMap paint(const Geometry& g, const std::vector<std::pair<BinaryMask, TumorLabel>>& layers) {
  std::vector<std::uint8_t> labels(g.voxel_count(), 0);
  for (const auto& [m, l] : layers) {
    for (std::size_t v = 0; v < labels.size(); ++v) {
      if (m[v]) labels[v] = static_cast<std::uint8_t>(l);
    }
  }
  return SegmentationMap(g, labels);
}

VoxelGrid fill(const Geometry& g, double background, const std::vector<std::pair<BinaryMask, double>>& layers) {
  std::vector<double> v(g.voxel_count(), background);
  for (const auto& [m, x] : layers) {
    for (std::size_t f = 0; f < v.size(); ++f) {
      if (m[f]) v[f] = x;
    }
  }
  return VoxelGrid(g, v);
}

void check_same(const std::optional<double>& a, const std::optional<double>& b) {
  REQUIRE(a.has_value() == b.has_value());
  if (a) CHECK(*a == doctest::Approx(*b).epsilon(1e-9));
}

}  // namespace

TEST_CASE("volumetric arithmetic") {
  const auto g = fixture::grid({40, 20, 10});
  const auto net = fixture::box(g, {0, 0, 0}, {10, 10, 10});
  const auto et = fixture::box(g, {10, 0, 0}, {20, 10, 10});
  const auto ed = fixture::box(g, {20, 0, 0}, {40, 10, 10});
  const auto seg = paint(g, {{net, TumorLabel::NonEnhancing}, {et, TumorLabel::Enhancing}, {ed, TumorLabel::Edema}});
  const auto f = extract_volumetrics(fixture::seg_only(seg));
  CHECK(f.vol_wt_ml == doctest::Approx(4.0));
  CHECK(f.vol_net_ml == doctest::Approx(1.0));
  CHECK(*f.frac_et_of_tc == doctest::Approx(0.5));
  CHECK(*f.edema_to_tc_ratio == doctest::Approx(1.0));
  CHECK(*f.edema_to_net_ratio == doctest::Approx(2.0));

  SUBCASE("anisotropic voxels scale volumes") {
    const auto g2 = fixture::grid({40, 20, 10}, {2.0, 1.0, 0.5});
    const auto seg2 = SegmentationMap(g2, std::vector<std::uint8_t>(seg.labels().begin(), seg.labels().end()));
    CHECK(extract_volumetrics(fixture::seg_only(seg2)).vol_wt_ml == doctest::Approx(4.0));
  }
}

TEST_CASE("edema shell three voxels thick around a cube") {
  const auto g = fixture::grid({20, 20, 20});
  const auto tc = fixture::box(g, {6, 6, 6}, {14, 14, 14});
  const auto ed = fixture::box(g, {3, 3, 3}, {17, 17, 17}).minus(tc);
  const auto seg = paint(g, {{ed, TumorLabel::Edema}, {tc, TumorLabel::NonEnhancing}});
  const auto f = extract_volumetrics(fixture::seg_only(seg));

  const auto d2 = oracle::squared_edt(oracle::boundary(tc, 6));
  std::vector<double> d;
  for (std::size_t v = 0; v < ed.size(); ++v) {
    if (ed[v]) d.push_back(std::sqrt(d2[v]));
  }
  std::sort(d.begin(), d.end());
  const double median = d.size() % 2 ? d[d.size() / 2] : 0.5 * (d[d.size() / 2 - 1] + d[d.size() / 2]);
  const double p95 = d[static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(d.size()))) - 1];
  CHECK(*f.edema_extent_median_mm == doctest::Approx(median));
  CHECK(*f.edema_extent_p95_mm == doctest::Approx(p95));
  // faces hold 1,2,3 mm; edge and corner regions push the median to sqrt(8)
  CHECK(*f.edema_extent_median_mm == doctest::Approx(std::sqrt(8.0)));
  CHECK(*f.edema_extent_p95_mm <= 3.0 * std::sqrt(3.0) + 1e-12);
}

TEST_CASE("volumetric degenerate cases") {
  const auto g = fixture::grid({10, 10, 10});
  SUBCASE("no edema") {
    const auto seg = paint(g, {{fixture::box(g, {2, 2, 2}, {5, 5, 5}), TumorLabel::NonEnhancing}});
    const auto f = extract_volumetrics(fixture::seg_only(seg));
    CHECK(f.vol_ed_ml == 0.0);
    CHECK(f.edema_to_net_ratio == 0.0);
    CHECK(f.edema_to_tc_ratio == 0.0);
    CHECK(!f.edema_extent_median_mm);
    CHECK(!f.edema_extent_p95_mm);
  }
  SUBCASE("edema only") {
    const auto seg = paint(g, {{fixture::box(g, {2, 2, 2}, {5, 5, 5}), TumorLabel::Edema}});
    const auto f = extract_volumetrics(fixture::seg_only(seg));
    CHECK(!f.frac_et_of_tc);
    CHECK(!f.edema_to_tc_ratio);
    CHECK(!f.edema_to_net_ratio);
    CHECK(!f.edema_extent_median_mm);
  }
  SUBCASE("empty whole tumor") {
    const SegmentationMap seg(g, std::vector<std::uint8_t>(1000, 0));
    CHECK_THROWS_AS(extract_volumetrics(fixture::seg_only(seg)), Error);
    const auto all = extract_features(fixture::seg_only(seg), AtlasConfig{});
    CHECK(!all.volumetrics);
    CHECK(all.null_reasons.at("volumetric_measures") == "EmptyWholeTumor");
    CHECK(all.null_reasons.at("location") == "NoAtlas");
  }
}

TEST_CASE("volumetric fuzz invariants") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    CAPTURE(trial);
    const auto g = fixture::grid({16, 14, 12}, {1.0, 1.2, 0.9});
    const auto seg = fixture::random_segmentation(g, rng);
    const auto f = extract_volumetrics(fixture::seg_only(seg));
    CHECK(f.vol_wt_ml == f.vol_net_ml + f.vol_et_ml + f.vol_ed_ml);
    for (const auto& x : {f.frac_net_of_wt, f.frac_et_of_wt, f.frac_et_of_tc}) {
      if (x) CHECK((*x >= 0.0 && *x <= 1.0));
    }
    if (f.edema_extent_median_mm) CHECK(*f.edema_extent_p95_mm >= *f.edema_extent_median_mm);

    const auto swapped = fixture::seg_only(fixture::swap_net_et(seg));
    const auto s = extract_volumetrics(swapped);
    CHECK(s.vol_net_ml == f.vol_et_ml);
    CHECK(s.vol_et_ml == f.vol_net_ml);
    if (f.frac_et_of_tc) CHECK(*s.frac_et_of_tc == doctest::Approx(1.0 - *f.frac_et_of_tc));
    const auto m = extract_morphology(fixture::seg_only(seg));
    const auto ms = extract_morphology(swapped);
    CHECK(ms.et_component_count == m.net_component_count);
    CHECK(ms.net_component_count == m.et_component_count);
  }
}

TEST_CASE("location overlaps and proximity") {
  const auto g = fixture::grid({40, 20, 20}, {1, 1, 1}, {-20, -10, -10});
  // region 1: x in [0, 20), tumor fills half of it
  const auto region = fixture::box(g, {0, 0, 0}, {20, 20, 20});
  const auto tc = fixture::box(g, {0, 0, 0}, {20, 20, 10});
  AtlasSpec spec;
  spec.name = "atl";
  spec.regions = {{1, "Region One"}, {2, "Frontal Left"}, {3, "Frontal Right"}, {4, "Motor"}};
  SubjectBundle b = fixture::seg_only(paint(g, {{tc, TumorLabel::NonEnhancing}}));
  b.atlases["atl"] = std::make_shared<const VoxelGrid>(fill(g, 0.0, {{region, 1.0}}));
  const AtlasConfig cfg{"1", {spec}};
  const auto f = extract_location(b, cfg);
  const auto& r = f.tumor_location.at("atl").at("Region One");
  CHECK(r.tumor_in_region == doctest::Approx(1.0));
  CHECK(r.regional_occupancy == doctest::Approx(0.5));
  CHECK(!f.deep_gray_involved);
  CHECK(!f.bilateral_frontal);
  CHECK(!f.edema_location);

  SUBCASE("bilateral frontal") {
    const auto straddle = fixture::box(g, {15, 5, 5}, {25, 10, 10});
    AtlasSpec s2 = spec;
    s2.frontal_left = {2};
    s2.frontal_right = {3};
    SubjectBundle b2 = fixture::seg_only(paint(g, {{straddle, TumorLabel::Enhancing}}));
    b2.atlases["atl"] = std::make_shared<const VoxelGrid>(
        fill(g, 0.0, {{fixture::box(g, {0, 0, 0}, {20, 20, 20}), 2.0}, {fixture::box(g, {20, 0, 0}, {40, 20, 20}), 3.0}}));
    CHECK(*extract_location(b2, AtlasConfig{"1", {s2}}).bilateral_frontal);

    // one-sided tumour
    b2.segmentation = paint(g, {{fixture::box(g, {2, 5, 5}, {12, 10, 10}), TumorLabel::Enhancing}});
    CHECK(!*extract_location(b2, AtlasConfig{"1", {s2}}).bilateral_frontal);

    // unlateralised frontal label split by world x
    AtlasSpec s3 = spec;
    s3.frontal = {1};
    SubjectBundle b3 = fixture::seg_only(paint(g, {{straddle, TumorLabel::Enhancing}}));
    b3.atlases["atl"] = std::make_shared<const VoxelGrid>(fill(g, 1.0, {}));
    CHECK(*extract_location(b3, AtlasConfig{"1", {s3}}).bilateral_frontal);
  }

  SUBCASE("eloquent proximity from known gaps") {
    const auto g2 = fixture::grid({60, 20, 20});
    const auto cube = fixture::box(g2, {10, 6, 6}, {16, 12, 12});
    AtlasSpec s;
    s.name = "atl";
    s.regions = {{1, "A"}, {2, "B"}, {3, "C"}, {4, "D"}};
    s.eloquent = {1, 2, 3};
    s.deep_gray = {4};
    // cube boundary at x = 15; boxes start at x = 19, 22, 27
    const auto atlas = fill(g2, 0.0,
                            {{fixture::box(g2, {19, 6, 6}, {20, 12, 12}), 1.0},
                             {fixture::box(g2, {22, 6, 6}, {24, 12, 12}), 2.0},
                             {fixture::box(g2, {27, 6, 6}, {30, 12, 12}), 3.0},
                             {fixture::box(g2, {0, 0, 0}, {12, 20, 20}), 4.0}});
    SubjectBundle b4 = fixture::seg_only(paint(g2, {{cube, TumorLabel::NonEnhancing}}));
    b4.atlases["atl"] = std::make_shared<const VoxelGrid>(atlas);
    const auto loc = extract_location(b4, AtlasConfig{"1", {s}});
    REQUIRE(loc.eloquent_proximity.size() == 3);
    CHECK(loc.eloquent_proximity[0] == ProximityEntry{"A", 4.0});
    CHECK(loc.eloquent_proximity[1] == ProximityEntry{"B", 7.0});
    CHECK(loc.eloquent_proximity[2] == ProximityEntry{"C", 12.0});
    CHECK(*loc.deep_gray_involved);
  }

  SUBCASE("no atlas and empty core") {
    SubjectBundle none = b;
    none.atlases.clear();
    CHECK_THROWS_AS(extract_location(none, cfg), Error);
    SubjectBundle empty_tc = b;
    empty_tc.segmentation = paint(g, {{fixture::box(g, {0, 0, 0}, {3, 3, 3}), TumorLabel::Edema}});
    const auto all = extract_features(empty_tc, cfg);
    CHECK(all.null_reasons.at("location") == "EmptyTumorCore");
  }
}

TEST_CASE("T2-FLAIR mismatch fixtures") {
  const auto g = fixture::grid({24, 24, 24}, {1, 1, 1}, {-12, -12, -12});
  const auto net = fixture::ball(g, {8, 12, 12}, 4.0);
  const auto rim = voxel::boundary(fixture::ball(g, {8, 12, 12}, 7.0)).minus(net) |
                   fixture::ball(g, {8, 12, 12}, 6.5).minus(net);
  const auto cnwm = fixture::box(g, {16, 4, 4}, {22, 20, 20});
  SubjectBundle b = fixture::seg_only(paint(g, {{net, TumorLabel::NonEnhancing}}));
  b.cnwm_mask = cnwm;

  SUBCASE("identical T2 and FLAIR") {
    const auto img = fill(g, 100.0, {{net, 140.0}});
    b.t2 = img;
    b.flair = img;
    const auto f = extract_mismatch(b);
    CHECK(*f.t2_flair_mismatch_ratio == doctest::Approx(1.0));
    CHECK(!*f.flair_suppression);
    CHECK(f.cnwm_source == CnwmSource::ProvidedMask);
  }
  SUBCASE("textbook mismatch") {
    b.t2 = fill(g, 100.0, {{net, 200.0}});
    b.flair = fill(g, 100.0, {{rim, 160.0}, {net, 80.0}});
    const auto f = extract_mismatch(b);
    CHECK(*f.t2_flair_mismatch_ratio == doctest::Approx(2.5));
    CHECK(*f.flair_suppression);
    CHECK(*f.flair_rim_hyperintensity);
  }
  SUBCASE("FLAIR absent") {
    b.t2 = fill(g, 100.0, {{net, 200.0}});
    const auto f = extract_mismatch(b);
    CHECK(!f.t2_flair_mismatch_ratio);
    CHECK(!f.flair_suppression);
    CHECK(!f.flair_rim_hyperintensity);
  }
  SUBCASE("tiny NET") {
    const auto tiny = fixture::ball(g, {8, 12, 12}, 1.5);
    b.segmentation = paint(g, {{tiny, TumorLabel::NonEnhancing}});
    b.t2 = fill(g, 100.0, {{tiny, 200.0}});
    b.flair = fill(g, 100.0, {{tiny, 80.0}});
    CHECK(!extract_mismatch(b).t2_flair_mismatch_ratio);
  }
  SUBCASE("mirror fallback") {
    b.cnwm_mask.reset();
    b.t2 = fill(g, 100.0, {{net, 200.0}});
    b.flair = fill(g, 100.0, {{rim, 160.0}, {net, 80.0}});
    const auto f = extract_mismatch(b);
    CHECK(f.cnwm_source == CnwmSource::MirrorFallback);
    CHECK(*f.t2_flair_mismatch_ratio == doctest::Approx(2.5));
  }
}

TEST_CASE("mass effect") {
  const auto g = fixture::grid({40, 30, 30}, {1, 1, 1}, {-20, -15, -15});
  SUBCASE("ventricular asymmetry") {
    BinaryMask left(g), right(g);
    for (std::size_t v = 0; v < 8000; ++v) left.set(v);
    for (std::size_t v = 8000; v < 20000; ++v) right.set(v);
    SubjectBundle b = fixture::seg_only(paint(g, {{fixture::box(g, {1, 1, 1}, {4, 4, 4}), TumorLabel::Edema}}));
    b.ventricle_masks = std::make_pair(left, right);
    CHECK(*extract_mass_effect(b).ventricular_asymmetry_index == doctest::Approx(0.2));
    b.ventricle_masks = std::make_pair(left, left);
    CHECK(*extract_mass_effect(b).ventricular_asymmetry_index == 0.0);
    b.ventricle_masks.reset();
    CHECK(!extract_mass_effect(b).ventricular_asymmetry_index);
  }
  SUBCASE("midline crossing") {
    // world x in [5, 30) is voxel x in [25, 40)
    const auto one_sided = fixture::box(g, {25, 5, 5}, {40, 15, 15});
    const auto crossing = fixture::box(g, {10, 5, 5}, {30, 15, 15});
    auto f = extract_mass_effect(fixture::seg_only(paint(g, {{one_sided, TumorLabel::NonEnhancing}})));
    CHECK(!*f.tc_crosses_midline);
    CHECK(!*f.ed_crosses_midline);
    f = extract_mass_effect(
        fixture::seg_only(paint(g, {{crossing, TumorLabel::Edema}, {one_sided, TumorLabel::Enhancing}})));
    CHECK(!*f.tc_crosses_midline);
    CHECK(*f.ed_crosses_midline);
  }
}

TEST_CASE("morphology fixtures") {
  const auto g = fixture::grid({24, 24, 24});
  const Vec3 c{12, 12, 12};

  SUBCASE("enhancing shell around a necrotic core") {
    const auto core = fixture::ball(g, c, 4.0);
    const auto shell = fixture::ball(g, c, 7.0).minus(core);
    const auto f = extract_morphology(
        fixture::seg_only(paint(g, {{shell, TumorLabel::Enhancing}, {core, TumorLabel::NonEnhancing}})));
    const double n_tc = static_cast<double>(core.count() + shell.count());
    CHECK(*f.tc_hollowness == doctest::Approx(static_cast<double>(core.count()) / n_tc));
    CHECK(*f.rim_core_adjacency == doctest::Approx(1.0));
    std::size_t lonely = 0;
    for (std::size_t v = 0; v < shell.size(); ++v) {
      if (!shell[v]) continue;
      const auto x = g.coords(v);
      bool touches = false;
      for (const auto& o : oracle::offsets(6)) {
        touches = touches || core.at(x[0] + o[0], x[1] + o[1], x[2] + o[2]);
      }
      lonely += touches ? 0 : 1;
    }
    CHECK(*f.non_rim_enhancement_fraction ==
          doctest::Approx(static_cast<double>(lonely) / static_cast<double>(shell.count())));
    CHECK(*f.et_component_count == 1);
    CHECK(*f.net_component_count == 1);
  }
  SUBCASE("solid enhancing ball") {
    const auto ball = fixture::ball(g, c, 6.0);
    const auto f = extract_morphology(fixture::seg_only(paint(g, {{ball, TumorLabel::Enhancing}})));
    CHECK(*f.tc_hollowness == 0.0);
    CHECK(!f.rim_core_adjacency);
    CHECK(*f.non_rim_enhancement_fraction == 1.0);
    CHECK(*f.net_component_count == 0);
    CHECK(!f.boundary_sharpness_wt);
    CHECK(!f.transition_zone_thickness_mm);
  }
  SUBCASE("one-voxel plate") {
    const auto plate = fixture::box(g, {4, 4, 10}, {20, 20, 11});
    const auto f = extract_morphology(fixture::seg_only(paint(g, {{plate, TumorLabel::Enhancing}})));
    CHECK(*f.enhancing_rim_thickness_mm == doctest::Approx(1.0));
  }
  SUBCASE("hollowness ignores a leaky shell") {
    const auto core = fixture::box(g, {8, 8, 8}, {16, 16, 16});
    auto shell = fixture::box(g, {7, 7, 7}, {17, 17, 17}).minus(core);
    shell.set(7, 12, 12, false);
    const auto f = extract_morphology(
        fixture::seg_only(paint(g, {{shell, TumorLabel::Enhancing}, {core, TumorLabel::NonEnhancing}})));
    CHECK(*f.tc_hollowness == 0.0);
  }
  SUBCASE("small components are not counted") {
    auto et = fixture::box(g, {2, 2, 2}, {6, 6, 6});
    et.set(20, 20, 20);
    const auto f = extract_morphology(fixture::seg_only(paint(g, {{et, TumorLabel::Enhancing}})));
    CHECK(*f.et_component_count == 1);
  }
}

TEST_CASE("synthetic subjects: full battery, determinism, translation") {
  SyntheticSpec spec;
  spec.dims = {48, 48, 40};
  spec.with_cnwm_mask = true;
  const auto cfg = synthetic_atlas_config();

  for (auto idh : {IdhStatus::Mutant, IdhStatus::Wildtype}) {
    spec.idh = idh;
    spec.subtype = idh == IdhStatus::Mutant ? Subtype::Oligodendroglioma : Subtype::Glioblastoma;
    const SubjectBundle b = make_synthetic_subject(spec);
    const auto f = extract_features(b, cfg);
    CHECK(f.null_reasons.empty());
    CHECK(f == extract_features(b, cfg));
    REQUIRE(f.morphology);
    CHECK(f.morphology->transition_zone_thickness_mm);
    CHECK(f.morphology->boundary_sharpness_wt);
    CHECK(f.mass_effect->ventricular_asymmetry_index);
    if (idh == IdhStatus::Mutant) {
      CHECK(*f.morphology->et_component_count == 0);
      CHECK(*f.mismatch->flair_suppression);
    } else {
      CHECK(*f.morphology->et_component_count >= 1);
      CHECK(!*f.mismatch->flair_suppression);
    }

    // shift every grid by (3, 2, 1) voxels inside the same field of view
    auto shift = [&](const auto& in, auto make) {
      const auto& gg = in.geometry();
      using T = std::decay_t<decltype(in[0])>;
      std::vector<T> out(gg.voxel_count(), T{});
      for (std::size_t v = 0; v < out.size(); ++v) {
        const auto x = gg.coords(v);
        if (x[0] < 3 || x[1] < 2 || x[2] < 1) continue;
        out[v] = in[gg.index(x[0] - 3, x[1] - 2, x[2] - 1)];
      }
      return make(gg, std::move(out));
    };
    const auto grid = [](const Geometry& gg, std::vector<double> d) { return VoxelGrid(gg, std::move(d)); };
    const auto mask = [](const Geometry& gg, std::vector<bool> d) {
      BinaryMask m(gg);
      for (std::size_t v = 0; v < d.size(); ++v) m.set(v, d[v]);
      return m;
    };
    SubjectBundle t = b;
    t.segmentation = shift(b.segmentation, [](const Geometry& gg, std::vector<std::uint8_t> d) {
      return SegmentationMap(gg, std::move(d));
    });
    t.flair = shift(*b.flair, grid);
    t.t1 = shift(*b.t1, grid);
    t.t1ce = shift(*b.t1ce, grid);
    t.t2 = shift(*b.t2, grid);
    t.cnwm_mask = shift(*b.cnwm_mask, mask);
    t.ventricle_masks = std::make_pair(shift(b.ventricle_masks->first, mask), shift(b.ventricle_masks->second, mask));
    const auto ft = extract_features(t, cfg);

    const auto& v0 = *f.volumetrics;
    const auto& v1 = *ft.volumetrics;
    CHECK(v0 == v1);
    CHECK(f.mass_effect->ventricular_asymmetry_index == ft.mass_effect->ventricular_asymmetry_index);
    CHECK(f.mismatch == ft.mismatch);
    const auto& m0 = *f.morphology;
    const auto& m1 = *ft.morphology;
    check_same(m0.tc_hollowness, m1.tc_hollowness);
    check_same(m0.rim_core_adjacency, m1.rim_core_adjacency);
    check_same(m0.enhancing_rim_thickness_mm, m1.enhancing_rim_thickness_mm);
    CHECK(m0.et_component_count == m1.et_component_count);
    CHECK(m0.net_component_count == m1.net_component_count);
    check_same(m0.non_rim_enhancement_fraction, m1.non_rim_enhancement_fraction);
    check_same(m0.sphericity_wt, m1.sphericity_wt);
    check_same(m0.sphericity_tc, m1.sphericity_tc);
    check_same(m0.boundary_sharpness_wt, m1.boundary_sharpness_wt);
    check_same(m0.boundary_sharpness_tc, m1.boundary_sharpness_tc);
    check_same(m0.transition_zone_thickness_mm, m1.transition_zone_thickness_mm);
  }
}

TEST_CASE("missing sequences null only their fields") {
  SyntheticSpec spec;
  spec.dims = {40, 40, 32};
  spec.with_flair = false;
  SubjectBundle b = make_synthetic_subject(spec);
  const auto f = extract_features(b, synthetic_atlas_config());
  CHECK(f.null_reasons.empty());
  CHECK(!f.mismatch->t2_flair_mismatch_ratio);
  CHECK(!f.morphology->boundary_sharpness_wt);
  CHECK(!f.morphology->transition_zone_thickness_mm);
  CHECK(f.morphology->boundary_sharpness_tc);
  CHECK(f.volumetrics);
}

TEST_CASE("extraction parameters change outcomes") {
  SyntheticSpec spec;
  spec.dims = {40, 40, 32};
  const SubjectBundle b = make_synthetic_subject(spec);
  ExtractionParams p;
  p.min_component_voxels = 1'000'000;
  CHECK(*extract_morphology(b, p).et_component_count == 0);
  p = {};
  p.midline_min_voxels = 0;
  p.midline_deadband_mm = -1000.0;
  CHECK(*extract_mass_effect(b, p).tc_crosses_midline);
}
