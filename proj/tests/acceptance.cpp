// Acceptance battery: one PASS/FAIL line per criterion.
//   acceptance [--criterion N]

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cimllm/evaluation.hpp"
#include "cimllm/features.hpp"
#include "cimllm/llm.hpp"
#include "cimllm/schema.hpp"
#include "cimllm/synthetic.hpp"
#include "cimllm/voxel_ops.hpp"
#include "support/e2e.hpp"
#include "support/label_cases.hpp"
#include "support/oracles.hpp"
#include "support/random_docs.hpp"
#include "support/reference_tables.hpp"
#include "support/segmentations.hpp"

using namespace cimllm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (ok) return;
    if (pass) detail = what;
    pass = false;
  }
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

Outcome wilson_cells() {
  Outcome o;
  int worst = -1;
  double worst_err = 0.0;
  for (std::size_t i = 0; i < fixture::kAccuracyCells.size(); ++i) {
    const auto& c = fixture::kAccuracyCells[i];
    const auto ci = wilson_interval(c.k, c.n);
    const double err = std::max(std::abs(100.0 * ci.low - c.low_pct), std::abs(100.0 * ci.high - c.high_pct));
    if (err > worst_err) worst_err = err, worst = static_cast<int>(i);
    o.require(err <= 0.02, fmt::format("{} {} {}/{}: [{:.2f}, {:.2f}] vs [{:.2f}, {:.2f}]", c.cohort, c.model, c.k,
                                       c.n, 100.0 * ci.low, 100.0 * ci.high, c.low_pct, c.high_pct));
  }
  if (o.pass) o.detail = fmt::format("14 cells, max error {:.4f} pp (cell {})", worst_err, worst);
  return o;
}

Outcome geometric_means() {
  Outcome o;
  double worst = 0.0;
  for (const auto& r : fixture::kAblationRows) {
    const std::array<double, 3> recalls{r.astro, r.oligo, r.gbm};
    const double gm = *geometric_mean(recalls);
    worst = std::max(worst, std::abs(gm - r.geometric_mean));
    o.require(std::abs(gm - r.geometric_mean) <= 0.005,
              fmt::format("{}: computed {:.4f}, table {:.2f}", r.configuration, gm, r.geometric_mean));
  }
  if (o.pass) o.detail = fmt::format("7 rows, max error {:.4f}", worst);
  return o;
}

Outcome exact_edt() {
  Outcome o;
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> spacing(0.4, 3.0), density(0.001, 0.3);
  std::size_t voxels = 0;
  for (int t = 0; t < 200 && o.pass; ++t) {
    const auto g = fixture::grid({20, 20, 20}, {spacing(rng), spacing(rng), spacing(rng)});
    auto m = fixture::random_mask(g, rng, density(rng));
    if (m.empty()) m.set(std::uniform_int_distribution<std::size_t>(0, m.size() - 1)(rng));
    const auto got = voxel::squared_edt(m);
    const auto want = oracle::squared_edt(m);
    for (std::size_t v = 0; v < got.size(); ++v) {
      o.require(got[v] == want[v], fmt::format("mask {} voxel {}: {} vs {}", t, v, got[v], want[v]));
    }
    voxels += got.size();
  }
  if (o.pass) o.detail = fmt::format("200 masks, {} voxels bit-identical", voxels);
  return o;
}

Outcome geometry_fixtures() {
  Outcome o;
  const auto g = fixture::grid({64, 64, 64});
  const double s0 = voxel::sphericity(fixture::ball(g, {30, 30, 30}, 20.0));
  o.require(s0 >= 0.70 && s0 <= 0.85, fmt::format("ball sphericity {:.4f} outside [0.70, 0.85]", s0));
  double drift = 0.0;
  for (const Vec3 c : {Vec3{31, 30, 30}, Vec3{33, 32, 31}, Vec3{21, 40, 25}}) {
    drift = std::max(drift, std::abs(voxel::sphericity(fixture::ball(g, c, 20.0)) - s0));
  }
  const auto shifted = fixture::grid({64, 64, 64}, {1, 1, 1}, {-17.5, 3.25, 100.0});
  drift = std::max(drift, std::abs(voxel::sphericity(fixture::ball(shifted, {30, 30, 30}, 20.0)) - s0));
  o.require(drift <= 1e-12, fmt::format("translation changes sphericity by {}", drift));

  BinaryMask one(fixture::grid({3, 3, 3}));
  one.set(1, 1, 1);
  const double expected = std::cbrt(std::numbers::pi) * std::pow(6.0, 2.0 / 3.0) / 6.0;
  const double single = voxel::sphericity(one);
  o.require(std::abs(single - expected) <= 1e-9, fmt::format("single voxel {} vs {}", single, expected));

  const auto pair = fixture::box(fixture::grid({4, 3, 3}), {1, 1, 1}, {3, 2, 2});
  const double area = voxel::surface_area(pair);
  o.require(area == 10.0, fmt::format("2x1x1 area {}", area));
  if (o.pass) {
    o.detail = fmt::format("ball {:.4f}, drift {:.1e}, voxel {:.12f}, pair area {}", s0, drift, single, area);
  }
  return o;
}

Outcome volumetric_invariants() {
  Outcome o;
  std::mt19937_64 rng(500);
  std::uniform_real_distribution<double> spacing(0.5, 2.0);
  for (int t = 0; t < 500 && o.pass; ++t) {
    const auto g = fixture::grid({18, 16, 14}, {spacing(rng), spacing(rng), spacing(rng)});
    const auto seg = fixture::random_segmentation(g, rng);
    const auto f = extract_volumetrics(fixture::seg_only(seg));
    const auto tag = fmt::format("trial {}: ", t);
    o.require(f.vol_wt_ml == f.vol_net_ml + f.vol_et_ml + f.vol_ed_ml, tag + "vol_wt != net + et + ed");
    for (const auto& x : {f.frac_net_of_wt, f.frac_et_of_wt, f.frac_et_of_tc}) {
      o.require(!x || (*x >= 0.0 && *x <= 1.0), tag + "fraction outside [0, 1]");
    }
    o.require(f.edema_extent_median_mm.has_value() == f.edema_extent_p95_mm.has_value(), tag + "extent nullity");
    if (f.edema_extent_median_mm) o.require(*f.edema_extent_p95_mm >= *f.edema_extent_median_mm, tag + "p95 < median");

    const auto swapped = fixture::seg_only(fixture::swap_net_et(seg));
    const auto s = extract_volumetrics(swapped);
    o.require(s.vol_net_ml == f.vol_et_ml && s.vol_et_ml == f.vol_net_ml && s.vol_wt_ml == f.vol_wt_ml,
              tag + "swap does not exchange volumes");
    o.require(s.frac_et_of_tc.has_value() == f.frac_et_of_tc.has_value(), tag + "swap changes frac_et_of_tc nullity");
    if (f.frac_et_of_tc) {
      o.require(std::abs(*s.frac_et_of_tc - (1.0 - *f.frac_et_of_tc)) <= 1e-12, tag + "frac_et_of_tc not mirrored");
    }
    const auto m = extract_morphology(fixture::seg_only(seg));
    const auto ms = extract_morphology(swapped);
    o.require(ms.et_component_count == m.net_component_count && ms.net_component_count == m.et_component_count,
              tag + "swap does not exchange component counts");
  }
  if (o.pass) o.detail = "500 segmentations";
  return o;
}

std::set<FeatureGroup> subset(unsigned bits) {
  std::set<FeatureGroup> s;
  for (std::size_t i = 0; i < kAllGroups.size(); ++i) {
    if (bits & (1u << i)) s.insert(kAllGroups[i]);
  }
  return s;
}

Outcome schema_properties() {
  Outcome o;
  fixture::DocumentGenerator gen(1000);
  for (int i = 0; i < 1000 && o.pass; ++i) {
    const auto d = gen.next();
    const auto text = serialize(d);
    const auto back = parse_document(text);
    o.require(back == d, fmt::format("document {} does not round-trip", i));
    o.require(serialize(back) == text, fmt::format("document {} reserializes differently", i));
  }
  SyntheticSpec spec;
  spec.dims = {40, 40, 32};
  const auto b = make_synthetic_subject(spec);
  std::vector<SubjectFeatureDocument> bases{make_document(b, extract_features(b, synthetic_atlas_config()), {})};
  for (int i = 0; i < 3; ++i) bases.push_back(gen.next());
  std::size_t checks = 0;
  for (const auto& d : bases) {
    for (bool clinical : {false, true}) {
      for (unsigned a = 0; a < 32; ++a) {
        const auto once = apply_ablation(d, subset(a), clinical);
        o.require(apply_ablation(once, subset(a), clinical) == once, fmt::format("not idempotent on {}", a));
        for (unsigned c = 0; c < 32; ++c) {
          const auto ab = apply_ablation(once, subset(c), clinical);
          const auto ba = apply_ablation(apply_ablation(d, subset(c), clinical), subset(a), clinical);
          o.require(ab == ba, fmt::format("not commutative on {} and {}", a, c));
          ++checks;
        }
      }
    }
  }
  if (o.pass) o.detail = fmt::format("1000 round trips, {} ablation pairs", checks);
  return o;
}

Outcome label_table() {
  Outcome o;
  std::size_t ok = 0;
  for (const auto& c : fixture::kLabelCases) {
    const auto p = parse_label(c.text);
    if (p.label == c.label && p.ambiguous == c.ambiguous) {
      ++ok;
    } else {
      o.require(false, fmt::format("'{}' parsed as {}", c.text, to_string(p.label)));
    }
  }
  o.detail = fmt::format("{}/{} cases", ok, fixture::kLabelCases.size()) + (o.pass ? "" : ", first: " + o.detail);
  return o;
}

Outcome offline_pipeline() {
  Outcome o;
  MockLlmServer server(fixture::flips_on_missing_volumetrics());
  const auto base = fs::temp_directory_path() / "cimllm_acceptance";
  fs::remove_all(base);
  fixture::Pipeline a{base / "a", server.endpoint()};
  fixture::Pipeline b{base / "b", server.endpoint()};
  for (auto* p : {&a, &b}) {
    for (const auto& [step, r] : p->run_all()) {
      o.require(r.code == 0, step + " failed: " + r.err);
      if (!o.pass) return o;
    }
  }
  o.require(a.stable_outputs() == b.stable_outputs(), "two runs differ");
  const double baseline = a.mutant_recall("Baseline");
  const double ablated = a.mutant_recall("-- Volumetric Measures");
  o.require(ablated < baseline,
            fmt::format("mutant recall {:.2f} without volumetrics vs {:.2f} baseline", ablated, baseline));

  const auto before = a.stable_outputs();
  fixture::simulate_crash(a.ablation(), 29);
  o.require(a.ablate().code == 0, "resumed ablation failed");
  const auto counts = a.record_counts();
  bool unique = counts.size() == 70;
  for (const auto& [key, n] : counts) unique = unique && n == 1;
  o.require(unique, fmt::format("{} (subject, spec) keys after resume, expected 70 each once", counts.size()));
  o.require(a.stable_outputs() == before, "resumed tables differ");
  if (o.pass) {
    o.detail = fmt::format("10 subjects, mutant recall {:.2f} -> {:.2f} without volumetrics, {} requests", baseline,
                           ablated, server.request_count());
  }
  fs::remove_all(base);
  return o;
}

Outcome large_subject() {
  Outcome o;
  SyntheticSpec spec;
  spec.dims = {240, 240, 240};
  spec.with_cnwm_mask = false;
  const auto bundle = make_synthetic_subject(spec);
  const auto t0 = std::chrono::steady_clock::now();
  const auto f = extract_features(bundle, synthetic_atlas_config());
  const auto doc = serialize(make_document(bundle, f, {}));
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.require(f.location && f.mismatch && f.mass_effect && f.morphology && f.volumetrics, "a feature group is null");
  o.require(s < 30.0, fmt::format("extraction took {:.2f} s", s));
  if (o.pass) o.detail = fmt::format("240^3 battery in {:.2f} s, {} bytes", s, doc.size());
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  app.add_option("--criterion", only, "Run one criterion (1-9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "Wilson intervals reproduce reference accuracy cells", 1.0, wilson_cells},
      {2, "geometric mean reproduces ablation rows", 1.0, geometric_means},
      {3, "EDT equals brute force on random anisotropic masks", 60.0, exact_edt},
      {4, "sphericity and surface area fixtures", 60.0, geometry_fixtures},
      {5, "volumetric invariants on fuzzed segmentations", 60.0, volumetric_invariants},
      {6, "schema round trip and ablation algebra", 60.0, schema_properties},
      {7, "label parser table", 1.0, label_table},
      {8, "offline extract/predict/evaluate/ablate with resume", 120.0, offline_pipeline},
      {9, "240^3 subject full battery", 60.0, large_subject},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.pass && s > c.budget_s) {
      o.pass = false;
      o.detail += fmt::format("; over the {:.0f} s budget", c.budget_s);
    }
    std::cout << fmt::format("{} {}: {} ({}; {:.2f} s)", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail, s)
              << std::endl;
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
