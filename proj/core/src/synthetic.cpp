#include "cimllm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "cimllm/error.hpp"
#include "cimllm/nifti.hpp"

namespace cimllm {

namespace {

Geometry centred_geometry(const Index3& dims, const Vec3& spacing) {
  Vec3 origin{};
  for (int a = 0; a < 3; ++a) origin[a] = -0.5 * static_cast<double>(dims[a] - 1) * spacing[a];
  return Geometry{dims, spacing, diagonal_affine(spacing, origin)};
}

Vec3 extent_mm(const Geometry& g) {
  return {g.dims[0] * g.spacing[0], g.dims[1] * g.spacing[1], g.dims[2] * g.spacing[2]};
}

double min_extent(const Geometry& g) {
  const Vec3 e = extent_mm(g);
  return std::min({e[0], e[1], e[2]});
}

/// Ellipsoidal "radius" of p around c: 1 on the surface with semi-axes r.
double ellipsoid(const Vec3& p, const Vec3& c, const Vec3& r) {
  double s = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double d = (p[a] - c[a]) / r[a];
    s += d * d;
  }
  return std::sqrt(s);
}

bool in_brain(const Vec3& p, const Geometry& g) {
  const Vec3 e = extent_mm(g);
  return ellipsoid(p, {0, 0, 0}, {0.42 * e[0], 0.42 * e[1], 0.42 * e[2]}) <= 1.0;
}

bool in_deep_gray(const Vec3& p, const Geometry& g) {
  const double r = 0.08 * min_extent(g);
  return ellipsoid(p, {0, 0, 0}, {r, r, r}) <= 1.0;
}

struct Tissue {
  double t1, t1ce, t2, flair;
};

}  // namespace

VoxelGrid make_synthetic_atlas(const Geometry& g) {
  std::vector<double> labels(g.voxel_count(), 0.0);
  for (std::size_t v = 0; v < labels.size(); ++v) {
    const Vec3 p = g.world(v);
    if (!in_brain(p, g)) continue;
    const bool left = p[0] < 0.0;
    int label;
    if (in_deep_gray(p, g)) {
      label = 5;
    } else if (p[1] > 0.0) {
      label = left ? 1 : 2;
    } else if (p[2] > 0.0) {
      label = left ? 3 : 4;
    } else {
      label = left ? 6 : 7;
    }
    labels[v] = label;
  }
  return VoxelGrid(g, std::move(labels));
}

AtlasConfig synthetic_atlas_config() {
  AtlasSpec s;
  s.name = kSyntheticAtlasName;
  s.regions = {{1, "Frontal Left"},     {2, "Frontal Right"},         {3, "Sensorimotor Left"},
               {4, "Sensorimotor Right"}, {5, "Deep Gray"},          {6, "Occipitotemporal Left"},
               {7, "Occipitotemporal Right"}};
  s.eloquent = {3, 4};
  s.deep_gray = {5};
  s.frontal_left = {1};
  s.frontal_right = {2};
  return AtlasConfig{"synthetic-1", {s}};
}

SubjectBundle make_synthetic_subject(const SyntheticSpec& spec) {
  const Geometry g = centred_geometry(spec.dims, spec.spacing);
  const Vec3 e = extent_mm(g);
  const double m = min_extent(g);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> jitter(0.85, 1.15);
  std::normal_distribution<double> noise(0.0, 1.0);
  const bool mutant = spec.idh == IdhStatus::Mutant;

  const double side = spec.left_hemisphere ? -1.0 : 1.0;
  const Vec3 centre{side * 0.2 * e[0] * jitter(rng), 0.08 * e[1] * jitter(rng), 0.05 * e[2] * jitter(rng)};
  const double r0 = 0.14 * m;
  const Vec3 core{r0 * jitter(rng), r0 * jitter(rng), r0 * jitter(rng)};
  const double rim_mm = mutant ? 0.0 : std::max(2.0, 0.05 * m) * std::max({spec.spacing[0], spec.spacing[1], spec.spacing[2]});
  const double edema_mm = (mutant ? 0.03 : 0.10) * m * jitter(rng) + 1.5 * spec.spacing[0];
  const double vent_r = 0.05 * m;
  // The ventricle next to a wildtype tumor is compressed.
  const double vent_ipsi = mutant ? vent_r : 0.6 * vent_r;

  const Tissue brain{100, 100, 100, 100};
  const Tissue deep{90, 95, 105, 105};
  const Tissue csf{40, 40, 300, 30};
  const Tissue edema{85, 90, 190, 200};
  const Tissue net = mutant ? Tissue{70, 72, 230, 90} : Tissue{70, 70, 170, 170};
  const Tissue et{80, 260, 150, 150};

  const std::size_t n = g.voxel_count();
  std::vector<double> t1(n, 0.0), t1ce(n, 0.0), t2(n, 0.0), flair(n, 0.0);
  std::vector<std::uint8_t> seg(n, 0), vl(n, 0), vr(n, 0), cnwm(n, 0);
  const Vec3 vent_left_c{-0.08 * e[0], 0.0, 0.1 * e[2]};
  const Vec3 vent_right_c{0.08 * e[0], 0.0, 0.1 * e[2]};
  const double rl = spec.left_hemisphere ? vent_ipsi : vent_r;
  const double rr = spec.left_hemisphere ? vent_r : vent_ipsi;
  const Vec3 mirror_centre{-centre[0], centre[1], centre[2]};

  for (std::size_t v = 0; v < n; ++v) {
    const Vec3 p = g.world(v);
    if (!in_brain(p, g)) continue;
    Tissue t = in_deep_gray(p, g) ? deep : brain;
    if (ellipsoid(p, vent_left_c, {rl, 1.6 * rl, rl}) <= 1.0) {
      t = csf;
      vl[v] = 1;
    } else if (ellipsoid(p, vent_right_c, {rr, 1.6 * rr, rr}) <= 1.0) {
      t = csf;
      vr[v] = 1;
    }
    const double u = ellipsoid(p, centre, core);
    // Distance outside/inside the core surface, approximately in mm.
    const double signed_mm = (u - 1.0) * (core[0] + core[1] + core[2]) / 3.0;
    if (signed_mm <= 0.0) {
      const bool rim = !mutant && signed_mm > -rim_mm;
      seg[v] = rim ? 4 : 1;
      t = rim ? et : net;
    } else if (signed_mm <= edema_mm) {
      seg[v] = 2;
      t = edema;
    }
    if (seg[v] == 0 && vl[v] == 0 && vr[v] == 0 && ellipsoid(p, mirror_centre, {2 * r0, 2 * r0, 2 * r0}) <= 1.0) {
      cnwm[v] = 1;
    }
    auto noisy = [&](double base) { return std::max(1.0, base + spec.noise_sd * noise(rng)); };
    t1[v] = noisy(t.t1);
    t1ce[v] = noisy(t.t1ce);
    t2[v] = noisy(t.t2);
    flair[v] = noisy(t.flair);
  }

  SubjectBundle b;
  b.subject_id = spec.subject_id;
  b.segmentation = SegmentationMap(g, std::move(seg));
  if (spec.with_flair) b.flair = VoxelGrid(g, std::move(flair));
  b.t1 = VoxelGrid(g, std::move(t1));
  b.t1ce = VoxelGrid(g, std::move(t1ce));
  b.t2 = VoxelGrid(g, std::move(t2));
  b.atlases[kSyntheticAtlasName] = std::make_shared<const VoxelGrid>(make_synthetic_atlas(g));
  if (spec.with_cnwm_mask) b.cnwm_mask = BinaryMask(g, std::move(cnwm));
  if (spec.with_ventricles) b.ventricle_masks.emplace(BinaryMask(g, std::move(vl)), BinaryMask(g, std::move(vr)));
  b.age_years = spec.age_years;
  b.sex = spec.sex;
  b.idh_label = spec.idh;
  b.subtype = spec.subtype;
  return b;
}

std::vector<SyntheticSpec> synthetic_cohort_specs(std::size_t n, std::uint64_t seed, Index3 dims) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> age(25.0, 80.0);
  std::vector<SyntheticSpec> out;
  for (std::size_t i = 0; i < n; ++i) {
    SyntheticSpec s;
    char id[32];
    std::snprintf(id, sizeof id, "synth-%03zu", i + 1);
    s.subject_id = id;
    s.dims = dims;
    s.subtype = static_cast<Subtype>(i % 3);
    s.idh = s.subtype == Subtype::Glioblastoma ? IdhStatus::Wildtype : IdhStatus::Mutant;
    s.age_years = std::round(age(rng));
    s.sex = (rng() & 1) ? Sex::Female : Sex::Male;
    s.left_hemisphere = (rng() & 1) != 0;
    s.seed = rng();
    out.push_back(s);
  }
  return out;
}

SyntheticCohortFiles write_synthetic_cohort(const std::filesystem::path& dir, const std::vector<SyntheticSpec>& specs) {
  namespace fs = std::filesystem;
  if (specs.empty()) throw Error(ErrorCode::InvalidArgument, "no subjects to write");
  fs::create_directories(dir);
  std::vector<ManifestRow> rows;
  std::optional<Geometry> shared;
  for (const auto& spec : specs) {
    const SubjectBundle b = make_synthetic_subject(spec);
    if (!shared) {
      shared = b.geometry();
    } else if (!shared->matches(b.geometry())) {
      throw Error(ErrorCode::GeometryMismatch, "synthetic cohort subjects must share one grid");
    }
    ManifestRow row;
    row.subject_id = spec.subject_id;
    auto put = [&](const VoxelGrid& grid, const std::string& suffix, nifti::Datatype dt) {
      const fs::path name = spec.subject_id + "_" + suffix + ".nii.gz";
      nifti::write_nifti(grid, dir / name, dt);
      return name;
    };
    auto put_mask = [&](const BinaryMask& mask, const std::string& suffix) {
      std::vector<double> v(mask.bits().begin(), mask.bits().end());
      return put(VoxelGrid(mask.geometry(), std::move(v)), suffix, nifti::Datatype::UInt8);
    };
    if (b.flair) row.flair = put(*b.flair, "flair", nifti::Datatype::Float32);
    row.t1 = put(*b.t1, "t1", nifti::Datatype::Float32);
    row.t1ce = put(*b.t1ce, "t1ce", nifti::Datatype::Float32);
    row.t2 = put(*b.t2, "t2", nifti::Datatype::Float32);
    {
      const auto labels = b.segmentation.labels();
      std::vector<double> v(labels.begin(), labels.end());
      row.seg = put(VoxelGrid(b.geometry(), std::move(v)), "seg", nifti::Datatype::UInt8);
    }
    if (b.cnwm_mask) row.cnwm = put_mask(*b.cnwm_mask, "cnwm");
    if (b.ventricle_masks) {
      row.vent_left = put_mask(b.ventricle_masks->first, "vent_left");
      row.vent_right = put_mask(b.ventricle_masks->second, "vent_right");
    }
    row.age_years = spec.age_years;
    row.sex = spec.sex;
    row.idh = spec.idh;
    row.subtype = spec.subtype;
    row.cohort = spec.cohort;
    rows.push_back(std::move(row));
  }

  const std::string atlas_file = std::string("atlas_") + kSyntheticAtlasName + ".nii.gz";
  nifti::write_nifti(make_synthetic_atlas(*shared), dir / atlas_file, nifti::Datatype::UInt8);
  AtlasConfig config = synthetic_atlas_config();
  config.atlases[0].image = atlas_file;

  SyntheticCohortFiles out;
  out.manifest = dir / "manifest.csv";
  out.atlas_config = dir / "atlases.json";
  std::ofstream(out.manifest) << format_manifest(rows, true);
  std::ofstream(out.atlas_config) << format_atlas_config(config);
  out.rows = read_manifest(out.manifest);
  return out;
}

}  // namespace cimllm
