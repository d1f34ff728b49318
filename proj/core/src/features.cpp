#include <algorithm>
#include <cmath>

#include "cimllm/error.hpp"
#include "subject_context.hpp"

namespace cimllm {

std::string_view to_string(CnwmSource s) noexcept {
  return s == CnwmSource::ProvidedMask ? "provided_mask" : "mirror_fallback";
}

namespace detail {

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "median of an empty sample");
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double percentile_nearest_rank(std::vector<double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "percentile of an empty sample");
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
  return values[rank - 1];
}

BinaryMask dilate_mm(const BinaryMask& mask, double radius_mm) {
  const Geometry& g = mask.geometry();
  if (mask.empty()) return mask;
  const double smallest = std::min({g.spacing[0], g.spacing[1], g.spacing[2]});
  const auto margin = static_cast<std::size_t>(std::ceil(radius_mm / smallest)) + 1;
  const Box box = mask.bounding_box(margin);
  const auto local = voxel::edt(mask.crop(box));
  BinaryMask out(g);
  const auto e = box.extent();
  std::size_t src = 0;
  for (std::size_t k = 0; k < e[2]; ++k) {
    for (std::size_t j = 0; j < e[1]; ++j) {
      for (std::size_t i = 0; i < e[0]; ++i, ++src) {
        if (local.mm[src] <= radius_mm) out.set(box.lo[0] + i, box.lo[1] + j, box.lo[2] + k);
      }
    }
  }
  return out;
}

const BinaryMask& SubjectContext::net() {
  if (!net_) net_ = bundle_.segmentation.mask(TumorLabel::NonEnhancing);
  return *net_;
}
const BinaryMask& SubjectContext::et() {
  if (!et_) et_ = bundle_.segmentation.mask(TumorLabel::Enhancing);
  return *et_;
}
const BinaryMask& SubjectContext::ed() {
  if (!ed_) ed_ = bundle_.segmentation.mask(TumorLabel::Edema);
  return *ed_;
}
const BinaryMask& SubjectContext::tc() {
  if (!tc_) tc_ = bundle_.segmentation.tumor_core();
  return *tc_;
}
const BinaryMask& SubjectContext::wt() {
  if (!wt_) wt_ = bundle_.segmentation.whole_tumor();
  return *wt_;
}
const BinaryMask& SubjectContext::tc_boundary() {
  if (!tc_boundary_) tc_boundary_ = voxel::boundary(tc(), voxel::Connectivity::Six);
  return *tc_boundary_;
}
const voxel::DistanceField& SubjectContext::tc_boundary_distance() {
  if (!tc_boundary_distance_) {
    if (tc().empty()) throw Error(ErrorCode::EmptyTumorCore, "tumor core is empty");
    tc_boundary_distance_ = voxel::edt(tc_boundary());
  }
  return *tc_boundary_distance_;
}

namespace {

inline double world_x(const Geometry& g, std::size_t i, std::size_t j, std::size_t k) noexcept {
  return g.affine[0][0] * static_cast<double>(i) + g.affine[0][1] * static_cast<double>(j) +
         g.affine[0][2] * static_cast<double>(k) + g.affine[0][3];
}

/// Contralateral hemisphere minus the mirrored tumour (dilated) and the tumour.
CnwmRegion mirror_fallback(SubjectContext& ctx) {
  CnwmRegion out;
  out.source = CnwmSource::MirrorFallback;
  const BinaryMask& wt = ctx.wt();
  const Geometry& g = ctx.geometry();
  out.mask = BinaryMask(g);
  if (wt.empty()) return out;

  const Affine inv = invert_affine(g.affine);
  BinaryMask mirrored(g);
  double sum_x = 0.0;
  std::size_t n = 0;
  for (std::size_t v = 0; v < g.voxel_count(); ++v) {
    if (!wt[v]) continue;
    Vec3 p = g.world(v);
    sum_x += p[0];
    ++n;
    p[0] = -p[0];
    const Vec3 idx = apply_affine(inv, p);
    bool inside = true;
    Index3 r{};
    for (int a = 0; a < 3; ++a) {
      const double x = std::round(idx[a]);
      if (x < 0 || x >= static_cast<double>(g.dims[a])) {
        inside = false;
        break;
      }
      r[a] = static_cast<std::size_t>(x);
    }
    if (inside) mirrored.set(r[0], r[1], r[2]);
  }
  const bool tumour_right = sum_x / static_cast<double>(n) >= 0.0;
  const BinaryMask excluded = dilate_mm(mirrored, ctx.params().cnwm_exclusion_mm) | wt;

  std::size_t v = 0;
  for (std::size_t k = 0; k < g.dims[2]; ++k) {
    for (std::size_t j = 0; j < g.dims[1]; ++j) {
      for (std::size_t i = 0; i < g.dims[0]; ++i, ++v) {
        const double x = world_x(g, i, j, k);
        const bool contralateral = tumour_right ? x < 0.0 : x > 0.0;
        if (contralateral && !excluded[v]) out.mask.set(v);
      }
    }
  }
  out.available = !out.mask.empty();
  return out;
}

}  // namespace

const CnwmRegion& SubjectContext::cnwm() {
  if (!cnwm_) {
    if (bundle_.cnwm_mask) {
      CnwmRegion r;
      r.source = CnwmSource::ProvidedMask;
      r.mask = *bundle_.cnwm_mask;
      r.available = !r.mask.empty();
      cnwm_ = std::move(r);
    } else {
      cnwm_ = mirror_fallback(*this);
    }
  }
  return *cnwm_;
}

std::optional<double> SubjectContext::cnwm_reference(const VoxelGrid& sequence) {
  const CnwmRegion& region = cnwm();
  if (!region.available) return std::nullopt;
  std::vector<double> values;
  for (std::size_t v = 0; v < sequence.size(); ++v) {
    if (!region.mask[v]) continue;
    // The fallback region is geometric; restrict it to brain (non-zero) voxels.
    if (region.source == CnwmSource::MirrorFallback && !(sequence[v] > 0.0)) continue;
    values.push_back(sequence[v]);
  }
  if (values.empty()) return std::nullopt;
  double ref;
  if (region.source == CnwmSource::ProvidedMask) {
    ref = median(std::move(values));
  } else {
    std::sort(values.begin(), values.end());
    const double lo = percentile_nearest_rank(values, 25.0);
    const double hi = percentile_nearest_rank(values, 75.0);
    std::vector<double> normal;
    for (double x : values) {
      if (x >= lo && x <= hi) normal.push_back(x);
    }
    ref = median(std::move(normal));
  }
  if (!(ref > 0.0)) return std::nullopt;
  return ref;
}

MassEffectFeatures mass_effect_features(SubjectContext& ctx) {
  const auto& p = ctx.params();
  const Geometry& g = ctx.geometry();
  auto crosses = [&](const BinaryMask& m) {
    std::size_t left = 0, right = 0;
    std::size_t v = 0;
    for (std::size_t k = 0; k < g.dims[2]; ++k) {
      for (std::size_t j = 0; j < g.dims[1]; ++j) {
        for (std::size_t i = 0; i < g.dims[0]; ++i, ++v) {
          if (!m[v]) continue;
          const double x = world_x(g, i, j, k);
          if (x < -p.midline_deadband_mm) ++left;
          if (x > p.midline_deadband_mm) ++right;
        }
      }
    }
    return left >= p.midline_min_voxels && right >= p.midline_min_voxels;
  };
  MassEffectFeatures f;
  f.tc_crosses_midline = crosses(ctx.tc());
  f.ed_crosses_midline = crosses(ctx.ed());
  if (const auto& vm = ctx.bundle().ventricle_masks) {
    const double vl = static_cast<double>(vm->first.count()) * vm->first.geometry().voxel_volume_mm3();
    const double vr = static_cast<double>(vm->second.count()) * vm->second.geometry().voxel_volume_mm3();
    if (vl + vr > 0.0) f.ventricular_asymmetry_index = (vr - vl) / (vr + vl);
  }
  return f;
}

VolumetricFeatures volumetric_features(SubjectContext& ctx) {
  const auto& seg = ctx.bundle().segmentation;
  const std::size_t n_net = seg.count(TumorLabel::NonEnhancing);
  const std::size_t n_et = seg.count(TumorLabel::Enhancing);
  const std::size_t n_ed = seg.count(TumorLabel::Edema);
  const std::size_t n_tc = n_net + n_et;
  const std::size_t n_wt = n_tc + n_ed;
  if (n_wt == 0) throw Error(ErrorCode::EmptyWholeTumor, "whole tumor is empty");

  const double ml_per_voxel = seg.geometry().voxel_volume_mm3() / 1000.0;
  VolumetricFeatures f;
  f.vol_net_ml = static_cast<double>(n_net) * ml_per_voxel;
  f.vol_et_ml = static_cast<double>(n_et) * ml_per_voxel;
  f.vol_ed_ml = static_cast<double>(n_ed) * ml_per_voxel;
  f.vol_wt_ml = f.vol_net_ml + f.vol_et_ml + f.vol_ed_ml;

  const auto ratio = [](std::size_t a, std::size_t b) { return static_cast<double>(a) / static_cast<double>(b); };
  f.frac_net_of_wt = ratio(n_net, n_wt);
  f.frac_et_of_wt = ratio(n_et, n_wt);
  if (n_tc > 0) f.frac_et_of_tc = ratio(n_et, n_tc);
  if (n_ed == 0) {
    f.edema_to_net_ratio = 0.0;
    f.edema_to_tc_ratio = 0.0;
  } else {
    if (n_net > 0) f.edema_to_net_ratio = ratio(n_ed, n_net);
    if (n_tc > 0) f.edema_to_tc_ratio = ratio(n_ed, n_tc);
  }

  if (n_tc > 0 && n_ed > 0) {
    const auto& dist = ctx.tc_boundary_distance();
    const auto& ed = ctx.ed();
    std::vector<double> d;
    d.reserve(n_ed);
    for (std::size_t v = 0; v < ed.size(); ++v) {
      if (ed[v]) d.push_back(dist[v]);
    }
    f.edema_extent_median_mm = median(d);
    f.edema_extent_p95_mm = percentile_nearest_rank(std::move(d), 95.0);
  }
  return f;
}

}  // namespace detail

LocationFeatures extract_location(const SubjectBundle& bundle, const AtlasConfig& atlases,
                                  const ExtractionParams& params) {
  detail::SubjectContext ctx(bundle, params);
  return detail::location_features(ctx, atlases);
}

MismatchFeatures extract_mismatch(const SubjectBundle& bundle, const ExtractionParams& params) {
  detail::SubjectContext ctx(bundle, params);
  return detail::mismatch_features(ctx);
}

MassEffectFeatures extract_mass_effect(const SubjectBundle& bundle, const ExtractionParams& params) {
  detail::SubjectContext ctx(bundle, params);
  return detail::mass_effect_features(ctx);
}

MorphologyFeatures extract_morphology(const SubjectBundle& bundle, const ExtractionParams& params) {
  detail::SubjectContext ctx(bundle, params);
  return detail::morphology_features(ctx);
}

VolumetricFeatures extract_volumetrics(const SubjectBundle& bundle, const ExtractionParams& params) {
  detail::SubjectContext ctx(bundle, params);
  return detail::volumetric_features(ctx);
}

SubjectFeatures extract_features(const SubjectBundle& bundle, const AtlasConfig& atlases,
                                 const ExtractionParams& params) {
  detail::SubjectContext ctx(bundle, params);
  SubjectFeatures out;
  auto guarded = [&](const char* group, auto&& fn, auto& slot) {
    try {
      slot = fn();
    } catch (const Error& e) {
      out.null_reasons[group] = std::string(to_string(e.code()));
    }
  };
  guarded("location", [&] { return detail::location_features(ctx, atlases); }, out.location);
  guarded("t2_flair_mismatch", [&] { return detail::mismatch_features(ctx); }, out.mismatch);
  guarded("mass_effect", [&] { return detail::mass_effect_features(ctx); }, out.mass_effect);
  guarded("tumor_morphology", [&] { return detail::morphology_features(ctx); }, out.morphology);
  guarded("volumetric_measures", [&] { return detail::volumetric_features(ctx); }, out.volumetrics);
  return out;
}

}  // namespace cimllm
