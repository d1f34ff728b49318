#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cimllm/features.hpp"
#include "cimllm/voxel_ops.hpp"

namespace cimllm::detail {

double median(std::vector<double> values);
/// Nearest-rank percentile, p in (0, 100].
double percentile_nearest_rank(std::vector<double> values, double p);

/// Voxels within `radius_mm` of `mask` (the mask included).
BinaryMask dilate_mm(const BinaryMask& mask, double radius_mm);

/// Intensity reference for CNWM normalisation of one subject.
struct CnwmRegion {
  CnwmSource source = CnwmSource::MirrorFallback;
  BinaryMask mask;
  bool available = false;
};

/// Lazily computed masks and fields shared by the feature families of one
/// subject. Not thread-safe; one context per extraction.
class SubjectContext {
 public:
  SubjectContext(const SubjectBundle& bundle, const ExtractionParams& params)
      : bundle_(bundle), params_(params) {}

  const SubjectBundle& bundle() const noexcept { return bundle_; }
  const ExtractionParams& params() const noexcept { return params_; }
  const Geometry& geometry() const noexcept { return bundle_.geometry(); }

  const BinaryMask& net();
  const BinaryMask& et();
  const BinaryMask& ed();
  const BinaryMask& tc();
  const BinaryMask& wt();
  const BinaryMask& tc_boundary();
  /// Distance (mm) from every voxel to the nearest TC boundary voxel.
  /// Requires a non-empty TC.
  const voxel::DistanceField& tc_boundary_distance();
  const CnwmRegion& cnwm();
  /// Reference intensity of `sequence` over the CNWM region; nullopt when the
  /// region is empty or the reference is not positive.
  std::optional<double> cnwm_reference(const VoxelGrid& sequence);

 private:
  const SubjectBundle& bundle_;
  const ExtractionParams& params_;
  std::optional<BinaryMask> net_, et_, ed_, tc_, wt_, tc_boundary_;
  std::optional<voxel::DistanceField> tc_boundary_distance_;
  std::optional<CnwmRegion> cnwm_;
};

LocationFeatures location_features(SubjectContext& ctx, const AtlasConfig& atlases);
MismatchFeatures mismatch_features(SubjectContext& ctx);
MassEffectFeatures mass_effect_features(SubjectContext& ctx);
MorphologyFeatures morphology_features(SubjectContext& ctx);
VolumetricFeatures volumetric_features(SubjectContext& ctx);

}  // namespace cimllm::detail
