#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cimllm/atlas_config.hpp"
#include "cimllm/manifest.hpp"

namespace cimllm {

/// Intensity cut-points for the binary T2-FLAIR mismatch attributes. All are
/// relative to CNWM-normalised intensities.
struct MismatchThresholds {
  double ratio = 1.5;           // T2/FLAIR mismatch ratio must exceed this
  double homogeneity_cv = 0.25; // coefficient of variation of T2 over NET below this
  double suppression = 1.0;     // NET median FLAIR_norm below this
  double rim = 1.3;             // rim/interior FLAIR_norm factor above this

  friend bool operator==(const MismatchThresholds&, const MismatchThresholds&) = default;
};

struct ExtractionParams {
  MismatchThresholds thresholds;
  std::size_t min_component_voxels = 10;
  std::size_t tiny_net_voxels = 50;
  std::size_t involvement_min_voxels = 10;
  double rim_shell_mm = 2.0;
  double midline_deadband_mm = 1.0;
  std::size_t midline_min_voxels = 10;
  double cnwm_exclusion_mm = 10.0;
  std::size_t max_transition_rays = 500;
  double ray_step_mm = 0.5;
  double ray_max_mm = 30.0;
  double transition_upper = 0.75;
  double transition_lower = 0.25;
  std::uint64_t seed = 42;

  friend bool operator==(const ExtractionParams&, const ExtractionParams&) = default;
};

struct RegionOverlap {
  double tumor_in_region = 0.0;
  double regional_occupancy = 0.0;
  friend bool operator==(const RegionOverlap&, const RegionOverlap&) = default;
};

/// atlas name -> region name -> overlap, regions with zero overlap omitted.
using AtlasOverlap = std::map<std::string, std::map<std::string, RegionOverlap>>;

struct ProximityEntry {
  std::string region;
  double distance_mm = 0.0;
  friend bool operator==(const ProximityEntry&, const ProximityEntry&) = default;
};

struct LocationFeatures {
  AtlasOverlap tumor_location;
  std::vector<ProximityEntry> eloquent_proximity;  // at most 5, ascending
  std::optional<bool> deep_gray_involved;
  std::optional<bool> bilateral_frontal;
  std::optional<AtlasOverlap> edema_location;
  friend bool operator==(const LocationFeatures&, const LocationFeatures&) = default;
};

enum class CnwmSource { ProvidedMask, MirrorFallback };
std::string_view to_string(CnwmSource s) noexcept;

struct MismatchFeatures {
  std::optional<bool> flair_suppression;
  std::optional<bool> flair_rim_hyperintensity;
  std::optional<double> t2_flair_mismatch_ratio;
  std::optional<CnwmSource> cnwm_source;
  friend bool operator==(const MismatchFeatures&, const MismatchFeatures&) = default;
};

struct MassEffectFeatures {
  std::optional<bool> tc_crosses_midline;
  std::optional<bool> ed_crosses_midline;
  /// (V_R - V_L) / (V_R + V_L); positive when the right ventricle is larger.
  std::optional<double> ventricular_asymmetry_index;
  friend bool operator==(const MassEffectFeatures&, const MassEffectFeatures&) = default;
};

struct MorphologyFeatures {
  std::optional<double> tc_hollowness;
  std::optional<double> rim_core_adjacency;
  std::optional<double> enhancing_rim_thickness_mm;
  std::optional<std::int64_t> et_component_count;
  std::optional<std::int64_t> net_component_count;
  std::optional<double> non_rim_enhancement_fraction;
  std::optional<double> sphericity_wt;
  std::optional<double> sphericity_tc;
  std::optional<double> boundary_sharpness_wt;
  std::optional<double> boundary_sharpness_tc;
  std::optional<double> transition_zone_thickness_mm;
  friend bool operator==(const MorphologyFeatures&, const MorphologyFeatures&) = default;
};

struct VolumetricFeatures {
  double vol_wt_ml = 0.0;
  double vol_net_ml = 0.0;
  double vol_et_ml = 0.0;
  double vol_ed_ml = 0.0;
  std::optional<double> frac_net_of_wt;
  std::optional<double> frac_et_of_wt;
  std::optional<double> frac_et_of_tc;
  std::optional<double> edema_to_net_ratio;
  std::optional<double> edema_to_tc_ratio;
  std::optional<double> edema_extent_median_mm;
  std::optional<double> edema_extent_p95_mm;
  friend bool operator==(const VolumetricFeatures&, const VolumetricFeatures&) = default;
};

/// All five families for one subject. A family that could not be computed at
/// all is nullopt and its reason is kept in `null_reasons`.
struct SubjectFeatures {
  std::optional<LocationFeatures> location;
  std::optional<MismatchFeatures> mismatch;
  std::optional<MassEffectFeatures> mass_effect;
  std::optional<MorphologyFeatures> morphology;
  std::optional<VolumetricFeatures> volumetrics;
  std::map<std::string, std::string> null_reasons;
  friend bool operator==(const SubjectFeatures&, const SubjectFeatures&) = default;
};

/// Throws Error(NoAtlas) or Error(EmptyTumorCore).
LocationFeatures extract_location(const SubjectBundle& bundle, const AtlasConfig& atlases,
                                  const ExtractionParams& params = {});
MismatchFeatures extract_mismatch(const SubjectBundle& bundle, const ExtractionParams& params = {});
MassEffectFeatures extract_mass_effect(const SubjectBundle& bundle, const ExtractionParams& params = {});
MorphologyFeatures extract_morphology(const SubjectBundle& bundle, const ExtractionParams& params = {});
/// Throws Error(EmptyWholeTumor).
VolumetricFeatures extract_volumetrics(const SubjectBundle& bundle, const ExtractionParams& params = {});

/// Runs every family over one shared cache of masks and distance fields.
SubjectFeatures extract_features(const SubjectBundle& bundle, const AtlasConfig& atlases,
                                 const ExtractionParams& params = {});

}  // namespace cimllm
