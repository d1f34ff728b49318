#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cimllm/atlas_config.hpp"
#include "cimllm/manifest.hpp"

namespace cimllm {

/// Parameters of one synthetic subject: an ellipsoidal brain with a spherical
/// tumor in one hemisphere. IDH-mutant subjects get a non-enhancing,
/// T2-bright/FLAIR-dark core with little edema; wildtype subjects get an
/// enhancing rim around a core and a wide edema shell.
struct SyntheticSpec {
  std::string subject_id = "synth-000";
  Index3 dims{64, 64, 48};
  Vec3 spacing{1.0, 1.0, 1.0};
  IdhStatus idh = IdhStatus::Wildtype;
  Subtype subtype = Subtype::Glioblastoma;
  double age_years = 60.0;
  Sex sex = Sex::Male;
  bool left_hemisphere = true;
  bool with_flair = true;
  bool with_cnwm_mask = false;
  bool with_ventricles = true;
  double noise_sd = 3.0;
  std::uint64_t seed = 1;
  std::string cohort = "synthetic";
};

inline constexpr const char* kSyntheticAtlasName = "synthetic_lobes";

/// Bundle built in memory, atlas included.
SubjectBundle make_synthetic_subject(const SyntheticSpec& spec);
VoxelGrid make_synthetic_atlas(const Geometry& geometry);
AtlasConfig synthetic_atlas_config();

/// Specs for an n-subject cohort cycling astro, oligo, gbm.
std::vector<SyntheticSpec> synthetic_cohort_specs(std::size_t n, std::uint64_t seed, Index3 dims = {64, 64, 48});

struct SyntheticCohortFiles {
  std::filesystem::path manifest;
  std::filesystem::path atlas_config;
  std::vector<ManifestRow> rows;
};

/// Writes NIfTI volumes, the atlas and its config, and manifest.csv under `dir`.
SyntheticCohortFiles write_synthetic_cohort(const std::filesystem::path& dir, const std::vector<SyntheticSpec>& specs);

}  // namespace cimllm
