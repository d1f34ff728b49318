#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cimllm/volume.hpp"

namespace cimllm {

enum class Sex { Male, Female };
enum class IdhStatus { Mutant, Wildtype };
enum class Subtype { Astrocytoma, Oligodendroglioma, Glioblastoma };

std::string_view to_string(Sex s) noexcept;
std::string_view to_string(IdhStatus s) noexcept;
std::string_view to_string(Subtype s) noexcept;

/// One row of the cohort manifest. Paths are resolved against the manifest's
/// directory when relative; empty cells stay empty.
struct ManifestRow {
  std::string subject_id;
  std::filesystem::path flair, t1, t1ce, t2, seg, cnwm, vent_left, vent_right;
  std::optional<double> age_years;
  std::optional<Sex> sex;
  std::optional<IdhStatus> idh;
  std::optional<Subtype> subtype;
  /// Optional trailing `cohort` column; rows without it share the cohort "all".
  std::string cohort = "all";
};

inline constexpr std::string_view kManifestHeader =
    "subject_id,flair,t1,t1ce,t2,seg,cnwm,vent_left,vent_right,age,sex,idh,subtype";

/// Parses CSV text. `base_dir` resolves relative paths.
std::vector<ManifestRow> parse_manifest(std::string_view csv, const std::filesystem::path& base_dir = {});
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);
std::string format_manifest(const std::vector<ManifestRow>& rows, bool with_cohort = false);

std::optional<Sex> parse_sex(std::string_view cell);
std::optional<IdhStatus> parse_idh(std::string_view cell);
std::optional<Subtype> parse_subtype(std::string_view cell);

using AtlasSet = std::map<std::string, std::shared_ptr<const VoxelGrid>>;

/// Every grid that one subject contributes to feature extraction. Absent
/// optional inputs are empty optionals, never defaulted grids.
struct SubjectBundle {
  std::string subject_id;
  std::optional<VoxelGrid> flair, t1, t1ce, t2;
  SegmentationMap segmentation;
  AtlasSet atlases;
  std::optional<BinaryMask> cnwm_mask;
  std::optional<std::pair<BinaryMask, BinaryMask>> ventricle_masks;  // (left, right)
  std::optional<double> age_years;
  std::optional<Sex> sex;
  std::optional<IdhStatus> idh_label;
  std::optional<Subtype> subtype;

  [[nodiscard]] const Geometry& geometry() const noexcept { return segmentation.geometry(); }
  [[nodiscard]] bool has_full_battery() const noexcept { return flair && t1 && t1ce && t2; }
};

/// Loads atlas label maps once so they can be shared by every subject.
AtlasSet load_atlases(const std::vector<std::pair<std::string, std::filesystem::path>>& sources);

/// Loads and geometry-checks every grid referenced by `row`. The segmentation
/// is required, as is at least one of FLAIR/T2. Atlases that differ from the
/// subject grid only by an integer voxel offset are padded/cropped; any other
/// mismatch is Error(GeometryMismatch).
SubjectBundle assemble_bundle(const ManifestRow& row, const AtlasSet& atlases = {});

/// Same checks for grids already in memory (used by tests and the synthetic
/// cohort generator).
void validate_bundle(const SubjectBundle& bundle);

BinaryMask mask_from_grid(const VoxelGrid& grid);

}  // namespace cimllm
