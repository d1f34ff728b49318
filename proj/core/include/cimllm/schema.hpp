#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cimllm/features.hpp"

namespace cimllm {

inline constexpr std::string_view kSchemaVersion = "cim-llm/1";

enum class FeatureGroup { Location, T2FlairMismatch, MassEffect, TumorMorphology, VolumetricMeasures };

inline constexpr std::array<FeatureGroup, 5> kAllGroups = {
    FeatureGroup::Location, FeatureGroup::T2FlairMismatch, FeatureGroup::MassEffect,
    FeatureGroup::TumorMorphology, FeatureGroup::VolumetricMeasures};

std::string_view to_string(FeatureGroup g) noexcept;
/// Throws Error(UnknownGroupName).
FeatureGroup parse_group(std::string_view name);

struct ClinicalFields {
  std::optional<double> age_years;
  std::optional<Sex> sex;
  friend bool operator==(const ClinicalFields&, const ClinicalFields&) = default;
};

struct AblationRecord {
  std::set<FeatureGroup> removed;
  bool clinical_included = false;
  friend bool operator==(const AblationRecord&, const AblationRecord&) = default;
};

struct Provenance {
  ExtractionParams params;
  std::optional<CnwmSource> cnwm_source;
  std::map<std::string, std::string> null_reasons;
  std::optional<AblationRecord> ablation;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// A group listed in `removed` is absent from the JSON; a group that is not
/// removed but has no value serializes as null.
struct SubjectFeatureDocument {
  std::string schema_version{kSchemaVersion};
  std::string subject_id;
  std::optional<ClinicalFields> clinical;
  std::optional<LocationFeatures> location;
  std::optional<MismatchFeatures> t2_flair_mismatch;
  std::optional<MassEffectFeatures> mass_effect;
  std::optional<MorphologyFeatures> tumor_morphology;
  std::optional<VolumetricFeatures> volumetric_measures;
  std::set<FeatureGroup> removed;
  Provenance provenance;

  [[nodiscard]] bool has_group(FeatureGroup g) const noexcept { return !removed.contains(g); }
  friend bool operator==(const SubjectFeatureDocument&, const SubjectFeatureDocument&) = default;
};

/// Source document for one subject. Clinical fields are always attached here;
/// the prompt configuration decides whether they are shown.
SubjectFeatureDocument make_document(const SubjectBundle& bundle, const SubjectFeatures& features,
                                     const ExtractionParams& params);

/// Rounds every real to the precision used on the wire (6 significant digits).
double quantize(double v);
SubjectFeatureDocument quantized(SubjectFeatureDocument doc);

/// Throws Error(NonFiniteValue).
std::string serialize(const SubjectFeatureDocument& doc);
/// Throws Error(SchemaViolation).
SubjectFeatureDocument parse_document(std::string_view json);

/// Throws Error(UnknownGroupName).
SubjectFeatureDocument apply_ablation(SubjectFeatureDocument doc, const std::set<FeatureGroup>& drop,
                                      bool add_clinical);
SubjectFeatureDocument apply_ablation(SubjectFeatureDocument doc, const std::vector<std::string>& drop,
                                      bool add_clinical);

struct AblationSpec {
  std::string label;
  std::set<FeatureGroup> drop;
  bool add_clinical = false;

  /// Short stable digest of (drop, add_clinical), used as a resume key.
  [[nodiscard]] std::string hash() const;
  friend bool operator==(const AblationSpec&, const AblationSpec&) = default;
};

AblationSpec baseline_spec(bool with_clinical = false);
/// Baseline, each group removed in turn, baseline plus clinical.
std::vector<AblationSpec> default_ablation_specs();
/// JSON list of {label, drop, add_clinical}.
std::vector<AblationSpec> parse_ablation_specs(std::string_view json);

}  // namespace cimllm
