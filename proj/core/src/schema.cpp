#include "cimllm/schema.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <initializer_list>

#include <json.hpp>

#include "cimllm/error.hpp"

namespace cimllm {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 5> kGroupNames = {"location", "t2_flair_mismatch", "mass_effect",
                                                         "tumor_morphology", "volumetric_measures"};

[[noreturn]] void violation(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::SchemaViolation, path + ": " + what);
}

json number(double v, const char* field) {
  if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, std::string(field) + " is not finite");
  return quantize(v);
}

json number(const std::optional<double>& v, const char* field) { return v ? number(*v, field) : json(nullptr); }

template <typename T>
json plain(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json overlap_json(const AtlasOverlap& o) {
  json out = json::object();
  for (const auto& [atlas, regions] : o) {
    json r = json::object();
    for (const auto& [name, ov] : regions) {
      r[name] = {{"tumor_in_region", number(ov.tumor_in_region, "tumor_in_region")},
                 {"regional_occupancy", number(ov.regional_occupancy, "regional_occupancy")}};
    }
    out[atlas] = std::move(r);
  }
  return out;
}

json to_json(const LocationFeatures& f) {
  json prox = json::array();
  for (const auto& e : f.eloquent_proximity) {
    prox.push_back({{"region", e.region}, {"distance_mm", number(e.distance_mm, "distance_mm")}});
  }
  return {{"tumor_location", overlap_json(f.tumor_location)},
          {"eloquent_proximity", std::move(prox)},
          {"deep_gray_involved", plain(f.deep_gray_involved)},
          {"bilateral_frontal", plain(f.bilateral_frontal)},
          {"edema_location", f.edema_location ? overlap_json(*f.edema_location) : json(nullptr)}};
}

json to_json(const MismatchFeatures& f) {
  return {{"flair_suppression", plain(f.flair_suppression)},
          {"flair_rim_hyperintensity", plain(f.flair_rim_hyperintensity)},
          {"t2_flair_mismatch_ratio", number(f.t2_flair_mismatch_ratio, "t2_flair_mismatch_ratio")},
          {"cnwm_source", f.cnwm_source ? json(std::string(to_string(*f.cnwm_source))) : json(nullptr)}};
}

json to_json(const MassEffectFeatures& f) {
  return {{"tc_crosses_midline", plain(f.tc_crosses_midline)},
          {"ed_crosses_midline", plain(f.ed_crosses_midline)},
          {"ventricular_asymmetry_index", number(f.ventricular_asymmetry_index, "ventricular_asymmetry_index")}};
}

json to_json(const MorphologyFeatures& f) {
  return {{"tc_hollowness", number(f.tc_hollowness, "tc_hollowness")},
          {"rim_core_adjacency", number(f.rim_core_adjacency, "rim_core_adjacency")},
          {"enhancing_rim_thickness_mm", number(f.enhancing_rim_thickness_mm, "enhancing_rim_thickness_mm")},
          {"et_component_count", plain(f.et_component_count)},
          {"net_component_count", plain(f.net_component_count)},
          {"non_rim_enhancement_fraction", number(f.non_rim_enhancement_fraction, "non_rim_enhancement_fraction")},
          {"sphericity_wt", number(f.sphericity_wt, "sphericity_wt")},
          {"sphericity_tc", number(f.sphericity_tc, "sphericity_tc")},
          {"boundary_sharpness_wt", number(f.boundary_sharpness_wt, "boundary_sharpness_wt")},
          {"boundary_sharpness_tc", number(f.boundary_sharpness_tc, "boundary_sharpness_tc")},
          {"transition_zone_thickness_mm",
           number(f.transition_zone_thickness_mm, "transition_zone_thickness_mm")}};
}

json to_json(const VolumetricFeatures& f) {
  return {{"vol_wt_ml", number(f.vol_wt_ml, "vol_wt_ml")},
          {"vol_net_ml", number(f.vol_net_ml, "vol_net_ml")},
          {"vol_et_ml", number(f.vol_et_ml, "vol_et_ml")},
          {"vol_ed_ml", number(f.vol_ed_ml, "vol_ed_ml")},
          {"frac_net_of_wt", number(f.frac_net_of_wt, "frac_net_of_wt")},
          {"frac_et_of_wt", number(f.frac_et_of_wt, "frac_et_of_wt")},
          {"frac_et_of_tc", number(f.frac_et_of_tc, "frac_et_of_tc")},
          {"edema_to_net_ratio", number(f.edema_to_net_ratio, "edema_to_net_ratio")},
          {"edema_to_tc_ratio", number(f.edema_to_tc_ratio, "edema_to_tc_ratio")},
          {"edema_extent_median_mm", number(f.edema_extent_median_mm, "edema_extent_median_mm")},
          {"edema_extent_p95_mm", number(f.edema_extent_p95_mm, "edema_extent_p95_mm")}};
}

json provenance_json(const Provenance& p) {
  const ExtractionParams& x = p.params;
  json out;
  out["extraction_parameters"] = {{"rim_shell_mm", number(x.rim_shell_mm, "rim_shell_mm")},
                                  {"midline_deadband_mm", number(x.midline_deadband_mm, "midline_deadband_mm")},
                                  {"cnwm_exclusion_mm", number(x.cnwm_exclusion_mm, "cnwm_exclusion_mm")},
                                  {"max_transition_rays", x.max_transition_rays},
                                  {"ray_step_mm", number(x.ray_step_mm, "ray_step_mm")},
                                  {"ray_max_mm", number(x.ray_max_mm, "ray_max_mm")},
                                  {"transition_upper", number(x.transition_upper, "transition_upper")},
                                  {"transition_lower", number(x.transition_lower, "transition_lower")},
                                  {"seed", x.seed}};
  out["min_voxels"] = {{"component", x.min_component_voxels},
                       {"tiny_net", x.tiny_net_voxels},
                       {"involvement", x.involvement_min_voxels},
                       {"midline", x.midline_min_voxels}};
  out["thresholds"] = {{"ratio", number(x.thresholds.ratio, "ratio")},
                       {"homogeneity_cv", number(x.thresholds.homogeneity_cv, "homogeneity_cv")},
                       {"suppression", number(x.thresholds.suppression, "suppression")},
                       {"rim", number(x.thresholds.rim, "rim")}};
  out["cnwm_source"] = p.cnwm_source ? json(std::string(to_string(*p.cnwm_source))) : json(nullptr);
  out["null_reasons"] = p.null_reasons;
  if (p.ablation) {
    json removed = json::array();
    for (FeatureGroup g : p.ablation->removed) removed.push_back(std::string(to_string(g)));
    out["ablation"] = {{"semantics", "removed"},
                       {"removed_groups", std::move(removed)},
                       {"clinical_included", p.ablation->clinical_included}};
  } else {
    out["ablation"] = nullptr;
  }
  return out;
}

// Strict readers: every object must carry exactly the expected keys.

void expect_keys(const json& obj, std::initializer_list<std::string_view> keys, const std::string& path) {
  if (!obj.is_object()) violation(path, "expected an object");
  for (const auto& [k, _] : obj.items()) {
    bool known = false;
    for (auto key : keys) known = known || key == k;
    if (!known) violation(path, "unknown key '" + k + "'");
  }
  for (auto key : keys) {
    if (!obj.contains(key)) violation(path, "missing key '" + std::string(key) + "'");
  }
}

double read_number(const json& j, const std::string& path) {
  if (!j.is_number()) violation(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) violation(path, "non-finite number");
  return v;
}

std::optional<double> read_opt_number(const json& j, const std::string& path) {
  if (j.is_null()) return std::nullopt;
  return read_number(j, path);
}

std::optional<bool> read_opt_bool(const json& j, const std::string& path) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_boolean()) violation(path, "expected a boolean");
  return j.get<bool>();
}

std::uint64_t read_count(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
    violation(path, "expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

std::optional<std::int64_t> read_opt_int(const json& j, const std::string& path) {
  if (j.is_null()) return std::nullopt;
  return static_cast<std::int64_t>(read_count(j, path));
}

std::string read_string(const json& j, const std::string& path) {
  if (!j.is_string()) violation(path, "expected a string");
  return j.get<std::string>();
}

std::optional<CnwmSource> read_cnwm(const json& j, const std::string& path) {
  if (j.is_null()) return std::nullopt;
  const std::string s = read_string(j, path);
  if (s == to_string(CnwmSource::ProvidedMask)) return CnwmSource::ProvidedMask;
  if (s == to_string(CnwmSource::MirrorFallback)) return CnwmSource::MirrorFallback;
  violation(path, "unknown cnwm source '" + s + "'");
}

AtlasOverlap read_overlap(const json& j, const std::string& path) {
  if (!j.is_object()) violation(path, "expected an object");
  AtlasOverlap out;
  for (const auto& [atlas, regions] : j.items()) {
    const std::string ap = path + "." + atlas;
    if (!regions.is_object()) violation(ap, "expected an object");
    auto& dst = out[atlas];
    for (const auto& [name, ov] : regions.items()) {
      const std::string rp = ap + "." + name;
      expect_keys(ov, {"tumor_in_region", "regional_occupancy"}, rp);
      dst[name] = {read_number(ov["tumor_in_region"], rp + ".tumor_in_region"),
                   read_number(ov["regional_occupancy"], rp + ".regional_occupancy")};
    }
  }
  return out;
}

LocationFeatures read_location(const json& j) {
  const std::string p = "location";
  expect_keys(j, {"tumor_location", "eloquent_proximity", "deep_gray_involved", "bilateral_frontal", "edema_location"},
              p);
  LocationFeatures f;
  f.tumor_location = read_overlap(j["tumor_location"], p + ".tumor_location");
  const json& prox = j["eloquent_proximity"];
  if (!prox.is_array()) violation(p + ".eloquent_proximity", "expected an array");
  for (const auto& e : prox) {
    expect_keys(e, {"region", "distance_mm"}, p + ".eloquent_proximity[]");
    f.eloquent_proximity.push_back({read_string(e["region"], p + ".eloquent_proximity[].region"),
                                    read_number(e["distance_mm"], p + ".eloquent_proximity[].distance_mm")});
  }
  f.deep_gray_involved = read_opt_bool(j["deep_gray_involved"], p + ".deep_gray_involved");
  f.bilateral_frontal = read_opt_bool(j["bilateral_frontal"], p + ".bilateral_frontal");
  if (!j["edema_location"].is_null()) f.edema_location = read_overlap(j["edema_location"], p + ".edema_location");
  return f;
}

MismatchFeatures read_mismatch(const json& j) {
  const std::string p = "t2_flair_mismatch";
  expect_keys(j, {"flair_suppression", "flair_rim_hyperintensity", "t2_flair_mismatch_ratio", "cnwm_source"}, p);
  MismatchFeatures f;
  f.flair_suppression = read_opt_bool(j["flair_suppression"], p + ".flair_suppression");
  f.flair_rim_hyperintensity = read_opt_bool(j["flair_rim_hyperintensity"], p + ".flair_rim_hyperintensity");
  f.t2_flair_mismatch_ratio = read_opt_number(j["t2_flair_mismatch_ratio"], p + ".t2_flair_mismatch_ratio");
  f.cnwm_source = read_cnwm(j["cnwm_source"], p + ".cnwm_source");
  return f;
}

MassEffectFeatures read_mass_effect(const json& j) {
  const std::string p = "mass_effect";
  expect_keys(j, {"tc_crosses_midline", "ed_crosses_midline", "ventricular_asymmetry_index"}, p);
  MassEffectFeatures f;
  f.tc_crosses_midline = read_opt_bool(j["tc_crosses_midline"], p + ".tc_crosses_midline");
  f.ed_crosses_midline = read_opt_bool(j["ed_crosses_midline"], p + ".ed_crosses_midline");
  f.ventricular_asymmetry_index =
      read_opt_number(j["ventricular_asymmetry_index"], p + ".ventricular_asymmetry_index");
  return f;
}

MorphologyFeatures read_morphology(const json& j) {
  const std::string p = "tumor_morphology";
  expect_keys(j,
              {"tc_hollowness", "rim_core_adjacency", "enhancing_rim_thickness_mm", "et_component_count",
               "net_component_count", "non_rim_enhancement_fraction", "sphericity_wt", "sphericity_tc",
               "boundary_sharpness_wt", "boundary_sharpness_tc", "transition_zone_thickness_mm"},
              p);
  MorphologyFeatures f;
  f.tc_hollowness = read_opt_number(j["tc_hollowness"], p);
  f.rim_core_adjacency = read_opt_number(j["rim_core_adjacency"], p);
  f.enhancing_rim_thickness_mm = read_opt_number(j["enhancing_rim_thickness_mm"], p);
  f.et_component_count = read_opt_int(j["et_component_count"], p + ".et_component_count");
  f.net_component_count = read_opt_int(j["net_component_count"], p + ".net_component_count");
  f.non_rim_enhancement_fraction = read_opt_number(j["non_rim_enhancement_fraction"], p);
  f.sphericity_wt = read_opt_number(j["sphericity_wt"], p);
  f.sphericity_tc = read_opt_number(j["sphericity_tc"], p);
  f.boundary_sharpness_wt = read_opt_number(j["boundary_sharpness_wt"], p);
  f.boundary_sharpness_tc = read_opt_number(j["boundary_sharpness_tc"], p);
  f.transition_zone_thickness_mm = read_opt_number(j["transition_zone_thickness_mm"], p);
  return f;
}

VolumetricFeatures read_volumetrics(const json& j) {
  const std::string p = "volumetric_measures";
  expect_keys(j,
              {"vol_wt_ml", "vol_net_ml", "vol_et_ml", "vol_ed_ml", "frac_net_of_wt", "frac_et_of_wt",
               "frac_et_of_tc", "edema_to_net_ratio", "edema_to_tc_ratio", "edema_extent_median_mm",
               "edema_extent_p95_mm"},
              p);
  VolumetricFeatures f;
  f.vol_wt_ml = read_number(j["vol_wt_ml"], p + ".vol_wt_ml");
  f.vol_net_ml = read_number(j["vol_net_ml"], p + ".vol_net_ml");
  f.vol_et_ml = read_number(j["vol_et_ml"], p + ".vol_et_ml");
  f.vol_ed_ml = read_number(j["vol_ed_ml"], p + ".vol_ed_ml");
  f.frac_net_of_wt = read_opt_number(j["frac_net_of_wt"], p);
  f.frac_et_of_wt = read_opt_number(j["frac_et_of_wt"], p);
  f.frac_et_of_tc = read_opt_number(j["frac_et_of_tc"], p);
  f.edema_to_net_ratio = read_opt_number(j["edema_to_net_ratio"], p);
  f.edema_to_tc_ratio = read_opt_number(j["edema_to_tc_ratio"], p);
  f.edema_extent_median_mm = read_opt_number(j["edema_extent_median_mm"], p);
  f.edema_extent_p95_mm = read_opt_number(j["edema_extent_p95_mm"], p);
  return f;
}

Provenance read_provenance(const json& j) {
  const std::string p = "provenance";
  expect_keys(j, {"extraction_parameters", "min_voxels", "thresholds", "cnwm_source", "null_reasons", "ablation"}, p);
  Provenance out;
  ExtractionParams& x = out.params;
  const json& e = j["extraction_parameters"];
  const std::string ep = p + ".extraction_parameters";
  expect_keys(e,
              {"rim_shell_mm", "midline_deadband_mm", "cnwm_exclusion_mm", "max_transition_rays", "ray_step_mm",
               "ray_max_mm", "transition_upper", "transition_lower", "seed"},
              ep);
  x.rim_shell_mm = read_number(e["rim_shell_mm"], ep);
  x.midline_deadband_mm = read_number(e["midline_deadband_mm"], ep);
  x.cnwm_exclusion_mm = read_number(e["cnwm_exclusion_mm"], ep);
  x.max_transition_rays = read_count(e["max_transition_rays"], ep);
  x.ray_step_mm = read_number(e["ray_step_mm"], ep);
  x.ray_max_mm = read_number(e["ray_max_mm"], ep);
  x.transition_upper = read_number(e["transition_upper"], ep);
  x.transition_lower = read_number(e["transition_lower"], ep);
  x.seed = read_count(e["seed"], ep);

  const json& m = j["min_voxels"];
  expect_keys(m, {"component", "tiny_net", "involvement", "midline"}, p + ".min_voxels");
  x.min_component_voxels = read_count(m["component"], p + ".min_voxels");
  x.tiny_net_voxels = read_count(m["tiny_net"], p + ".min_voxels");
  x.involvement_min_voxels = read_count(m["involvement"], p + ".min_voxels");
  x.midline_min_voxels = read_count(m["midline"], p + ".min_voxels");

  const json& t = j["thresholds"];
  expect_keys(t, {"ratio", "homogeneity_cv", "suppression", "rim"}, p + ".thresholds");
  x.thresholds.ratio = read_number(t["ratio"], p + ".thresholds");
  x.thresholds.homogeneity_cv = read_number(t["homogeneity_cv"], p + ".thresholds");
  x.thresholds.suppression = read_number(t["suppression"], p + ".thresholds");
  x.thresholds.rim = read_number(t["rim"], p + ".thresholds");

  out.cnwm_source = read_cnwm(j["cnwm_source"], p + ".cnwm_source");
  const json& nr = j["null_reasons"];
  if (!nr.is_object()) violation(p + ".null_reasons", "expected an object");
  for (const auto& [k, v] : nr.items()) out.null_reasons[k] = read_string(v, p + ".null_reasons." + k);

  const json& a = j["ablation"];
  if (!a.is_null()) {
    const std::string ap = p + ".ablation";
    expect_keys(a, {"semantics", "removed_groups", "clinical_included"}, ap);
    if (read_string(a["semantics"], ap + ".semantics") != "removed") violation(ap, "unsupported semantics");
    if (!a["removed_groups"].is_array()) violation(ap + ".removed_groups", "expected an array");
    AblationRecord rec;
    for (const auto& g : a["removed_groups"]) {
      try {
        rec.removed.insert(parse_group(read_string(g, ap + ".removed_groups[]")));
      } catch (const Error& err) {
        violation(ap + ".removed_groups", err.what());
      }
    }
    if (!a["clinical_included"].is_boolean()) violation(ap + ".clinical_included", "expected a boolean");
    rec.clinical_included = a["clinical_included"].get<bool>();
    out.ablation = std::move(rec);
  }
  return out;
}

template <typename T>
void quantize_opt(std::optional<T>& v) {
  if (v) *v = quantize(*v);
}

void quantize_overlap(AtlasOverlap& o) {
  for (auto& [_, regions] : o) {
    for (auto& [__, ov] : regions) {
      ov.tumor_in_region = quantize(ov.tumor_in_region);
      ov.regional_occupancy = quantize(ov.regional_occupancy);
    }
  }
}

}  // namespace

std::string_view to_string(FeatureGroup g) noexcept { return kGroupNames[static_cast<std::size_t>(g)]; }

FeatureGroup parse_group(std::string_view name) {
  for (std::size_t i = 0; i < kGroupNames.size(); ++i) {
    if (kGroupNames[i] == name) return static_cast<FeatureGroup>(i);
  }
  throw Error(ErrorCode::UnknownGroupName, "unknown feature group '" + std::string(name) + "'");
}

double quantize(double v) {
  if (!std::isfinite(v)) return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  const double q = std::strtod(buf, nullptr);
  return q == 0.0 ? 0.0 : q;
}

SubjectFeatureDocument quantized(SubjectFeatureDocument d) {
  if (d.clinical) quantize_opt(d.clinical->age_years);
  if (d.location) {
    quantize_overlap(d.location->tumor_location);
    if (d.location->edema_location) quantize_overlap(*d.location->edema_location);
    for (auto& e : d.location->eloquent_proximity) e.distance_mm = quantize(e.distance_mm);
  }
  if (d.t2_flair_mismatch) quantize_opt(d.t2_flair_mismatch->t2_flair_mismatch_ratio);
  if (d.mass_effect) quantize_opt(d.mass_effect->ventricular_asymmetry_index);
  if (auto& m = d.tumor_morphology) {
    for (auto* v : {&m->tc_hollowness, &m->rim_core_adjacency, &m->enhancing_rim_thickness_mm,
                    &m->non_rim_enhancement_fraction, &m->sphericity_wt, &m->sphericity_tc,
                    &m->boundary_sharpness_wt, &m->boundary_sharpness_tc, &m->transition_zone_thickness_mm}) {
      quantize_opt(*v);
    }
  }
  if (auto& v = d.volumetric_measures) {
    for (auto* x : {&v->vol_wt_ml, &v->vol_net_ml, &v->vol_et_ml, &v->vol_ed_ml}) *x = quantize(*x);
    for (auto* x : {&v->frac_net_of_wt, &v->frac_et_of_wt, &v->frac_et_of_tc, &v->edema_to_net_ratio,
                    &v->edema_to_tc_ratio, &v->edema_extent_median_mm, &v->edema_extent_p95_mm}) {
      quantize_opt(*x);
    }
  }
  ExtractionParams& x = d.provenance.params;
  for (auto* r : {&x.rim_shell_mm, &x.midline_deadband_mm, &x.cnwm_exclusion_mm, &x.ray_step_mm, &x.ray_max_mm,
                  &x.transition_upper, &x.transition_lower, &x.thresholds.ratio, &x.thresholds.homogeneity_cv,
                  &x.thresholds.suppression, &x.thresholds.rim}) {
    *r = quantize(*r);
  }
  return d;
}

SubjectFeatureDocument make_document(const SubjectBundle& bundle, const SubjectFeatures& features,
                                     const ExtractionParams& params) {
  SubjectFeatureDocument d;
  d.subject_id = bundle.subject_id;
  d.clinical = ClinicalFields{bundle.age_years, bundle.sex};
  d.location = features.location;
  d.t2_flair_mismatch = features.mismatch;
  d.mass_effect = features.mass_effect;
  d.tumor_morphology = features.morphology;
  d.volumetric_measures = features.volumetrics;
  d.provenance.params = params;
  if (features.mismatch) d.provenance.cnwm_source = features.mismatch->cnwm_source;
  d.provenance.null_reasons = features.null_reasons;
  return quantized(std::move(d));
}

std::string serialize(const SubjectFeatureDocument& d) {
  json out;
  out["schema_version"] = d.schema_version;
  out["subject_id"] = d.subject_id;
  if (d.clinical) {
    out["clinical"] = {{"age_years", number(d.clinical->age_years, "age_years")},
                       {"sex", d.clinical->sex ? json(std::string(to_string(*d.clinical->sex))) : json(nullptr)}};
  }
  auto group = [&](FeatureGroup g, const auto& value) {
    if (!d.has_group(g)) return;
    out[std::string(to_string(g))] = value ? to_json(*value) : json(nullptr);
  };
  group(FeatureGroup::Location, d.location);
  group(FeatureGroup::T2FlairMismatch, d.t2_flair_mismatch);
  group(FeatureGroup::MassEffect, d.mass_effect);
  group(FeatureGroup::TumorMorphology, d.tumor_morphology);
  group(FeatureGroup::VolumetricMeasures, d.volumetric_measures);
  out["provenance"] = provenance_json(d.provenance);
  return out.dump(2);
}

SubjectFeatureDocument parse_document(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) violation("$", "not valid JSON");
  if (!j.is_object()) violation("$", "expected an object");
  for (const auto& [k, _] : j.items()) {
    if (k == "schema_version" || k == "subject_id" || k == "clinical" || k == "provenance") continue;
    try {
      parse_group(k);
    } catch (const Error&) {
      violation("$", "unknown key '" + k + "'");
    }
  }
  for (const char* required : {"schema_version", "subject_id", "provenance"}) {
    if (!j.contains(required)) violation("$", std::string("missing key '") + required + "'");
  }
  SubjectFeatureDocument d;
  d.schema_version = read_string(j["schema_version"], "schema_version");
  if (d.schema_version != kSchemaVersion) violation("schema_version", "unsupported version '" + d.schema_version + "'");
  d.subject_id = read_string(j["subject_id"], "subject_id");
  if (j.contains("clinical")) {
    const json& c = j["clinical"];
    expect_keys(c, {"age_years", "sex"}, "clinical");
    ClinicalFields cf;
    cf.age_years = read_opt_number(c["age_years"], "clinical.age_years");
    if (!c["sex"].is_null()) {
      const std::string s = read_string(c["sex"], "clinical.sex");
      if (s == to_string(Sex::Male)) {
        cf.sex = Sex::Male;
      } else if (s == to_string(Sex::Female)) {
        cf.sex = Sex::Female;
      } else {
        violation("clinical.sex", "expected 'male' or 'female'");
      }
    }
    d.clinical = cf;
  }
  for (FeatureGroup g : kAllGroups) {
    const std::string key(to_string(g));
    if (!j.contains(key)) {
      d.removed.insert(g);
      continue;
    }
    const json& v = j[key];
    if (v.is_null()) continue;
    switch (g) {
      case FeatureGroup::Location: d.location = read_location(v); break;
      case FeatureGroup::T2FlairMismatch: d.t2_flair_mismatch = read_mismatch(v); break;
      case FeatureGroup::MassEffect: d.mass_effect = read_mass_effect(v); break;
      case FeatureGroup::TumorMorphology: d.tumor_morphology = read_morphology(v); break;
      case FeatureGroup::VolumetricMeasures: d.volumetric_measures = read_volumetrics(v); break;
    }
  }
  d.provenance = read_provenance(j["provenance"]);
  return d;
}

SubjectFeatureDocument apply_ablation(SubjectFeatureDocument d, const std::set<FeatureGroup>& drop,
                                      bool add_clinical) {
  for (FeatureGroup g : drop) {
    d.removed.insert(g);
    switch (g) {
      case FeatureGroup::Location: d.location.reset(); break;
      case FeatureGroup::T2FlairMismatch: d.t2_flair_mismatch.reset(); break;
      case FeatureGroup::MassEffect: d.mass_effect.reset(); break;
      case FeatureGroup::TumorMorphology: d.tumor_morphology.reset(); break;
      case FeatureGroup::VolumetricMeasures: d.volumetric_measures.reset(); break;
    }
  }
  if (add_clinical) {
    if (!d.clinical) d.clinical = ClinicalFields{};
  } else {
    d.clinical.reset();
  }
  d.provenance.ablation = AblationRecord{d.removed, add_clinical};
  return d;
}

SubjectFeatureDocument apply_ablation(SubjectFeatureDocument d, const std::vector<std::string>& drop,
                                      bool add_clinical) {
  std::set<FeatureGroup> groups;
  for (const auto& name : drop) groups.insert(parse_group(name));
  return apply_ablation(std::move(d), groups, add_clinical);
}

std::string AblationSpec::hash() const {
  std::string canon = "drop=";
  for (FeatureGroup g : drop) {
    canon += to_string(g);
    canon += ',';
  }
  canon += add_clinical ? ";clinical=1" : ";clinical=0";
  std::uint64_t h = 14695981039346656037ULL;  // FNV-1a
  for (unsigned char c : canon) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

AblationSpec baseline_spec(bool with_clinical) {
  return with_clinical ? AblationSpec{"Baseline + Clinical", {}, true} : AblationSpec{"Baseline", {}, false};
}

std::vector<AblationSpec> default_ablation_specs() {
  return {
      baseline_spec(false),
      {"-- Volumetric Measures", {FeatureGroup::VolumetricMeasures}, false},
      {"-- Location Features", {FeatureGroup::Location}, false},
      {"-- Mass Effect", {FeatureGroup::MassEffect}, false},
      {"-- T2-FLAIR Mismatch", {FeatureGroup::T2FlairMismatch}, false},
      {"-- Tumor Morphology", {FeatureGroup::TumorMorphology}, false},
      baseline_spec(true),
  };
}

std::vector<AblationSpec> parse_ablation_specs(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_array()) throw Error(ErrorCode::ConfigFormat, "ablation specs must be a JSON array");
  std::vector<AblationSpec> out;
  for (const auto& s : j) {
    if (!s.is_object() || !s.contains("label") || !s["label"].is_string()) {
      throw Error(ErrorCode::ConfigFormat, "each ablation spec needs a string 'label'");
    }
    for (const auto& [k, _] : s.items()) {
      if (k != "label" && k != "drop" && k != "add_clinical") {
        throw Error(ErrorCode::ConfigFormat, "unknown ablation spec key '" + k + "'");
      }
    }
    AblationSpec spec;
    spec.label = s["label"].get<std::string>();
    if (s.contains("drop")) {
      if (!s["drop"].is_array()) throw Error(ErrorCode::ConfigFormat, "'drop' must be an array");
      for (const auto& g : s["drop"]) {
        if (!g.is_string()) throw Error(ErrorCode::ConfigFormat, "'drop' entries must be strings");
        spec.drop.insert(parse_group(g.get<std::string>()));
      }
    }
    if (s.contains("add_clinical")) {
      if (!s["add_clinical"].is_boolean()) throw Error(ErrorCode::ConfigFormat, "'add_clinical' must be a boolean");
      spec.add_clinical = s["add_clinical"].get<bool>();
    }
    out.push_back(std::move(spec));
  }
  return out;
}

}  // namespace cimllm
