#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cimllm/llm.hpp"
#include "cimllm/manifest.hpp"
#include "cimllm/schema.hpp"

namespace cimllm {

inline constexpr double kWilsonZ = 1.959964;

struct Interval {
  double low = 0.0;
  double high = 0.0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Wilson score interval for k successes in n trials, clamped to [0, 1].
/// Throws Error(ZeroTrials) for n == 0 and Error(InvalidArgument) for k > n.
Interval wilson_interval(std::uint64_t k, std::uint64_t n, double z = kWilsonZ);

/// Positive class is IDH-mutant.
struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  [[nodiscard]] std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// k/n with its Wilson interval; value and ci are empty when n == 0.
struct Rate {
  std::uint64_t k = 0, n = 0;
  std::optional<double> value;
  std::optional<Interval> ci;
  friend bool operator==(const Rate&, const Rate&) = default;
};
Rate make_rate(std::uint64_t k, std::uint64_t n);

enum class F1Kind { Macro, Binary };
std::string_view to_string(F1Kind k) noexcept;

struct CohortMetrics {
  std::string cohort;
  ConfusionCounts counts;
  Rate accuracy, sensitivity, specificity;
  std::optional<double> f1;
  F1Kind f1_kind = F1Kind::Macro;
  std::map<Subtype, Rate> subtype_recall;  // subtypes present only
  std::optional<double> geometric_mean_recall;
  std::uint64_t unparseable = 0;
  [[nodiscard]] double unparseable_rate() const noexcept {
    return counts.total() ? static_cast<double>(unparseable) / static_cast<double>(counts.total()) : 0.0;
  }
  friend bool operator==(const CohortMetrics&, const CohortMetrics&) = default;
};

struct GroundTruth {
  IdhStatus idh = IdhStatus::Wildtype;
  std::optional<Subtype> subtype;
  std::string cohort = "all";
};
using TruthMap = std::map<std::string, GroundTruth>;
TruthMap truth_from_manifest(const std::vector<ManifestRow>& rows);

struct CohortReport {
  std::vector<CohortMetrics> cohorts;  // sorted by name
  CohortMetrics overall;               // pooled counts over every scored subject
  std::vector<std::string> missing_ground_truth;
};

/// Geometric mean of the given recalls; empty input gives nullopt.
std::optional<double> geometric_mean(std::span<const double> recalls);

/// Scores one group of records. Unparseable predictions count as errors.
/// Throws Error(EmptyCohort) or Error(MissingGroundTruth).
CohortMetrics score_cohort(const std::string& name, const std::vector<PredictionRecord>& records,
                           const TruthMap& truth);

/// Per-cohort and pooled metrics. With `strict`, a record without ground
/// truth throws; otherwise it is excluded and listed in the report.
CohortReport cohort_metrics(const std::vector<PredictionRecord>& records, const TruthMap& truth, bool strict = true);

/// "94.13 (91.54–95.96)", or "---" when undefined.
std::string format_rate(const Rate& r);
std::string format_report_table(const CohortReport& report);
std::string report_json(const CohortReport& report);
std::string confusion_csv(const CohortReport& report);

struct AblationRow {
  AblationSpec spec;
  CohortMetrics metrics;
  std::vector<PredictionRecord> records;
};

/// For each spec: ablate, prompt, query, parse, score. Records in `existing`
/// with a matching resume key are reused instead of re-queried; new records are
/// passed to `on_record` as they complete. Rows follow `specs` order.
std::vector<AblationRow> ablation_run(const std::vector<SubjectFeatureDocument>& cohort,
                                      const std::vector<AblationSpec>& specs, const TruthMap& truth,
                                      const InferenceConfig& config,
                                      const std::vector<PredictionRecord>& existing = {},
                                      const std::function<void(const PredictionRecord&)>& on_record = {});

std::string format_ablation_table(const std::vector<AblationRow>& rows);
std::string ablation_json(const std::vector<AblationRow>& rows);

}  // namespace cimllm
