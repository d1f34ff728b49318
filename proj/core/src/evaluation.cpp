#include "cimllm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>

#include "cimllm/error.hpp"

namespace cimllm {

using nlohmann::json;

Interval wilson_interval(std::uint64_t k, std::uint64_t n, double z) {
  if (n == 0) throw Error(ErrorCode::ZeroTrials, "Wilson interval needs n >= 1");
  if (k > n) throw Error(ErrorCode::InvalidArgument, "successes exceed trials");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double hw = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  // the bounds touch 0 and 1 exactly at k == 0 and k == n
  return {k == 0 ? 0.0 : std::clamp(center - hw, 0.0, p), k == n ? 1.0 : std::clamp(center + hw, p, 1.0)};
}

Rate make_rate(std::uint64_t k, std::uint64_t n) {
  Rate r{k, n, std::nullopt, std::nullopt};
  if (n > 0) {
    r.value = static_cast<double>(k) / static_cast<double>(n);
    r.ci = wilson_interval(k, n);
  }
  return r;
}

std::string_view to_string(F1Kind k) noexcept { return k == F1Kind::Macro ? "macro" : "binary"; }

TruthMap truth_from_manifest(const std::vector<ManifestRow>& rows) {
  TruthMap out;
  for (const auto& r : rows) {
    if (!r.idh) continue;
    out[r.subject_id] = GroundTruth{*r.idh, r.subtype, r.cohort};
  }
  return out;
}

std::optional<double> geometric_mean(std::span<const double> recalls) {
  if (recalls.empty()) return std::nullopt;
  double prod = 1.0;
  for (double r : recalls) prod *= r;
  return std::pow(prod, 1.0 / static_cast<double>(recalls.size()));
}

namespace {

std::optional<double> f1_for(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  const std::uint64_t denom = 2 * tp + fp + fn;
  if (denom == 0) return std::nullopt;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

CohortMetrics score_cohort(const std::string& name, const std::vector<PredictionRecord>& records,
                           const TruthMap& truth) {
  if (records.empty()) throw Error(ErrorCode::EmptyCohort, "no records in cohort '" + name + "'");
  CohortMetrics m;
  m.cohort = name;
  std::map<Subtype, std::pair<std::uint64_t, std::uint64_t>> by_subtype;  // (correct, total)
  for (const auto& r : records) {
    const auto it = truth.find(r.subject_id);
    if (it == truth.end()) throw Error(ErrorCode::MissingGroundTruth, "no ground truth for " + r.subject_id);
    const bool positive = it->second.idh == IdhStatus::Mutant;
    if (r.parsed_label == PredictedLabel::Unparseable) ++m.unparseable;
    const bool correct = positive ? r.parsed_label == PredictedLabel::Mutant
                                  : r.parsed_label == PredictedLabel::Wildtype;
    if (positive) {
      (correct ? m.counts.tp : m.counts.fn)++;
    } else {
      (correct ? m.counts.tn : m.counts.fp)++;
    }
    if (it->second.subtype) {
      auto& s = by_subtype[*it->second.subtype];
      s.first += correct ? 1 : 0;
      ++s.second;
    }
  }
  const auto& c = m.counts;
  m.accuracy = make_rate(c.tp + c.tn, c.total());
  m.sensitivity = make_rate(c.tp, c.tp + c.fn);
  m.specificity = make_rate(c.tn, c.tn + c.fp);

  const bool has_pos = c.tp + c.fn > 0;
  const bool has_neg = c.tn + c.fp > 0;
  const auto f1_pos = f1_for(c.tp, c.fp, c.fn);
  const auto f1_neg = f1_for(c.tn, c.fn, c.fp);
  if (has_pos && has_neg) {
    m.f1_kind = F1Kind::Macro;
    double sum = 0.0;
    int defined = 0;
    for (const auto& f : {f1_pos, f1_neg}) {
      if (f) {
        sum += *f;
        ++defined;
      }
    }
    if (defined > 0) m.f1 = sum / defined;
  } else {
    m.f1_kind = F1Kind::Binary;
    m.f1 = has_pos ? f1_pos : f1_neg;
  }

  std::vector<double> recalls;
  for (const auto& [subtype, s] : by_subtype) {
    m.subtype_recall[subtype] = make_rate(s.first, s.second);
    recalls.push_back(*m.subtype_recall[subtype].value);
  }
  m.geometric_mean_recall = geometric_mean(recalls);
  return m;
}

CohortReport cohort_metrics(const std::vector<PredictionRecord>& records, const TruthMap& truth, bool strict) {
  CohortReport report;
  std::vector<PredictionRecord> scored;
  std::map<std::string, std::vector<PredictionRecord>> groups;
  std::set<std::string> seen;
  for (const auto& r : records) {
    const auto it = truth.find(r.subject_id);
    if (it == truth.end()) {
      if (strict) throw Error(ErrorCode::MissingGroundTruth, "no ground truth for " + r.subject_id);
      report.missing_ground_truth.push_back(r.subject_id);
      continue;
    }
    if (!seen.insert(r.subject_id).second) {
      throw Error(ErrorCode::InvalidArgument, "several records for subject " + r.subject_id);
    }
    scored.push_back(r);
    groups[it->second.cohort].push_back(r);
  }
  if (scored.empty()) throw Error(ErrorCode::EmptyCohort, "no scorable records");
  for (const auto& [name, group] : groups) report.cohorts.push_back(score_cohort(name, group, truth));
  report.overall = score_cohort("Overall", scored, truth);
  return report;
}

// ---- rendering ----

namespace {

std::string pct(double v) { return fmt::format("{:.2f}", 100.0 * v); }

std::string opt2(const std::optional<double>& v) { return v ? fmt::format("{:.2f}", *v) : "---"; }

json rate_json(const Rate& r) {
  json j = {{"k", r.k}, {"n", r.n}};
  j["value"] = r.value ? json(*r.value) : json(nullptr);
  j["ci_low"] = r.ci ? json(r.ci->low) : json(nullptr);
  j["ci_high"] = r.ci ? json(r.ci->high) : json(nullptr);
  return j;
}

json metrics_json(const CohortMetrics& m) {
  json subtypes = json::object();
  for (const auto& [s, r] : m.subtype_recall) subtypes[std::string(to_string(s))] = rate_json(r);
  return {{"cohort", m.cohort},
          {"n", m.counts.total()},
          {"confusion", {{"tp", m.counts.tp}, {"fp", m.counts.fp}, {"tn", m.counts.tn}, {"fn", m.counts.fn}}},
          {"accuracy", rate_json(m.accuracy)},
          {"sensitivity", rate_json(m.sensitivity)},
          {"specificity", rate_json(m.specificity)},
          {"f1", m.f1 ? json(*m.f1) : json(nullptr)},
          {"f1_kind", std::string(to_string(m.f1_kind))},
          {"subtype_recall", std::move(subtypes)},
          {"geometric_mean_recall", m.geometric_mean_recall ? json(*m.geometric_mean_recall) : json(nullptr)},
          {"unparseable", m.unparseable},
          {"unparseable_rate", m.unparseable_rate()}};
}

std::string recall_cell(const CohortMetrics& m, Subtype s) {
  const auto it = m.subtype_recall.find(s);
  return it == m.subtype_recall.end() ? "---" : opt2(it->second.value);
}

}  // namespace

std::string format_rate(const Rate& r) {
  if (!r.value) return "---";
  return pct(*r.value) + " (" + pct(r.ci->low) + "\xE2\x80\x93" + pct(r.ci->high) + ")";
}

std::string format_report_table(const CohortReport& report) {
  std::string out = fmt::format("{:<16} {:>5}  {:<22}  {:<22}  {:<22}  {:<14}  {:>11}\n", "Cohort", "N", "Accuracy",
                                "Sensitivity", "Specificity", "F1", "Unparseable");
  auto row = [&](const CohortMetrics& m) {
    const std::string f1 = m.f1 ? pct(*m.f1) + " (" + std::string(to_string(m.f1_kind)) + ")" : "---";
    out += fmt::format("{:<16} {:>5}  {:<22}  {:<22}  {:<22}  {:<14}  {:>11}\n", m.cohort, m.counts.total(),
                       format_rate(m.accuracy), format_rate(m.sensitivity), format_rate(m.specificity), f1,
                       m.unparseable);
  };
  for (const auto& m : report.cohorts) row(m);
  row(report.overall);
  if (!report.missing_ground_truth.empty()) {
    out += fmt::format("excluded (no ground truth): {}\n", report.missing_ground_truth.size());
  }
  return out;
}

std::string report_json(const CohortReport& report) {
  json cohorts = json::array();
  for (const auto& m : report.cohorts) cohorts.push_back(metrics_json(m));
  return json{{"z", kWilsonZ},
              {"overall_aggregation", "pooled"},
              {"cohorts", std::move(cohorts)},
              {"overall", metrics_json(report.overall)},
              {"missing_ground_truth", report.missing_ground_truth}}
      .dump(2);
}

std::string confusion_csv(const CohortReport& report) {
  std::string out = "cohort,tp,fp,tn,fn,unparseable\n";
  auto row = [&](const CohortMetrics& m) {
    out += fmt::format("{},{},{},{},{},{}\n", m.cohort, m.counts.tp, m.counts.fp, m.counts.tn, m.counts.fn,
                       m.unparseable);
  };
  for (const auto& m : report.cohorts) row(m);
  row(report.overall);
  return out;
}

std::vector<AblationRow> ablation_run(const std::vector<SubjectFeatureDocument>& cohort,
                                      const std::vector<AblationSpec>& specs, const TruthMap& truth,
                                      const InferenceConfig& config, const std::vector<PredictionRecord>& existing,
                                      const std::function<void(const PredictionRecord&)>& on_record) {
  config.validate();
  if (cohort.empty()) throw Error(ErrorCode::EmptyCohort, "no documents to ablate");
  for (const auto& d : cohort) {
    if (!truth.contains(d.subject_id)) throw Error(ErrorCode::MissingGroundTruth, "no ground truth for " + d.subject_id);
  }
  std::unordered_map<std::string, const PredictionRecord*> done;
  for (const auto& r : existing) done[r.resume_key()] = &r;

  RateLimiter limiter(config.rate_limit_rps);
  std::vector<AblationRow> rows;
  for (const auto& spec : specs) {
    AblationRow row;
    row.spec = spec;
    std::vector<PredictionJob> jobs;
    for (const auto& doc : cohort) {
      PredictionRecord probe;
      probe.subject_id = doc.subject_id;
      probe.model_name = config.model_name;
      probe.spec_hash = spec.hash();
      probe.schema_version = doc.schema_version;
      if (auto it = done.find(probe.resume_key()); it != done.end()) {
        row.records.push_back(*it->second);
      } else {
        jobs.push_back(make_job(doc, spec));
      }
    }
    auto fresh = predict_all(config, jobs, limiter, on_record);
    row.records.insert(row.records.end(), std::make_move_iterator(fresh.begin()),
                       std::make_move_iterator(fresh.end()));
    std::sort(row.records.begin(), row.records.end(),
              [](const auto& a, const auto& b) { return a.subject_id < b.subject_id; });
    row.metrics = score_cohort(spec.label, row.records, truth);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::string out = fmt::format("{:<26} {:>6} {:>6} {:>6} {:>8}\n", "Configuration", "Astro", "Oligo", "GBM", "GeoMean");
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out += fmt::format("{:<26} {:>6} {:>6} {:>6} {:>8}\n", r.spec.label, recall_cell(m, Subtype::Astrocytoma),
                       recall_cell(m, Subtype::Oligodendroglioma), recall_cell(m, Subtype::Glioblastoma),
                       opt2(m.geometric_mean_recall));
  }
  return out;
}

std::string ablation_json(const std::vector<AblationRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json drop = json::array();
    for (FeatureGroup g : r.spec.drop) drop.push_back(std::string(to_string(g)));
    out.push_back({{"label", r.spec.label},
                   {"drop", std::move(drop)},
                   {"add_clinical", r.spec.add_clinical},
                   {"spec_hash", r.spec.hash()},
                   {"metrics", metrics_json(r.metrics)}});
  }
  return out.dump(2);
}

}  // namespace cimllm
