#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "cimllm/error.hpp"
#include "cimllm/evaluation.hpp"
#include "cimllm/llm.hpp"
#include "cimllm/manifest.hpp"
#include "cimllm/mock_llm.hpp"
#include "cimllm/schema.hpp"
#include "cimllm/synthetic.hpp"

namespace cimllm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Whole-file replace via a sibling temp file so readers never see a partial file.
void write_text(const fs::path& path, std::string_view text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void refuse_overwrite(const std::vector<fs::path>& targets, bool force) {
  if (force) return;
  for (const auto& t : targets) {
    if (fs::exists(t)) {
      throw Error(ErrorCode::InvalidArgument, t.string() + " already exists; pass --force to overwrite");
    }
  }
}

std::vector<SubjectFeatureDocument> load_documents(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SubjectFeatureDocument> docs;
  std::set<std::string> ids;
  for (const auto& f : files) {
    try {
      docs.push_back(parse_document(read_text(f)));
    } catch (const Error& e) {
      throw Error(e.code(), f.filename().string() + ": " + e.what());
    }
    if (!ids.insert(docs.back().subject_id).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate subject id " + docs.back().subject_id + " in " + dir.string());
    }
  }
  if (docs.empty()) throw Error(ErrorCode::EmptyCohort, "no documents in " + dir.string());
  return docs;
}

/// Reads an existing JSON-lines file, drops an interrupted final line, and
/// rewrites the file so that appends start on a clean line.
std::vector<PredictionRecord> resume_records(const fs::path& path, bool force) {
  if (!fs::exists(path)) return {};
  if (force) {
    fs::remove(path);
    return {};
  }
  auto records = read_records(path);
  std::string text;
  for (const auto& r : records) text += to_json_line(r) + "\n";
  write_text(path, text);
  return records;
}

class RecordAppender {
 public:
  explicit RecordAppender(const fs::path& path) : out_(path, std::ios::binary | std::ios::app) {
    if (!out_) throw Error(ErrorCode::Io, "cannot append to " + path.string());
  }
  void operator()(const PredictionRecord& r) {
    out_ << to_json_line(r) << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

AblationSpec spec_from_flags(const std::vector<std::string>& drop, bool with_clinical) {
  AblationSpec spec = baseline_spec(with_clinical);
  for (const auto& g : drop) spec.drop.insert(parse_group(g));
  if (!spec.drop.empty()) {
    std::string label = "--";
    for (FeatureGroup g : spec.drop) label += " " + std::string(to_string(g));
    if (with_clinical) label += " + clinical";
    spec.label = label;
  }
  return spec;
}

InferenceConfig inference_config(const std::string& path, const std::string& endpoint, const std::string& model,
                                 int parallel) {
  InferenceConfig c = path.empty() ? InferenceConfig{} : load_inference_config(path);
  if (!endpoint.empty()) c.endpoint_url = endpoint;
  if (!model.empty()) c.model_name = model;
  if (parallel > 0) c.parallelism = parallel;
  c.validate();
  return c;
}

std::size_t null_group_count(const SubjectFeatures& f) {
  return static_cast<std::size_t>(!f.location) + !f.mismatch + !f.mass_effect + !f.morphology + !f.volumetrics;
}

// ---- commands ----

struct ExtractOptions {
  std::string manifest, out, config, params;
  int parallel = 1;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

int cmd_extract(const ExtractOptions& o, std::ostream& out, std::ostream& err) {
  const auto rows = read_manifest(o.manifest);
  if (rows.empty()) throw Error(ErrorCode::EmptyCohort, "manifest lists no subjects");
  std::set<std::string> ids;
  for (const auto& r : rows) {
    if (!ids.insert(r.subject_id).second) throw Error(ErrorCode::ManifestFormat, "duplicate subject id " + r.subject_id);
  }
  AtlasConfig config;
  AtlasSet atlases;
  if (!o.config.empty()) {
    config = load_atlas_config(o.config);
    atlases = load_atlases(config.image_sources());
  }
  ExtractionParams params = o.params.empty() ? ExtractionParams{} : parse_extraction_params(read_text(o.params));
  if (o.seed) params.seed = *o.seed;

  const fs::path dir(o.out);
  fs::create_directories(dir);
  std::vector<fs::path> targets{dir / "extract_summary.csv"};
  for (const auto& r : rows) targets.push_back(dir / (r.subject_id + ".json"));
  refuse_overwrite(targets, o.force);

  struct Outcome {
    bool ok = false;
    std::size_t null_groups = 0;
    double wall_s = 0.0;
    std::string error;
  };
  std::vector<Outcome> outcomes(rows.size());
  std::atomic<std::size_t> next{0};
  std::mutex log;
  auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      const auto t0 = std::chrono::steady_clock::now();
      Outcome& res = outcomes[i];
      try {
        const SubjectBundle bundle = assemble_bundle(rows[i], atlases);
        const SubjectFeatures features = extract_features(bundle, config, params);
        const SubjectFeatureDocument doc = make_document(bundle, features, params);
        write_text(dir / (rows[i].subject_id + ".json"), serialize(doc) + "\n");
        res.ok = true;
        res.null_groups = null_group_count(features);
      } catch (const std::exception& e) {
        res.error = e.what();
      }
      res.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::lock_guard lock(log);
      if (res.ok) {
        fmt::print(out, "{}: ok ({} null groups, {:.2f} s)\n", rows[i].subject_id, res.null_groups, res.wall_s);
      } else {
        fmt::print(err, "{}: failed: {}\n", rows[i].subject_id, res.error);
      }
    }
  };
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, o.parallel)), rows.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::string csv = "subject_id,status,null_groups,wall_s,error\n";
  std::size_t failed = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = outcomes[i];
    failed += r.ok ? 0 : 1;
    std::string error = r.error;
    std::replace(error.begin(), error.end(), '"', '\'');
    csv += fmt::format("{},{},{},{:.3f},\"{}\"\n", rows[i].subject_id, r.ok ? "ok" : "failed", r.null_groups,
                       r.wall_s, error);
  }
  write_text(dir / "extract_summary.csv", csv);
  fmt::print(out, "extracted {}/{} subjects into {}\n", rows.size() - failed, rows.size(), dir.string());
  return failed == 0 ? 0 : 1;
}

struct PredictOptions {
  std::string docs, out, config, endpoint, model;
  std::vector<std::string> drop;
  bool with_clinical = false;
  int parallel = 0;
  bool force = false;
};

int cmd_predict(const PredictOptions& o, std::ostream& out, std::ostream& err) {
  const auto docs = load_documents(o.docs);
  const InferenceConfig config = inference_config(o.config, o.endpoint, o.model, o.parallel);
  const AblationSpec spec = spec_from_flags(o.drop, o.with_clinical);
  const fs::path path(o.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto existing = resume_records(path, o.force);
  std::set<std::string> done;
  for (const auto& r : existing) done.insert(r.resume_key());

  std::vector<PredictionJob> jobs;
  for (const auto& d : docs) {
    PredictionRecord probe;
    probe.subject_id = d.subject_id;
    probe.model_name = config.model_name;
    probe.spec_hash = spec.hash();
    probe.schema_version = d.schema_version;
    if (!done.contains(probe.resume_key())) jobs.push_back(make_job(d, spec));
  }
  RecordAppender append(path);
  RateLimiter limiter(config.rate_limit_rps);
  const auto records = predict_all(config, jobs, limiter, [&](const PredictionRecord& r) { append(r); });
  std::size_t errors = 0, unparseable = 0;
  for (const auto& r : records) {
    if (r.error) {
      ++errors;
      fmt::print(err, "{}: {}\n", r.subject_id, *r.error);
    }
    if (r.parsed_label == PredictedLabel::Unparseable) ++unparseable;
  }
  fmt::print(out, "predict: {} documents, {} already done, {} queried, {} errors, {} unparseable\n", docs.size(),
             docs.size() - jobs.size(), jobs.size(), errors, unparseable);
  return (!records.empty() && errors == records.size()) ? 1 : 0;
}

struct EvaluateOptions {
  std::string predictions, manifest, out;
  bool force = false;
};

int cmd_evaluate(const EvaluateOptions& o, std::ostream& out, std::ostream& err) {
  const auto records = read_records(o.predictions);
  const TruthMap truth = truth_from_manifest(read_manifest(o.manifest));
  const CohortReport report = cohort_metrics(records, truth, false);
  if (!report.missing_ground_truth.empty()) {
    fmt::print(err, "warning: {} subjects without ground truth were excluded\n", report.missing_ground_truth.size());
  }
  const std::string table = format_report_table(report);
  if (!o.out.empty()) {
    const fs::path dir(o.out);
    fs::create_directories(dir);
    refuse_overwrite({dir / "report.json", dir / "report.txt", dir / "confusion.csv"}, o.force);
    write_text(dir / "report.json", report_json(report) + "\n");
    write_text(dir / "report.txt", table);
    write_text(dir / "confusion.csv", confusion_csv(report));
  }
  out << table;
  return 0;
}

struct AblateOptions {
  std::string manifest, docs, out, config, specs, endpoint, model;
  std::vector<std::string> drop;
  bool with_clinical = false;
  int parallel = 0;
  bool force = false;
};

int cmd_ablate(const AblateOptions& o, std::ostream& out, std::ostream& err) {
  const auto docs = load_documents(o.docs);
  const TruthMap truth = truth_from_manifest(read_manifest(o.manifest));
  const InferenceConfig config = inference_config(o.config, o.endpoint, o.model, o.parallel);
  std::vector<AblationSpec> specs;
  if (!o.specs.empty()) {
    specs = parse_ablation_specs(read_text(o.specs));
  } else if (!o.drop.empty() || o.with_clinical) {
    specs = {spec_from_flags(o.drop, o.with_clinical)};
  } else {
    specs = default_ablation_specs();
  }
  const fs::path dir(o.out);
  fs::create_directories(dir);
  refuse_overwrite({dir / "ablation.txt", dir / "ablation.json"}, o.force);
  const fs::path records_path = dir / "ablation_records.jsonl";
  const auto existing = resume_records(records_path, o.force);
  RecordAppender append(records_path);
  const auto rows = ablation_run(docs, specs, truth, config, existing, [&](const PredictionRecord& r) {
    append(r);
    if (r.error) fmt::print(err, "{} [{}]: {}\n", r.subject_id, r.spec_label, *r.error);
  });
  const std::string table = format_ablation_table(rows);
  write_text(dir / "ablation.txt", table);
  write_text(dir / "ablation.json", ablation_json(rows) + "\n");
  out << table;
  return 0;
}

volatile std::sig_atomic_t g_stop = 0;
extern "C" void on_signal(int) { g_stop = 1; }

struct MockOptions {
  std::string scenario, port_file;
  int port = 0;
};

int cmd_mock(const MockOptions& o, std::ostream& out) {
  MockScenario scenario = o.scenario.empty() ? MockScenario{} : load_mock_scenario(o.scenario);
  MockLlmServer server(std::move(scenario), o.port);
  if (!o.port_file.empty()) write_text(o.port_file, std::to_string(server.port()) + "\n");
  fmt::print(out, "mock endpoint listening on {}\n", server.endpoint());
  out.flush();
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  fmt::print(out, "served {} requests over {} connections\n", server.request_count(), server.connection_count());
  return 0;
}

struct SynthOptions {
  std::string out;
  std::size_t n = 10;
  std::uint64_t seed = 42;
  std::vector<std::size_t> dims{64, 64, 48};
};

int cmd_synth(const SynthOptions& o, std::ostream& out) {
  if (o.dims.size() != 3) throw Error(ErrorCode::InvalidArgument, "--dims takes three values");
  const auto files = write_synthetic_cohort(o.out, synthetic_cohort_specs(o.n, o.seed, {o.dims[0], o.dims[1], o.dims[2]}));
  fmt::print(out, "wrote {} subjects\nmanifest: {}\natlas config: {}\n", files.rows.size(), files.manifest.string(),
             files.atlas_config.string());
  return 0;
}

}  // namespace

ExtractionParams parse_extraction_params(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::ConfigFormat, "extraction params must be a JSON object");
  ExtractionParams p;
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "min_component_voxels") p.min_component_voxels = v.get<std::size_t>();
      else if (k == "tiny_net_voxels") p.tiny_net_voxels = v.get<std::size_t>();
      else if (k == "involvement_min_voxels") p.involvement_min_voxels = v.get<std::size_t>();
      else if (k == "rim_shell_mm") p.rim_shell_mm = v.get<double>();
      else if (k == "midline_deadband_mm") p.midline_deadband_mm = v.get<double>();
      else if (k == "midline_min_voxels") p.midline_min_voxels = v.get<std::size_t>();
      else if (k == "cnwm_exclusion_mm") p.cnwm_exclusion_mm = v.get<double>();
      else if (k == "max_transition_rays") p.max_transition_rays = v.get<std::size_t>();
      else if (k == "ray_step_mm") p.ray_step_mm = v.get<double>();
      else if (k == "ray_max_mm") p.ray_max_mm = v.get<double>();
      else if (k == "transition_upper") p.transition_upper = v.get<double>();
      else if (k == "transition_lower") p.transition_lower = v.get<double>();
      else if (k == "seed") p.seed = v.get<std::uint64_t>();
      else if (k == "thresholds") {
        for (const auto& [tk, tv] : v.items()) {
          if (tk == "ratio") p.thresholds.ratio = tv.get<double>();
          else if (tk == "homogeneity_cv") p.thresholds.homogeneity_cv = tv.get<double>();
          else if (tk == "suppression") p.thresholds.suppression = tv.get<double>();
          else if (tk == "rim") p.thresholds.rim = tv.get<double>();
          else throw Error(ErrorCode::ConfigFormat, "unknown threshold '" + tk + "'");
        }
      } else {
        throw Error(ErrorCode::ConfigFormat, "unknown extraction parameter '" + k + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigFormat, e.what());
  }
  if (!(p.ray_step_mm > 0.0) || !(p.ray_max_mm > 0.0) || p.max_transition_rays == 0) {
    throw Error(ErrorCode::ConfigFormat, "ray sampling parameters must be positive");
  }
  return p;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Interpretable glioma MRI features and zero-shot IDH prediction"};
  app.name(args.empty() ? "cimllm" : args[0]);
  app.require_subcommand(1);

  ExtractOptions eo;
  auto* ex = app.add_subcommand("extract", "Extract one feature document per manifest subject");
  ex->add_option("--manifest", eo.manifest, "Cohort manifest CSV")->required();
  ex->add_option("--out", eo.out, "Output directory")->required();
  ex->add_option("--config", eo.config, "Atlas label configuration JSON");
  ex->add_option("--params", eo.params, "Extraction parameter overrides JSON");
  ex->add_option("--parallel", eo.parallel, "Subjects processed concurrently")->check(CLI::PositiveNumber);
  ex->add_option("--seed", eo.seed, "Seed of the transition-zone ray sampler");
  ex->add_flag("--force", eo.force, "Overwrite existing outputs");

  PredictOptions po;
  auto* pr = app.add_subcommand("predict", "Query the LLM endpoint for every document");
  pr->add_option("--docs", po.docs, "Directory of feature documents")->required();
  pr->add_option("--out", po.out, "Predictions JSON-lines file")->required();
  pr->add_option("--config", po.config, "Inference configuration JSON");
  pr->add_option("--endpoint", po.endpoint, "Chat-completion base URL");
  pr->add_option("--model", po.model, "Model name");
  pr->add_option("--drop", po.drop, "Feature groups to remove before prompting");
  pr->add_flag("--with-clinical", po.with_clinical, "Include age and sex");
  pr->add_option("--parallel", po.parallel, "Requests in flight")->check(CLI::PositiveNumber);
  pr->add_flag("--force", po.force, "Discard existing predictions");

  EvaluateOptions vo;
  auto* ev = app.add_subcommand("evaluate", "Score predictions against manifest ground truth");
  ev->add_option("--predictions", vo.predictions, "Predictions JSON-lines file")->required();
  ev->add_option("--manifest", vo.manifest, "Cohort manifest CSV")->required();
  ev->add_option("--out", vo.out, "Report directory");
  ev->add_flag("--force", vo.force, "Overwrite existing reports");

  AblateOptions ao;
  auto* ab = app.add_subcommand("ablate", "Feature-group ablation table");
  ab->add_option("--manifest", ao.manifest, "Cohort manifest CSV")->required();
  ab->add_option("--docs", ao.docs, "Directory of feature documents")->required();
  ab->add_option("--out", ao.out, "Output directory")->required();
  ab->add_option("--config", ao.config, "Inference configuration JSON");
  ab->add_option("--specs", ao.specs, "Ablation spec list JSON");
  ab->add_option("--endpoint", ao.endpoint, "Chat-completion base URL");
  ab->add_option("--model", ao.model, "Model name");
  ab->add_option("--drop", ao.drop, "Run a single spec removing these groups");
  ab->add_flag("--with-clinical", ao.with_clinical, "Single spec with age and sex");
  ab->add_option("--parallel", ao.parallel, "Requests in flight")->check(CLI::PositiveNumber);
  ab->add_flag("--force", ao.force, "Discard existing records and tables");

  MockOptions mo;
  auto* mk = app.add_subcommand("mock-llm", "Serve a scripted OpenAI-compatible endpoint");
  mk->add_option("--scenario", mo.scenario, "Scenario JSON");
  mk->add_option("--port", mo.port, "Port (0 picks a free one)");
  mk->add_option("--port-file", mo.port_file, "Write the bound port here");

  SynthOptions so;
  auto* sy = app.add_subcommand("synth", "Write a synthetic cohort");
  sy->add_option("--out", so.out, "Output directory")->required();
  sy->add_option("--n", so.n, "Number of subjects")->check(CLI::PositiveNumber);
  sy->add_option("--seed", so.seed, "Cohort seed");
  sy->add_option("--dims", so.dims, "Grid size x y z")->expected(3);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*ex) return cmd_extract(eo, out, err);
    if (*pr) return cmd_predict(po, out, err);
    if (*ev) return cmd_evaluate(vo, out, err);
    if (*ab) return cmd_ablate(ao, out, err);
    if (*mk) return cmd_mock(mo, out);
    if (*sy) return cmd_synth(so, out);
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 2;
  }
  return 2;
}

}  // namespace cimllm::cli
