#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "cimllm/mock_llm.hpp"
#include "support/fixtures.hpp"

namespace fixture {

namespace fs = std::filesystem;

struct CliResult {
  int code = 0;
  std::string out, err;
};

inline CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cimllm");
  std::ostringstream out, err;
  const int code = cimllm::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

/// Answers wildtype whenever volumetrics are missing; otherwise a tumor with no
/// enhancing component is called mutant.
inline cimllm::MockScenario flips_on_missing_volumetrics() {
  cimllm::MockScenario s;
  s.rules = {{"", "\"volumetric_measures\":", "**IDH wildtype**\nNo volumes given."},
             {"\"et_component_count\": 0", "", "**IDH mutant**\nNon-enhancing."}};
  s.default_content = "**IDH wildtype**\nEnhancing.";
  return s;
}

inline void write_inference_config(const fs::path& path, const std::string& endpoint, int parallel) {
  nlohmann::json j{{"endpoint_url", endpoint}, {"model_name", "mock"},      {"api_key_env", ""},
                   {"max_retries", 2},         {"initial_backoff_s", 0.01}, {"max_backoff_s", 0.05},
                   {"parallelism", parallel},  {"request_timeout_s", 10.0}};
  spit(path, j.dump(2));
}

/// synth -> extract -> predict -> evaluate -> ablate under `root`.
struct Pipeline {
  fs::path root;
  std::string endpoint;
  std::size_t n = 10;
  std::string dims = "48";

  fs::path cohort() const { return root / "cohort"; }
  fs::path docs() const { return root / "docs"; }
  fs::path predictions() const { return root / "predictions.jsonl"; }
  fs::path report() const { return root / "report"; }
  fs::path ablation() const { return root / "ablation"; }
  fs::path config() const { return root / "inference.json"; }

  std::vector<std::pair<std::string, CliResult>> run_all() {
    fs::create_directories(root);
    write_inference_config(config(), endpoint, 3);
    std::vector<std::pair<std::string, CliResult>> steps;
    steps.emplace_back("synth", run_cli({"synth", "--out", cohort().string(), "--n", std::to_string(n), "--seed", "7",
                                     "--dims", dims, dims, "40"}));
    steps.emplace_back("extract", run_cli({"extract", "--manifest", (cohort() / "manifest.csv").string(), "--out",
                                       docs().string(), "--config", (cohort() / "atlases.json").string()}));
    steps.emplace_back("predict", run_cli({"predict", "--docs", docs().string(), "--out", predictions().string(),
                                       "--config", config().string()}));
    steps.emplace_back("evaluate", run_cli({"evaluate", "--predictions", predictions().string(), "--manifest",
                                        (cohort() / "manifest.csv").string(), "--out", report().string()}));
    steps.emplace_back("ablate", ablate());
    return steps;
  }

  CliResult ablate(bool force = false) const {
    std::vector<std::string> args{"ablate", "--manifest", (cohort() / "manifest.csv").string(), "--docs",
                                  docs().string(), "--out", ablation().string(), "--config", config().string()};
    if (force) args.push_back("--force");
    return run_cli(args);
  }

  /// Document files and report outputs that must not depend on timing.
  std::map<std::string, std::string> stable_outputs() const {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::directory_iterator(docs())) {
      if (e.path().extension() == ".json") files["docs/" + e.path().filename().string()] = slurp(e.path());
    }
    files["report.json"] = slurp(report() / "report.json");
    files["confusion.csv"] = slurp(report() / "confusion.csv");
    files["ablation.json"] = slurp(ablation() / "ablation.json");
    files["ablation.txt"] = slurp(ablation() / "ablation.txt");
    return files;
  }

  /// Count of records per (subject, spec hash) in the ablation journal.
  std::map<std::pair<std::string, std::string>, int> record_counts() const {
    std::map<std::pair<std::string, std::string>, int> counts;
    std::ifstream in(ablation() / "ablation_records.jsonl");
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      ++counts[{j["subject_id"].get<std::string>(), j["spec_hash"].get<std::string>()}];
    }
    return counts;
  }

  /// Mutant recall (sensitivity) of the ablation row with this label.
  double mutant_recall(const std::string& label) const {
    const auto rows = nlohmann::json::parse(slurp(ablation() / "ablation.json"));
    for (const auto& r : rows) {
      if (r["label"] == label) return r["metrics"]["sensitivity"]["value"].get<double>();
    }
    return -1.0;
  }
};

/// Keeps the first `keep` lines of the journal, appends half a line and removes
/// the tables, as if the process died mid-write.
inline void simulate_crash(const fs::path& ablation_dir, std::size_t keep) {
  const fs::path journal = ablation_dir / "ablation_records.jsonl";
  std::ifstream in(journal);
  std::string text, line, last;
  for (std::size_t i = 0; std::getline(in, line); ++i) {
    if (i < keep) text += line + "\n";
    last = line;
  }
  in.close();
  text += last.substr(0, last.size() / 2);
  spit(journal, text);
  fs::remove(ablation_dir / "ablation.txt");
  fs::remove(ablation_dir / "ablation.json");
}

}  // namespace fixture
