#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rebel/baselines.hpp"
#include "rebel/rebel_core.hpp"
#include "rebel/selfplay.hpp"

namespace rebel {

// One experiment: flat keys at the top level, algorithm knobs one level down
// under "params". See README for the file schema.
struct ExperimentConfig {
  std::string env_path;
  std::string algo = "rebel";
  std::uint64_t seed = 0;
  int T = 1;
  int batch_size = 1;
  std::string out_dir;

  double eta = 1.0;
  double gamma = 0.0;
  double lr = 0.1;
  double epsilon = 0.2;
  double beta = 0.05;
  int k = 2;
  int inner_steps = 10;
  std::string base_dist = "on_policy";
  int base_n = 1;
  std::string solver = "exact_tabular";
  int gd_steps = 500;
  double gd_step_size = 0.1;
  bool npg_population = false;
  bool binary_feedback = false;
  int pref_samples = 1;
};

ExperimentConfig load_experiment_config(const std::string& path);

// Set a single parameter by name (sweep support); throws on unknown names.
void set_config_value(ExperimentConfig& cfg, const std::string& name, const std::string& value);

struct RunSummary {
  std::string algo;
  std::uint64_t seed = 0;
  int T = 0;
  int batch_size = 0;
  double final_reward = 0.0;
  double final_kl_ref = 0.0;
  double best_iterate_suboptimality = 0.0;
  double area_under_curve = 0.0;               // mean per-iteration expected reward
  std::optional<double> duality_gap;           // self-play runs only
};

struct RunArtifacts {
  std::vector<RunRecord> records;
  RunSummary summary;
  double wall_seconds = 0.0;  // reported in comparison tables, never serialized
};

// Fixed key order so identical seeds give byte-identical streams.
std::string record_json_line(const std::string& algo, const RunRecord& rec);

// Runs one experiment; when cfg.out_dir is set, writes metrics.jsonl (one
// line per iteration, flushed as produced), curve.csv, summary.json and
// policy.json under it. Partial metrics survive a solver divergence.
RunArtifacts execute_run(const ExperimentConfig& cfg);

void write_summary_json(const RunSummary& s, const std::string& path);

}  // namespace rebel
