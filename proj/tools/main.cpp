// Command-line front end: train / compare / sweep / verify.

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rebel/run_io.hpp"
#include "rebel/theory.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct CommonFlags {
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string algo;
};

rebel::ExperimentConfig load_with_overrides(const std::string& path, const CommonFlags& flags) {
  rebel::ExperimentConfig cfg = rebel::load_experiment_config(path);
  if (flags.seed) cfg.seed = *flags.seed;
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (!flags.algo.empty()) {
    rebel::algo_from_name(flags.algo);
    cfg.algo = flags.algo;
  }
  return cfg;
}

void print_summary(const rebel::RunSummary& s) {
  std::cout << "algo: " << s.algo << "\n"
            << "seed: " << s.seed << "\n"
            << "iterations: " << s.T << "\n"
            << "final_reward: " << s.final_reward << "\n"
            << "final_kl_ref: " << s.final_kl_ref << "\n"
            << "best_iterate_suboptimality: " << s.best_iterate_suboptimality << "\n"
            << "area_under_curve: " << s.area_under_curve << "\n";
  if (s.duality_gap) std::cout << "duality_gap: " << *s.duality_gap << "\n";
}

int cmd_train(const std::string& config_path, const CommonFlags& flags) {
  const rebel::ExperimentConfig cfg = load_with_overrides(config_path, flags);
  try {
    const rebel::RunArtifacts artifacts = rebel::execute_run(cfg);
    print_summary(artifacts.summary);
    return 0;
  } catch (const rebel::SolverDivergence& e) {
    std::cerr << "error: " << e.what() << " (partial metrics retained)\n";
    return 1;
  }
}

int cmd_compare(const std::vector<std::string>& config_paths, const CommonFlags& flags) {
  if (config_paths.size() < 2)
    throw std::runtime_error("compare: needs at least two --config arguments");

  std::vector<rebel::ExperimentConfig> configs;
  for (const std::string& p : config_paths) configs.push_back(load_with_overrides(p, flags));

  // Fairness gate: same environment and the same sample budget T * batch_size.
  const fs::path env0 = fs::weakly_canonical(configs[0].env_path);
  for (const rebel::ExperimentConfig& c : configs) {
    if (fs::weakly_canonical(c.env_path) != env0)
      throw std::runtime_error("compare: configs reference different environments");
    if (c.T != configs[0].T || c.batch_size != configs[0].batch_size)
      throw std::runtime_error("compare: sample budgets differ (T or batch_size mismatch)");
  }

  std::vector<rebel::RunArtifacts> results(configs.size());
  std::vector<std::string> errors(configs.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < static_cast<long long>(configs.size()); ++i) {
    rebel::ExperimentConfig cfg = configs[static_cast<std::size_t>(i)];
    if (!flags.out_dir.empty())
      cfg.out_dir = (fs::path(flags.out_dir) / (cfg.algo + "_" + std::to_string(i))).string();
    try {
      results[static_cast<std::size_t>(i)] = rebel::execute_run(cfg);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (const std::string& e : errors)
    if (!e.empty()) throw std::runtime_error("compare: member run failed: " + e);

  std::cout << std::left << std::setw(12) << "algo" << std::right << std::setw(14)
            << "final_reward" << std::setw(14) << "final_kl_ref" << std::setw(12) << "auc"
            << std::setw(12) << "wall_s" << "\n";
  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    const rebel::RunSummary& s = results[i].summary;
    std::cout << std::left << std::setw(12) << s.algo << std::right << std::setw(14)
              << s.final_reward << std::setw(14) << s.final_kl_ref << std::setw(12)
              << s.area_under_curve << std::setw(12) << results[i].wall_seconds << "\n";
    ordered_json row;
    row["algo"] = s.algo;
    row["final_reward"] = s.final_reward;
    row["final_kl_ref"] = s.final_kl_ref;
    row["area_under_curve"] = s.area_under_curve;
    row["wall_seconds"] = results[i].wall_seconds;
    rows.push_back(row);
  }
  if (!flags.out_dir.empty()) {
    fs::create_directories(flags.out_dir);
    std::ofstream out(fs::path(flags.out_dir) / "comparison.json");
    out << rows.dump(2) << "\n";
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& param,
              const std::string& values_csv, const CommonFlags& flags) {
  std::vector<std::string> values;
  std::stringstream ss(values_csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) values.push_back(item);
  }
  if (values.empty()) throw std::runtime_error("sweep: empty value list");

  const rebel::ExperimentConfig base = load_with_overrides(config_path, flags);
  std::vector<rebel::RunArtifacts> results(values.size());
  std::vector<std::string> errors(values.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < static_cast<long long>(values.size()); ++i) {
    rebel::ExperimentConfig cfg = base;
    try {
      rebel::set_config_value(cfg, param, values[static_cast<std::size_t>(i)]);
      if (!flags.out_dir.empty())
        cfg.out_dir =
            (fs::path(flags.out_dir) / (param + "_" + values[static_cast<std::size_t>(i)])).string();
      else
        cfg.out_dir.clear();
      results[static_cast<std::size_t>(i)] = rebel::execute_run(cfg);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (const std::string& e : errors)
    if (!e.empty()) throw std::runtime_error("sweep: member run failed: " + e);

  std::cout << std::left << std::setw(14) << param << std::right << std::setw(14)
            << "final_reward" << std::setw(14) << "final_kl_ref" << std::setw(14) << "subopt"
            << std::setw(12) << "auc" << "\n";
  ordered_json table = ordered_json::object();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const rebel::RunSummary& s = results[i].summary;
    std::cout << std::left << std::setw(14) << values[i] << std::right << std::setw(14)
              << s.final_reward << std::setw(14) << s.final_kl_ref << std::setw(14)
              << s.best_iterate_suboptimality << std::setw(12) << s.area_under_curve << "\n";
    ordered_json row;
    row["final_reward"] = s.final_reward;
    row["final_kl_ref"] = s.final_kl_ref;
    row["best_iterate_suboptimality"] = s.best_iterate_suboptimality;
    row["area_under_curve"] = s.area_under_curve;
    table[values[i]] = row;
  }

  ordered_json doc;
  doc["param"] = param;
  doc["rows"] = table;
  if (param == "seed") {
    double mean = 0.0, sq = 0.0;
    for (const rebel::RunArtifacts& r : results) {
      mean += r.summary.final_reward;
      sq += r.summary.final_reward * r.summary.final_reward;
    }
    mean /= static_cast<double>(results.size());
    const double variance = std::max(0.0, sq / static_cast<double>(results.size()) - mean * mean);
    doc["final_reward_mean"] = mean;
    doc["final_reward_variance"] = variance;
    std::cout << "across seeds: final_reward mean " << mean << ", variance " << variance << "\n";
  }
  if (!flags.out_dir.empty()) {
    fs::create_directories(flags.out_dir);
    std::ofstream out(fs::path(flags.out_dir) / "sweep_summary.json");
    out << doc.dump(2) << "\n";
  }
  return 0;
}

int cmd_verify(std::uint64_t seed, bool verbose, const std::string& fault_name) {
  rebel::FaultInjection fault = rebel::FaultInjection::none;
  if (fault_name == "gauss-newton-sign") fault = rebel::FaultInjection::gauss_newton_sign;
  else if (!fault_name.empty()) throw std::runtime_error("verify: unknown fault '" + fault_name + "'");

  const std::vector<rebel::CheckResult> checks = rebel::run_verification_battery(seed, fault);
  int failures = 0;
  for (const rebel::CheckResult& c : checks) {
    if (!c.pass) ++failures;
    if (verbose || !c.pass) std::cout << rebel::format_check_line(c) << "\n";
  }
  std::cout << checks.size() - failures << "/" << checks.size() << " checks passed\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Policy optimization on finite contextual bandits: relative-reward regression, "
               "classical baselines, and executable checks of their guarantees"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::vector<std::string> config_paths;
  std::string param, values_csv, fault_name;
  std::uint64_t verify_seed = 0;
  bool verbose = false;

  CLI::App* train = app.add_subcommand("train", "run one configured experiment");
  train->add_option("--config", config_paths, "experiment config file")->required();
  train->add_option("--seed", flags.seed, "override the config seed");
  train->add_option("--out", flags.out_dir, "output directory");
  train->add_option("--algo", flags.algo, "override the configured algorithm");

  CLI::App* compare = app.add_subcommand("compare", "run several configs on a matched budget");
  compare->add_option("--config", config_paths, "experiment config file (repeat)")->required();
  compare->add_option("--seed", flags.seed, "override every config's seed");
  compare->add_option("--out", flags.out_dir, "output directory");

  CLI::App* sweep = app.add_subcommand("sweep", "run one config across parameter values");
  sweep->add_option("--config", config_paths, "base config file")->required();
  sweep->add_option("--param", param, "parameter name to sweep")->required();
  sweep->add_option("--values", values_csv, "comma-separated values")->required();
  sweep->add_option("--seed", flags.seed, "override the config seed");
  sweep->add_option("--out", flags.out_dir, "output directory");

  CLI::App* verify = app.add_subcommand("verify", "run the verification battery");
  verify->add_option("--seed", verify_seed, "battery seed");
  verify->add_flag("--verbose", verbose, "print one line per check");
  verify->add_option("--inject-fault", fault_name,
                     "corrupt a solver path to prove the battery catches it");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      if (config_paths.size() != 1) throw std::runtime_error("train: exactly one --config");
      return cmd_train(config_paths[0], flags);
    }
    if (compare->parsed()) return cmd_compare(config_paths, flags);
    if (sweep->parsed()) {
      if (config_paths.size() != 1) throw std::runtime_error("sweep: exactly one --config");
      return cmd_sweep(config_paths[0], param, values_csv, flags);
    }
    if (verify->parsed()) return cmd_verify(verify_seed, verbose, fault_name);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
