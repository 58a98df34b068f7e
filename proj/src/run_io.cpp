#include "rebel/run_io.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace rebel {

using nlohmann::ordered_json;

namespace {

const std::vector<std::string> kKnownParams = {
    "eta",       "gamma",     "lr",          "epsilon",        "beta",
    "k",         "inner_steps", "base_dist", "base_n",         "solver",
    "gd_steps",  "gd_step_size", "npg_population", "binary_feedback", "pref_samples"};

void apply_param(ExperimentConfig& cfg, const std::string& key, const ordered_json& v) {
  if (key == "eta") cfg.eta = v.get<double>();
  else if (key == "gamma") cfg.gamma = v.get<double>();
  else if (key == "lr") cfg.lr = v.get<double>();
  else if (key == "epsilon") cfg.epsilon = v.get<double>();
  else if (key == "beta") cfg.beta = v.get<double>();
  else if (key == "k") cfg.k = v.get<int>();
  else if (key == "inner_steps") cfg.inner_steps = v.get<int>();
  else if (key == "base_dist") cfg.base_dist = v.get<std::string>();
  else if (key == "base_n") cfg.base_n = v.get<int>();
  else if (key == "solver") cfg.solver = v.get<std::string>();
  else if (key == "gd_steps") cfg.gd_steps = v.get<int>();
  else if (key == "gd_step_size") cfg.gd_step_size = v.get<double>();
  else if (key == "npg_population") cfg.npg_population = v.get<bool>();
  else if (key == "binary_feedback") cfg.binary_feedback = v.get<bool>();
  else if (key == "pref_samples") cfg.pref_samples = v.get<int>();
  else throw std::runtime_error("config: unknown parameter '" + key + "'");
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  ordered_json j = ordered_json::parse(in);

  ExperimentConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "env") cfg.env_path = value.get<std::string>();
    else if (key == "algo") cfg.algo = value.get<std::string>();
    else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
    else if (key == "T") cfg.T = value.get<int>();
    else if (key == "batch_size") cfg.batch_size = value.get<int>();
    else if (key == "out") cfg.out_dir = value.get<std::string>();
    else if (key == "params") {
      for (const auto& [pk, pv] : value.items()) apply_param(cfg, pk, pv);
    } else {
      throw std::runtime_error("config: unknown key '" + key + "'");
    }
  }
  if (cfg.env_path.empty()) throw std::runtime_error("config: missing 'env'");
  algo_from_name(cfg.algo);  // reject unknown algorithms early

  // Resolve the environment path relative to the config file location.
  namespace fs = std::filesystem;
  if (!fs::path(cfg.env_path).is_absolute()) {
    const fs::path base = fs::path(path).parent_path();
    const fs::path resolved = base / cfg.env_path;
    if (fs::exists(resolved)) cfg.env_path = resolved.string();
  }
  return cfg;
}

void set_config_value(ExperimentConfig& cfg, const std::string& name, const std::string& value) {
  if (name == "seed") {
    cfg.seed = std::stoull(value);
    return;
  }
  if (name == "T") {
    cfg.T = std::stoi(value);
    return;
  }
  if (name == "batch_size") {
    cfg.batch_size = std::stoi(value);
    return;
  }
  for (const std::string& known : kKnownParams) {
    if (name != known) continue;
    ordered_json v;
    if (name == "base_dist" || name == "solver") v = value;
    else if (name == "k" || name == "inner_steps" || name == "base_n" || name == "gd_steps" ||
             name == "pref_samples") v = std::stoi(value);
    else if (name == "npg_population" || name == "binary_feedback") v = (value == "true" || value == "1");
    else v = std::stod(value);
    apply_param(cfg, name, v);
    return;
  }
  throw std::runtime_error("sweep: unknown parameter '" + name + "'");
}

std::string record_json_line(const std::string& algo, const RunRecord& rec) {
  ordered_json j;
  j["algo"] = algo;
  j["iter"] = rec.iteration;
  j["reward"] = rec.expected_reward;
  j["kl_step"] = rec.kl_step;
  j["kl_ref"] = rec.kl_ref;
  j["loss"] = rec.regression_loss;
  j["subopt"] = rec.suboptimality;
  return j.dump();
}

namespace {

BaseDistSpec parse_base_dist(const ExperimentConfig& cfg) {
  BaseDistSpec spec;
  spec.n = cfg.base_n;
  if (cfg.base_dist == "on_policy") spec.kind = BaseDist::on_policy;
  else if (cfg.base_dist == "offline_fixed") spec.kind = BaseDist::offline_fixed;
  else if (cfg.base_dist == "best_of_n") spec.kind = BaseDist::best_of_n;
  else if (cfg.base_dist == "worst_of_n") spec.kind = BaseDist::worst_of_n;
  else throw std::runtime_error("config: unknown base_dist '" + cfg.base_dist + "'");
  return spec;
}

SolverSpec parse_solver(const ExperimentConfig& cfg) {
  SolverSpec spec;
  spec.steps = cfg.gd_steps;
  spec.step_size = cfg.gd_step_size;
  if (cfg.solver == "exact_tabular") spec.kind = SolverKind::exact_tabular;
  else if (cfg.solver == "grad_descent") spec.kind = SolverKind::grad_descent;
  else throw std::runtime_error("config: unknown solver '" + cfg.solver + "'");
  return spec;
}

}  // namespace

void write_summary_json(const RunSummary& s, const std::string& path) {
  ordered_json j;
  j["algo"] = s.algo;
  j["seed"] = s.seed;
  j["T"] = s.T;
  j["batch_size"] = s.batch_size;
  j["final_reward"] = s.final_reward;
  j["final_kl_ref"] = s.final_kl_ref;
  j["best_iterate_suboptimality"] = s.best_iterate_suboptimality;
  j["area_under_curve"] = s.area_under_curve;
  if (s.duality_gap) j["duality_gap"] = *s.duality_gap;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write summary: " + path);
  out << j.dump(2) << "\n";
}

RunArtifacts execute_run(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  const auto start = std::chrono::steady_clock::now();

  const EnvFile env_file = load_env_file(cfg.env_path);
  const ContextualBandit& env = env_file.bandit;
  const SoftmaxPolicy pi_0 = SoftmaxPolicy::tabular(env.num_contexts, env.num_actions);
  const Algo algo = algo_from_name(cfg.algo);

  std::ofstream metrics;
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    metrics.open(fs::path(cfg.out_dir) / "metrics.jsonl");
    if (!metrics) throw std::runtime_error("cannot write metrics stream in " + cfg.out_dir);
  }
  RunArtifacts artifacts;
  const RecordSink sink = [&](const RunRecord& rec) {
    artifacts.records.push_back(rec);
    if (metrics.is_open()) metrics << record_json_line(cfg.algo, rec) << "\n" << std::flush;
  };

  Rng rng(cfg.seed);
  std::vector<SoftmaxPolicy> iterates;
  std::optional<double> gap;

  if (algo == Algo::rebel) {
    RebelConfig rc;
    rc.eta = cfg.eta;
    rc.T = cfg.T;
    rc.batch_size = cfg.batch_size;
    rc.gamma = cfg.gamma;
    rc.base = parse_base_dist(cfg);
    rc.solver = parse_solver(cfg);
    RunResult res = run_rebel(env, pi_0, rc, rng, sink);
    iterates = std::move(res.iterates);
  } else if (algo == Algo::spo_rebel) {
    if (!env_file.preferences)
      throw std::runtime_error("spo_rebel needs a 'preferences' table in the environment file");
    PreferenceGame game{env.num_contexts, env.num_actions, env.rho, *env_file.preferences};
    SpoConfig sc;
    sc.eta = cfg.eta;
    sc.T = cfg.T;
    sc.batch_size = cfg.batch_size;
    sc.solver = parse_solver(cfg);
    sc.binary_feedback = cfg.binary_feedback;
    sc.pref_samples = cfg.pref_samples;
    SpoResult res = run_spo_rebel(game, pi_0, sc, rng, sink);
    iterates = std::move(res.iterates);
    gap = duality_gap(game, res.mixture).gap;
  } else {
    BaselineConfig bc;
    bc.algo = algo;
    bc.eta = cfg.eta;
    bc.lr = cfg.lr;
    bc.T = cfg.T;
    bc.batch_size = cfg.batch_size;
    bc.gamma = cfg.gamma;
    bc.k = cfg.k;
    bc.epsilon = cfg.epsilon;
    bc.inner_steps = cfg.inner_steps;
    bc.beta = cfg.beta;
    bc.npg_population = cfg.npg_population;
    RunResult res = run_baseline(env, pi_0, bc, rng, sink);
    iterates = std::move(res.iterates);
  }

  RunSummary& s = artifacts.summary;
  s.algo = cfg.algo;
  s.seed = cfg.seed;
  s.T = cfg.T;
  s.batch_size = cfg.batch_size;
  const SoftmaxPolicy& final_policy = iterates.back();
  s.final_reward = expected_reward(env, final_policy);
  s.final_kl_ref = mean_kl(final_policy, pi_0, env.rho);
  const double best = best_deterministic_reward(env);
  if (iterates.size() > 1) {
    double subopt = std::numeric_limits<double>::infinity();
    for (std::size_t t = 1; t < iterates.size(); ++t)
      subopt = std::min(subopt, best - expected_reward(env, iterates[t]));
    s.best_iterate_suboptimality = subopt;
  } else {
    s.best_iterate_suboptimality = best - s.final_reward;
  }
  if (!artifacts.records.empty()) {
    double acc = 0.0;
    for (const RunRecord& r : artifacts.records) acc += r.expected_reward;
    s.area_under_curve = acc / static_cast<double>(artifacts.records.size());
  } else {
    s.area_under_curve = s.final_reward;
  }
  s.duality_gap = gap;

  if (!cfg.out_dir.empty()) {
    std::ofstream curve(fs::path(cfg.out_dir) / "curve.csv");
    curve << std::setprecision(17);
    curve << "iteration,reward,kl_step,kl_ref,loss\n";
    for (const RunRecord& r : artifacts.records)
      curve << r.iteration << "," << r.expected_reward << "," << r.kl_step << "," << r.kl_ref
            << "," << r.regression_loss << "\n";
    write_summary_json(s, (fs::path(cfg.out_dir) / "summary.json").string());
    save_checkpoint(final_policy, (fs::path(cfg.out_dir) / "policy.json").string());
  }

  artifacts.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return artifacts;
}

}  // namespace rebel
