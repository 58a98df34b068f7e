#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rebel/env.hpp"
#include "rebel/policy.hpp"
#include "rebel/rng.hpp"

namespace rebel {

// One collected record: y drawn from pi_t, y' from the base distribution,
// with their (possibly KL-shaped) rewards frozen at collection time.
struct RegressionTriple {
  int x = 0;
  int y = 0;
  int y_prime = 0;
  double r_y = 0.0;
  double r_yprime = 0.0;
};

// A batch of triples. `weights` empty means a plain sampled batch (unit
// weight per triple); a population dataset carries one weight per (x, y, y')
// cell so expectations are exact.
struct TripleDataset {
  std::vector<RegressionTriple> triples;
  std::vector<double> weights;
  bool weighted() const { return !weights.empty(); }
  double weight(std::size_t i) const { return weighted() ? weights[i] : 1.0; }
};

enum class BaseDist { on_policy, offline_fixed, best_of_n, worst_of_n };

struct BaseDistSpec {
  BaseDist kind = BaseDist::on_policy;
  int n = 1;  // for best_of_n / worst_of_n
};

enum class SolverKind { exact_tabular, grad_descent };

struct SolverSpec {
  SolverKind kind = SolverKind::exact_tabular;
  int steps = 500;
  double step_size = 0.1;
};

struct RebelConfig {
  double eta = 1.0;  // the one knob; 1.0 is the default that works broadly
  int T = 1;
  int batch_size = 1;
  BaseDistSpec base;
  SolverSpec solver;
  double gamma = 0.0;                  // KL-penalty coefficient for reward shaping
  std::optional<SoftmaxPolicy> mu;     // fixed base policy for offline_fixed

  void validate() const;
};

// Per-iteration metrics; one line of the metrics stream.
struct RunRecord {
  int iteration = 0;
  double expected_reward = 0.0;  // E_{x, y ~ pi_t} r
  double kl_step = 0.0;          // E_x KL(pi_{t+1} || pi_t)
  double kl_ref = 0.0;           // E_x KL(pi_t || pi_0)
  double regression_loss = 0.0;  // objective value at the returned solution
  double suboptimality = 0.0;    // E_{pi*} r - E_{pi_t} r, pi* best deterministic
};

using RecordSink = std::function<void(const RunRecord&)>;

struct RunResult {
  std::vector<SoftmaxPolicy> iterates;  // pi_0 .. pi_T
  std::vector<RunRecord> records;       // one per iteration
  const SoftmaxPolicy& final_policy() const { return iterates.back(); }
};

// Thrown when the inner regression blows past 10x its initial loss.
struct SolverDivergence : std::runtime_error {
  int iteration;
  explicit SolverDivergence(int iter)
      : std::runtime_error("regression solver diverged at iteration " + std::to_string(iter)),
        iteration(iter) {}
};

// Draw batch_size triples: x ~ rho, y ~ pi_t(.|x), y' ~ base(.|x).
// Shaping (gamma > 0) is applied before the triple is stored.
TripleDataset collect_dataset(const ContextualBandit& env, const SoftmaxPolicy& pi_t,
                              const SoftmaxPolicy& pi_ref, const RebelConfig& config, Rng& rng);

// Every (x, y, y') cell with weight rho(x) pi_t(y|x) mu(y'|x); expectations
// over this dataset are exact, which is what the theory checks enumerate.
TripleDataset population_dataset(const ContextualBandit& env, const SoftmaxPolicy& pi_t,
                                 std::span<const double> mu_table);

std::vector<double> policy_table(const SoftmaxPolicy& pi);
std::vector<double> uniform_table(int num_contexts, int num_actions);

// Square-loss objective: sum over triples of
//   ((1/eta)(ln pi/pi_t (y) - ln pi/pi_t (y')) - (r(x,y) - r(x,y')))^2.
double rebel_loss(const SoftmaxPolicy& candidate, const SoftmaxPolicy& reference,
                  const TripleDataset& data, double eta);
std::vector<double> rebel_grad(const SoftmaxPolicy& candidate, const SoftmaxPolicy& reference,
                               const TripleDataset& data, double eta);

// Plain serial loops, kept as the oracle for the parallel kernels above.
namespace serial {
double rebel_loss(const SoftmaxPolicy& candidate, const SoftmaxPolicy& reference,
                  const TripleDataset& data, double eta);
std::vector<double> rebel_grad(const SoftmaxPolicy& candidate, const SoftmaxPolicy& reference,
                               const TripleDataset& data, double eta);
}  // namespace serial

// Population solution of the regression for tabular policies:
// theta_{t+1}(x,y) = theta_t(x,y) + eta * r(x,y).
SoftmaxPolicy solve_regression_exact_tabular(const SoftmaxPolicy& pi_t,
                                             std::span<const double> reward_table, double eta);

struct GdResult {
  SoftmaxPolicy policy;
  double final_loss = 0.0;
  bool diverged = false;
};

// Full-batch gradient descent warm-started at theta_t.
GdResult solve_regression_gd(const SoftmaxPolicy& pi_t, const TripleDataset& data, double eta,
                             int steps, double step_size);

// Minimum-norm solution of the linearized regression: design rows
// (1/eta)(grad ln pi(y|x) - grad ln pi(y'|x)), targets r(x,y) - r(x,y').
// Weighted datasets scale rows and targets by sqrt(w).
std::vector<double> gauss_newton_step(const SoftmaxPolicy& pi_t, const TripleDataset& data,
                                      double eta);

// Algorithm loop: collect, solve, advance, record; T iterations.
RunResult run_rebel(const ContextualBandit& env, const SoftmaxPolicy& pi_0,
                    const RebelConfig& config, Rng& rng, const RecordSink& sink = nullptr);

}  // namespace rebel
