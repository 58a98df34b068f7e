#pragma once

#include <span>
#include <vector>

#include "rebel/rebel_core.hpp"

namespace rebel {

enum class Algo { rebel, md_oracle, npg, reinforce, rloo, ppo_clip, iter_dpo, spo_rebel };

struct BaselineConfig {
  Algo algo = Algo::md_oracle;
  double eta = 1.0;   // md_oracle / npg step size
  double lr = 0.1;    // reinforce / rloo / ppo_clip / iter_dpo learning rate
  int T = 1;
  int batch_size = 1;
  double gamma = 0.0;
  int k = 2;              // rloo samples per context
  double epsilon = 0.2;   // ppo clip range
  int inner_steps = 10;   // ppo / iter_dpo inner optimization steps
  double beta = 0.05;     // iter_dpo temperature
  bool npg_population = false;  // exact enumeration instead of a sampled batch

  void validate() const;
};

struct RewardSample {
  int x = 0;
  int y = 0;
  double r = 0.0;
};
using SampleBatch = std::vector<RewardSample>;

// On-policy samples (x ~ rho, y ~ pi), rewards shaped like collect_dataset.
SampleBatch collect_samples(const ContextualBandit& env, const SoftmaxPolicy& pi,
                            const SoftmaxPolicy& pi_ref, double gamma, int count, Rng& rng);

// k samples per drawn context, for leave-one-out baselining.
struct GroupedBatch {
  std::vector<int> contexts;
  std::vector<std::vector<int>> actions;   // per context, k entries
  std::vector<std::vector<double>> rewards;
};
GroupedBatch collect_grouped(const ContextualBandit& env, const SoftmaxPolicy& pi,
                             const SoftmaxPolicy& pi_ref, double gamma, int num_contexts, int k,
                             Rng& rng);

// Exact soft policy iteration: pi_{t+1}(y|x) = pi_t(y|x) exp(eta r(x,y)) / Z(x).
SoftmaxPolicy md_oracle_step(const SoftmaxPolicy& pi_t, std::span<const double> reward_table,
                             double eta);

// theta_t + eta F^dagger (E grad ln pi * r), Fisher and gradient under pi_t.
SoftmaxPolicy npg_step_population(const SoftmaxPolicy& pi_t, const ContextualBandit& env,
                                  std::span<const double> reward_table, double eta);
SoftmaxPolicy npg_step_batch(const SoftmaxPolicy& pi_t, const SampleBatch& batch, double eta);

// theta_t + lr * mean grad ln pi(y|x) r.
SoftmaxPolicy reinforce_step(const SoftmaxPolicy& pi_t, const SampleBatch& batch, double lr);

// Each sample baselined by the mean reward of its k-1 siblings.
SoftmaxPolicy rloo_step(const SoftmaxPolicy& pi_t, const GroupedBatch& batch, double lr);

// Gradient ascent on the clipped surrogate
//   E[min(ratio * A, clip(ratio; 1-eps, 1+eps) * A)]
// with advantages baselined by the batch mean reward per context. The min
// keeps the pull-back gradient alive when a clipped ratio sits on the wrong
// side of its advantage.
SoftmaxPolicy ppo_clip_step(const SoftmaxPolicy& pi_t, const SampleBatch& batch, double lr,
                            double epsilon, int inner_steps);
double ppo_surrogate(const SoftmaxPolicy& candidate, const SoftmaxPolicy& pi_t,
                     const SampleBatch& batch, double epsilon,
                     std::span<const double> advantages);

// Pairwise logistic loss on the sign of the reward difference:
//   sum over triples of -ln sigmoid(beta * (log-ratio difference) * sgn(r - r')).
// sgn(0) = 0, so tied rewards contribute a constant ln 2.
double dpo_loss(const SoftmaxPolicy& candidate, const SoftmaxPolicy& reference,
                const TripleDataset& data, double beta);
std::vector<double> dpo_grad(const SoftmaxPolicy& candidate, const SoftmaxPolicy& reference,
                             const TripleDataset& data, double beta);

namespace serial {
double dpo_loss(const SoftmaxPolicy& candidate, const SoftmaxPolicy& reference,
                const TripleDataset& data, double beta);
std::vector<double> dpo_grad(const SoftmaxPolicy& candidate, const SoftmaxPolicy& reference,
                             const TripleDataset& data, double beta);
}  // namespace serial

SoftmaxPolicy iterative_dpo_step(const SoftmaxPolicy& pi_t, const TripleDataset& data, double beta,
                                 double lr, int steps);

// Outer loop shared by the comparison algorithms; emits the same metrics
// stream as run_rebel. Sample-based algorithms draw 2 * batch_size
// generations per iteration, matching one triple batch.
RunResult run_baseline(const ContextualBandit& env, const SoftmaxPolicy& pi_0,
                       const BaselineConfig& config, Rng& rng, const RecordSink& sink = nullptr);

const char* algo_name(Algo a);
Algo algo_from_name(const std::string& name);

}  // namespace rebel
