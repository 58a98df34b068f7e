#pragma once

#include <span>
#include <vector>

#include "rebel/env.hpp"
#include "rebel/rebel_core.hpp"

namespace rebel {

// Finite symmetric game: contexts with distribution rho, a skew-symmetric
// pairwise payoff over actions. The minimax winner is the Nash strategy.
struct PreferenceGame {
  int num_contexts = 0;
  int num_actions = 0;
  std::vector<double> rho;
  PreferenceModel pref;

  void validate() const;
};

// Per-context probability table; evaluation-time mixtures of iterates live
// here rather than in parameter space.
struct DistTable {
  int num_contexts = 0;
  int num_actions = 0;
  std::vector<double> probs;

  double prob(int x, int y) const {
    return probs[static_cast<std::size_t>(x) * num_actions + y];
  }
};

DistTable table_of(const SoftmaxPolicy& pi);
DistTable uniform_mixture(std::span<const SoftmaxPolicy> iterates);

// Iteration-dependent reward r_t(x, y) = E_{y'' ~ pi(.|x)} l(x, y, y'').
double winrate_reward(const PreferenceModel& pref, const SoftmaxPolicy& pi, int x, int y);
std::vector<double> winrate_table(const PreferenceGame& game, const SoftmaxPolicy& pi);
std::vector<double> winrate_table(const PreferenceGame& game, const DistTable& opponent);

struct SpoConfig {
  double eta = 1.0;
  int T = 1;
  int batch_size = 1;
  SolverSpec solver;
  bool binary_feedback = false;  // regress on sampled comparisons instead of exact payoffs
  int pref_samples = 1;          // y'' draws per stored record in binary mode

  void validate() const;
};

struct DualityGapReport {
  double gap = 0.0;
  std::vector<int> best_response_max;  // pure best response per context
  std::vector<int> best_response_min;
};

struct SpoResult {
  std::vector<SoftmaxPolicy> iterates;  // pi_0 .. pi_T
  DistTable mixture;                    // Unif(pi_1 .. pi_T)
  std::vector<RunRecord> records;
};

// Self-play: each iteration runs the relative-reward regression against the
// iteration-dependent winrate reward r_t. Exact mode enumerates r_t; binary
// mode regresses on (2o - 1) comparison outcomes, which are unbiased for the
// pairwise payoffs.
SpoResult run_spo_rebel(const PreferenceGame& game, const SoftmaxPolicy& pi_0,
                        const SpoConfig& config, Rng& rng, const RecordSink& sink = nullptr);

// Exact exploitability: best responses to a fixed opponent are pure, so both
// sides reduce to per-context argmax / argmin over l(x, ., policy).
DualityGapReport duality_gap(const PreferenceGame& game, const DistTable& policy);

PreferenceGame rock_paper_scissors();

}  // namespace rebel
