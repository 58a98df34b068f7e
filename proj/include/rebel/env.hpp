#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rebel/rng.hpp"

namespace rebel {

class SoftmaxPolicy;

// Finite contextual bandit: x ~ rho, y in {0..num_actions-1}, reward r(x, y).
// Contexts and actions are dense integer ids; rewards live in a dense table.
struct ContextualBandit {
  int num_contexts = 0;
  int num_actions = 0;
  std::vector<double> rho;      // context distribution, size num_contexts
  std::vector<double> rewards;  // row-major (context, action)

  double reward(int x, int y) const {
    return rewards[static_cast<std::size_t>(x) * num_actions + y];
  }
  double& reward_at(int x, int y) {
    return rewards[static_cast<std::size_t>(x) * num_actions + y];
  }
  double max_abs_reward() const;
  // Largest per-context reward spread, an a-priori bound on any advantage.
  double max_reward_span() const;
  void validate() const;
};

int sample_context(const ContextualBandit& env, Rng& rng);

// Skew-symmetric pairwise payoff l(x, y, y') in [-1, 1]. Skew-symmetry is
// exact in the stored representation: the constructor canonicalizes the
// table so l(x,y,y) == 0 and l(x,y,y') == -l(x,y',y) bitwise.
struct PreferenceModel {
  int num_contexts = 0;
  int num_actions = 0;
  std::vector<double> payoff;  // row-major (x, y, y')

  static PreferenceModel from_payoff(int nc, int na, std::vector<double> table);
  // Win probabilities P(y > y' | x); stored canonically as l = 2P - 1.
  static PreferenceModel from_win_prob(int nc, int na, const std::vector<double>& p);

  double l(int x, int y, int yp) const {
    return payoff[(static_cast<std::size_t>(x) * num_actions + y) * num_actions + yp];
  }
  void validate() const;
};

double pairwise_payoff(const PreferenceModel& p, int x, int y, int yp);

// Bernoulli draw with mean (l + 1) / 2; returns 1 when y is preferred.
int sample_binary_preference(const PreferenceModel& p, int x, int y, int yp, Rng& rng);

// KL-penalized reward r(x,y) = base(x,y) - gamma * (ln pi_t(y|x) - ln pi_0(y|x)).
struct ShapedReward {
  const ContextualBandit* base = nullptr;
  double gamma = 0.0;
  const SoftmaxPolicy* reference = nullptr;  // pi_0
  const SoftmaxPolicy* current = nullptr;    // pi_t
};

double shaped_reward(const ShapedReward& s, int x, int y);

// Dense (context, action) table of the shaped reward under the current policy.
std::vector<double> shaped_reward_table(const ShapedReward& s);

// Environment file: JSON object with keys contexts, rho, actions, rewards and
// an optional preferences table. See README for the exact schema.
struct EnvFile {
  ContextualBandit bandit;
  std::optional<PreferenceModel> preferences;
};

EnvFile load_env_file(const std::string& path);
void save_env_file(const EnvFile& e, const std::string& path);

// Test instance generators used by the verification battery.
ContextualBandit random_bandit(Rng& rng, int max_contexts, int max_actions);
PreferenceModel random_skew_preferences(Rng& rng, int num_contexts, int num_actions);

// The canonical in-repo instance: 1 context, 3 actions, r = (1, 0.5, 0).
ContextualBandit canonical_bandit();

}  // namespace rebel
