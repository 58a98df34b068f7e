#pragma once

#include <span>
#include <string>
#include <vector>

#include "rebel/env.hpp"
#include "rebel/numerics.hpp"
#include "rebel/rng.hpp"

namespace rebel {

// Softmax policy over a finite context/action grid:
//   pi(y|x) ∝ exp(theta . phi(x, y)).
// The tabular parameterization is the one-hot special case phi(x,y) = e_{x,y},
// so every operation below treats both classes through one code path.
// Policies are immutable values; updates construct a new policy.
class SoftmaxPolicy {
 public:
  static SoftmaxPolicy tabular(int num_contexts, int num_actions);
  static SoftmaxPolicy tabular(int num_contexts, int num_actions, std::vector<double> logits);
  static SoftmaxPolicy linear(int num_contexts, int num_actions, int dim,
                              std::vector<double> features, std::vector<double> theta);

  int num_contexts() const { return num_contexts_; }
  int num_actions() const { return num_actions_; }
  int dim() const { return dim_; }
  bool is_tabular() const { return tabular_; }
  const std::vector<double>& theta() const { return theta_; }
  const std::vector<double>& features() const { return features_; }

  SoftmaxPolicy with_theta(std::vector<double> theta) const;

  std::span<const double> feature(int x, int y) const {
    return {features_.data() + (static_cast<std::size_t>(x) * num_actions_ + y) * dim_,
            static_cast<std::size_t>(dim_)};
  }

  double logit(int x, int y) const;
  // Log-softmax with max subtraction; exp of the results sums to 1 per context.
  std::vector<double> log_probs(int x) const;
  double log_prob(int x, int y) const;
  std::vector<double> probs(int x) const;

  // Score vector: phi(x, y) - E_{y' ~ pi(.|x)} phi(x, y').
  std::vector<double> grad_log_prob(int x, int y) const;

  int sample(int x, Rng& rng) const;

 private:
  int num_contexts_ = 0;
  int num_actions_ = 0;
  int dim_ = 0;
  bool tabular_ = false;
  std::vector<double> theta_;
  std::vector<double> features_;  // row-major ((x, y), component)
};

// KL(p(.|x) || q(.|x)); +inf when q lacks support somewhere p has mass.
double kl(const SoftmaxPolicy& p, const SoftmaxPolicy& q, int x);
// E_{x ~ rho} KL(p || q).
double mean_kl(const SoftmaxPolicy& p, const SoftmaxPolicy& q, std::span<const double> rho);

// A(x, .) = r(x, .) - E_{y ~ pi(.|x)} r(x, y); mean-zero under pi by construction.
std::vector<double> advantage_row(const ContextualBandit& env, const SoftmaxPolicy& pi, int x);
std::vector<double> advantage_table(const ContextualBandit& env, const SoftmaxPolicy& pi);

// E_{(x,y) ~ weights} grad_log_prob (x,y) outer-product, by exact enumeration.
// `weights` is a joint distribution over the (context, action) grid summing
// to 1; callers apply any scalar factors themselves.
DenseMatrix fisher_matrix(const SoftmaxPolicy& pi, std::span<const double> weights);

// Draw N i.i.d. actions from pi(.|x); keep the argmax (argmin) reward.
// Ties break toward the lowest action id.
int best_of_n(const SoftmaxPolicy& pi, const ContextualBandit& env, int x, int n, Rng& rng);
int worst_of_n(const SoftmaxPolicy& pi, const ContextualBandit& env, int x, int n, Rng& rng);

double expected_reward(const ContextualBandit& env, const SoftmaxPolicy& pi);
double expected_reward(const ContextualBandit& env, std::span<const double> reward_table,
                       const SoftmaxPolicy& pi);
// Value of the best deterministic policy, E_x max_y r(x, y).
double best_deterministic_reward(const ContextualBandit& env);
// Greedy policy as a large-logit tabular softmax (numerically deterministic).
SoftmaxPolicy best_deterministic_policy(const ContextualBandit& env);

// C_{mu -> pi} = max over pi(y|x) > 0 of pi(y|x) / mu(y|x); +inf when mu
// misses support, 0/0 counts as 0.
double concentrability(const SoftmaxPolicy& pi, const SoftmaxPolicy& mu);
double concentrability(const SoftmaxPolicy& pi, std::span<const double> mu_table);

// Checkpoint file: dims plus the flat parameter vector (and features for the
// linear class); round-trips bit-exactly.
void save_checkpoint(const SoftmaxPolicy& pi, const std::string& path);
SoftmaxPolicy load_checkpoint(const std::string& path);

SoftmaxPolicy random_tabular_policy(int num_contexts, int num_actions, Rng& rng, double scale);

}  // namespace rebel
