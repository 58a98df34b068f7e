#include "rebel/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace rebel {

using nlohmann::ordered_json;

SoftmaxPolicy SoftmaxPolicy::tabular(int num_contexts, int num_actions) {
  return tabular(num_contexts, num_actions,
                 std::vector<double>(static_cast<std::size_t>(num_contexts) * num_actions, 0.0));
}

SoftmaxPolicy SoftmaxPolicy::tabular(int num_contexts, int num_actions,
                                     std::vector<double> logits) {
  const int dim = num_contexts * num_actions;
  if (static_cast<int>(logits.size()) != dim)
    throw std::invalid_argument("tabular policy: logits size mismatch");
  std::vector<double> features(static_cast<std::size_t>(dim) * dim, 0.0);
  for (int i = 0; i < dim; ++i) features[static_cast<std::size_t>(i) * dim + i] = 1.0;
  SoftmaxPolicy p;
  p.num_contexts_ = num_contexts;
  p.num_actions_ = num_actions;
  p.dim_ = dim;
  p.tabular_ = true;
  p.theta_ = std::move(logits);
  p.features_ = std::move(features);
  return p;
}

SoftmaxPolicy SoftmaxPolicy::linear(int num_contexts, int num_actions, int dim,
                                    std::vector<double> features, std::vector<double> theta) {
  if (features.size() != static_cast<std::size_t>(num_contexts) * num_actions * dim)
    throw std::invalid_argument("linear policy: feature table size mismatch");
  if (static_cast<int>(theta.size()) != dim)
    throw std::invalid_argument("linear policy: theta size mismatch");
  SoftmaxPolicy p;
  p.num_contexts_ = num_contexts;
  p.num_actions_ = num_actions;
  p.dim_ = dim;
  p.tabular_ = false;
  p.theta_ = std::move(theta);
  p.features_ = std::move(features);
  return p;
}

SoftmaxPolicy SoftmaxPolicy::with_theta(std::vector<double> theta) const {
  if (theta.size() != theta_.size())
    throw std::invalid_argument("with_theta: dimension mismatch");
  SoftmaxPolicy p = *this;
  p.theta_ = std::move(theta);
  return p;
}

double SoftmaxPolicy::logit(int x, int y) const {
  if (tabular_) return theta_[static_cast<std::size_t>(x) * num_actions_ + y];
  return dot(feature(x, y), theta_);
}

std::vector<double> SoftmaxPolicy::log_probs(int x) const {
  std::vector<double> z(num_actions_);
  for (int y = 0; y < num_actions_; ++y) z[y] = logit(x, y);
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v -= m;
    sum += std::exp(v);
  }
  const double lse = std::log(sum);
  for (double& v : z) v -= lse;
  return z;
}

double SoftmaxPolicy::log_prob(int x, int y) const { return log_probs(x)[y]; }

std::vector<double> SoftmaxPolicy::probs(int x) const {
  std::vector<double> lp = log_probs(x);
  for (double& v : lp) v = std::exp(v);
  return lp;
}

std::vector<double> SoftmaxPolicy::grad_log_prob(int x, int y) const {
  const std::vector<double> p = probs(x);
  std::vector<double> g(feature(x, y).begin(), feature(x, y).end());
  for (int yp = 0; yp < num_actions_; ++yp) {
    const auto phi = feature(x, yp);
    for (int j = 0; j < dim_; ++j) g[j] -= p[yp] * phi[j];
  }
  return g;
}

int SoftmaxPolicy::sample(int x, Rng& rng) const { return rng.categorical(probs(x)); }

double kl(const SoftmaxPolicy& p, const SoftmaxPolicy& q, int x) {
  const std::vector<double> lp = p.log_probs(x);
  const std::vector<double> lq = q.log_probs(x);
  double out = 0.0;
  for (std::size_t y = 0; y < lp.size(); ++y) {
    const double py = std::exp(lp[y]);
    if (py == 0.0) continue;
    if (std::exp(lq[y]) == 0.0) return std::numeric_limits<double>::infinity();
    out += py * (lp[y] - lq[y]);
  }
  return std::max(out, 0.0);
}

double mean_kl(const SoftmaxPolicy& p, const SoftmaxPolicy& q, std::span<const double> rho) {
  double out = 0.0;
  for (std::size_t x = 0; x < rho.size(); ++x) out += rho[x] * kl(p, q, static_cast<int>(x));
  return out;
}

std::vector<double> advantage_row(const ContextualBandit& env, const SoftmaxPolicy& pi, int x) {
  const std::vector<double> p = pi.probs(x);
  double baseline = 0.0;
  for (int y = 0; y < env.num_actions; ++y) baseline += p[y] * env.reward(x, y);
  std::vector<double> adv(env.num_actions);
  for (int y = 0; y < env.num_actions; ++y) adv[y] = env.reward(x, y) - baseline;
  return adv;
}

std::vector<double> advantage_table(const ContextualBandit& env, const SoftmaxPolicy& pi) {
  std::vector<double> out(static_cast<std::size_t>(env.num_contexts) * env.num_actions);
  for (int x = 0; x < env.num_contexts; ++x) {
    const std::vector<double> row = advantage_row(env, pi, x);
    std::copy(row.begin(), row.end(), out.begin() + static_cast<std::size_t>(x) * env.num_actions);
  }
  return out;
}

DenseMatrix fisher_matrix(const SoftmaxPolicy& pi, std::span<const double> weights) {
  const int d = pi.dim();
  if (weights.size() != static_cast<std::size_t>(pi.num_contexts()) * pi.num_actions())
    throw std::invalid_argument("fisher_matrix: weight table size mismatch");
  double sum = 0.0;
  for (double w : weights) sum += w;
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("fisher_matrix: mixture weights must sum to 1");

  DenseMatrix f = DenseMatrix::zeros(d, d);
  for (int x = 0; x < pi.num_contexts(); ++x) {
    for (int y = 0; y < pi.num_actions(); ++y) {
      const double w = weights[static_cast<std::size_t>(x) * pi.num_actions() + y];
      if (w == 0.0) continue;
      const std::vector<double> g = pi.grad_log_prob(x, y);
      for (int i = 0; i < d; ++i) {
        const double wg = w * g[i];
        for (int j = 0; j < d; ++j) f.at(i, j) += wg * g[j];
      }
    }
  }
  // Enforce exact symmetry against roundoff drift in the accumulation order.
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      const double v = 0.5 * (f.at(i, j) + f.at(j, i));
      f.at(i, j) = v;
      f.at(j, i) = v;
    }
  return f;
}

namespace {

int take_of_n(const SoftmaxPolicy& pi, const ContextualBandit& env, int x, int n, Rng& rng,
              bool best) {
  if (n < 1) throw std::invalid_argument("best/worst_of_n: n must be at least 1");
  int pick = pi.sample(x, rng);
  double pick_r = env.reward(x, pick);
  for (int i = 1; i < n; ++i) {
    const int y = pi.sample(x, rng);
    const double r = env.reward(x, y);
    const bool better = best ? (r > pick_r) : (r < pick_r);
    if (better || (r == pick_r && y < pick)) {
      pick = y;
      pick_r = r;
    }
  }
  return pick;
}

}  // namespace

int best_of_n(const SoftmaxPolicy& pi, const ContextualBandit& env, int x, int n, Rng& rng) {
  return take_of_n(pi, env, x, n, rng, true);
}

int worst_of_n(const SoftmaxPolicy& pi, const ContextualBandit& env, int x, int n, Rng& rng) {
  return take_of_n(pi, env, x, n, rng, false);
}

double expected_reward(const ContextualBandit& env, const SoftmaxPolicy& pi) {
  return expected_reward(env, env.rewards, pi);
}

double expected_reward(const ContextualBandit& env, std::span<const double> reward_table,
                       const SoftmaxPolicy& pi) {
  double out = 0.0;
  for (int x = 0; x < env.num_contexts; ++x) {
    const std::vector<double> p = pi.probs(x);
    double v = 0.0;
    for (int y = 0; y < env.num_actions; ++y)
      v += p[y] * reward_table[static_cast<std::size_t>(x) * env.num_actions + y];
    out += env.rho[x] * v;
  }
  return out;
}

double best_deterministic_reward(const ContextualBandit& env) {
  double out = 0.0;
  for (int x = 0; x < env.num_contexts; ++x) {
    double best = env.reward(x, 0);
    for (int y = 1; y < env.num_actions; ++y) best = std::max(best, env.reward(x, y));
    out += env.rho[x] * best;
  }
  return out;
}

SoftmaxPolicy best_deterministic_policy(const ContextualBandit& env) {
  std::vector<double> logits(static_cast<std::size_t>(env.num_contexts) * env.num_actions, 0.0);
  for (int x = 0; x < env.num_contexts; ++x) {
    int arg = 0;
    for (int y = 1; y < env.num_actions; ++y)
      if (env.reward(x, y) > env.reward(x, arg)) arg = y;
    logits[static_cast<std::size_t>(x) * env.num_actions + arg] = 1e4;
  }
  return SoftmaxPolicy::tabular(env.num_contexts, env.num_actions, std::move(logits));
}

namespace {

double concentrability_impl(const SoftmaxPolicy& pi,
                            const std::function<double(int, int)>& mu_prob) {
  double c = 0.0;
  for (int x = 0; x < pi.num_contexts(); ++x) {
    const std::vector<double> p = pi.probs(x);
    for (int y = 0; y < pi.num_actions(); ++y) {
      if (p[y] == 0.0) continue;  // 0/0 counts as 0, not a violation
      const double m = mu_prob(x, y);
      if (m == 0.0) return std::numeric_limits<double>::infinity();
      c = std::max(c, p[y] / m);
    }
  }
  return c;
}

}  // namespace

double concentrability(const SoftmaxPolicy& pi, const SoftmaxPolicy& mu) {
  std::vector<std::vector<double>> cache(mu.num_contexts());
  for (int x = 0; x < mu.num_contexts(); ++x) cache[x] = mu.probs(x);
  return concentrability_impl(pi, [&](int x, int y) { return cache[x][y]; });
}

double concentrability(const SoftmaxPolicy& pi, std::span<const double> mu_table) {
  return concentrability_impl(pi, [&](int x, int y) {
    return mu_table[static_cast<std::size_t>(x) * pi.num_actions() + y];
  });
}

void save_checkpoint(const SoftmaxPolicy& pi, const std::string& path) {
  ordered_json j;
  j["num_contexts"] = pi.num_contexts();
  j["num_actions"] = pi.num_actions();
  j["kind"] = pi.is_tabular() ? "tabular" : "linear";
  j["dim"] = pi.dim();
  j["theta"] = pi.theta();
  if (!pi.is_tabular()) j["features"] = pi.features();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump(2) << "\n";
}

SoftmaxPolicy load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  ordered_json j = ordered_json::parse(in);
  const int nc = j.at("num_contexts").get<int>();
  const int na = j.at("num_actions").get<int>();
  const std::string kind = j.at("kind").get<std::string>();
  auto theta = j.at("theta").get<std::vector<double>>();
  if (kind == "tabular") return SoftmaxPolicy::tabular(nc, na, std::move(theta));
  return SoftmaxPolicy::linear(nc, na, j.at("dim").get<int>(),
                               j.at("features").get<std::vector<double>>(), std::move(theta));
}

SoftmaxPolicy random_tabular_policy(int num_contexts, int num_actions, Rng& rng, double scale) {
  std::vector<double> logits(static_cast<std::size_t>(num_contexts) * num_actions);
  for (double& v : logits) v = rng.uniform(-scale, scale);
  return SoftmaxPolicy::tabular(num_contexts, num_actions, std::move(logits));
}

}  // namespace rebel
