#include "rebel/rebel_core.hpp"
#include <limits>

#include <cmath>
#include <stdexcept>

#include "rebel/reduce.hpp"

namespace rebel {

void RebelConfig::validate() const {
  if (!(eta > 0.0)) throw std::invalid_argument("config: eta must be positive");
  if (T < 0) throw std::invalid_argument("config: T must be nonnegative");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be at least 1");
  if (base.kind == BaseDist::best_of_n || base.kind == BaseDist::worst_of_n) {
    if (base.n < 1) throw std::invalid_argument("config: base distribution N must be at least 1");
  }
  if (gamma < 0.0) throw std::invalid_argument("config: gamma must be nonnegative");
  if (solver.kind == SolverKind::grad_descent) {
    if (solver.steps < 0 || !(solver.step_size > 0.0))
      throw std::invalid_argument("config: bad gradient descent settings");
  }
}

TripleDataset collect_dataset(const ContextualBandit& env, const SoftmaxPolicy& pi_t,
                              const SoftmaxPolicy& pi_ref, const RebelConfig& config, Rng& rng) {
  config.validate();
  std::vector<double> reward_table;
  if (config.gamma > 0.0) {
    reward_table = shaped_reward_table({&env, config.gamma, &pi_ref, &pi_t});
  } else {
    reward_table = env.rewards;
  }
  const SoftmaxPolicy* mu = nullptr;
  SoftmaxPolicy uniform = SoftmaxPolicy::tabular(env.num_contexts, env.num_actions);
  if (config.base.kind == BaseDist::offline_fixed) {
    mu = config.mu ? &*config.mu : &uniform;
  }

  TripleDataset data;
  data.triples.reserve(config.batch_size);
  for (int i = 0; i < config.batch_size; ++i) {
    RegressionTriple t;
    t.x = sample_context(env, rng);
    t.y = pi_t.sample(t.x, rng);
    switch (config.base.kind) {
      case BaseDist::on_policy:
        t.y_prime = pi_t.sample(t.x, rng);
        break;
      case BaseDist::offline_fixed:
        t.y_prime = mu->sample(t.x, rng);
        break;
      case BaseDist::best_of_n:
        t.y_prime = best_of_n(pi_t, env, t.x, config.base.n, rng);
        break;
      case BaseDist::worst_of_n:
        t.y_prime = worst_of_n(pi_t, env, t.x, config.base.n, rng);
        break;
    }
    t.r_y = reward_table[static_cast<std::size_t>(t.x) * env.num_actions + t.y];
    t.r_yprime = reward_table[static_cast<std::size_t>(t.x) * env.num_actions + t.y_prime];
    data.triples.push_back(t);
  }
  return data;
}

TripleDataset population_dataset(const ContextualBandit& env, const SoftmaxPolicy& pi_t,
                                 std::span<const double> mu_table) {
  TripleDataset data;
  for (int x = 0; x < env.num_contexts; ++x) {
    const std::vector<double> p = pi_t.probs(x);
    for (int y = 0; y < env.num_actions; ++y) {
      for (int yp = 0; yp < env.num_actions; ++yp) {
        const double w =
            env.rho[x] * p[y] * mu_table[static_cast<std::size_t>(x) * env.num_actions + yp];
        if (w == 0.0) continue;
        data.triples.push_back({x, y, yp, env.reward(x, y), env.reward(x, yp)});
        data.weights.push_back(w);
      }
    }
  }
  return data;
}

std::vector<double> policy_table(const SoftmaxPolicy& pi) {
  std::vector<double> out(static_cast<std::size_t>(pi.num_contexts()) * pi.num_actions());
  for (int x = 0; x < pi.num_contexts(); ++x) {
    const std::vector<double> p = pi.probs(x);
    std::copy(p.begin(), p.end(), out.begin() + static_cast<std::size_t>(x) * pi.num_actions());
  }
  return out;
}

std::vector<double> uniform_table(int num_contexts, int num_actions) {
  return std::vector<double>(static_cast<std::size_t>(num_contexts) * num_actions,
                             1.0 / num_actions);
}

namespace {

// Per-context log-prob tables for both policies, shared across the batch.
struct LogProbCache {
  std::vector<std::vector<double>> cand, ref;
  LogProbCache(const SoftmaxPolicy& candidate, const SoftmaxPolicy& reference) {
    cand.resize(candidate.num_contexts());
    ref.resize(reference.num_contexts());
    for (int x = 0; x < candidate.num_contexts(); ++x) {
      cand[x] = candidate.log_probs(x);
      ref[x] = reference.log_probs(x);
    }
  }
};

void check_support(const LogProbCache& c, const RegressionTriple& t, std::size_t index) {
  const double values[4] = {c.cand[t.x][t.y], c.cand[t.x][t.y_prime], c.ref[t.x][t.y],
                            c.ref[t.x][t.y_prime]};
  for (double lp : values) {
    if (!std::isfinite(lp) || std::exp(lp) == 0.0)
      throw std::invalid_argument("rebel regression: zero probability at sampled action, triple " +
                                  std::to_string(index) + " (x=" + std::to_string(t.x) +
                                  ", y=" + std::to_string(t.y) +
                                  ", y'=" + std::to_string(t.y_prime) + ")");
  }
}

double residual_of(const LogProbCache& c, const RegressionTriple& t, double eta) {
  const double pred = ((c.cand[t.x][t.y] - c.ref[t.x][t.y]) -
                       (c.cand[t.x][t.y_prime] - c.ref[t.x][t.y_prime])) /
                      eta;
  return pred - (t.r_y - t.r_yprime);
}

}  // namespace

double rebel_loss(const SoftmaxPolicy& candidate, const SoftmaxPolicy& reference,
                  const TripleDataset& data, double eta) {
  const LogProbCache cache(candidate, reference);
  for (std::size_t i = 0; i < data.triples.size(); ++i)
    check_support(cache, data.triples[i], i);
  return block_sum(data.triples.size(), [&](std::size_t i) {
    const double r = residual_of(cache, data.triples[i], eta);
    return data.weight(i) * r * r;
  });
}

std::vector<double> rebel_grad(const SoftmaxPolicy& candidate, const SoftmaxPolicy& reference,
                               const TripleDataset& data, double eta) {
  const LogProbCache cache(candidate, reference);
  for (std::size_t i = 0; i < data.triples.size(); ++i)
    check_support(cache, data.triples[i], i);
  const std::size_t dim = candidate.theta().size();
  std::vector<double> grad;
  block_sum_into(data.triples.size(), dim, grad, [&](std::size_t i, double* acc) {
    const RegressionTriple& t = data.triples[i];
    const double coeff = 2.0 * data.weight(i) * residual_of(cache, t, eta) / eta;
    const std::vector<double> gy = candidate.grad_log_prob(t.x, t.y);
    const std::vector<double> gyp = candidate.grad_log_prob(t.x, t.y_prime);
    for (std::size_t j = 0; j < dim; ++j) acc[j] += coeff * (gy[j] - gyp[j]);
  });
  return grad;
}

namespace serial {

double rebel_loss(const SoftmaxPolicy& candidate, const SoftmaxPolicy& reference,
                  const TripleDataset& data, double eta) {
  const LogProbCache cache(candidate, reference);
  double loss = 0.0;
  for (std::size_t i = 0; i < data.triples.size(); ++i) {
    check_support(cache, data.triples[i], i);
    const double r = residual_of(cache, data.triples[i], eta);
    loss += data.weight(i) * r * r;
  }
  return loss;
}

std::vector<double> rebel_grad(const SoftmaxPolicy& candidate, const SoftmaxPolicy& reference,
                               const TripleDataset& data, double eta) {
  const LogProbCache cache(candidate, reference);
  std::vector<double> grad(candidate.theta().size(), 0.0);
  for (std::size_t i = 0; i < data.triples.size(); ++i) {
    const RegressionTriple& t = data.triples[i];
    check_support(cache, t, i);
    const double coeff = 2.0 * data.weight(i) * residual_of(cache, t, eta) / eta;
    const std::vector<double> gy = candidate.grad_log_prob(t.x, t.y);
    const std::vector<double> gyp = candidate.grad_log_prob(t.x, t.y_prime);
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += coeff * (gy[j] - gyp[j]);
  }
  return grad;
}

}  // namespace serial

SoftmaxPolicy solve_regression_exact_tabular(const SoftmaxPolicy& pi_t,
                                             std::span<const double> reward_table, double eta) {
  if (!pi_t.is_tabular())
    throw std::invalid_argument("exact_tabular solver requires a tabular policy");
  if (reward_table.size() != pi_t.theta().size())
    throw std::invalid_argument("exact_tabular solver: reward table size mismatch");
  std::vector<double> logits = pi_t.theta();
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += eta * reward_table[i];
  return pi_t.with_theta(std::move(logits));
}

GdResult solve_regression_gd(const SoftmaxPolicy& pi_t, const TripleDataset& data, double eta,
                             int steps, double step_size) {
  SoftmaxPolicy current = pi_t;
  const double initial = rebel_loss(current, pi_t, data, eta);
  double loss = initial;
  for (int s = 0; s < steps; ++s) {
    const std::vector<double> g = rebel_grad(current, pi_t, data, eta);
    std::vector<double> theta = current.theta();
    for (std::size_t j = 0; j < theta.size(); ++j) theta[j] -= step_size * g[j];
    SoftmaxPolicy next = current.with_theta(std::move(theta));
    // An overshoot big enough to underflow the softmax counts as divergence,
    // same as blowing past the 10x loss gate.
    try {
      loss = rebel_loss(next, pi_t, data, eta);
    } catch (const std::invalid_argument&) {
      return {std::move(current), std::numeric_limits<double>::infinity(), true};
    }
    current = std::move(next);
    if (loss > 10.0 * initial + 1e-12) return {std::move(current), loss, true};
  }
  return {std::move(current), loss, false};
}

std::vector<double> gauss_newton_step(const SoftmaxPolicy& pi_t, const TripleDataset& data,
                                      double eta) {
  const std::size_t n = data.triples.size();
  const int dim = pi_t.dim();
  DenseMatrix design = DenseMatrix::zeros(static_cast<int>(n), dim);
  std::vector<double> target(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const RegressionTriple& t = data.triples[i];
    const double scale = std::sqrt(data.weight(i));
    const std::vector<double> gy = pi_t.grad_log_prob(t.x, t.y);
    const std::vector<double> gyp = pi_t.grad_log_prob(t.x, t.y_prime);
    for (int j = 0; j < dim; ++j) design.at(static_cast<int>(i), j) = scale * (gy[j] - gyp[j]) / eta;
    target[i] = scale * (t.r_y - t.r_yprime);
  }
  return min_norm_lstsq(design, target).solution;
}

RunResult run_rebel(const ContextualBandit& env, const SoftmaxPolicy& pi_0,
                    const RebelConfig& config, Rng& rng, const RecordSink& sink) {
  config.validate();
  env.validate();
  const double best = best_deterministic_reward(env);

  RunResult result;
  result.iterates.push_back(pi_0);
  for (int t = 0; t < config.T; ++t) {
    const SoftmaxPolicy& pi_t = result.iterates.back();
    const TripleDataset data = collect_dataset(env, pi_t, pi_0, config, rng);

    SoftmaxPolicy pi_next = pi_t;
    double loss = 0.0;
    bool diverged = false;
    if (config.solver.kind == SolverKind::exact_tabular) {
      std::vector<double> table = env.rewards;
      if (config.gamma > 0.0) table = shaped_reward_table({&env, config.gamma, &pi_0, &pi_t});
      pi_next = solve_regression_exact_tabular(pi_t, table, config.eta);
      loss = rebel_loss(pi_next, pi_t, data, config.eta);
    } else {
      GdResult gd = solve_regression_gd(pi_t, data, config.eta, config.solver.steps,
                                        config.solver.step_size);
      pi_next = std::move(gd.policy);
      loss = gd.final_loss;
      diverged = gd.diverged;
    }

    RunRecord rec;
    rec.iteration = t;
    rec.expected_reward = expected_reward(env, pi_t);
    rec.kl_step = mean_kl(pi_next, pi_t, env.rho);
    rec.kl_ref = mean_kl(pi_t, pi_0, env.rho);
    rec.regression_loss = loss;
    rec.suboptimality = best - rec.expected_reward;
    result.records.push_back(rec);
    if (sink) sink(rec);

    if (diverged) throw SolverDivergence(t);
    result.iterates.push_back(std::move(pi_next));
  }
  return result;
}

}  // namespace rebel
