#include "rebel/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "rebel/reduce.hpp"

namespace rebel {

void BaselineConfig::validate() const {
  if (T < 0) throw std::invalid_argument("baseline config: T must be nonnegative");
  if (batch_size < 1) throw std::invalid_argument("baseline config: batch_size must be at least 1");
  if (gamma < 0.0) throw std::invalid_argument("baseline config: gamma must be nonnegative");
  if (algo == Algo::md_oracle || algo == Algo::npg) {
    if (!(eta > 0.0)) throw std::invalid_argument("baseline config: eta must be positive");
  } else if (!(lr > 0.0)) {
    throw std::invalid_argument("baseline config: learning rate must be positive");
  }
  if (algo == Algo::rloo && k < 2)
    throw std::invalid_argument("baseline config: rloo needs k >= 2");
  if (algo == Algo::ppo_clip && !(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("baseline config: ppo epsilon must lie in (0, 1)");
  if (algo == Algo::iter_dpo && !(beta > 0.0))
    throw std::invalid_argument("baseline config: iter_dpo beta must be positive");
  if ((algo == Algo::ppo_clip || algo == Algo::iter_dpo) && inner_steps < 1)
    throw std::invalid_argument("baseline config: inner_steps must be at least 1");
}

SampleBatch collect_samples(const ContextualBandit& env, const SoftmaxPolicy& pi,
                            const SoftmaxPolicy& pi_ref, double gamma, int count, Rng& rng) {
  std::vector<double> table = env.rewards;
  if (gamma > 0.0) table = shaped_reward_table({&env, gamma, &pi_ref, &pi});
  SampleBatch batch;
  batch.reserve(count);
  for (int i = 0; i < count; ++i) {
    const int x = sample_context(env, rng);
    const int y = pi.sample(x, rng);
    batch.push_back({x, y, table[static_cast<std::size_t>(x) * env.num_actions + y]});
  }
  return batch;
}

GroupedBatch collect_grouped(const ContextualBandit& env, const SoftmaxPolicy& pi,
                             const SoftmaxPolicy& pi_ref, double gamma, int num_contexts, int k,
                             Rng& rng) {
  std::vector<double> table = env.rewards;
  if (gamma > 0.0) table = shaped_reward_table({&env, gamma, &pi_ref, &pi});
  GroupedBatch batch;
  for (int i = 0; i < num_contexts; ++i) {
    const int x = sample_context(env, rng);
    std::vector<int> ys(k);
    std::vector<double> rs(k);
    for (int j = 0; j < k; ++j) {
      ys[j] = pi.sample(x, rng);
      rs[j] = table[static_cast<std::size_t>(x) * env.num_actions + ys[j]];
    }
    batch.contexts.push_back(x);
    batch.actions.push_back(std::move(ys));
    batch.rewards.push_back(std::move(rs));
  }
  return batch;
}

SoftmaxPolicy md_oracle_step(const SoftmaxPolicy& pi_t, std::span<const double> reward_table,
                             double eta) {
  return solve_regression_exact_tabular(pi_t, reward_table, eta);
}

namespace {

std::vector<double> apply_step(const std::vector<double>& theta, std::span<const double> dir,
                               double scale) {
  std::vector<double> out = theta;
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += scale * dir[j];
  return out;
}

}  // namespace

SoftmaxPolicy npg_step_population(const SoftmaxPolicy& pi_t, const ContextualBandit& env,
                                  std::span<const double> reward_table, double eta) {
  const int na = env.num_actions;
  std::vector<double> weights(static_cast<std::size_t>(env.num_contexts) * na, 0.0);
  std::vector<double> pg(pi_t.dim(), 0.0);
  for (int x = 0; x < env.num_contexts; ++x) {
    const std::vector<double> p = pi_t.probs(x);
    for (int y = 0; y < na; ++y) {
      const double w = env.rho[x] * p[y];
      weights[static_cast<std::size_t>(x) * na + y] = w;
      if (w == 0.0) continue;
      const std::vector<double> g = pi_t.grad_log_prob(x, y);
      const double r = reward_table[static_cast<std::size_t>(x) * na + y];
      for (int j = 0; j < pi_t.dim(); ++j) pg[j] += w * g[j] * r;
    }
  }
  const DenseMatrix f = fisher_matrix(pi_t, weights);
  const std::vector<double> dir = pinv_apply(f, pg);
  return pi_t.with_theta(apply_step(pi_t.theta(), dir, eta));
}

SoftmaxPolicy npg_step_batch(const SoftmaxPolicy& pi_t, const SampleBatch& batch, double eta) {
  if (batch.empty()) throw std::invalid_argument("npg_step: empty batch");
  const int d = pi_t.dim();
  DenseMatrix f = DenseMatrix::zeros(d, d);
  std::vector<double> pg(d, 0.0);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const RewardSample& s : batch) {
    const std::vector<double> g = pi_t.grad_log_prob(s.x, s.y);
    for (int i = 0; i < d; ++i) {
      pg[i] += inv * g[i] * s.r;
      for (int j = 0; j < d; ++j) f.at(i, j) += inv * g[i] * g[j];
    }
  }
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      const double v = 0.5 * (f.at(i, j) + f.at(j, i));
      f.at(i, j) = v;
      f.at(j, i) = v;
    }
  const std::vector<double> dir = pinv_apply(f, pg);
  return pi_t.with_theta(apply_step(pi_t.theta(), dir, eta));
}

SoftmaxPolicy reinforce_step(const SoftmaxPolicy& pi_t, const SampleBatch& batch, double lr) {
  if (batch.empty()) throw std::invalid_argument("reinforce_step: empty batch");
  std::vector<double> dir(pi_t.dim(), 0.0);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const RewardSample& s : batch) {
    const std::vector<double> g = pi_t.grad_log_prob(s.x, s.y);
    for (int j = 0; j < pi_t.dim(); ++j) dir[j] += inv * g[j] * s.r;
  }
  return pi_t.with_theta(apply_step(pi_t.theta(), dir, lr));
}

SoftmaxPolicy rloo_step(const SoftmaxPolicy& pi_t, const GroupedBatch& batch, double lr) {
  if (batch.contexts.empty()) throw std::invalid_argument("rloo_step: empty batch");
  std::vector<double> dir(pi_t.dim(), 0.0);
  std::size_t total = 0;
  for (const auto& rs : batch.rewards) total += rs.size();
  const double inv = 1.0 / static_cast<double>(total);
  for (std::size_t i = 0; i < batch.contexts.size(); ++i) {
    const int x = batch.contexts[i];
    const auto& ys = batch.actions[i];
    const auto& rs = batch.rewards[i];
    const int k = static_cast<int>(ys.size());
    if (k < 2) throw std::invalid_argument("rloo_step: needs k >= 2 samples per context");
    double sum = 0.0;
    for (double r : rs) sum += r;
    for (int j = 0; j < k; ++j) {
      const double baseline = (sum - rs[j]) / (k - 1);
      const std::vector<double> g = pi_t.grad_log_prob(x, ys[j]);
      const double a = rs[j] - baseline;
      for (int c = 0; c < pi_t.dim(); ++c) dir[c] += inv * g[c] * a;
    }
  }
  return pi_t.with_theta(apply_step(pi_t.theta(), dir, lr));
}

namespace {

std::vector<double> batch_mean_advantages(const SampleBatch& batch) {
  std::map<int, std::pair<double, int>> by_context;
  for (const RewardSample& s : batch) {
    auto& [sum, count] = by_context[s.x];
    sum += s.r;
    ++count;
  }
  std::vector<double> adv(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& [sum, count] = by_context[batch[i].x];
    adv[i] = batch[i].r - sum / count;
  }
  return adv;
}

}  // namespace

double ppo_surrogate(const SoftmaxPolicy& candidate, const SoftmaxPolicy& pi_t,
                     const SampleBatch& batch, double epsilon,
                     std::span<const double> advantages) {
  double value = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const RewardSample& s = batch[i];
    const double ratio = std::exp(candidate.log_prob(s.x, s.y) - pi_t.log_prob(s.x, s.y));
    const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
    value += std::min(ratio * advantages[i], clipped * advantages[i]);
  }
  return value / static_cast<double>(batch.size());
}

SoftmaxPolicy ppo_clip_step(const SoftmaxPolicy& pi_t, const SampleBatch& batch, double lr,
                            double epsilon, int inner_steps) {
  if (batch.empty()) throw std::invalid_argument("ppo_clip_step: empty batch");
  const std::vector<double> adv = batch_mean_advantages(batch);
  SoftmaxPolicy current = pi_t;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (int s = 0; s < inner_steps; ++s) {
    std::vector<double> dir(pi_t.dim(), 0.0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const RewardSample& smp = batch[i];
      const double ratio = std::exp(current.log_prob(smp.x, smp.y) - pi_t.log_prob(smp.x, smp.y));
      const bool inside = ratio >= 1.0 - epsilon && ratio <= 1.0 + epsilon;
      const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
      // Gradient of min(ratio*A, clip(ratio)*A): zero only when the clamp is
      // active and the unclipped term would not lower the objective.
      const bool active = inside || ratio * adv[i] < clipped * adv[i];
      if (!active) continue;
      const std::vector<double> g = current.grad_log_prob(smp.x, smp.y);
      const double coeff = inv * adv[i] * ratio;
      for (int c = 0; c < pi_t.dim(); ++c) dir[c] += coeff * g[c];
    }
    current = current.with_theta(apply_step(current.theta(), dir, lr));
  }
  return current;
}

namespace {

struct DpoCache {
  std::vector<std::vector<double>> cand, ref;
  DpoCache(const SoftmaxPolicy& candidate, const SoftmaxPolicy& reference) {
    cand.resize(candidate.num_contexts());
    ref.resize(reference.num_contexts());
    for (int x = 0; x < candidate.num_contexts(); ++x) {
      cand[x] = candidate.log_probs(x);
      ref[x] = reference.log_probs(x);
    }
  }
};

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// z = beta * (log-ratio difference) * sgn(r - r'); loss term is -ln sigmoid(z).
double dpo_logit(const DpoCache& c, const RegressionTriple& t, double beta) {
  const double diff = (c.cand[t.x][t.y] - c.ref[t.x][t.y]) -
                      (c.cand[t.x][t.y_prime] - c.ref[t.x][t.y_prime]);
  return beta * diff * sgn(t.r_y - t.r_yprime);
}

double softplus(double z) {  // ln(1 + e^z), stable
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace

double dpo_loss(const SoftmaxPolicy& candidate, const SoftmaxPolicy& reference,
                const TripleDataset& data, double beta) {
  const DpoCache cache(candidate, reference);
  return block_sum(data.triples.size(), [&](std::size_t i) {
    return data.weight(i) * softplus(-dpo_logit(cache, data.triples[i], beta));
  });
}

std::vector<double> dpo_grad(const SoftmaxPolicy& candidate, const SoftmaxPolicy& reference,
                             const TripleDataset& data, double beta) {
  const DpoCache cache(candidate, reference);
  std::vector<double> grad;
  block_sum_into(data.triples.size(), candidate.theta().size(), grad,
                 [&](std::size_t i, double* acc) {
                   const RegressionTriple& t = data.triples[i];
                   const double s = sgn(t.r_y - t.r_yprime);
                   if (s == 0.0) return;
                   const double z = dpo_logit(cache, t, beta);
                   const double coeff =
                       -data.weight(i) * beta * s / (1.0 + std::exp(z));  // -sigmoid(-z) beta s
                   const std::vector<double> gy = candidate.grad_log_prob(t.x, t.y);
                   const std::vector<double> gyp = candidate.grad_log_prob(t.x, t.y_prime);
                   for (std::size_t j = 0; j < gy.size(); ++j) acc[j] += coeff * (gy[j] - gyp[j]);
                 });
  return grad;
}

namespace serial {

double dpo_loss(const SoftmaxPolicy& candidate, const SoftmaxPolicy& reference,
                const TripleDataset& data, double beta) {
  const DpoCache cache(candidate, reference);
  double loss = 0.0;
  for (std::size_t i = 0; i < data.triples.size(); ++i)
    loss += data.weight(i) * softplus(-dpo_logit(cache, data.triples[i], beta));
  return loss;
}

std::vector<double> dpo_grad(const SoftmaxPolicy& candidate, const SoftmaxPolicy& reference,
                             const TripleDataset& data, double beta) {
  const DpoCache cache(candidate, reference);
  std::vector<double> grad(candidate.theta().size(), 0.0);
  for (std::size_t i = 0; i < data.triples.size(); ++i) {
    const RegressionTriple& t = data.triples[i];
    const double s = sgn(t.r_y - t.r_yprime);
    if (s == 0.0) continue;
    const double z = dpo_logit(cache, t, beta);
    const double coeff = -data.weight(i) * beta * s / (1.0 + std::exp(z));
    const std::vector<double> gy = candidate.grad_log_prob(t.x, t.y);
    const std::vector<double> gyp = candidate.grad_log_prob(t.x, t.y_prime);
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += coeff * (gy[j] - gyp[j]);
  }
  return grad;
}

}  // namespace serial

SoftmaxPolicy iterative_dpo_step(const SoftmaxPolicy& pi_t, const TripleDataset& data, double beta,
                                 double lr, int steps) {
  SoftmaxPolicy current = pi_t;
  for (int s = 0; s < steps; ++s) {
    const std::vector<double> g = dpo_grad(current, pi_t, data, beta);
    std::vector<double> theta = current.theta();
    for (std::size_t j = 0; j < theta.size(); ++j) theta[j] -= lr * g[j];
    current = current.with_theta(std::move(theta));
  }
  return current;
}

RunResult run_baseline(const ContextualBandit& env, const SoftmaxPolicy& pi_0,
                       const BaselineConfig& config, Rng& rng, const RecordSink& sink) {
  config.validate();
  env.validate();
  const double best = best_deterministic_reward(env);

  RunResult result;
  result.iterates.push_back(pi_0);
  for (int t = 0; t < config.T; ++t) {
    const SoftmaxPolicy& pi_t = result.iterates.back();
    SoftmaxPolicy pi_next = pi_t;
    double loss = 0.0;

    switch (config.algo) {
      case Algo::md_oracle: {
        std::vector<double> table = env.rewards;
        if (config.gamma > 0.0) table = shaped_reward_table({&env, config.gamma, &pi_0, &pi_t});
        pi_next = md_oracle_step(pi_t, table, config.eta);
        break;
      }
      case Algo::npg: {
        if (config.npg_population) {
          std::vector<double> table = env.rewards;
          if (config.gamma > 0.0) table = shaped_reward_table({&env, config.gamma, &pi_0, &pi_t});
          pi_next = npg_step_population(pi_t, env, table, config.eta);
        } else {
          const SampleBatch batch =
              collect_samples(env, pi_t, pi_0, config.gamma, 2 * config.batch_size, rng);
          pi_next = npg_step_batch(pi_t, batch, config.eta);
        }
        break;
      }
      case Algo::reinforce: {
        const SampleBatch batch =
            collect_samples(env, pi_t, pi_0, config.gamma, 2 * config.batch_size, rng);
        pi_next = reinforce_step(pi_t, batch, config.lr);
        break;
      }
      case Algo::rloo: {
        const int groups = std::max(1, 2 * config.batch_size / config.k);
        const GroupedBatch batch =
            collect_grouped(env, pi_t, pi_0, config.gamma, groups, config.k, rng);
        pi_next = rloo_step(pi_t, batch, config.lr);
        break;
      }
      case Algo::ppo_clip: {
        const SampleBatch batch =
            collect_samples(env, pi_t, pi_0, config.gamma, 2 * config.batch_size, rng);
        pi_next = ppo_clip_step(pi_t, batch, config.lr, config.epsilon, config.inner_steps);
        const std::vector<double> adv = batch_mean_advantages(batch);
        loss = -ppo_surrogate(pi_next, pi_t, batch, config.epsilon, adv);
        break;
      }
      case Algo::iter_dpo: {
        RebelConfig collector;
        collector.eta = 1.0;
        collector.T = 1;
        collector.batch_size = config.batch_size;
        collector.gamma = config.gamma;
        const TripleDataset data = collect_dataset(env, pi_t, pi_0, collector, rng);
        pi_next = iterative_dpo_step(pi_t, data, config.beta, config.lr, config.inner_steps);
        loss = dpo_loss(pi_next, pi_t, data, config.beta) /
               static_cast<double>(data.triples.size());
        break;
      }
      default:
        throw std::invalid_argument("run_baseline: unsupported algorithm");
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
    result.iterates.push_back(std::move(pi_next));
  }
  return result;
}

const char* algo_name(Algo a) {
  switch (a) {
    case Algo::rebel: return "rebel";
    case Algo::md_oracle: return "md_oracle";
    case Algo::npg: return "npg";
    case Algo::reinforce: return "reinforce";
    case Algo::rloo: return "rloo";
    case Algo::ppo_clip: return "ppo_clip";
    case Algo::iter_dpo: return "iter_dpo";
    case Algo::spo_rebel: return "spo_rebel";
  }
  return "unknown";
}

Algo algo_from_name(const std::string& name) {
  for (Algo a : {Algo::rebel, Algo::md_oracle, Algo::npg, Algo::reinforce, Algo::rloo,
                 Algo::ppo_clip, Algo::iter_dpo, Algo::spo_rebel}) {
    if (name == algo_name(a)) return a;
  }
  throw std::invalid_argument("unknown algorithm: " + name);
}

}  // namespace rebel
