#include "rebel/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rebel {

namespace {

// f_t(x, y) = (1/eta) ln(pi_next(y|x) / pi_t(y|x)) on the full grid.
std::vector<double> f_table(const SoftmaxPolicy& pi_next, const SoftmaxPolicy& pi_t, double eta) {
  const int nc = pi_t.num_contexts(), na = pi_t.num_actions();
  std::vector<double> f(static_cast<std::size_t>(nc) * na);
  for (int x = 0; x < nc; ++x) {
    const std::vector<double> lp_next = pi_next.log_probs(x);
    const std::vector<double> lp_cur = pi_t.log_probs(x);
    for (int y = 0; y < na; ++y)
      f[static_cast<std::size_t>(x) * na + y] = (lp_next[y] - lp_cur[y]) / eta;
  }
  return f;
}

double rel_vec_err(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  if (scale == 0.0) return 0.0;
  const double d = std::sqrt(diff);
  return d <= 1e-12 ? 0.0 : d / scale;
}

std::vector<double> gauss_newton_with_fault(const SoftmaxPolicy& pi_t, const TripleDataset& data,
                                            double eta, FaultInjection fault) {
  if (fault != FaultInjection::gauss_newton_sign) return gauss_newton_step(pi_t, data, eta);
  TripleDataset corrupted = data;
  for (RegressionTriple& t : corrupted.triples) std::swap(t.r_y, t.r_yprime);
  return gauss_newton_step(pi_t, corrupted, eta);
}

std::vector<double> random_mu_table(const ContextualBandit& env, Rng& rng) {
  std::vector<double> mu(static_cast<std::size_t>(env.num_contexts) * env.num_actions);
  for (int x = 0; x < env.num_contexts; ++x) {
    double sum = 0.0;
    for (int y = 0; y < env.num_actions; ++y) {
      const double v = rng.uniform(0.05, 1.0);
      mu[static_cast<std::size_t>(x) * env.num_actions + y] = v;
      sum += v;
    }
    for (int y = 0; y < env.num_actions; ++y)
      mu[static_cast<std::size_t>(x) * env.num_actions + y] /= sum;
  }
  return mu;
}

SoftmaxPolicy random_instance_policy(const ContextualBandit& env, Rng& rng, bool linear) {
  if (!linear) return random_tabular_policy(env.num_contexts, env.num_actions, rng, 1.0);
  const int dim = 2 + rng.below(6);
  std::vector<double> features(
      static_cast<std::size_t>(env.num_contexts) * env.num_actions * dim);
  for (double& v : features) v = rng.uniform(-1.0, 1.0);
  std::vector<double> theta(dim);
  for (double& v : theta) v = rng.uniform(-1.0, 1.0);
  return SoftmaxPolicy::linear(env.num_contexts, env.num_actions, dim, std::move(features),
                               std::move(theta));
}

}  // namespace

double regression_epsilon(const ContextualBandit& env, const SoftmaxPolicy& pi_next,
                          const SoftmaxPolicy& pi_t, std::span<const double> mu_table,
                          double eta) {
  const std::vector<double> f = f_table(pi_next, pi_t, eta);
  const int na = env.num_actions;
  double eps = 0.0;
  for (int x = 0; x < env.num_contexts; ++x) {
    const std::vector<double> p = pi_t.probs(x);
    for (int y = 0; y < na; ++y) {
      if (p[y] == 0.0) continue;
      for (int yp = 0; yp < na; ++yp) {
        const double w = env.rho[x] * p[y] * mu_table[static_cast<std::size_t>(x) * na + yp];
        if (w == 0.0) continue;
        const double pred = f[static_cast<std::size_t>(x) * na + y] -
                            f[static_cast<std::size_t>(x) * na + yp];
        const double err = pred - (env.reward(x, y) - env.reward(x, yp));
        eps += w * err * err;
      }
    }
  }
  return eps;
}

Lemma1Terms lemma1_decomposition(const ContextualBandit& env, const SoftmaxPolicy& pi_next,
                                 const SoftmaxPolicy& pi_t, std::span<const double> mu_table,
                                 double eta) {
  const std::vector<double> f = f_table(pi_next, pi_t, eta);
  const int na = env.num_actions;
  Lemma1Terms out;
  for (int x = 0; x < env.num_contexts; ++x) {
    const std::vector<double> p = pi_t.probs(x);
    double delta_pi = 0.0, delta_mu = 0.0;
    std::vector<double> delta(na);
    for (int y = 0; y < na; ++y) {
      delta[y] = f[static_cast<std::size_t>(x) * na + y] - env.reward(x, y);
      delta_pi += p[y] * delta[y];
      delta_mu += mu_table[static_cast<std::size_t>(x) * na + y] * delta[y];
    }
    double on_policy = 0.0, base = 0.0;
    for (int y = 0; y < na; ++y) {
      on_policy += p[y] * (delta[y] - delta_pi) * (delta[y] - delta_pi);
      base += mu_table[static_cast<std::size_t>(x) * na + y] * (delta[y] - delta_mu) *
              (delta[y] - delta_mu);
    }
    out.err_on_policy += env.rho[x] * on_policy;
    out.err_base += env.rho[x] * base;
    out.err_cross += env.rho[x] * (delta_pi - delta_mu) * (delta_pi - delta_mu);
  }
  out.epsilon = regression_epsilon(env, pi_next, pi_t, mu_table, eta);
  return out;
}

RealizedAdvantages realized_advantages(const std::vector<SoftmaxPolicy>& iterates, double eta) {
  RealizedAdvantages out;
  if (iterates.size() < 2) return out;
  const int nc = iterates[0].num_contexts(), na = iterates[0].num_actions();
  for (std::size_t t = 0; t + 1 < iterates.size(); ++t) {
    std::vector<double> a = f_table(iterates[t + 1], iterates[t], eta);
    for (int x = 0; x < nc; ++x) {
      const std::vector<double> p = iterates[t].probs(x);
      double mean = 0.0;
      for (int y = 0; y < na; ++y) mean += p[y] * a[static_cast<std::size_t>(x) * na + y];
      for (int y = 0; y < na; ++y) {
        double& v = a[static_cast<std::size_t>(x) * na + y];
        v -= mean;
        out.a_bound = std::max(out.a_bound, std::abs(v));
      }
    }
    out.tables.push_back(std::move(a));
  }
  return out;
}

LemmaEtaRun run_exact_with_lemma_eta(const ContextualBandit& env, const SoftmaxPolicy& pi_0, int T,
                                     std::uint64_t seed) {
  LemmaEtaRun out;
  const double log_y = std::log(static_cast<double>(env.num_actions));
  double a = env.max_reward_span();
  if (a == 0.0) {
    Rng rng(seed);
    RebelConfig cfg;
    cfg.eta = 1.0;
    cfg.T = T;
    cfg.batch_size = 1;
    out.run = run_rebel(env, pi_0, cfg, rng);
    out.eta = 1.0;
    out.converged = true;
    return out;
  }
  double eta = std::sqrt(log_y / (a * a * T));
  for (int round = 0; round < 30; ++round) {
    Rng rng(seed);
    RebelConfig cfg;
    cfg.eta = eta;
    cfg.T = T;
    cfg.batch_size = 1;
    out.run = run_rebel(env, pi_0, cfg, rng);
    out.rounds = round + 1;
    out.a_bound = realized_advantages(out.run.iterates, eta).a_bound;
    if (out.a_bound == 0.0) {
      out.converged = true;
      break;
    }
    const double eta_next = std::sqrt(log_y / (out.a_bound * out.a_bound * T));
    if (std::abs(eta_next - eta) <= 1e-9 * eta) {
      out.converged = true;
      eta = eta_next;
      break;
    }
    eta = eta_next;
  }
  out.eta = eta;
  return out;
}

CheckResult check_regression_epsilon(const ContextualBandit& env, const SoftmaxPolicy& pi_next,
                                     const SoftmaxPolicy& pi_t, std::span<const double> mu_table,
                                     double eta, double bound) {
  CheckResult c;
  c.name = "regression_epsilon";
  c.measured = regression_epsilon(env, pi_next, pi_t, mu_table, eta);
  c.bound = bound;
  c.pass = c.measured <= bound;
  return c;
}

CheckResult check_lemma1_decomposition(const ContextualBandit& env, const SoftmaxPolicy& pi_next,
                                       const SoftmaxPolicy& pi_t, std::span<const double> mu_table,
                                       double eta) {
  const Lemma1Terms terms = lemma1_decomposition(env, pi_next, pi_t, mu_table, eta);
  CheckResult c;
  c.name = "lemma1_decomposition";
  // Each centered term is bounded by epsilon, and the three sum back to it.
  const double max_term = std::max({terms.err_on_policy, terms.err_base, terms.err_cross});
  const double sum = terms.err_on_policy + terms.err_base + terms.err_cross;
  const double sum_gap = std::abs(sum - terms.epsilon);
  c.measured = max_term;
  c.bound = terms.epsilon + 1e-12;
  c.pass = max_term <= c.bound && sum_gap <= 1e-12 * std::max(1.0, terms.epsilon);
  c.values = {{"err_on_policy", terms.err_on_policy},
              {"err_base", terms.err_base},
              {"err_cross", terms.err_cross},
              {"epsilon", terms.epsilon},
              {"sum_gap", sum_gap}};
  return c;
}

CheckResult check_lemma2_regret(const ContextualBandit& env,
                                const std::vector<SoftmaxPolicy>& iterates,
                                const SoftmaxPolicy& comparator, double eta) {
  const int T = static_cast<int>(iterates.size()) - 1;
  const int nc = env.num_contexts, na = env.num_actions;
  const RealizedAdvantages adv = realized_advantages(iterates, eta);

  std::vector<double> lhs(nc, 0.0);
  for (const std::vector<double>& a : adv.tables) {
    for (int x = 0; x < nc; ++x) {
      const std::vector<double> p = comparator.probs(x);
      double e = 0.0;
      for (int y = 0; y < na; ++y) e += p[y] * a[static_cast<std::size_t>(x) * na + y];
      lhs[x] += e;
    }
  }

  CheckResult c;
  c.name = "lemma2_regret";
  c.measured = lhs.empty() ? 0.0 : *std::max_element(lhs.begin(), lhs.end());
  c.bound = 2.0 * adv.a_bound * std::sqrt(std::log(static_cast<double>(na)) * T);
  c.pass = c.measured <= c.bound + 1e-12;
  c.values = {{"a_bound", adv.a_bound}, {"eta", eta}};
  if (adv.a_bound > 0.0) {
    const double prescribed =
        std::sqrt(std::log(static_cast<double>(na)) / (adv.a_bound * adv.a_bound * T));
    if (std::abs(prescribed - eta) > 1e-6 * prescribed)
      c.details = "warning: eta off the lemma prescription " + std::to_string(prescribed);
  }
  return c;
}

CheckResult check_theorem1_regret(const ContextualBandit& env,
                                  const std::vector<SoftmaxPolicy>& iterates,
                                  const SoftmaxPolicy& comparator, double concentrability_coeff,
                                  double epsilon, double eta) {
  const int T = static_cast<int>(iterates.size()) - 1;
  const double comparator_reward = expected_reward(env, comparator);
  double best_subopt = std::numeric_limits<double>::infinity();
  for (std::size_t t = 1; t < iterates.size(); ++t)
    best_subopt = std::min(best_subopt, comparator_reward - expected_reward(env, iterates[t]));

  const double a_bound = realized_advantages(iterates, eta).a_bound;
  const double log_y = std::log(static_cast<double>(env.num_actions));

  CheckResult c;
  c.name = "theorem1_regret";
  c.measured = best_subopt;
  if (std::isinf(concentrability_coeff)) {
    c.bound = std::numeric_limits<double>::infinity();
    c.details = "infinite concentrability, bound vacuous";
  } else {
    c.bound = 2.0 * a_bound * std::sqrt(log_y / T) +
              std::sqrt(10.0 * concentrability_coeff * epsilon);
  }
  c.pass = c.measured <= c.bound + 1e-12;
  c.values = {{"a_bound", a_bound},
              {"concentrability", concentrability_coeff},
              {"epsilon", epsilon},
              {"eta", eta}};
  return c;
}

std::vector<CheckResult> check_claims(Rng& rng, int instances, FaultInjection fault) {
  double claim1_worst = 0.0, claim2_worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const ContextualBandit env = random_bandit(rng, 4, 6);
    const bool linear = i % 3 == 2;
    const SoftmaxPolicy pi_t = random_instance_policy(env, rng, linear);
    const std::vector<double> mu = random_mu_table(env, rng);
    const double eta = rng.uniform(0.25, 2.0);

    // Claim about the population step: minimum-norm linearized solution
    // against eta F^dagger E_mix[grad ln pi * A].
    {
      const TripleDataset data = population_dataset(env, pi_t, mu);
      const std::vector<double> lhs = gauss_newton_with_fault(pi_t, data, eta, fault);

      const int na = env.num_actions;
      std::vector<double> mix(static_cast<std::size_t>(env.num_contexts) * na);
      std::vector<double> v(pi_t.dim(), 0.0);
      const std::vector<double> adv = advantage_table(env, pi_t);
      for (int x = 0; x < env.num_contexts; ++x) {
        const std::vector<double> p = pi_t.probs(x);
        for (int y = 0; y < na; ++y) {
          const double w =
              env.rho[x] * 0.5 * (p[y] + mu[static_cast<std::size_t>(x) * na + y]);
          mix[static_cast<std::size_t>(x) * na + y] = w;
          if (w == 0.0) continue;
          const std::vector<double> g = pi_t.grad_log_prob(x, y);
          for (int j = 0; j < pi_t.dim(); ++j)
            v[j] += w * g[j] * adv[static_cast<std::size_t>(x) * na + y];
        }
      }
      const DenseMatrix f = fisher_matrix(pi_t, mix);
      std::vector<double> rhs = pinv_apply(f, v);
      for (double& e : rhs) e *= eta;
      claim1_worst = std::max(claim1_worst, rel_vec_err(lhs, rhs));
    }

    // Finite-sample claim: same minimum-norm step against the pseudo-inverse
    // form with the paired empirical second moment and the leave-one-out
    // style gradient vector.
    {
      const int n = 1 + rng.below(64);
      TripleDataset data;
      for (int s = 0; s < n; ++s) {
        RegressionTriple t;
        t.x = rng.categorical(env.rho);
        t.y = pi_t.sample(t.x, rng);
        t.y_prime = rng.categorical(std::span<const double>(
            mu.data() + static_cast<std::size_t>(t.x) * env.num_actions,
            static_cast<std::size_t>(env.num_actions)));
        t.r_y = env.reward(t.x, t.y);
        t.r_yprime = env.reward(t.x, t.y_prime);
        data.triples.push_back(t);
      }
      const std::vector<double> lhs = gauss_newton_with_fault(pi_t, data, eta, fault);

      const int d = pi_t.dim();
      DenseMatrix fhat = DenseMatrix::zeros(d, d);
      std::vector<double> ghat(d, 0.0);
      const double inv2n = 1.0 / (2.0 * n);
      for (const RegressionTriple& t : data.triples) {
        const std::vector<double> gy = pi_t.grad_log_prob(t.x, t.y);
        const std::vector<double> gyp = pi_t.grad_log_prob(t.x, t.y_prime);
        const double rdiff = t.r_y - t.r_yprime;
        for (int a = 0; a < d; ++a) {
          const double da = gy[a] - gyp[a];
          ghat[a] += inv2n * (gy[a] * rdiff + gyp[a] * -rdiff);
          for (int b = 0; b < d; ++b) fhat.at(a, b) += inv2n * da * (gy[b] - gyp[b]);
        }
      }
      for (int a = 0; a < d; ++a)
        for (int b = a + 1; b < d; ++b) {
          const double v = 0.5 * (fhat.at(a, b) + fhat.at(b, a));
          fhat.at(a, b) = v;
          fhat.at(b, a) = v;
        }
      std::vector<double> rhs = pinv_apply(fhat, ghat);
      for (double& e : rhs) e *= eta;
      claim2_worst = std::max(claim2_worst, rel_vec_err(lhs, rhs));
    }
  }

  std::vector<CheckResult> out;
  {
    CheckResult c;
    c.name = "claim1_npg_identity";
    c.measured = claim1_worst;
    c.bound = 1e-8;
    c.pass = claim1_worst <= 1e-8;
    c.details = std::to_string(instances) + " random instances";
    out.push_back(c);
  }
  {
    CheckResult c;
    c.name = "claim2_finite_sample_identity";
    c.measured = claim2_worst;
    c.bound = 1e-8;
    c.pass = claim2_worst <= 1e-8;
    c.details = std::to_string(instances) + " random datasets";
    out.push_back(c);
  }
  {
    // Degenerate corners: near-deterministic pi_t with mu = pi_t, and a
    // constant reward; both sides of each identity collapse to zero.
    CheckResult c;
    c.name = "claims_degenerate_zero";
    ContextualBandit env = canonical_bandit();
    for (double& r : env.rewards) r = 0.25;  // constant reward
    const SoftmaxPolicy det =
        SoftmaxPolicy::tabular(1, 3, std::vector<double>{40.0, 0.0, 0.0});
    const TripleDataset data = population_dataset(env, det, policy_table(det));
    const std::vector<double> delta = gauss_newton_with_fault(det, data, 1.0, fault);
    c.measured = norm2(delta);
    c.bound = 1e-10;
    c.pass = c.measured <= c.bound;
    out.push_back(c);
  }
  return out;
}

namespace {

void add(std::vector<CheckResult>& out, CheckResult c, const std::string& name) {
  c.name = name;
  out.push_back(std::move(c));
}

CheckResult simple(const std::string& name, double measured, double bound, std::string details = {}) {
  CheckResult c;
  c.name = name;
  c.measured = measured;
  c.bound = bound;
  c.pass = measured <= bound;
  c.details = std::move(details);
  return c;
}

}  // namespace

std::vector<CheckResult> run_verification_battery(std::uint64_t seed, FaultInjection fault) {
  std::vector<CheckResult> out;
  const ContextualBandit canonical = canonical_bandit();
  const SoftmaxPolicy uniform3 = SoftmaxPolicy::tabular(1, 3);
  const std::vector<double> mu_uniform3 = uniform_table(1, 3);

  // Assumption 1 epsilon: exact solve drives it to zero.
  {
    const SoftmaxPolicy next = solve_regression_exact_tabular(uniform3, canonical.rewards, 1.0);
    add(out, check_regression_epsilon(canonical, next, uniform3, mu_uniform3, 1.0, 1e-18),
        "regression_epsilon_exact_solver");
  }
  // Epsilon at theta_{t+1} = theta_t equals E (r - r')^2.
  {
    const double eps = regression_epsilon(canonical, uniform3, uniform3, mu_uniform3, 1.0);
    double expected = 0.0;
    for (int y = 0; y < 3; ++y)
      for (int yp = 0; yp < 3; ++yp) {
        const double d = canonical.reward(0, y) - canonical.reward(0, yp);
        expected += (1.0 / 9.0) * d * d;
      }
    CheckResult c = simple("regression_epsilon_identity_at_theta_t", std::abs(eps - expected), 1e-15);
    c.values = {{"epsilon", eps}, {"expected", expected}};
    out.push_back(std::move(c));
  }
  // Gradient-descent solver on the fully covered population dataset.
  {
    const TripleDataset pop = population_dataset(canonical, uniform3, mu_uniform3);
    const GdResult gd = solve_regression_gd(uniform3, pop, 1.0, 500, 0.1);
    add(out, check_regression_epsilon(canonical, gd.policy, uniform3, mu_uniform3, 1.0, 1e-6),
        "regression_epsilon_gd_population");
  }

  // Regression decomposition after the exact solve and at a random point.
  {
    const SoftmaxPolicy next = solve_regression_exact_tabular(uniform3, canonical.rewards, 1.0);
    CheckResult c = check_lemma1_decomposition(canonical, next, uniform3, mu_uniform3, 1.0);
    c.name = "lemma1_exact_solver";
    c.pass = c.pass && c.measured <= 1e-16;
    out.push_back(c);
  }
  {
    Rng rng(seed + 11);
    const ContextualBandit env = random_bandit(rng, 4, 6);
    const SoftmaxPolicy pi_t = random_tabular_policy(env.num_contexts, env.num_actions, rng, 1.0);
    const SoftmaxPolicy next = random_tabular_policy(env.num_contexts, env.num_actions, rng, 1.0);
    const std::vector<double> mu = random_mu_table(env, rng);
    CheckResult c = check_lemma1_decomposition(env, next, pi_t, mu, 0.7);
    c.name = "lemma1_sum_identity_random";
    out.push_back(c);
  }
  {
    ContextualBandit env = canonical_bandit();
    for (double& r : env.rewards) r = 0.5;
    CheckResult c = check_lemma1_decomposition(env, uniform3, uniform3, mu_uniform3, 1.0);
    c.name = "lemma1_constant_reward";
    c.pass = c.pass && c.measured <= 1e-18 && c.values[3].second <= 1e-18;
    out.push_back(c);
  }

  // Regret lemma on the canonical instance and on random bandits.
  {
    const LemmaEtaRun run = run_exact_with_lemma_eta(canonical, uniform3, 100, seed + 21);
    CheckResult c = check_lemma2_regret(canonical, run.run.iterates,
                                        best_deterministic_policy(canonical), run.eta);
    c.name = "lemma2_canonical";
    out.push_back(c);
  }
  {
    Rng rng(seed + 31);
    double worst_ratio = 0.0;
    bool all_pass = true;
    for (int i = 0; i < 20; ++i) {
      const ContextualBandit env = random_bandit(rng, 4, 6);
      const SoftmaxPolicy pi_0 = SoftmaxPolicy::tabular(env.num_contexts, env.num_actions);
      const LemmaEtaRun run = run_exact_with_lemma_eta(env, pi_0, 100, seed + 100 + i);
      const CheckResult c = check_lemma2_regret(env, run.run.iterates,
                                                best_deterministic_policy(env), run.eta);
      all_pass = all_pass && c.pass;
      if (c.bound > 0.0) worst_ratio = std::max(worst_ratio, c.measured / c.bound);
    }
    CheckResult c = simple("lemma2_random_envs", worst_ratio, 1.0, "20 random bandits, T=100");
    c.pass = c.pass && all_pass;
    out.push_back(c);
  }

  // Instantiated regret bound: exact run, gradient-descent run, and a
  // deliberately crippled solver with large epsilon.
  {
    const LemmaEtaRun run = run_exact_with_lemma_eta(canonical, uniform3, 400, seed + 41);
    const SoftmaxPolicy comparator = best_deterministic_policy(canonical);
    double eps = 0.0, conc = 0.0;
    for (std::size_t t = 0; t + 1 < run.run.iterates.size(); ++t) {
      const std::vector<double> mu_t = policy_table(run.run.iterates[t]);
      eps = std::max(eps, regression_epsilon(canonical, run.run.iterates[t + 1],
                                             run.run.iterates[t], mu_t, run.eta));
      conc = std::max(conc, concentrability(comparator, mu_t));
    }
    CheckResult c =
        check_theorem1_regret(canonical, run.run.iterates, comparator, conc, eps, run.eta);
    c.name = "theorem1_exact_run";
    out.push_back(c);
  }
  for (int variant = 0; variant < 2; ++variant) {
    const bool crippled = variant == 1;
    Rng rng(seed + 51 + variant);
    RebelConfig cfg;
    cfg.eta = 1.0;
    cfg.T = 60;
    cfg.batch_size = 64;
    cfg.base.kind = BaseDist::offline_fixed;
    cfg.solver.kind = SolverKind::grad_descent;
    cfg.solver.steps = crippled ? 1 : 300;
    cfg.solver.step_size = 0.1 / 64.0;
    const RunResult run = run_rebel(canonical, uniform3, cfg, rng);
    const SoftmaxPolicy comparator = best_deterministic_policy(canonical);
    double eps = 0.0;
    for (std::size_t t = 0; t + 1 < run.iterates.size(); ++t)
      eps = std::max(eps, regression_epsilon(canonical, run.iterates[t + 1], run.iterates[t],
                                             mu_uniform3, cfg.eta));
    const double conc = concentrability(comparator, mu_uniform3);
    CheckResult c = check_theorem1_regret(canonical, run.iterates, comparator, conc, eps, cfg.eta);
    c.name = crippled ? "theorem1_crippled_solver" : "theorem1_gd_run";
    out.push_back(c);
  }

  // Gauss-Newton identities.
  {
    Rng rng(seed + 61);
    for (CheckResult& c : check_claims(rng, 100, fault)) out.push_back(std::move(c));
  }

  // The update reparameterization pi_{t+1} ∝ pi_t exp(eta A_t) reproduces
  // the realized iterates, including inexact gradient-descent ones.
  {
    Rng rng(seed + 71);
    RebelConfig cfg;
    cfg.eta = 1.0;
    cfg.T = 10;
    cfg.batch_size = 32;
    cfg.solver.kind = SolverKind::grad_descent;
    cfg.solver.steps = 120;
    cfg.solver.step_size = 0.1 / 32.0;
    const RunResult run = run_rebel(canonical, uniform3, cfg, rng);
    const RealizedAdvantages adv = realized_advantages(run.iterates, cfg.eta);
    double worst = 0.0;
    for (std::size_t t = 0; t + 1 < run.iterates.size(); ++t) {
      std::vector<double> logits(run.iterates[t].theta());
      for (int x = 0; x < canonical.num_contexts; ++x) {
        const std::vector<double> lp = run.iterates[t].log_probs(x);
        for (int y = 0; y < canonical.num_actions; ++y) {
          logits[static_cast<std::size_t>(x) * canonical.num_actions + y] =
              lp[y] + cfg.eta * adv.tables[t][static_cast<std::size_t>(x) * canonical.num_actions + y];
        }
      }
      const SoftmaxPolicy rebuilt =
          SoftmaxPolicy::tabular(canonical.num_contexts, canonical.num_actions, logits);
      for (int x = 0; x < canonical.num_contexts; ++x)
        worst = std::max(worst, kl(run.iterates[t + 1], rebuilt, x));
    }
    out.push_back(simple("reparameterization_rebuilds_iterates", worst, 1e-9));
  }

  // Tabular-softmax population NPG matches the mirror-descent oracle.
  {
    Rng rng(seed + 81);
    const ContextualBandit env = random_bandit(rng, 3, 5);
    SoftmaxPolicy pi_npg = random_tabular_policy(env.num_contexts, env.num_actions, rng, 0.5);
    SoftmaxPolicy pi_md = pi_npg;
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      pi_npg = npg_step_population(pi_npg, env, env.rewards, 0.7);
      pi_md = md_oracle_step(pi_md, env.rewards, 0.7);
      for (int x = 0; x < env.num_contexts; ++x) worst = std::max(worst, kl(pi_md, pi_npg, x));
    }
    out.push_back(simple("md_npg_equivalence", worst, 1e-9, "10 steps, random bandit"));
  }

  // Leave-one-out baselining does not increase the estimator variance on the
  // canonical instance at a matched sample budget. At k=2 from the uniform
  // start the two trace covariances coincide exactly (both 1/9), so the gate
  // is the enumerated population value; the Monte-Carlo ratio over 10000
  // resamples is reported alongside.
  {
    std::vector<double> mean_r(3, 0.0), mean_l(3, 0.0);
    double sq_r = 0.0, sq_l = 0.0;
    for (int y1 = 0; y1 < 3; ++y1) {
      for (int y2 = 0; y2 < 3; ++y2) {
        const double w = 1.0 / 9.0;
        const SoftmaxPolicy stepped_r = reinforce_step(
            uniform3, {{0, y1, canonical.reward(0, y1)}, {0, y2, canonical.reward(0, y2)}}, 1.0);
        GroupedBatch grouped;
        grouped.contexts = {0};
        grouped.actions = {{y1, y2}};
        grouped.rewards = {{canonical.reward(0, y1), canonical.reward(0, y2)}};
        const SoftmaxPolicy stepped_l = rloo_step(uniform3, grouped, 1.0);
        for (int j = 0; j < 3; ++j) {
          mean_r[j] += w * stepped_r.theta()[j];
          mean_l[j] += w * stepped_l.theta()[j];
          sq_r += w * stepped_r.theta()[j] * stepped_r.theta()[j];
          sq_l += w * stepped_l.theta()[j] * stepped_l.theta()[j];
        }
      }
    }
    double var_r = sq_r, var_l = sq_l;
    for (int j = 0; j < 3; ++j) {
      var_r -= mean_r[j] * mean_r[j];
      var_l -= mean_l[j] * mean_l[j];
    }

    Rng rng(seed + 91);
    const int resamples = 10000;
    std::vector<double> mc_mean_r(3, 0.0), mc_mean_l(3, 0.0);
    double mc_sq_r = 0.0, mc_sq_l = 0.0;
    for (int i = 0; i < resamples; ++i) {
      const SampleBatch batch = collect_samples(canonical, uniform3, uniform3, 0.0, 2, rng);
      const SoftmaxPolicy stepped_r = reinforce_step(uniform3, batch, 1.0);
      GroupedBatch grouped;
      grouped.contexts = {0};
      grouped.actions = {{batch[0].y, batch[1].y}};
      grouped.rewards = {{batch[0].r, batch[1].r}};
      const SoftmaxPolicy stepped_l = rloo_step(uniform3, grouped, 1.0);
      for (int j = 0; j < 3; ++j) {
        mc_mean_r[j] += stepped_r.theta()[j] / resamples;
        mc_mean_l[j] += stepped_l.theta()[j] / resamples;
        mc_sq_r += stepped_r.theta()[j] * stepped_r.theta()[j] / resamples;
        mc_sq_l += stepped_l.theta()[j] * stepped_l.theta()[j] / resamples;
      }
    }
    double mc_var_r = mc_sq_r, mc_var_l = mc_sq_l;
    for (int j = 0; j < 3; ++j) {
      mc_var_r -= mc_mean_r[j] * mc_mean_r[j];
      mc_var_l -= mc_mean_l[j] * mc_mean_l[j];
    }
    CheckResult c = simple("rloo_variance_vs_reinforce", var_l, var_r + 1e-12,
                           "exact trace covariance at k=2; Monte-Carlo ratio in values");
    c.values = {{"rloo_variance_exact", var_l},
                {"reinforce_variance_exact", var_r},
                {"mc_ratio_10000_resamples", mc_var_r > 0.0 ? mc_var_l / mc_var_r : 0.0}};
    out.push_back(c);
  }

  // Clipping does not keep the step KL small: one overshooting inner step
  // freezes every gradient and leaves the policy far from pi_t, while the
  // exact update with a matched parameter change stays closer. Recorded,
  // not asserted.
  {
    ContextualBandit two;
    two.num_contexts = 1;
    two.num_actions = 2;
    two.rho = {1.0};
    two.rewards = {1.0, 0.0};
    const SoftmaxPolicy pi_t = SoftmaxPolicy::tabular(1, 2);
    SampleBatch batch = {{0, 0, 1.0}, {0, 1, 0.0}};
    const SoftmaxPolicy pi_ppo = ppo_clip_step(pi_t, batch, 5.0, 0.2, 30);
    double step_norm = 0.0;
    for (std::size_t j = 0; j < pi_ppo.theta().size(); ++j) {
      const double d = pi_ppo.theta()[j] - pi_t.theta()[j];
      step_norm += d * d;
    }
    step_norm = std::sqrt(step_norm);
    const double eta_matched = step_norm / norm2(two.rewards);
    const SoftmaxPolicy pi_md = md_oracle_step(pi_t, two.rewards, eta_matched);
    CheckResult c;
    c.name = "ppo_clip_kl_demo";
    c.measured = kl(pi_ppo, pi_t, 0);
    c.bound = std::numeric_limits<double>::infinity();
    c.pass = true;
    c.values = {{"kl_ppo", kl(pi_ppo, pi_t, 0)},
                {"kl_md_matched", kl(pi_md, pi_t, 0)},
                {"matched_eta", eta_matched}};
    std::ostringstream os;
    os << "clipped step KL " << kl(pi_ppo, pi_t, 0) << " vs exact-update KL "
       << kl(pi_md, pi_t, 0) << " at matched update magnitude";
    c.details = os.str();
    out.push_back(c);
  }

  // Self-play duality gap trend on rock-paper-scissors and random games.
  {
    const PreferenceGame rps = rock_paper_scissors();
    SpoConfig cfg;
    cfg.T = 200;
    cfg.batch_size = 1;
    cfg.eta = 4.0 * std::sqrt(std::log(3.0) / 200.0);
    Rng rng(seed + 101);
    const SpoResult res = run_spo_rebel(rps, SoftmaxPolicy::tabular(1, 3), cfg, rng);
    out.push_back(simple("spo_gap_rps", duality_gap(rps, res.mixture).gap, 1e-12,
                         "uniform start is the minimax winner"));
  }
  {
    Rng rng(seed + 111);
    double worst = 0.0;
    for (int g = 0; g < 10; ++g) {
      PreferenceGame game;
      game.num_contexts = 1;
      game.num_actions = 4;
      game.rho = {1.0};
      game.pref = random_skew_preferences(rng, 1, 4);
      SpoConfig cfg;
      cfg.T = 200;
      cfg.batch_size = 1;
      cfg.eta = 4.0 * std::sqrt(std::log(4.0) / 200.0);
      Rng run_rng(seed + 200 + g);
      const SpoResult res = run_spo_rebel(game, SoftmaxPolicy::tabular(1, 4), cfg, run_rng);
      worst = std::max(worst, duality_gap(game, res.mixture).gap);
    }
    out.push_back(simple("spo_gap_random_games", worst, 0.05,
                         "10 random skew games, T=200, eta at 4x the lemma rate"));
  }

  // Binary comparisons are unbiased for the pairwise payoffs.
  {
    Rng rng(seed + 121);
    const PreferenceModel pref = random_skew_preferences(rng, 1, 4);
    const int draws = 100000;
    double mean_single = 0.0, mean_diff = 0.0;
    for (int i = 0; i < draws; ++i) {
      mean_single += 2.0 * sample_binary_preference(pref, 0, 1, 2, rng) - 1.0;
      const double o1 = 2.0 * sample_binary_preference(pref, 0, 1, 3, rng) - 1.0;
      const double o2 = 2.0 * sample_binary_preference(pref, 0, 2, 3, rng) - 1.0;
      mean_diff += o1 - o2;
    }
    mean_single /= draws;
    mean_diff /= draws;
    const double dev = std::max(std::abs(mean_single - pref.l(0, 1, 2)),
                                std::abs(mean_diff - (pref.l(0, 1, 3) - pref.l(0, 2, 3))));
    out.push_back(simple("binary_feedback_unbiased", dev, 0.02, "100000 draws"));
  }

  // Exact updates improve monotonically and stay conservative.
  {
    Rng rng(seed + 131);
    double worst_drop = 0.0, worst_kl_excess = 0.0;
    for (int i = 0; i < 20; ++i) {
      const ContextualBandit env = random_bandit(rng, 4, 6);
      const SoftmaxPolicy pi_0 = SoftmaxPolicy::tabular(env.num_contexts, env.num_actions);
      RebelConfig cfg;
      cfg.eta = 1.0;
      cfg.T = 50;
      cfg.batch_size = 1;
      Rng run_rng(seed + 300 + i);
      const RunResult run = run_rebel(env, pi_0, cfg, run_rng);
      const double cap = 2.0 * cfg.eta * env.max_abs_reward();
      for (std::size_t t = 0; t + 1 < run.iterates.size(); ++t) {
        worst_drop = std::max(worst_drop, expected_reward(env, run.iterates[t]) -
                                              expected_reward(env, run.iterates[t + 1]));
        for (int x = 0; x < env.num_contexts; ++x)
          worst_kl_excess =
              std::max(worst_kl_excess, kl(run.iterates[t + 1], run.iterates[t], x) - cap);
      }
    }
    out.push_back(simple("monotonic_improvement", worst_drop, 1e-12, "20 random bandits, T=50"));
    out.push_back(simple("conservativity_step_kl", worst_kl_excess, 1e-12,
                         "max_x KL(pi_{t+1}||pi_t) <= 2 eta R"));
  }

  // Vanishing step size leaves the initial policy in place.
  {
    Rng rng(seed + 141);
    RebelConfig cfg;
    cfg.eta = 1e-8;
    cfg.T = 10;
    cfg.batch_size = 1;
    const RunResult run = run_rebel(canonical, uniform3, cfg, rng);
    double worst = 0.0;
    for (int x = 0; x < canonical.num_contexts; ++x)
      worst = std::max(worst, kl(run.final_policy(), uniform3, x));
    out.push_back(simple("eta_vanishing_limit", worst, 1e-8));
  }

  return out;
}

std::string format_check_line(const CheckResult& c) {
  std::ostringstream os;
  os << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": measured " << c.measured << ", bound "
     << c.bound;
  if (!c.details.empty()) os << " (" << c.details << ")";
  return os.str();
}

}  // namespace rebel
