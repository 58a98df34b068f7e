#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rebel/baselines.hpp"
#include "rebel/theory.hpp"

using namespace rebel;

namespace {

// Population policy gradient by enumeration: E_{x~rho, y~pi} grad ln pi * r.
std::vector<double> population_pg(const ContextualBandit& env, const SoftmaxPolicy& pi) {
  std::vector<double> pg(pi.dim(), 0.0);
  for (int x = 0; x < env.num_contexts; ++x) {
    const auto p = pi.probs(x);
    for (int y = 0; y < env.num_actions; ++y) {
      const auto g = pi.grad_log_prob(x, y);
      for (int j = 0; j < pi.dim(); ++j) pg[j] += env.rho[x] * p[y] * g[j] * env.reward(x, y);
    }
  }
  return pg;
}

}  // namespace

TEST_CASE("mirror-descent oracle step") {
  const ContextualBandit env = canonical_bandit();
  const SoftmaxPolicy uniform = SoftmaxPolicy::tabular(1, 3);

  SUBCASE("zero reward is a fixed point") {
    const SoftmaxPolicy next = md_oracle_step(uniform, std::vector<double>{0, 0, 0}, 1.0);
    for (int y = 0; y < 3; ++y)
      CHECK(next.probs(0)[y] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("canonical tilt values") {
    const auto p = md_oracle_step(uniform, env.rewards, 1.0).probs(0);
    CHECK(p[0] == doctest::Approx(0.50648039).epsilon(1e-7));
    CHECK(p[1] == doctest::Approx(0.30719589).epsilon(1e-7));
    CHECK(p[2] == doctest::Approx(0.18632372).epsilon(1e-7));
  }
  SUBCASE("two half steps compose into one full step") {
    const SoftmaxPolicy twice =
        md_oracle_step(md_oracle_step(uniform, env.rewards, 0.6), env.rewards, 0.6);
    const SoftmaxPolicy once = md_oracle_step(uniform, env.rewards, 1.2);
    CHECK(kl(once, twice, 0) <= 1e-12);
  }
}

TEST_CASE("natural policy gradient") {
  SUBCASE("constant reward moves nothing") {
    ContextualBandit env = canonical_bandit();
    env.rewards = {0.3, 0.3, 0.3};
    const SoftmaxPolicy pi = SoftmaxPolicy::tabular(1, 3, {0.5, -0.2, 0.0});
    const SoftmaxPolicy next = npg_step_population(pi, env, env.rewards, 1.0);
    for (std::size_t j = 0; j < pi.theta().size(); ++j)
      CHECK(std::abs(next.theta()[j] - pi.theta()[j]) <= 1e-12);
  }
  SUBCASE("population step equals the minimum-norm linearized step at mu = pi_t") {
    Rng rng(1);
    const ContextualBandit env = random_bandit(rng, 3, 5);
    const SoftmaxPolicy pi = random_tabular_policy(env.num_contexts, env.num_actions, rng, 0.6);
    const double eta = 0.8;
    const SoftmaxPolicy next = npg_step_population(pi, env, env.rewards, eta);
    const TripleDataset pop = population_dataset(env, pi, policy_table(pi));
    const std::vector<double> delta = gauss_newton_step(pi, pop, eta);
    for (std::size_t j = 0; j < delta.size(); ++j)
      CHECK(next.theta()[j] - pi.theta()[j] ==
            doctest::Approx(delta[j]).epsilon(1e-8).scale(1.0));
  }
  SUBCASE("two-action uniform logit gap grows by eta times the reward gap") {
    ContextualBandit env;
    env.num_contexts = 1;
    env.num_actions = 2;
    env.rho = {1.0};
    env.rewards = {1.0, 0.0};
    const SoftmaxPolicy pi = SoftmaxPolicy::tabular(1, 2);
    const SoftmaxPolicy next = npg_step_population(pi, env, env.rewards, 1.0);
    const double gap = next.theta()[0] - next.theta()[1];
    CHECK(gap == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("population npg tracks the md oracle in distribution space") {
    Rng rng(2);
    const ContextualBandit env = random_bandit(rng, 4, 5);
    SoftmaxPolicy a = random_tabular_policy(env.num_contexts, env.num_actions, rng, 0.5);
    SoftmaxPolicy b = a;
    for (int t = 0; t < 10; ++t) {
      a = npg_step_population(a, env, env.rewards, 0.9);
      b = md_oracle_step(b, env.rewards, 0.9);
      for (int x = 0; x < env.num_contexts; ++x) CHECK(kl(b, a, x) <= 1e-9);
    }
  }
  SUBCASE("batch variant runs and stays finite") {
    const ContextualBandit env = canonical_bandit();
    const SoftmaxPolicy pi = SoftmaxPolicy::tabular(1, 3);
    Rng rng(3);
    const SampleBatch batch = collect_samples(env, pi, pi, 0.0, 64, rng);
    const SoftmaxPolicy next = npg_step_batch(pi, batch, 0.5);
    for (double v : next.theta()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("reinforce") {
  const ContextualBandit env = canonical_bandit();
  const SoftmaxPolicy uniform = SoftmaxPolicy::tabular(1, 3);

  SUBCASE("zero rewards move nothing") {
    const SampleBatch batch = {{0, 0, 0.0}, {0, 2, 0.0}};
    const SoftmaxPolicy next = reinforce_step(uniform, batch, 0.7);
    CHECK(next.theta() == uniform.theta());
  }
  SUBCASE("update direction is unbiased for the population gradient") {
    const std::vector<double> pg = population_pg(env, uniform);
    Rng rng(4);
    std::vector<double> mean(uniform.dim(), 0.0);
    const int batches = 100000;
    for (int i = 0; i < batches; ++i) {
      const SampleBatch batch = collect_samples(env, uniform, uniform, 0.0, 4, rng);
      const SoftmaxPolicy next = reinforce_step(uniform, batch, 1.0);
      for (int j = 0; j < uniform.dim(); ++j) mean[j] += next.theta()[j] / batches;
    }
    const double scale = norm2(pg);
    for (int j = 0; j < uniform.dim(); ++j) CHECK(std::abs(mean[j] - pg[j]) <= 0.01 * scale);
  }
  SUBCASE("population gradient matches finite differences of expected reward") {
    Rng rng(5);
    const ContextualBandit random_env = random_bandit(rng, 3, 4);
    const SoftmaxPolicy pi = random_tabular_policy(random_env.num_contexts,
                                                   random_env.num_actions, rng, 0.5);
    const std::vector<double> pg = population_pg(random_env, pi);
    const auto numeric = finite_diff_grad(
        [&](std::span<const double> t) {
          return expected_reward(random_env,
                                 pi.with_theta(std::vector<double>(t.begin(), t.end())));
        },
        pi.theta(), 1e-5);
    for (std::size_t j = 0; j < pg.size(); ++j)
      CHECK(pg[j] == doctest::Approx(numeric[j]).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("rloo") {
  const SoftmaxPolicy uniform = SoftmaxPolicy::tabular(1, 3);

  SUBCASE("equal rewards cancel to nothing") {
    GroupedBatch batch;
    batch.contexts = {0};
    batch.actions = {{0, 1, 2, 1}};
    batch.rewards = {{0.6, 0.6, 0.6, 0.6}};
    const SoftmaxPolicy next = rloo_step(uniform, batch, 1.0);
    for (std::size_t j = 0; j < next.theta().size(); ++j)
      CHECK(std::abs(next.theta()[j] - uniform.theta()[j]) <= 1e-15);
  }
  SUBCASE("k = 2 reduces to the paired reward-difference form") {
    GroupedBatch batch;
    batch.contexts = {0};
    batch.actions = {{0, 2}};
    batch.rewards = {{1.0, 0.0}};
    const SoftmaxPolicy next = rloo_step(uniform, batch, 1.0);
    const auto g0 = uniform.grad_log_prob(0, 0);
    const auto g2 = uniform.grad_log_prob(0, 2);
    for (std::size_t j = 0; j < next.theta().size(); ++j) {
      const double expected = 0.5 * (g0[j] * (1.0 - 0.0) + g2[j] * (0.0 - 1.0));
      CHECK(next.theta()[j] == doctest::Approx(expected).epsilon(1e-14));
    }
  }
  SUBCASE("unbiased for the population gradient") {
    const ContextualBandit env = canonical_bandit();
    const std::vector<double> pg = population_pg(env, uniform);
    Rng rng(6);
    std::vector<double> mean(uniform.dim(), 0.0);
    const int batches = 100000;
    for (int i = 0; i < batches; ++i) {
      const GroupedBatch batch = collect_grouped(env, uniform, uniform, 0.0, 1, 2, rng);
      const SoftmaxPolicy next = rloo_step(uniform, batch, 1.0);
      for (int j = 0; j < uniform.dim(); ++j) mean[j] += next.theta()[j] / batches;
    }
    const double scale = norm2(pg);
    for (int j = 0; j < uniform.dim(); ++j) CHECK(std::abs(mean[j] - pg[j]) <= 0.01 * scale);
  }
  SUBCASE("needs at least two samples per context") {
    GroupedBatch batch;
    batch.contexts = {0};
    batch.actions = {{1}};
    batch.rewards = {{0.5}};
    CHECK_THROWS_AS(rloo_step(uniform, batch, 1.0), std::invalid_argument);
  }
}

TEST_CASE("ppo clipped surrogate") {
  const SoftmaxPolicy uniform = SoftmaxPolicy::tabular(1, 3);
  const SampleBatch batch = {{0, 0, 1.0}, {0, 1, 0.5}, {0, 2, 0.0}};

  SUBCASE("one inner step equals an advantage-baselined reinforce step") {
    const SoftmaxPolicy ppo = ppo_clip_step(uniform, batch, 0.3, 0.2, 1);
    const double mean = (1.0 + 0.5 + 0.0) / 3.0;
    SampleBatch centered = batch;
    for (RewardSample& s : centered) s.r -= mean;
    const SoftmaxPolicy reinf = reinforce_step(uniform, centered, 0.3);
    for (std::size_t j = 0; j < ppo.theta().size(); ++j)
      CHECK(ppo.theta()[j] == doctest::Approx(reinf.theta()[j]).epsilon(1e-12));
  }
  SUBCASE("surrogate equals the unclipped value while ratios stay inside") {
    const SoftmaxPolicy near = uniform.with_theta({0.01, 0.0, -0.01});
    std::vector<double> adv = {0.5, 0.0, -0.5};
    const double clipped = ppo_surrogate(near, uniform, batch, 0.2, adv);
    double unclipped = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double ratio =
          std::exp(near.log_prob(batch[i].x, batch[i].y) - uniform.log_prob(batch[i].x, batch[i].y));
      unclipped += ratio * adv[i] / batch.size();
    }
    CHECK(clipped == doctest::Approx(unclipped).epsilon(1e-14));
  }
  SUBCASE("an overshooting step freezes and the kl stays large") {
    // Large learning rate: the first inner step blows past 1 + epsilon and
    // every later gradient is clamped to zero, so the kl never recovers.
    ContextualBandit two;
    two.num_contexts = 1;
    two.num_actions = 2;
    two.rho = {1.0};
    two.rewards = {1.0, 0.0};
    const SoftmaxPolicy start = SoftmaxPolicy::tabular(1, 2);
    const SampleBatch pair = {{0, 0, 1.0}, {0, 1, 0.0}};
    const SoftmaxPolicy one = ppo_clip_step(start, pair, 5.0, 0.2, 1);
    const SoftmaxPolicy many = ppo_clip_step(start, pair, 5.0, 0.2, 40);
    CHECK(kl(many, start, 0) == doctest::Approx(kl(one, start, 0)).epsilon(1e-12));
    CHECK(kl(many, start, 0) > 0.2);
  }
}

TEST_CASE("iterative dpo") {
  const SoftmaxPolicy uniform = SoftmaxPolicy::tabular(1, 3);
  TripleDataset data;
  data.triples = {{0, 0, 2, 1.0, 0.0}, {0, 1, 2, 0.5, 0.0}};

  SUBCASE("loss at theta_t is ln 2 per triple") {
    CHECK(dpo_loss(uniform, uniform, data, 0.05) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
  }
  SUBCASE("tied rewards contribute a flat ln 2 and no gradient") {
    TripleDataset tied;
    tied.triples = {{0, 0, 2, 0.7, 0.7}, {0, 1, 0, 0.2, 0.2}};
    Rng rng(7);
    const SoftmaxPolicy anywhere = random_tabular_policy(1, 3, rng, 1.5);
    CHECK(dpo_loss(anywhere, uniform, tied, 0.05) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
    for (double g : dpo_grad(anywhere, uniform, tied, 0.05)) CHECK(g == 0.0);
  }
  SUBCASE("gradient matches finite differences") {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
      const ContextualBandit env = random_bandit(rng, 2, 4);
      const SoftmaxPolicy pi_t = random_tabular_policy(env.num_contexts, env.num_actions, rng, 0.6);
      const SoftmaxPolicy cand = random_tabular_policy(env.num_contexts, env.num_actions, rng, 0.6);
      RebelConfig cc;
      cc.T = 1;
      cc.batch_size = 6;
      Rng srng(900 + trial);
      const TripleDataset d = collect_dataset(env, pi_t, pi_t, cc, srng);
      const double beta = rng.uniform(0.05, 1.0);
      const auto analytic = dpo_grad(cand, pi_t, d, beta);
      const auto numeric = finite_diff_grad(
          [&](std::span<const double> t) {
            return dpo_loss(pi_t.with_theta(std::vector<double>(t.begin(), t.end())), pi_t, d,
                            beta);
          },
          cand.theta(), 1e-5);
      for (std::size_t j = 0; j < analytic.size(); ++j)
        CHECK(analytic[j] == doctest::Approx(numeric[j]).epsilon(1e-5).scale(1.0));
    }
  }
  SUBCASE("descent lowers the loss") {
    const SoftmaxPolicy next = iterative_dpo_step(uniform, data, 0.5, 0.5, 50);
    CHECK(dpo_loss(next, uniform, data, 0.5) < dpo_loss(uniform, uniform, data, 0.5));
  }
  SUBCASE("serial dpo kernels agree with the parallel path") {
    Rng rng(9);
    const SoftmaxPolicy cand = random_tabular_policy(1, 3, rng, 1.0);
    CHECK(dpo_loss(cand, uniform, data, 0.3) ==
          doctest::Approx(serial::dpo_loss(cand, uniform, data, 0.3)).epsilon(1e-14));
    const auto gp = dpo_grad(cand, uniform, data, 0.3);
    const auto gs = serial::dpo_grad(cand, uniform, data, 0.3);
    for (std::size_t j = 0; j < gp.size(); ++j)
      CHECK(gp[j] == doctest::Approx(gs[j]).epsilon(1e-14));
  }
}

TEST_CASE("baseline config validation") {
  BaselineConfig cfg;
  cfg.algo = Algo::rloo;
  cfg.k = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.algo = Algo::ppo_clip;
  cfg.k = 2;
  cfg.epsilon = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.algo = Algo::iter_dpo;
  cfg.epsilon = 0.2;
  cfg.beta = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("baseline outer loop runs every algorithm") {
  const ContextualBandit env = canonical_bandit();
  const SoftmaxPolicy pi_0 = SoftmaxPolicy::tabular(1, 3);
  for (Algo algo :
       {Algo::md_oracle, Algo::npg, Algo::reinforce, Algo::rloo, Algo::ppo_clip, Algo::iter_dpo}) {
    BaselineConfig cfg;
    cfg.algo = algo;
    cfg.T = 3;
    cfg.batch_size = 8;
    cfg.lr = 0.2;
    Rng rng(10);
    const RunResult res = run_baseline(env, pi_0, cfg, rng);
    CHECK(res.records.size() == 3);
    CHECK(res.iterates.size() == 4);
    for (const RunRecord& r : res.records) {
      CHECK(std::isfinite(r.expected_reward));
      CHECK(r.kl_step >= 0.0);
      CHECK(r.kl_ref >= 0.0);
    }
  }
}
