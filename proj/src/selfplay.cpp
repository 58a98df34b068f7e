#include "rebel/selfplay.hpp"

#include <cmath>
#include <stdexcept>

namespace rebel {

void PreferenceGame::validate() const {
  if (num_contexts < 1 || num_actions < 2)
    throw std::invalid_argument("preference game: needs >= 1 context and >= 2 actions");
  if (static_cast<int>(rho.size()) != num_contexts)
    throw std::invalid_argument("preference game: rho size mismatch");
  double sum = 0.0;
  for (double p : rho) {
    if (!(p >= 0.0)) throw std::invalid_argument("preference game: rho entries must be nonnegative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("preference game: rho must sum to 1");
  if (pref.num_contexts != num_contexts || pref.num_actions != num_actions)
    throw std::invalid_argument("preference game: payoff dimensions mismatch");
  pref.validate();
}

void SpoConfig::validate() const {
  if (!(eta > 0.0)) throw std::invalid_argument("spo config: eta must be positive");
  if (T < 0) throw std::invalid_argument("spo config: T must be nonnegative");
  if (batch_size < 1) throw std::invalid_argument("spo config: batch_size must be at least 1");
  if (pref_samples < 1) throw std::invalid_argument("spo config: pref_samples must be at least 1");
}

DistTable table_of(const SoftmaxPolicy& pi) {
  return DistTable{pi.num_contexts(), pi.num_actions(), policy_table(pi)};
}

DistTable uniform_mixture(std::span<const SoftmaxPolicy> iterates) {
  if (iterates.empty()) throw std::invalid_argument("uniform_mixture: no iterates");
  DistTable mix = table_of(iterates[0]);
  for (std::size_t i = 1; i < iterates.size(); ++i) {
    const std::vector<double> p = policy_table(iterates[i]);
    for (std::size_t j = 0; j < mix.probs.size(); ++j) mix.probs[j] += p[j];
  }
  for (double& v : mix.probs) v /= static_cast<double>(iterates.size());
  return mix;
}

double winrate_reward(const PreferenceModel& pref, const SoftmaxPolicy& pi, int x, int y) {
  const std::vector<double> p = pi.probs(x);
  double r = 0.0;
  for (int ypp = 0; ypp < pref.num_actions; ++ypp) r += p[ypp] * pref.l(x, y, ypp);
  return r;
}

std::vector<double> winrate_table(const PreferenceGame& game, const SoftmaxPolicy& pi) {
  std::vector<double> out(static_cast<std::size_t>(game.num_contexts) * game.num_actions);
  for (int x = 0; x < game.num_contexts; ++x)
    for (int y = 0; y < game.num_actions; ++y)
      out[static_cast<std::size_t>(x) * game.num_actions + y] = winrate_reward(game.pref, pi, x, y);
  return out;
}

std::vector<double> winrate_table(const PreferenceGame& game, const DistTable& opponent) {
  std::vector<double> out(static_cast<std::size_t>(game.num_contexts) * game.num_actions, 0.0);
  for (int x = 0; x < game.num_contexts; ++x)
    for (int y = 0; y < game.num_actions; ++y) {
      double r = 0.0;
      for (int ypp = 0; ypp < game.num_actions; ++ypp)
        r += opponent.prob(x, ypp) * game.pref.l(x, y, ypp);
      out[static_cast<std::size_t>(x) * game.num_actions + y] = r;
    }
  return out;
}

namespace {

// Quadruple records (x, y, y', y'') flattened onto regression triples.
// Exact mode stores the enumerated winrate rewards; binary mode stores the
// mean of (2o - 1) comparison outcomes, an unbiased payoff estimate.
TripleDataset collect_preference_dataset(const PreferenceGame& game, const SoftmaxPolicy& pi_t,
                                         const SpoConfig& config,
                                         std::span<const double> winrates, Rng& rng) {
  TripleDataset data;
  data.triples.reserve(config.batch_size);
  for (int i = 0; i < config.batch_size; ++i) {
    RegressionTriple t;
    t.x = rng.categorical(game.rho);
    t.y = pi_t.sample(t.x, rng);
    t.y_prime = pi_t.sample(t.x, rng);  // self-play base distribution mu = pi_t
    if (config.binary_feedback) {
      double acc_y = 0.0, acc_yp = 0.0;
      for (int j = 0; j < config.pref_samples; ++j) {
        const int ypp = pi_t.sample(t.x, rng);
        acc_y += 2.0 * sample_binary_preference(game.pref, t.x, t.y, ypp, rng) - 1.0;
        acc_yp += 2.0 * sample_binary_preference(game.pref, t.x, t.y_prime, ypp, rng) - 1.0;
      }
      t.r_y = acc_y / config.pref_samples;
      t.r_yprime = acc_yp / config.pref_samples;
    } else {
      t.r_y = winrates[static_cast<std::size_t>(t.x) * game.num_actions + t.y];
      t.r_yprime = winrates[static_cast<std::size_t>(t.x) * game.num_actions + t.y_prime];
    }
    data.triples.push_back(t);
  }
  return data;
}

}  // namespace

SpoResult run_spo_rebel(const PreferenceGame& game, const SoftmaxPolicy& pi_0,
                        const SpoConfig& config, Rng& rng, const RecordSink& sink) {
  game.validate();
  config.validate();

  SpoResult result;
  result.iterates.push_back(pi_0);
  for (int t = 0; t < config.T; ++t) {
    const SoftmaxPolicy& pi_t = result.iterates.back();
    const std::vector<double> winrates = winrate_table(game, pi_t);
    const TripleDataset data = collect_preference_dataset(game, pi_t, config, winrates, rng);

    SoftmaxPolicy pi_next = pi_t;
    double loss = 0.0;
    if (config.solver.kind == SolverKind::exact_tabular) {
      pi_next = solve_regression_exact_tabular(pi_t, winrates, config.eta);
      loss = rebel_loss(pi_next, pi_t, data, config.eta);
    } else {
      GdResult gd = solve_regression_gd(pi_t, data, config.eta, config.solver.steps,
                                        config.solver.step_size);
      pi_next = std::move(gd.policy);
      loss = gd.final_loss;
      if (gd.diverged) throw SolverDivergence(t);
    }
    result.iterates.push_back(std::move(pi_next));
    // pi_t may dangle after the push; index the vector from here on.
    const SoftmaxPolicy& cur = result.iterates[t];

    // Expected winrate of pi_t against itself is 0 by skew-symmetry; the gap
    // of the running mixture is the convergence measure worth streaming.
    double exp_winrate = 0.0;
    for (int x = 0; x < game.num_contexts; ++x) {
      const std::vector<double> p = cur.probs(x);
      for (int y = 0; y < game.num_actions; ++y)
        exp_winrate +=
            game.rho[x] * p[y] * winrates[static_cast<std::size_t>(x) * game.num_actions + y];
    }
    const DistTable running =
        uniform_mixture(std::span<const SoftmaxPolicy>(result.iterates).subspan(1));
    RunRecord rec;
    rec.iteration = t;
    rec.expected_reward = exp_winrate;
    rec.kl_step = mean_kl(result.iterates[t + 1], result.iterates[t], game.rho);
    rec.kl_ref = mean_kl(result.iterates[t], pi_0, game.rho);
    rec.regression_loss = loss;
    rec.suboptimality = duality_gap(game, running).gap;
    result.records.push_back(rec);
    if (sink) sink(rec);
  }

  if (result.iterates.size() > 1) {
    result.mixture = uniform_mixture(std::span<const SoftmaxPolicy>(result.iterates).subspan(1));
  } else {
    result.mixture = table_of(pi_0);
  }
  return result;
}

DualityGapReport duality_gap(const PreferenceGame& game, const DistTable& policy) {
  DualityGapReport report;
  double max_side = 0.0, min_side = 0.0;
  for (int x = 0; x < game.num_contexts; ++x) {
    int arg_max = 0, arg_min = 0;
    double v_max = 0.0, v_min = 0.0;
    for (int y = 0; y < game.num_actions; ++y) {
      double attack = 0.0;  // l(x, y, policy): payoff of pure y against the policy
      double defend = 0.0;  // l(x, policy, y): payoff of the policy against pure y
      for (int ypp = 0; ypp < game.num_actions; ++ypp) {
        attack += policy.prob(x, ypp) * game.pref.l(x, y, ypp);
        defend += policy.prob(x, ypp) * game.pref.l(x, ypp, y);
      }
      if (y == 0 || attack > v_max) {
        v_max = attack;
        arg_max = y;
      }
      if (y == 0 || defend < v_min) {
        v_min = defend;
        arg_min = y;
      }
    }
    max_side += game.rho[x] * v_max;
    min_side += game.rho[x] * v_min;
    report.best_response_max.push_back(arg_max);
    report.best_response_min.push_back(arg_min);
  }
  report.gap = max_side - min_side;
  return report;
}

PreferenceGame rock_paper_scissors() {
  // Actions 0 = rock, 1 = paper, 2 = scissors.
  PreferenceGame game;
  game.num_contexts = 1;
  game.num_actions = 3;
  game.rho = {1.0};
  std::vector<double> table(9, 0.0);
  auto set = [&](int y, int yp, double v) {
    table[static_cast<std::size_t>(y) * 3 + yp] = v;
    table[static_cast<std::size_t>(yp) * 3 + y] = -v;
  };
  set(0, 2, 1.0);  // rock beats scissors
  set(2, 1, 1.0);  // scissors beats paper
  set(1, 0, 1.0);  // paper beats rock
  game.pref = PreferenceModel::from_payoff(1, 3, std::move(table));
  return game;
}

}  // namespace rebel
