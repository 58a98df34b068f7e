#include "rebel/env.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "rebel/policy.hpp"

namespace rebel {

using nlohmann::ordered_json;

double ContextualBandit::max_abs_reward() const {
  double m = 0.0;
  for (double r : rewards) m = std::max(m, std::abs(r));
  return m;
}

double ContextualBandit::max_reward_span() const {
  double span = 0.0;
  for (int x = 0; x < num_contexts; ++x) {
    double lo = reward(x, 0), hi = reward(x, 0);
    for (int y = 1; y < num_actions; ++y) {
      lo = std::min(lo, reward(x, y));
      hi = std::max(hi, reward(x, y));
    }
    span = std::max(span, hi - lo);
  }
  return span;
}

void ContextualBandit::validate() const {
  if (num_contexts < 1) throw std::invalid_argument("bandit: needs at least one context");
  if (num_actions < 2) throw std::invalid_argument("bandit: needs at least two actions");
  if (static_cast<int>(rho.size()) != num_contexts)
    throw std::invalid_argument("bandit: rho size mismatch");
  if (rho.size() * static_cast<std::size_t>(num_actions) != rewards.size())
    throw std::invalid_argument("bandit: reward table size mismatch");
  double sum = 0.0;
  for (double p : rho) {
    if (!(p >= 0.0)) throw std::invalid_argument("bandit: rho entries must be nonnegative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("bandit: rho must sum to 1");
  for (double r : rewards) {
    if (!std::isfinite(r)) throw std::invalid_argument("bandit: non-finite reward");
  }
}

int sample_context(const ContextualBandit& env, Rng& rng) {
  return rng.categorical(env.rho);
}

PreferenceModel PreferenceModel::from_payoff(int nc, int na, std::vector<double> table) {
  PreferenceModel p{nc, na, std::move(table)};
  if (p.payoff.size() != static_cast<std::size_t>(nc) * na * na)
    throw std::invalid_argument("preference model: payoff table size mismatch");
  // Validate skew-symmetry of the input within roundoff, then canonicalize:
  // zero diagonal, lower triangle mirrored from the upper one by negation,
  // so the stored table is skew-symmetric bit for bit.
  for (int x = 0; x < nc; ++x) {
    for (int y = 0; y < na; ++y) {
      const std::size_t row = (static_cast<std::size_t>(x) * na + y) * na;
      if (std::abs(p.payoff[row + y]) > 1e-12)
        throw std::invalid_argument("preference model: nonzero diagonal payoff");
      p.payoff[row + y] = 0.0;
      for (int yp = y + 1; yp < na; ++yp) {
        const double v = p.payoff[row + yp];
        const double mirror = p.payoff[(static_cast<std::size_t>(x) * na + yp) * na + y];
        if (!(v >= -1.0 && v <= 1.0))
          throw std::invalid_argument("preference model: payoff outside [-1, 1]");
        if (std::abs(v + mirror) > 1e-12)
          throw std::invalid_argument("preference model: skew-symmetry violated");
        p.payoff[(static_cast<std::size_t>(x) * na + yp) * na + y] = -v;
      }
    }
  }
  p.validate();
  return p;
}

PreferenceModel PreferenceModel::from_win_prob(int nc, int na, const std::vector<double>& prob) {
  std::vector<double> table(prob.size());
  for (std::size_t i = 0; i < prob.size(); ++i) {
    if (!(prob[i] >= 0.0 && prob[i] <= 1.0))
      throw std::invalid_argument("preference model: win probability outside [0, 1]");
    table[i] = 2.0 * prob[i] - 1.0;
  }
  return from_payoff(nc, na, std::move(table));
}

void PreferenceModel::validate() const {
  for (int x = 0; x < num_contexts; ++x) {
    for (int y = 0; y < num_actions; ++y) {
      if (l(x, y, y) != 0.0)
        throw std::invalid_argument("preference model: nonzero diagonal payoff");
      for (int yp = 0; yp < num_actions; ++yp) {
        if (l(x, y, yp) + l(x, yp, y) != 0.0)
          throw std::invalid_argument("preference model: skew-symmetry violated");
      }
    }
  }
}

double pairwise_payoff(const PreferenceModel& p, int x, int y, int yp) {
  return p.l(x, y, yp);
}

int sample_binary_preference(const PreferenceModel& p, int x, int y, int yp, Rng& rng) {
  const double win = (p.l(x, y, yp) + 1.0) / 2.0;
  return rng.bernoulli(win) ? 1 : 0;
}

double shaped_reward(const ShapedReward& s, int x, int y) {
  const double base = s.base->reward(x, y);
  if (s.gamma == 0.0) return base;
  const double lp_cur = s.current->log_prob(x, y);
  const double lp_ref = s.reference->log_prob(x, y);
  if (!std::isfinite(lp_cur) || !std::isfinite(lp_ref))
    throw std::invalid_argument("shaped_reward: zero probability at (x, y)");
  return base - s.gamma * (lp_cur - lp_ref);
}

std::vector<double> shaped_reward_table(const ShapedReward& s) {
  const int nc = s.base->num_contexts, na = s.base->num_actions;
  std::vector<double> out(static_cast<std::size_t>(nc) * na);
  for (int x = 0; x < nc; ++x)
    for (int y = 0; y < na; ++y) out[static_cast<std::size_t>(x) * na + y] = shaped_reward(s, x, y);
  return out;
}

EnvFile load_env_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open environment file: " + path);
  ordered_json j = ordered_json::parse(in);

  EnvFile e;
  const auto contexts = j.at("contexts").get<std::vector<int>>();
  e.bandit.num_contexts = static_cast<int>(contexts.size());
  for (int i = 0; i < e.bandit.num_contexts; ++i) {
    if (contexts[i] != i) throw std::runtime_error("environment file: contexts must be 0..N-1");
  }
  e.bandit.rho = j.at("rho").get<std::vector<double>>();
  const auto actions = j.at("actions").get<std::vector<std::vector<int>>>();
  if (actions.size() != contexts.size())
    throw std::runtime_error("environment file: one action list per context required");
  e.bandit.num_actions = static_cast<int>(actions.empty() ? 0 : actions[0].size());
  for (const auto& row : actions) {
    if (static_cast<int>(row.size()) != e.bandit.num_actions)
      throw std::runtime_error("environment file: action lists must share one size");
    for (int i = 0; i < e.bandit.num_actions; ++i) {
      if (row[i] != i) throw std::runtime_error("environment file: actions must be 0..Y-1");
    }
  }
  e.bandit.rewards = j.at("rewards").get<std::vector<double>>();
  e.bandit.validate();

  if (j.contains("preferences")) {
    e.preferences = PreferenceModel::from_payoff(
        e.bandit.num_contexts, e.bandit.num_actions,
        j.at("preferences").get<std::vector<double>>());
  }
  return e;
}

void save_env_file(const EnvFile& e, const std::string& path) {
  ordered_json j;
  std::vector<int> contexts(e.bandit.num_contexts);
  for (int i = 0; i < e.bandit.num_contexts; ++i) contexts[i] = i;
  std::vector<int> row(e.bandit.num_actions);
  for (int i = 0; i < e.bandit.num_actions; ++i) row[i] = i;

  j["contexts"] = contexts;
  j["rho"] = e.bandit.rho;
  j["actions"] = std::vector<std::vector<int>>(e.bandit.num_contexts, row);
  j["rewards"] = e.bandit.rewards;
  if (e.preferences) j["preferences"] = e.preferences->payoff;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write environment file: " + path);
  out << j.dump(2) << "\n";
}

ContextualBandit random_bandit(Rng& rng, int max_contexts, int max_actions) {
  ContextualBandit env;
  env.num_contexts = 1 + rng.below(max_contexts);
  env.num_actions = 2 + rng.below(max_actions - 1);
  env.rho.resize(env.num_contexts);
  double sum = 0.0;
  for (double& p : env.rho) {
    p = rng.uniform(0.1, 1.0);
    sum += p;
  }
  for (double& p : env.rho) p /= sum;
  // Renormalization drift stays well under the 1e-12 construction gate.
  double total = 0.0;
  for (int i = 0; i + 1 < env.num_contexts; ++i) total += env.rho[i];
  env.rho[env.num_contexts - 1] = 1.0 - total;
  env.rewards.resize(static_cast<std::size_t>(env.num_contexts) * env.num_actions);
  for (double& r : env.rewards) r = rng.uniform(0.0, 1.0);
  env.validate();
  return env;
}

PreferenceModel random_skew_preferences(Rng& rng, int num_contexts, int num_actions) {
  // Skew part of a uniform [-1, 1] table; entries stay inside [-1, 1].
  std::vector<double> table(static_cast<std::size_t>(num_contexts) * num_actions * num_actions, 0.0);
  for (int x = 0; x < num_contexts; ++x) {
    for (int y = 0; y < num_actions; ++y) {
      for (int yp = y + 1; yp < num_actions; ++yp) {
        const double m1 = rng.uniform(-1.0, 1.0);
        const double m2 = rng.uniform(-1.0, 1.0);
        const double v = (m1 - m2) / 2.0;
        table[(static_cast<std::size_t>(x) * num_actions + y) * num_actions + yp] = v;
        table[(static_cast<std::size_t>(x) * num_actions + yp) * num_actions + y] = -v;
      }
    }
  }
  return PreferenceModel::from_payoff(num_contexts, num_actions, std::move(table));
}

ContextualBandit canonical_bandit() {
  ContextualBandit env;
  env.num_contexts = 1;
  env.num_actions = 3;
  env.rho = {1.0};
  env.rewards = {1.0, 0.5, 0.0};
  return env;
}

}  // namespace rebel
