#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rebel/baselines.hpp"
#include "rebel/rebel_core.hpp"
#include "rebel/selfplay.hpp"

namespace rebel {

struct CheckResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double bound = 0.0;
  std::string details;
  std::vector<std::pair<std::string, double>> values;
};

// Self-test hook: lets the battery prove it catches a broken solver.
enum class FaultInjection { none, gauss_newton_sign };

// Exact population value of the squared prediction error of reward
// differences under x ~ rho, y ~ pi_t, y' ~ mu: the epsilon the solver
// actually achieved at this iteration.
double regression_epsilon(const ContextualBandit& env, const SoftmaxPolicy& pi_next,
                          const SoftmaxPolicy& pi_t, std::span<const double> mu_table, double eta);

// The three centered error terms of the regression decomposition; they are
// each nonnegative and sum exactly to the epsilon above.
struct Lemma1Terms {
  double err_on_policy = 0.0;  // E_{pi_t} (Delta - Delta_pi)^2
  double err_base = 0.0;       // E_{mu}   (Delta - Delta_mu)^2
  double err_cross = 0.0;      // E_x (Delta_pi - Delta_mu)^2
  double epsilon = 0.0;
};
Lemma1Terms lemma1_decomposition(const ContextualBandit& env, const SoftmaxPolicy& pi_next,
                                 const SoftmaxPolicy& pi_t, std::span<const double> mu_table,
                                 double eta);

// A_t(x, y) = f_t - E_{pi_t} f_t with f_t = (1/eta) ln(pi_{t+1}/pi_t);
// a_bound is the realized max |A_t| over the whole run.
struct RealizedAdvantages {
  std::vector<std::vector<double>> tables;  // per iteration, (x, y) grid
  double a_bound = 0.0;
};
RealizedAdvantages realized_advantages(const std::vector<SoftmaxPolicy>& iterates, double eta);

// Exact-solver run with the regret lemma's step size eta = sqrt(ln|Y|/(A^2 T)).
// A is not known before the run, so the prescription is solved by fixed-point
// iteration on the realized bound, seeded with the reward span.
struct LemmaEtaRun {
  RunResult run;
  double eta = 0.0;
  double a_bound = 0.0;
  int rounds = 0;
  bool converged = false;
};
LemmaEtaRun run_exact_with_lemma_eta(const ContextualBandit& env, const SoftmaxPolicy& pi_0, int T,
                                     std::uint64_t seed);

CheckResult check_regression_epsilon(const ContextualBandit& env, const SoftmaxPolicy& pi_next,
                                     const SoftmaxPolicy& pi_t, std::span<const double> mu_table,
                                     double eta, double bound);
CheckResult check_lemma1_decomposition(const ContextualBandit& env, const SoftmaxPolicy& pi_next,
                                       const SoftmaxPolicy& pi_t, std::span<const double> mu_table,
                                       double eta);
// max over contexts of sum_t E_{y ~ comparator} A_t(x, y) against
// 2 A sqrt(ln|Y| T); warns when eta is off the lemma prescription.
CheckResult check_lemma2_regret(const ContextualBandit& env,
                                const std::vector<SoftmaxPolicy>& iterates,
                                const SoftmaxPolicy& comparator, double eta);
// Best-iterate suboptimality against 2 A sqrt(ln|Y|/T) + sqrt(10 C eps).
CheckResult check_theorem1_regret(const ContextualBandit& env,
                                  const std::vector<SoftmaxPolicy>& iterates,
                                  const SoftmaxPolicy& comparator, double concentrability_coeff,
                                  double epsilon, double eta);

// Both identities evaluated through independent routes on random instances:
// the linearized minimum-norm step against the pseudo-inverse closed forms.
std::vector<CheckResult> check_claims(Rng& rng, int instances,
                                      FaultInjection fault = FaultInjection::none);

std::vector<CheckResult> run_verification_battery(std::uint64_t seed,
                                                  FaultInjection fault = FaultInjection::none);

std::string format_check_line(const CheckResult& c);

}  // namespace rebel
