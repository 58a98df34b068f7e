// Timing comparison of the parallel batch kernels against their serial
// references on large synthetic datasets.

#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#else
#include <chrono>
#endif

#include "rebel/baselines.hpp"
#include "rebel/rebel_core.hpp"

namespace {

double now_seconds() {
#ifdef _OPENMP
  return omp_get_wtime();
#else
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
#endif
}

template <class Fn>
double time_best_of(int repeats, const Fn& fn) {
  double best = 1e300;
  for (int i = 0; i < repeats; ++i) {
    const double t0 = now_seconds();
    fn();
    best = std::min(best, now_seconds() - t0);
  }
  return best;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t n = 1 << 18;
  int repeats = 5;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string key = argv[i];
    if (key == "--n") n = std::stoull(argv[i + 1]);
    else if (key == "--repeat") repeats = std::stoi(argv[i + 1]);
  }

  rebel::Rng rng(7);
  const rebel::ContextualBandit env = rebel::random_bandit(rng, 4, 6);
  const rebel::SoftmaxPolicy pi_t =
      rebel::random_tabular_policy(env.num_contexts, env.num_actions, rng, 0.5);
  const rebel::SoftmaxPolicy candidate =
      rebel::random_tabular_policy(env.num_contexts, env.num_actions, rng, 0.5);

  rebel::RebelConfig cfg;
  cfg.eta = 1.0;
  cfg.T = 1;
  cfg.batch_size = static_cast<int>(n);
  const rebel::TripleDataset data = rebel::collect_dataset(env, pi_t, pi_t, cfg, rng);

#ifdef _OPENMP
  std::cout << "threads: " << omp_get_max_threads() << ", triples: " << n << "\n";
#else
  std::cout << "threads: 1 (no OpenMP), triples: " << n << "\n";
#endif
  std::cout << std::left << std::setw(14) << "kernel" << std::right << std::setw(12) << "serial_s"
            << std::setw(12) << "parallel_s" << std::setw(10) << "speedup" << std::setw(14)
            << "max_diff" << "\n";

  {
    double serial_value = 0.0, parallel_value = 0.0;
    const double ts = time_best_of(
        repeats, [&] { serial_value = rebel::serial::rebel_loss(candidate, pi_t, data, 1.0); });
    const double tp =
        time_best_of(repeats, [&] { parallel_value = rebel::rebel_loss(candidate, pi_t, data, 1.0); });
    std::cout << std::left << std::setw(14) << "rebel_loss" << std::right << std::setw(12) << ts
              << std::setw(12) << tp << std::setw(10) << ts / tp << std::setw(14)
              << std::abs(serial_value - parallel_value) << "\n";
  }
  {
    std::vector<double> gs, gp;
    const double ts =
        time_best_of(repeats, [&] { gs = rebel::serial::rebel_grad(candidate, pi_t, data, 1.0); });
    const double tp = time_best_of(repeats, [&] { gp = rebel::rebel_grad(candidate, pi_t, data, 1.0); });
    std::cout << std::left << std::setw(14) << "rebel_grad" << std::right << std::setw(12) << ts
              << std::setw(12) << tp << std::setw(10) << ts / tp << std::setw(14)
              << max_abs_diff(gs, gp) << "\n";
  }
  {
    double serial_value = 0.0, parallel_value = 0.0;
    const double ts = time_best_of(
        repeats, [&] { serial_value = rebel::serial::dpo_loss(candidate, pi_t, data, 0.05); });
    const double tp =
        time_best_of(repeats, [&] { parallel_value = rebel::dpo_loss(candidate, pi_t, data, 0.05); });
    std::cout << std::left << std::setw(14) << "dpo_loss" << std::right << std::setw(12) << ts
              << std::setw(12) << tp << std::setw(10) << ts / tp << std::setw(14)
              << std::abs(serial_value - parallel_value) << "\n";
  }
  {
    std::vector<double> gs, gp;
    const double ts =
        time_best_of(repeats, [&] { gs = rebel::serial::dpo_grad(candidate, pi_t, data, 0.05); });
    const double tp = time_best_of(repeats, [&] { gp = rebel::dpo_grad(candidate, pi_t, data, 0.05); });
    std::cout << std::left << std::setw(14) << "dpo_grad" << std::right << std::setw(12) << ts
              << std::setw(12) << tp << std::setw(10) << ts / tp << std::setw(14)
              << max_abs_diff(gs, gp) << "\n";
  }
  return 0;
}
