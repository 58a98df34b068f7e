#pragma once

#include <cstddef>
#include <vector>

namespace rebel {

// Blocked sums: partials over fixed 1024-element blocks are combined in block
// order, so the result is identical for any thread count, including one.
// Parallel kernels and their serial references both go through these.

inline constexpr std::size_t kReduceBlock = 1024;

template <class Term>
double block_sum(std::size_t n, const Term& term) {
  const std::size_t nblocks = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<double> partial(nblocks, 0.0);
#pragma omp parallel for schedule(static)
  for (long long b = 0; b < static_cast<long long>(nblocks); ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kReduceBlock;
    const std::size_t hi = lo + kReduceBlock < n ? lo + kReduceBlock : n;
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += term(i);
    partial[static_cast<std::size_t>(b)] = s;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

// Same scheme for vector-valued terms accumulated into `out` (size dim).
template <class TermInto>
void block_sum_into(std::size_t n, std::size_t dim, std::vector<double>& out,
                    const TermInto& term_into) {
  const std::size_t nblocks = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<double> partial(nblocks * dim, 0.0);
#pragma omp parallel for schedule(static)
  for (long long b = 0; b < static_cast<long long>(nblocks); ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kReduceBlock;
    const std::size_t hi = lo + kReduceBlock < n ? lo + kReduceBlock : n;
    double* acc = partial.data() + static_cast<std::size_t>(b) * dim;
    for (std::size_t i = lo; i < hi; ++i) term_into(i, acc);
  }
  out.assign(dim, 0.0);
  for (std::size_t b = 0; b < nblocks; ++b) {
    const double* acc = partial.data() + b * dim;
    for (std::size_t j = 0; j < dim; ++j) out[j] += acc[j];
  }
}

}  // namespace rebel
