#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "rebel/numerics.hpp"
#include "rebel/rng.hpp"

using namespace rebel;

namespace {

DenseMatrix make(int r, int c, std::vector<double> v) { return DenseMatrix{r, c, std::move(v)}; }

// Brute-force oracle: scan a delta grid for the least residual, breaking ties
// toward the smallest norm.
std::vector<double> grid_min_norm_2d(const DenseMatrix& a, const std::vector<double>& b) {
  double best_res = std::numeric_limits<double>::infinity();
  double best_norm = std::numeric_limits<double>::infinity();
  std::vector<double> best(2, 0.0);
  for (double d0 = -2.0; d0 <= 2.0 + 1e-12; d0 += 0.005) {
    for (double d1 = -2.0; d1 <= 2.0 + 1e-12; d1 += 0.005) {
      double res = 0.0;
      for (int i = 0; i < a.rows; ++i) {
        const double pred = a.at(i, 0) * d0 + a.at(i, 1) * d1;
        res += (pred - b[i]) * (pred - b[i]);
      }
      const double nrm = d0 * d0 + d1 * d1;
      if (res < best_res - 1e-12 || (std::abs(res - best_res) <= 1e-12 && nrm < best_norm)) {
        best_res = res;
        best_norm = nrm;
        best = {d0, d1};
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("min_norm_lstsq identity system") {
  const auto sol = min_norm_lstsq(make(2, 2, {1, 0, 0, 1}), std::vector<double>{3, 4});
  CHECK(sol.solution[0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(sol.solution[1] == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(sol.residual_norm == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(sol.effective_rank == 2);
}

TEST_CASE("min_norm_lstsq splits the underdetermined row evenly") {
  const auto sol = min_norm_lstsq(make(1, 2, {1, 1}), std::vector<double>{2});
  CHECK(sol.solution[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sol.solution[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sol.effective_rank == 1);
}

TEST_CASE("min_norm_lstsq rank-deficient column matches the grid oracle") {
  const DenseMatrix a = make(2, 2, {1, 0, 1, 0});
  const std::vector<double> b = {1, 0};
  const auto sol = min_norm_lstsq(a, b);
  const auto oracle = grid_min_norm_2d(a, b);
  CHECK(sol.solution[0] == doctest::Approx(oracle[0]).epsilon(0.01));
  CHECK(sol.solution[1] == doctest::Approx(oracle[1]).epsilon(0.01));
  CHECK(sol.solution[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sol.solution[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(sol.residual_norm * sol.residual_norm == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sol.effective_rank == 1);
}

TEST_CASE("min_norm_lstsq rejects bad input") {
  CHECK_THROWS_AS(min_norm_lstsq(make(1, 1, {std::nan("")}), std::vector<double>{1.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(min_norm_lstsq(make(2, 2, {1, 0, 0, 1}), std::vector<double>{1.0}),
                  std::invalid_argument);
  const auto sol = min_norm_lstsq(DenseMatrix{}, std::vector<double>{});
  CHECK(sol.solution.empty());
}

TEST_CASE("normal-equation residual is orthogonal to the column space") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int rows = 1 + rng.below(8), cols = 1 + rng.below(6);
    DenseMatrix a = DenseMatrix::zeros(rows, cols);
    for (double& v : a.entries) v = rng.uniform(-1, 1);
    if (trial % 3 == 0 && cols >= 2) {
      for (int i = 0; i < rows; ++i) a.at(i, cols - 1) = a.at(i, 0);  // force rank deficiency
    }
    std::vector<double> b(rows);
    for (double& v : b) v = rng.uniform(-1, 1);
    const auto sol = min_norm_lstsq(a, b);

    double scale = 1e-30;
    for (double v : a.entries) scale = std::max(scale, std::abs(v));
    for (int j = 0; j < cols; ++j) {
      double dot_col = 0.0;
      for (int i = 0; i < rows; ++i) {
        double pred = 0.0;
        for (int c = 0; c < cols; ++c) pred += a.at(i, c) * sol.solution[c];
        dot_col += a.at(i, j) * (pred - b[i]);
      }
      CHECK(std::abs(dot_col) <= 1e-10 * scale * rows);
    }
  }
}

TEST_CASE("lstsq of A w recovers w under full column rank") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const int rows = 6, cols = 3;
    DenseMatrix a = DenseMatrix::zeros(rows, cols);
    for (double& v : a.entries) v = rng.uniform(-1, 1);
    std::vector<double> w(cols);
    for (double& v : w) v = rng.uniform(-1, 1);
    std::vector<double> b(rows, 0.0);
    for (int i = 0; i < rows; ++i)
      for (int c = 0; c < cols; ++c) b[i] += a.at(i, c) * w[c];
    const auto sol = min_norm_lstsq(a, b);
    for (int c = 0; c < cols; ++c) CHECK(sol.solution[c] == doctest::Approx(w[c]).epsilon(1e-10));
  }
}

TEST_CASE("pinv_apply on diagonal and dense systems") {
  const auto out = pinv_apply(make(2, 2, {2, 0, 0, 0}), std::vector<double>{4, 7});
  CHECK(out[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(out[1] == doctest::Approx(0.0).epsilon(1e-14));

  const auto id = pinv_apply(make(2, 2, {1, 0, 0, 1}), std::vector<double>{-3, 9});
  CHECK(id[0] == doctest::Approx(-3.0).epsilon(1e-14));
  CHECK(id[1] == doctest::Approx(9.0).epsilon(1e-14));

  const auto dense = pinv_apply(make(2, 2, {2, 1, 1, 2}), std::vector<double>{1, 1});
  CHECK(dense[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(dense[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("pinv_apply agrees with min_norm_lstsq on random PSD systems") {
  Rng rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + rng.below(5);
    DenseMatrix g = DenseMatrix::zeros(n, n);
    for (double& v : g.entries) v = rng.uniform(-1, 1);
    DenseMatrix f = DenseMatrix::zeros(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += g.at(k, i) * g.at(k, j);
        f.at(i, j) = s;
      }
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1, 1);
    const auto a = pinv_apply(f, v);
    const auto b = min_norm_lstsq(f, v).solution;
    for (int i = 0; i < n; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-10));
  }
}

TEST_CASE("pinv_apply rejects asymmetric and indefinite input") {
  CHECK_THROWS_AS(pinv_apply(make(2, 2, {1, 1, 0, 1}), std::vector<double>{1, 1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(pinv_apply(make(2, 2, {1, 0, 0, -1}), std::vector<double>{1, 1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(pinv_apply(make(2, 3, {1, 0, 0, 1, 0, 0}), std::vector<double>{1, 1}),
                  std::invalid_argument);
}

TEST_CASE("finite differences on simple functions") {
  const auto quad = [](std::span<const double> t) {
    double s = 0.0;
    for (double v : t) s += v * v;
    return s;
  };
  const auto g = finite_diff_grad(quad, std::vector<double>{1, 2}, 1e-5);
  CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(g[1] == doctest::Approx(4.0).epsilon(1e-6));

  const auto constant = [](std::span<const double>) { return 3.5; };
  for (double v : finite_diff_grad(constant, std::vector<double>{1, 2, 3}, 1e-5))
    CHECK(v == doctest::Approx(0.0));

  const auto expf = [](std::span<const double> t) { return std::exp(t[0]); };
  CHECK(finite_diff_grad(expf, std::vector<double>{0.0}, 1e-5)[0] ==
        doctest::Approx(1.0).epsilon(1e-8));

  const auto bad = [](std::span<const double>) { return std::nan(""); };
  CHECK_THROWS(finite_diff_grad(bad, std::vector<double>{0.0}, 1e-5));
  CHECK_THROWS_AS(finite_diff_grad(quad, std::vector<double>{1.0}, 0.0), std::invalid_argument);
}

TEST_CASE("rng streams are reproducible per seed") {
  Rng a(42), b(42), c(43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    const auto va = a.next_u64(), vb = b.next_u64(), vc = c.next_u64();
    all_equal = all_equal && va == vb;
    any_diff = any_diff || va != vc;
  }
  CHECK(all_equal);
  CHECK(any_diff);

  Rng d(7), e(7);
  const std::vector<double> probs = {0.2, 0.5, 0.3};
  for (int i = 0; i < 200; ++i) CHECK(d.categorical(probs) == e.categorical(probs));
}

TEST_CASE("categorical respects the distribution") {
  Rng rng(11);
  const std::vector<double> probs = {0.1, 0.6, 0.3};
  std::vector<int> counts(3, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[rng.categorical(probs)];
  for (int k = 0; k < 3; ++k)
    CHECK(std::abs(static_cast<double>(counts[k]) / n - probs[k]) < 0.02);
}
