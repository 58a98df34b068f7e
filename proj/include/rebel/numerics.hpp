#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rebel/rng.hpp"

namespace rebel {

// Row-major dense matrix of doubles.
struct DenseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> entries;  // size rows * cols

  static DenseMatrix zeros(int r, int c) {
    return DenseMatrix{r, c, std::vector<double>(static_cast<std::size_t>(r) * c, 0.0)};
  }
  double& at(int i, int j) { return entries[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return entries[static_cast<std::size_t>(i) * cols + j]; }
};

struct LeastSquaresSolution {
  std::vector<double> solution;  // minimum-norm minimizer of ||A x - b||
  double residual_norm = 0.0;
  int effective_rank = 0;
};

// Minimum-norm least squares via SVD. Singular values below
// max(rows, cols) * eps * sigma_max are treated as zero, which resolves the
// per-context constant null direction of tabular softmax parameterizations.
LeastSquaresSolution min_norm_lstsq(const DenseMatrix& a, std::span<const double> b);

// F^dagger v for symmetric PSD F, same cutoff convention as min_norm_lstsq.
// Rejects matrices that are asymmetric or indefinite beyond tolerance.
std::vector<double> pinv_apply(const DenseMatrix& f, std::span<const double> v);

// Central differences (f(x + h e_i) - f(x - h e_i)) / (2h) per coordinate.
std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> theta, double h);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

}  // namespace rebel
