#include "rebel/numerics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rebel {

namespace {

using EigenRowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const EigenRowMajor> as_eigen(const DenseMatrix& m) {
  return Eigen::Map<const EigenRowMajor>(m.entries.data(), m.rows, m.cols);
}

void require_finite(const DenseMatrix& m, const char* who) {
  for (double v : m.entries) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(who) + ": non-finite matrix entry");
  }
}

void require_finite(std::span<const double> v, const char* who) {
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(who) + ": non-finite vector entry");
  }
}

}  // namespace

LeastSquaresSolution min_norm_lstsq(const DenseMatrix& a, std::span<const double> b) {
  if (static_cast<int>(b.size()) != a.rows)
    throw std::invalid_argument("min_norm_lstsq: b length does not match row count");
  require_finite(a, "min_norm_lstsq");
  require_finite(b, "min_norm_lstsq");
  if (a.rows == 0 || a.cols == 0) {
    double rn = 0.0;
    for (double x : b) rn += x * x;
    return LeastSquaresSolution{{}, std::sqrt(rn), 0};
  }

  Eigen::MatrixXd A = as_eigen(a);
  Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(b.data(), b.size());

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double cutoff = std::max(a.rows, a.cols) *
                        std::numeric_limits<double>::epsilon() *
                        (sigma.size() > 0 ? sigma(0) : 0.0);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(a.cols);
  int rank = 0;
  const Eigen::VectorXd utb = svd.matrixU().transpose() * rhs;
  for (int i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > cutoff) {
      x += svd.matrixV().col(i) * (utb(i) / sigma(i));
      ++rank;
    }
  }

  LeastSquaresSolution out;
  out.solution.assign(x.data(), x.data() + x.size());
  out.residual_norm = (A * x - rhs).norm();
  out.effective_rank = rank;
  return out;
}

std::vector<double> pinv_apply(const DenseMatrix& f, std::span<const double> v) {
  if (f.rows != f.cols) throw std::invalid_argument("pinv_apply: matrix must be square");
  if (static_cast<int>(v.size()) != f.rows)
    throw std::invalid_argument("pinv_apply: vector length does not match");
  require_finite(f, "pinv_apply");
  require_finite(v, "pinv_apply");
  if (f.rows == 0) return {};

  Eigen::MatrixXd F = as_eigen(f);
  double scale = F.cwiseAbs().maxCoeff();
  if (scale == 0.0) scale = 1.0;
  const double asym = (F - F.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8 * scale)
    throw std::invalid_argument("pinv_apply: matrix asymmetric beyond tolerance");
  F = 0.5 * (F + F.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(F);
  const Eigen::VectorXd& lam = es.eigenvalues();
  const double lmax = lam.cwiseAbs().maxCoeff();
  const double cutoff = f.rows * std::numeric_limits<double>::epsilon() * lmax;
  if (lam.minCoeff() < -1e-8 * std::max(lmax, 1.0))
    throw std::invalid_argument("pinv_apply: matrix not positive semidefinite within tolerance");

  Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
  Eigen::VectorXd coeffs = es.eigenvectors().transpose() * rhs;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(f.rows);
  for (int i = 0; i < lam.size(); ++i) {
    if (lam(i) > cutoff) x += es.eigenvectors().col(i) * (coeffs(i) / lam(i));
  }
  return std::vector<double>(x.data(), x.data() + x.size());
}

std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> theta, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: h must be positive");
  std::vector<double> point(theta.begin(), theta.end());
  std::vector<double> grad(point.size(), 0.0);
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + h;
    const double fp = f(point);
    point[i] = saved - h;
    const double fm = f(point);
    point[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("finite_diff_grad: function returned non-finite value");
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace rebel
