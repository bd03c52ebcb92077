#include "eraloc/adapt.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace eraloc {
namespace {

// 1 - sin(x)/x without cancellation for small x.
double one_minus_sinc(double x) {
  if (std::abs(x) < 1e-3) {
    double x2 = x * x;
    return x2 / 6.0 - x2 * x2 / 120.0;
  }
  return 1.0 - std::sin(x) / x;
}

}  // namespace

GfkModel learn_gfk(const Subspace& source, const Subspace& target, int d) {
  const Eigen::Index D = source.ambient();
  if (target.ambient() != D) fail(ErrorCode::InvalidInput, "subspaces live in different dimensions");
  if (d < 1 || d > source.dim() || d > target.dim())
    fail(ErrorCode::InvalidDimension, "GFK dimension exceeds subspace dimension");
  if (2 * static_cast<Eigen::Index>(d) > D)
    fail(ErrorCode::InvalidDimension,
         "GFK needs 2d <= D (d=" + std::to_string(d) + ", D=" + std::to_string(D) + ")");

  const Matrix p = source.basis.leftCols(d);
  const Matrix q = target.basis.leftCols(d);

  Eigen::JacobiSVD<Matrix> svd(p.transpose() * q, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix& u1 = svd.matrixU();
  const Matrix& v = svd.matrixV();
  const Vector& gamma = svd.singularValues();

  // Component of the target directions orthogonal to the source subspace.
  Matrix qv = q * v;
  Matrix resid = qv - p * (p.transpose() * qv);

  Matrix a = p * u1;
  Matrix w = Matrix::Zero(D, d);
  Vector l1(d), l2(d), l3(d);
  for (int i = 0; i < d; ++i) {
    double sigma = resid.col(i).norm();
    if (sigma > 1e-12) w.col(i) = resid.col(i) / sigma;
    double theta = std::atan2(sigma, gamma(i));
    if (theta == 0.0) {
      l1(i) = 2.0;
      l2(i) = 0.0;
      l3(i) = 0.0;
    } else {
      double s = std::sin(theta);
      l1(i) = 2.0 - one_minus_sinc(2.0 * theta);
      l2(i) = s * s / theta;
      l3(i) = one_minus_sinc(2.0 * theta);
    }
  }

  // G = 1/2 [A L1 Aᵀ + A L2 Wᵀ + W L2 Aᵀ + W L3 Wᵀ]
  Matrix al1 = a * l1.asDiagonal();
  Matrix al2 = a * l2.asDiagonal();
  Matrix wl3 = w * l3.asDiagonal();
  Matrix cross = al2 * w.transpose();
  Matrix g = al1 * a.transpose() + cross + cross.transpose() + wl3 * w.transpose();
  g *= 0.5;
  g = 0.5 * (g + g.transpose()).eval();

  GfkModel model;
  model.g = std::move(g);
  model.d = d;
  model.source_mean = source.mean;
  model.target_mean = target.mean;
  return model;
}

double gfk_similarity(const Vector& x_i, const Vector& x_j, const GfkModel& model) {
  if (x_i.size() != model.g.rows() || x_j.size() != model.g.rows())
    fail(ErrorCode::InvalidInput, "vector dimension does not match kernel dimension");
  return x_i.dot(model.g * x_j);
}

}  // namespace eraloc
