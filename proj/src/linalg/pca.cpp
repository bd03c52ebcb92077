#include "eraloc/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace eraloc {
namespace {

void fix_signs(Matrix& basis) {
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < basis.rows(); ++i) {
      double a = std::abs(basis(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (basis(arg, j) < 0.0) basis.col(j) = -basis.col(j);
  }
}

// Two passes of modified Gram-Schmidt over the columns, in place.
void reorthonormalize(Matrix& q) {
  for (int pass = 0; pass < 2; ++pass)
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      for (Eigen::Index k = 0; k < j; ++k) q.col(j) -= q.col(k).dot(q.col(j)) * q.col(k);
      q.col(j).normalize();
    }
}

// Extends the first `filled` orthonormal columns of q with unit vectors
// orthogonal to them, taken from the standard basis in order.
void complete_basis(Matrix& q, Eigen::Index filled) {
  Eigen::Index D = q.rows();
  Eigen::Index col = filled;
  for (Eigen::Index e = 0; e < D && col < q.cols(); ++e) {
    Vector v = Vector::Unit(D, e);
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index k = 0; k < col; ++k) v -= q.col(k).dot(v) * q.col(k);
    double n = v.norm();
    if (n < 1e-6) continue;
    q.col(col++) = v / n;
  }
  if (col < q.cols()) fail(ErrorCode::Internal, "basis completion failed");
}

}  // namespace

Subspace fit_pca_full(const Matrix& x, Eigen::Index d_max) {
  const Eigen::Index n = x.rows();
  const Eigen::Index D = x.cols();
  if (n < 2) fail(ErrorCode::InsufficientData, "PCA needs at least 2 samples");
  if (D < 1) fail(ErrorCode::InvalidInput, "PCA needs dimension >= 1");
  const Eigen::Index cap = std::min(n - 1, D);
  if (d_max < 1 || d_max > cap)
    fail(ErrorCode::InvalidDimension,
         "requested " + std::to_string(d_max) + " dims, allowed 1.." + std::to_string(cap));

  Subspace s;
  s.mean = x.colwise().mean().transpose();
  Matrix xc = x.rowwise() - s.mean.transpose();
  const double total = xc.squaredNorm();
  if (!(total > 1e-20 * (s.mean.squaredNorm() * static_cast<double>(n) + 1e-300)))
    fail(ErrorCode::DegenerateSpectrum, "data has zero covariance");

  const double denom = static_cast<double>(n - 1);
  if (D <= n) {
    Matrix cov = (xc.transpose() * xc) / denom;
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    if (es.info() != Eigen::Success) fail(ErrorCode::Internal, "eigensolver failed");
    s.basis.resize(D, d_max);
    s.eigenvalues.resize(d_max);
    for (Eigen::Index j = 0; j < d_max; ++j) {
      s.basis.col(j) = es.eigenvectors().col(D - 1 - j);
      s.eigenvalues(j) = std::max(0.0, es.eigenvalues()(D - 1 - j));
    }
  } else {
    // n < D: eigenvectors of the n x n Gram matrix mapped back through xc
    Matrix gram = xc * xc.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    if (es.info() != Eigen::Success) fail(ErrorCode::Internal, "eigensolver failed");
    const double top = es.eigenvalues()(n - 1);
    s.basis.resize(D, d_max);
    s.eigenvalues.resize(d_max);
    Eigen::Index filled = 0;
    for (Eigen::Index j = 0; j < d_max; ++j) {
      double mu = es.eigenvalues()(n - 1 - j);
      if (mu <= 1e-12 * top) break;
      s.basis.col(j) = xc.transpose() * es.eigenvectors().col(n - 1 - j) / std::sqrt(mu);
      s.eigenvalues(j) = mu / denom;
      ++filled;
    }
    Matrix head = s.basis.leftCols(filled);
    reorthonormalize(head);
    s.basis.leftCols(filled) = head;
    for (Eigen::Index j = filled; j < d_max; ++j) s.eigenvalues(j) = 0.0;
    if (filled < d_max) complete_basis(s.basis, filled);
  }
  fix_signs(s.basis);
  return s;
}

Subspace fit_pca(const Matrix& x, Eigen::Index d) { return fit_pca_full(x, d); }

Subspace truncate(const Subspace& s, Eigen::Index d) {
  if (d < 1 || d > s.dim()) fail(ErrorCode::InvalidDimension, "truncation out of range");
  Subspace t;
  t.mean = s.mean;
  t.basis = s.basis.leftCols(d);
  t.eigenvalues = s.eigenvalues.head(d);
  return t;
}

Vector project(const Subspace& s, const Vector& x) {
  if (x.size() != s.ambient())
    fail(ErrorCode::InvalidInput, "vector dimension " + std::to_string(x.size()) +
                                      " does not match subspace dimension " +
                                      std::to_string(s.ambient()));
  return s.basis.transpose() * (x - s.mean);
}

Matrix project_rows(const Subspace& s, const Matrix& x) {
  if (x.cols() != s.ambient()) fail(ErrorCode::InvalidInput, "row dimension mismatch");
  return (x.rowwise() - s.mean.transpose()) * s.basis;
}

Eigen::Index numeric_rank(const Subspace& full) {
  if (full.eigenvalues.size() == 0) return 0;
  const double top = full.eigenvalues(0);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < full.eigenvalues.size(); ++i)
    if (full.eigenvalues(i) > 1e-10 * top) ++r;
  return r;
}

Vector principal_angles(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) fail(ErrorCode::InvalidInput, "ambient dimension mismatch");
  Eigen::JacobiSVD<Matrix> svd(a.transpose() * b);
  Vector sv = svd.singularValues();
  Vector ang(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) ang(i) = std::acos(std::clamp(sv(i), 0.0, 1.0));
  return ang;
}

}  // namespace eraloc
