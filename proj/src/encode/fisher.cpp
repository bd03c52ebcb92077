#include "eraloc/encode.hpp"

#include <cmath>

namespace eraloc {

void signed_sqrt(Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = v(i) < 0.0 ? -std::sqrt(-v(i)) : std::sqrt(v(i));
}

Vector fisher_vector_raw(const Matrix& descriptors, const GmmModel& gmm) {
  const Eigen::Index K = gmm.k();
  const Eigen::Index d = gmm.dim();
  Vector fv = Vector::Zero(2 * K * d);
  const Eigen::Index n = descriptors.rows();
  if (n == 0) return fv;
  Matrix post = gmm_posteriors(gmm, descriptors);
  for (Eigen::Index k = 0; k < K; ++k) {
    RowVector sigma = gmm.variances.row(k).cwiseSqrt();
    RowVector gm = RowVector::Zero(d), gv = RowVector::Zero(d);
    for (Eigen::Index i = 0; i < n; ++i) {
      double g = post(i, k);
      if (g == 0.0) continue;
      RowVector z = (descriptors.row(i) - gmm.means.row(k)).cwiseQuotient(sigma);
      gm += g * z;
      gv += g * (z.array().square() - 1.0).matrix();
    }
    const double nd = static_cast<double>(n);
    fv.segment(2 * k * d, d) = gm.transpose() / (nd * std::sqrt(gmm.weights(k)));
    fv.segment(2 * k * d + d, d) = gv.transpose() / (nd * std::sqrt(2.0 * gmm.weights(k)));
  }
  return fv;
}

EncodedVector encode_fv(const Matrix& descriptors, const GmmModel& gmm) {
  EncodedVector e;
  e.scheme = Scheme::FisherVector;
  e.values = fisher_vector_raw(descriptors, gmm);
  signed_sqrt(e.values);
  double n = e.values.norm();
  if (n > 0.0)
    e.values /= n;
  else
    e.degenerate = true;
  return e;
}

Vector whitening_scale(const Vector& eigenvalues) {
  if (eigenvalues.size() == 0) fail(ErrorCode::InvalidEigenvalues, "empty eigenvalue vector");
  const double top = eigenvalues.maxCoeff();
  if (!(top > 0.0)) fail(ErrorCode::InvalidEigenvalues, "no positive eigenvalue to whiten with");
  const double floor = 1e-8 * top;
  Vector s(eigenvalues.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = 1.0 / std::sqrt(std::max(eigenvalues(i), floor));
  return s;
}

Matrix whiten(const Matrix& vectors, const Vector& eigenvalues) {
  if (vectors.cols() != eigenvalues.size()) fail(ErrorCode::InvalidInput, "whitening dimension mismatch");
  Matrix out = vectors * whitening_scale(eigenvalues).asDiagonal();
  l2_normalize_rows(out);
  return out;
}

}  // namespace eraloc
