#include "eraloc/encode.hpp"

#include <cmath>

namespace eraloc {

const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Raw: return "raw";
    case Scheme::Bow: return "bow";
    case Scheme::BowTfIdf: return "bow-tfidf";
    case Scheme::FisherVector: return "fv";
  }
  return "raw";
}

Vector bow_counts(const Matrix& descriptors, const Codebook& cb) {
  if (descriptors.rows() > 0 && descriptors.cols() != cb.dim())
    fail(ErrorCode::InvalidInput, "descriptor dimension does not match codebook");
  Vector h = Vector::Zero(cb.k());
  for (Eigen::Index i = 0; i < descriptors.rows(); ++i) h(nearest_center(cb, descriptors.row(i).transpose())) += 1.0;
  return h;
}

Vector bow_counts(const Matrix& descriptors, const Codebook& cb, const KdForest& forest, int checks) {
  if (descriptors.rows() > 0 && descriptors.cols() != cb.dim())
    fail(ErrorCode::InvalidInput, "descriptor dimension does not match codebook");
  Vector h = Vector::Zero(cb.k());
  for (Eigen::Index i = 0; i < descriptors.rows(); ++i) h(forest.nearest(descriptors.row(i).transpose(), checks)) += 1.0;
  return h;
}

EncodedVector encode_bow_counts(const Vector& counts, const std::optional<Vector>& idf) {
  EncodedVector e;
  e.scheme = idf ? Scheme::BowTfIdf : Scheme::Bow;
  e.values = counts;
  if (idf) {
    if (idf->size() != counts.size()) fail(ErrorCode::InvalidInput, "idf length does not match vocabulary");
    e.values = e.values.cwiseProduct(*idf);
  }
  e.values = e.values.cwiseMax(0.0).cwiseSqrt();
  double n = e.values.norm();
  if (n > 0.0)
    e.values /= n;
  else
    e.degenerate = true;
  return e;
}

EncodedVector encode_bow(const Matrix& descriptors, const Codebook& cb, const std::optional<Vector>& idf) {
  return encode_bow_counts(bow_counts(descriptors, cb), idf);
}

Vector compute_idf(const Matrix& histograms) {
  const Eigen::Index N = histograms.rows();
  if (N < 1) fail(ErrorCode::InvalidInput, "idf needs a nonempty corpus");
  Vector idf(histograms.cols());
  for (Eigen::Index t = 0; t < histograms.cols(); ++t) {
    Eigen::Index nt = (histograms.col(t).array() > 0.0).count();
    idf(t) = nt == 0 ? 0.0 : std::log(static_cast<double>(N) / static_cast<double>(nt));
  }
  return idf;
}

}  // namespace eraloc
