#pragma once

#include "eraloc/common.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace eraloc {

struct Codebook {
  Matrix centers;  // k x d
  Eigen::Index k() const { return centers.rows(); }
  Eigen::Index dim() const { return centers.cols(); }
};

// Randomized kd-tree forest over a fixed point set, searched best-bin-first
// with a bounded number of leaf checks.
class KdForest {
 public:
  KdForest(const Matrix& points, int trees, std::uint64_t seed);
  ~KdForest();
  KdForest(KdForest&&) noexcept;
  KdForest& operator=(KdForest&&) noexcept;

  // Index of the (approximately) nearest point; exact when checks >= size.
  Eigen::Index nearest(const Eigen::Ref<const Vector>& q, int checks) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

enum class KMeansMode { Exact, Approximate };

struct KMeansParams {
  KMeansMode mode = KMeansMode::Exact;
  int max_iter = 100;
  double tol = 1e-6;  // max center shift
  int trees = 4;
  int checks = 64;
  std::uint64_t seed = 0;
};

struct KMeansResult {
  Codebook codebook;
  std::vector<Eigen::Index> assignment;
  std::vector<double> distortion;  // sum of squared distances, per iteration
  int iterations = 0;
};

KMeansResult train_codebook(const Matrix& x, int k, const KMeansParams& p = {});
double distortion(const Matrix& x, const Codebook& cb);

Eigen::Index nearest_center(const Codebook& cb, const Eigen::Ref<const Vector>& x);
std::vector<Eigen::Index> assign_exact(const Codebook& cb, const Matrix& x);

enum class Scheme : std::uint32_t { Raw = 0, Bow = 1, BowTfIdf = 2, FisherVector = 3 };
const char* scheme_name(Scheme s);

struct EncodedVector {
  Vector values;
  Scheme scheme = Scheme::Raw;
  bool degenerate = false;  // all-zero output (e.g. no descriptors)
};

// Hard-assignment histogram of raw counts.
Vector bow_counts(const Matrix& descriptors, const Codebook& cb);
Vector bow_counts(const Matrix& descriptors, const Codebook& cb, const KdForest& forest, int checks);

// counts (times idf when given) -> sqrt -> L2.
EncodedVector encode_bow_counts(const Vector& counts, const std::optional<Vector>& idf = std::nullopt);
EncodedVector encode_bow(const Matrix& descriptors, const Codebook& cb,
                         const std::optional<Vector>& idf = std::nullopt);

// Rows are per-document count histograms.
Vector compute_idf(const Matrix& histograms);

struct GmmModel {
  Vector weights;     // K
  Matrix means;       // K x d
  Matrix variances;   // K x d
  Eigen::Index k() const { return means.rows(); }
  Eigen::Index dim() const { return means.cols(); }
};

struct GmmParams {
  int max_iter = 200;
  double tol = 1e-6;  // on mean per-sample log-likelihood
  std::uint64_t seed = 0;
};

struct GmmResult {
  GmmModel model;
  std::vector<double> log_likelihood;  // mean per sample, one entry per E-step
  int iterations = 0;
};

GmmResult train_gmm(const Matrix& x, int k, const GmmParams& p = {});

// Mean per-sample log-likelihood of x under the model.
double gmm_log_likelihood(const GmmModel& gmm, const Matrix& x);
// n x K posteriors.
Matrix gmm_posteriors(const GmmModel& gmm, const Matrix& x);

// Unnormalized Fisher vector, per component [mean block | variance block].
Vector fisher_vector_raw(const Matrix& descriptors, const GmmModel& gmm);
// Signed sqrt then L2.
EncodedVector encode_fv(const Matrix& descriptors, const GmmModel& gmm);

void signed_sqrt(Vector& v);

// 1/sqrt(lambda) with lambda floored at 1e-8 * max(lambda).
Vector whitening_scale(const Vector& eigenvalues);
// Scales each column i by 1/sqrt(lambda_i), then L2-normalizes each row.
Matrix whiten(const Matrix& vectors, const Vector& eigenvalues);

}  // namespace eraloc
