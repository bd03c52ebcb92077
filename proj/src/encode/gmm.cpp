#include "eraloc/encode.hpp"

#include <cmath>
#include <numbers>

namespace eraloc {
namespace {

// n x K matrix of log(w_k) + log N(x | mu_k, diag var_k)
Matrix log_joint(const GmmModel& g, const Matrix& x) {
  if (x.cols() != g.dim()) fail(ErrorCode::InvalidInput, "descriptor dimension does not match GMM");
  const double log2pi = std::log(2.0 * std::numbers::pi);
  Matrix out(x.rows(), g.k());
  for (Eigen::Index k = 0; k < g.k(); ++k) {
    RowVector inv = g.variances.row(k).cwiseInverse();
    double c = std::log(g.weights(k)) - 0.5 * (g.variances.row(k).array().log().sum() + log2pi * static_cast<double>(g.dim()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double q = ((x.row(i) - g.means.row(k)).array().square() * inv.array()).sum();
      out(i, k) = c - 0.5 * q;
    }
  }
  return out;
}

// Row-wise log-sum-exp; writes normalized posteriors into `lj`.
Vector normalize_rows(Matrix& lj) {
  Vector lse(lj.rows());
  for (Eigen::Index i = 0; i < lj.rows(); ++i) {
    double m = lj.row(i).maxCoeff();
    double s = (lj.row(i).array() - m).exp().sum();
    lse(i) = m + std::log(s);
    lj.row(i) = (lj.row(i).array() - lse(i)).exp();
  }
  return lse;
}

}  // namespace

double gmm_log_likelihood(const GmmModel& gmm, const Matrix& x) {
  Matrix lj = log_joint(gmm, x);
  return normalize_rows(lj).mean();
}

Matrix gmm_posteriors(const GmmModel& gmm, const Matrix& x) {
  Matrix lj = log_joint(gmm, x);
  normalize_rows(lj);
  return lj;
}

GmmResult train_gmm(const Matrix& x, int k, const GmmParams& p) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (k < 1) fail(ErrorCode::InvalidInput, "K must be >= 1");
  if (n <= k) fail(ErrorCode::InsufficientData, "GMM needs more than K=" + std::to_string(k) + " descriptors");

  RowVector mu = x.colwise().mean();
  double floor = 1e-4 * (x.rowwise() - mu).array().square().colwise().sum().mean() / static_cast<double>(n);
  if (!(floor > 0.0)) floor = 1e-12;

  KMeansParams kp;
  kp.seed = p.seed;
  KMeansResult km = train_codebook(x, k, kp);

  GmmResult res;
  GmmModel& g = res.model;
  g.means = km.codebook.centers;
  g.weights = Vector::Zero(k);
  g.variances = Matrix::Zero(k, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto a = km.assignment[static_cast<std::size_t>(i)];
    g.weights(a) += 1.0;
    g.variances.row(a) += (x.row(i) - g.means.row(a)).array().square().matrix();
  }
  for (int c = 0; c < k; ++c) {
    if (g.weights(c) > 0) g.variances.row(c) /= g.weights(c);
    g.variances.row(c) = g.variances.row(c).cwiseMax(floor);
  }
  g.weights = (g.weights.array() + 1e-12).matrix();
  g.weights /= g.weights.sum();

  for (int it = 0; it < p.max_iter; ++it) {
    Matrix post = log_joint(g, x);
    double ll = normalize_rows(post).mean();
    res.log_likelihood.push_back(ll);
    res.iterations = it;
    if (it > 0 && ll - res.log_likelihood[res.log_likelihood.size() - 2] < p.tol) break;

    Vector nk = post.colwise().sum().transpose();
    for (int c = 0; c < k; ++c) {
      if (nk(c) < 1e-10) continue;  // keep a starved component where it was
      RowVector m = (post.col(c).transpose() * x) / nk(c);
      RowVector v = RowVector::Zero(d);
      for (Eigen::Index i = 0; i < n; ++i) v += post(i, c) * (x.row(i) - m).array().square().matrix();
      g.means.row(c) = m;
      g.variances.row(c) = (v / nk(c)).cwiseMax(floor);
    }
    g.weights = nk / static_cast<double>(n);
    g.weights = g.weights.cwiseMax(1e-300);
    g.weights /= g.weights.sum();
    res.iterations = it + 1;
  }
  return res;
}

}  // namespace eraloc
