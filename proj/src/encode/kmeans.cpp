#include "eraloc/encode.hpp"
#include "eraloc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace eraloc {

Eigen::Index nearest_center(const Codebook& cb, const Eigen::Ref<const Vector>& x) {
  if (x.size() != cb.dim()) fail(ErrorCode::InvalidInput, "descriptor dimension does not match codebook");
  Eigen::Index best_i = 0;
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < cb.k(); ++c) {
    double d = (cb.centers.row(c).transpose() - x).squaredNorm();
    if (d < best) {
      best = d;
      best_i = c;
    }
  }
  return best_i;
}

std::vector<Eigen::Index> assign_exact(const Codebook& cb, const Matrix& x) {
  if (x.cols() != cb.dim()) fail(ErrorCode::InvalidInput, "descriptor dimension does not match codebook");
  std::vector<Eigen::Index> a(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) a[static_cast<std::size_t>(i)] = nearest_center(cb, x.row(i).transpose());
  return a;
}

double distortion(const Matrix& x, const Codebook& cb) {
  auto a = assign_exact(cb, x);
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) s += (x.row(i) - cb.centers.row(a[static_cast<std::size_t>(i)])).squaredNorm();
  return s;
}

namespace {

// Greedy k-means++: each step draws 2 + ln(k) D²-weighted candidates and
// keeps the one giving the lowest potential.
Matrix kmeanspp(const Matrix& x, int k, Rng& rng) {
  const Eigen::Index n = x.rows();
  const int trials = 2 + static_cast<int>(std::log(static_cast<double>(k)));
  Matrix c(k, x.cols());
  Eigen::Index first = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
  c.row(0) = x.row(first);
  Vector d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2(i) = (x.row(i) - c.row(0)).squaredNorm();
  Vector cand(n), best_d2(n);
  for (int j = 1; j < k; ++j) {
    double total = d2.sum();
    if (!(total > 0.0))
      fail(ErrorCode::InsufficientData, "fewer than " + std::to_string(k) + " distinct descriptors");
    double best_pot = std::numeric_limits<double>::infinity();
    Eigen::Index best_pick = -1;
    for (int t = 0; t < trials; ++t) {
      double r = rng.uniform() * total;
      Eigen::Index pick = -1;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (d2(i) <= 0.0) continue;
        acc += d2(i);
        pick = i;
        if (acc > r) break;
      }
      for (Eigen::Index i = 0; i < n; ++i) cand(i) = std::min(d2(i), (x.row(i) - x.row(pick)).squaredNorm());
      double pot = cand.sum();
      if (pot < best_pot) {
        best_pot = pot;
        best_pick = pick;
        best_d2.swap(cand);
      }
    }
    c.row(j) = x.row(best_pick);
    d2.swap(best_d2);
  }
  return c;
}

std::vector<Eigen::Index> assign(const Codebook& cb, const Matrix& x, const KMeansParams& p, std::uint64_t seed) {
  if (p.mode == KMeansMode::Exact) return assign_exact(cb, x);
  KdForest forest(cb.centers, p.trees, seed);
  std::vector<Eigen::Index> a(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) a[static_cast<std::size_t>(i)] = forest.nearest(x.row(i).transpose(), p.checks);
  return a;
}

}  // namespace

KMeansResult train_codebook(const Matrix& x, int k, const KMeansParams& p) {
  const Eigen::Index n = x.rows();
  if (k < 1) fail(ErrorCode::InvalidInput, "k must be >= 1");
  if (n < k) fail(ErrorCode::InsufficientData, "need at least k=" + std::to_string(k) + " descriptors, got " + std::to_string(n));
  Rng rng(p.seed);
  KMeansResult res;
  res.codebook.centers = kmeanspp(x, k, rng);

  for (int it = 0; it < p.max_iter; ++it) {
    res.assignment = assign(res.codebook, x, p, derive_seed(p.seed, static_cast<std::uint64_t>(it) + 1));
    Vector dist(n);
    for (Eigen::Index i = 0; i < n; ++i)
      dist(i) = (x.row(i) - res.codebook.centers.row(res.assignment[static_cast<std::size_t>(i)])).squaredNorm();
    res.distortion.push_back(dist.sum());
    res.iterations = it + 1;

    Matrix sums = Matrix::Zero(k, x.cols());
    std::vector<Eigen::Index> count(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      auto a = res.assignment[static_cast<std::size_t>(i)];
      sums.row(a) += x.row(i);
      ++count[static_cast<std::size_t>(a)];
    }
    Matrix next = res.codebook.centers;
    for (int c = 0; c < k; ++c)
      if (count[static_cast<std::size_t>(c)] > 0) next.row(c) = sums.row(c) / static_cast<double>(count[static_cast<std::size_t>(c)]);
    for (int c = 0; c < k; ++c) {
      if (count[static_cast<std::size_t>(c)] > 0) continue;
      // empty cluster: move it onto the point farthest from its center
      Eigen::Index far;
      dist.maxCoeff(&far);
      next.row(c) = x.row(far);
      dist(far) = 0.0;
    }
    double shift = (next - res.codebook.centers).rowwise().norm().maxCoeff();
    res.codebook.centers = std::move(next);
    if (shift < p.tol) break;
  }
  res.assignment = assign(res.codebook, x, p, derive_seed(p.seed, 0));
  return res;
}

}  // namespace eraloc
