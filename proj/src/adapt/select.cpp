#include "eraloc/adapt.hpp"
#include "eraloc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace eraloc {

SelectDimResult select_dim_sa(const FeatureMatrix& source, int d_max, std::uint64_t seed) {
  if (!source.has_labels()) fail(ErrorCode::MissingLabels, "dimension selection needs source labels");
  if (d_max < 1) fail(ErrorCode::InvalidDimension, "d_max must be >= 1");
  const Eigen::Index n = source.size();
  if (n < 2) fail(ErrorCode::InsufficientData, "need at least 2 source samples");

  const Eigen::Index cap = std::min<Eigen::Index>({static_cast<Eigen::Index>(d_max), n - 1, source.dim()});
  Subspace full = fit_pca_full(source.rows, cap);
  const Eigen::Index dm = std::max<Eigen::Index>(1, std::min(cap, numeric_rank(full)));
  Matrix proj = project_rows(truncate(full, dm), source.rows);

  // stratified fold assignment; singleton classes stay in training (fold -1)
  std::map<std::string, std::vector<Eigen::Index>> by_class;
  for (Eigen::Index i = 0; i < n; ++i) by_class[(*source.labels)[static_cast<std::size_t>(i)]].push_back(i);
  std::vector<int> fold(static_cast<std::size_t>(n), -1);
  Rng rng(seed);
  for (auto& [label, members] : by_class) {
    if (members.size() < 2) continue;
    rng.shuffle(members);
    for (std::size_t k = 0; k < members.size(); ++k) fold[static_cast<std::size_t>(members[k])] = static_cast<int>(k % 2);
  }

  std::vector<double> err_sum(static_cast<std::size_t>(dm), 0.0);
  int rounds = 0;
  for (int r = 0; r < 2; ++r) {
    std::vector<Eigen::Index> train, test;
    for (Eigen::Index i = 0; i < n; ++i) (fold[static_cast<std::size_t>(i)] == r ? test : train).push_back(i);
    if (test.empty() || train.empty()) continue;
    ++rounds;
    std::vector<int> wrong(static_cast<std::size_t>(dm), 0);
    std::vector<double> dist(train.size());
    for (Eigen::Index t : test) {
      std::fill(dist.begin(), dist.end(), 0.0);
      const std::string& truth = (*source.labels)[static_cast<std::size_t>(t)];
      for (Eigen::Index d = 0; d < dm; ++d) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t j = 0; j < train.size(); ++j) {
          double diff = proj(t, d) - proj(train[j], d);
          dist[j] += diff * diff;
          if (dist[j] < best) {
            best = dist[j];
            arg = j;
          }
        }
        if ((*source.labels)[static_cast<std::size_t>(train[arg])] != truth) ++wrong[static_cast<std::size_t>(d)];
      }
    }
    for (Eigen::Index d = 0; d < dm; ++d)
      err_sum[static_cast<std::size_t>(d)] += static_cast<double>(wrong[static_cast<std::size_t>(d)]) / static_cast<double>(test.size());
  }

  SelectDimResult res;
  res.cv_error.resize(static_cast<std::size_t>(dm), 0.0);
  if (rounds > 0)
    for (std::size_t d = 0; d < res.cv_error.size(); ++d) res.cv_error[d] = err_sum[d] / rounds;
  res.d = 1;
  double best = res.cv_error[0];
  for (std::size_t d = 1; d < res.cv_error.size(); ++d)
    if (res.cv_error[d] < best) {
      best = res.cv_error[d];
      res.d = static_cast<int>(d + 1);
    }
  return res;
}

SdmResult select_dim_sdm(const Matrix& source, const Matrix& target, int d_cap) {
  if (source.cols() != target.cols()) fail(ErrorCode::InvalidInput, "source and target dimensions differ");
  if (d_cap < 1) fail(ErrorCode::InvalidDimension, "d_cap must be >= 1");
  Matrix pooled(source.rows() + target.rows(), source.cols());
  pooled << source, target;
  Subspace ps, pt, pp;
  try {
    ps = fit_pca_full(source, d_cap);
    pt = fit_pca_full(target, d_cap);
    pp = fit_pca_full(pooled, d_cap);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DegenerateSpectrum) fail(ErrorCode::DegenerateData, e.what());
    throw;
  }
  SdmResult res;
  res.d = d_cap;
  for (int d = 1; d <= d_cap; ++d) {
    Vector a = principal_angles(ps.basis.leftCols(d), pp.basis.leftCols(d));
    Vector b = principal_angles(pt.basis.leftCols(d), pp.basis.leftCols(d));
    double v = 0.5 * (std::sin(a(d - 1)) + std::sin(b(d - 1)));
    res.disagreement.push_back(v);
    if (std::abs(v - 1.0) < 1e-6) {
      res.d = std::clamp(d - 1, 1, d_cap);
      break;
    }
  }
  return res;
}

}  // namespace eraloc
