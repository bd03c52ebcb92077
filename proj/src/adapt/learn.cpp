#include "eraloc/adapt.hpp"

#include <algorithm>

namespace eraloc {

const char* adapt_method_name(AdaptMethod m) {
  switch (m) {
    case AdaptMethod::None: return "none";
    case AdaptMethod::Sa: return "sa";
    case AdaptMethod::Esa: return "esa";
    case AdaptMethod::Gfk: return "gfk";
  }
  return "none";
}

AdaptMethod parse_adapt_method(const std::string& s) {
  if (s == "none" || s == "NA" || s.empty()) return AdaptMethod::None;
  if (s == "sa" || s == "SA") return AdaptMethod::Sa;
  if (s == "esa" || s == "ESA") return AdaptMethod::Esa;
  if (s == "gfk" || s == "GFK") return AdaptMethod::Gfk;
  fail(ErrorCode::InvalidInput, "unknown adaptation method: " + s);
}

namespace {
int clamp_dim(int d, const Matrix& x) {
  int cap = static_cast<int>(std::min<Eigen::Index>(x.rows() - 1, x.cols()));
  return std::clamp(d, 1, std::max(1, cap));
}
}  // namespace

AlignmentModel learn_alignment(const FeatureMatrix& source, const FeatureMatrix& target, const AdaptConfig& cfg) {
  if (source.dim() != target.dim()) fail(ErrorCode::InvalidInput, "source and target dimensions differ");
  AlignmentModel out;
  out.method = cfg.method;
  if (cfg.method == AdaptMethod::None) return out;

  if (cfg.method == AdaptMethod::Gfk) {
    int d = cfg.d_source;
    if (d == 0) {
      int cap = static_cast<int>(std::min<Eigen::Index>({source.dim() / 2, source.size() - 1, target.size() - 1,
                                                         static_cast<Eigen::Index>(cfg.d_max)}));
      d = select_dim_sdm(source.rows, target.rows, std::max(1, cap)).d;
    }
    if (2 * d > source.dim()) fail(ErrorCode::InvalidDimension, "GFK dimension must satisfy 2d <= D");
    out.gfk = learn_gfk(fit_pca(source.rows, d), fit_pca(target.rows, d), d);
    return out;
  }

  int ds = cfg.d_source, dt = cfg.d_target;
  if (cfg.method == AdaptMethod::Sa) {
    if (ds == 0) ds = select_dim_sa(source, cfg.d_max, cfg.seed).d;
    if (dt == 0) dt = ds;
  } else {
    if (ds == 0) ds = estimate_dim_mle(source.rows, cfg.mle_k_min, cfg.mle_k_max).rounded;
    if (dt == 0) dt = estimate_dim_mle(target.rows, cfg.mle_k_min, cfg.mle_k_max).rounded;
  }
  ds = clamp_dim(ds, source.rows);
  dt = clamp_dim(dt, target.rows);
  out.sa = learn_sa(fit_pca(source.rows, ds), fit_pca(target.rows, dt));
  return out;
}

std::uint64_t model_hash(const SaModel& m) {
  std::uint64_t h = hash_matrix(m.m);
  h = hash_matrix(m.x_a, h);
  h = hash_matrix(m.source.basis, h);
  h = hash_matrix(m.target.basis, h);
  h = hash_matrix(m.source.mean, h);
  h = hash_matrix(m.target.mean, h);
  return hash_matrix(m.target.eigenvalues, h);
}

std::uint64_t model_hash(const GfkModel& m) {
  std::uint64_t h = hash_matrix(m.g);
  h = hash_matrix(m.source_mean, h);
  return hash_matrix(m.target_mean, h);
}

}  // namespace eraloc
