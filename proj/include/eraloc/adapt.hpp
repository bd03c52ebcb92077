#pragma once

#include "eraloc/common.hpp"
#include "eraloc/linalg.hpp"

#include <cstdint>

namespace eraloc {

struct SaModel {
  Subspace source;  // d_S dims
  Subspace target;  // d_T dims
  Matrix m;         // d_S x d_T
  Matrix x_a;       // D x d_T, source basis aligned to the target

  Eigen::Index ambient() const { return source.ambient(); }
  Eigen::Index d_target() const { return target.dim(); }
};

SaModel learn_sa(const Subspace& source, const Subspace& target);

// Coordinates in the target subspace: x_aᵀ(x - mean_S) and basis_Tᵀ(x - mean_T).
Vector map_source(const SaModel& model, const Vector& x);
Vector map_target(const SaModel& model, const Vector& x);
Matrix map_source_rows(const SaModel& model, const Matrix& x);
Matrix map_target_rows(const SaModel& model, const Matrix& x);

double sa_similarity(const Vector& x_s, const Vector& x_t, const SaModel& model);
double esa_distance(const Vector& x_s, const Vector& x_t, const SaModel& model);

struct GfkModel {
  Matrix g;  // D x D, symmetric PSD
  int d = 0;
  // Domain means, used to center samples before the kernel in classification.
  Vector source_mean;
  Vector target_mean;
};

// Requires 2d <= D. Subspaces wider than d are truncated to their first d columns.
GfkModel learn_gfk(const Subspace& source, const Subspace& target, int d);

double gfk_similarity(const Vector& x_i, const Vector& x_j, const GfkModel& model);

// Two-fold stratified cross-validation of a nearest-neighbor classifier on
// the source data projected to 1..d_max principal dimensions.
struct SelectDimResult {
  int d = 1;
  std::vector<double> cv_error;  // index i is the error at d = i + 1
};
SelectDimResult select_dim_sa(const FeatureMatrix& source, int d_max, std::uint64_t seed = 0);

struct SdmResult {
  int d = 1;
  std::vector<double> disagreement;  // index i is D(i + 1)
};
SdmResult select_dim_sdm(const Matrix& source, const Matrix& target, int d_cap);

}  // namespace eraloc

namespace eraloc {

enum class AdaptMethod { None, Sa, Esa, Gfk };
const char* adapt_method_name(AdaptMethod m);
AdaptMethod parse_adapt_method(const std::string& s);

struct AdaptConfig {
  AdaptMethod method = AdaptMethod::Esa;
  // 0 selects automatically: SA by source cross-validation, ESA by MLE per
  // domain, GFK by the subspace disagreement measure.
  int d_source = 0;
  int d_target = 0;
  int d_max = 256;
  int mle_k_min = 6;
  int mle_k_max = 12;
  std::uint64_t seed = 0;
};

struct AlignmentModel {
  AdaptMethod method = AdaptMethod::None;
  std::optional<SaModel> sa;
  std::optional<GfkModel> gfk;
};

// Learns the alignment from unlabeled source/target rows (labels only used
// for SA dimension selection when d_source is 0).
AlignmentModel learn_alignment(const FeatureMatrix& source, const FeatureMatrix& target, const AdaptConfig& cfg);

std::uint64_t model_hash(const SaModel& m);
std::uint64_t model_hash(const GfkModel& m);

}  // namespace eraloc
