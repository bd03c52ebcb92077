#pragma once

#include "eraloc/common.hpp"

#include <cstdint>
#include <string>

namespace eraloc {

struct Subspace {
  Vector mean;         // D
  Matrix basis;        // D x d, orthonormal columns
  Vector eigenvalues;  // d, non-increasing

  Eigen::Index ambient() const { return basis.rows(); }
  Eigen::Index dim() const { return basis.cols(); }
};

/// Top-d principal subspace of the rows of x (covariance divisor n-1).
Subspace fit_pca(const Matrix& x, Eigen::Index d);
inline Subspace fit_pca(const FeatureMatrix& f, Eigen::Index d) { return fit_pca(f.rows, d); }

/// All min(n-1, D) principal directions; used when several truncations are needed.
Subspace fit_pca_full(const Matrix& x, Eigen::Index d_max);

Subspace truncate(const Subspace& s, Eigen::Index d);

Vector project(const Subspace& s, const Vector& x);
// Row-wise projection: (x - mean) * basis.
Matrix project_rows(const Subspace& s, const Matrix& x);

// Numerical rank of the centered data: eigenvalues above 1e-10 * largest.
Eigen::Index numeric_rank(const Subspace& full);

// Principal angles between two orthonormal bases, ascending, in [0, pi/2].
Vector principal_angles(const Matrix& a, const Matrix& b);

enum class DimMethod { Eig, Mle, Gmst, Cdm };
const char* dim_method_name(DimMethod m);
DimMethod parse_dim_method(const std::string& s);

struct DimEstimate {
  double value = 0.0;
  DimMethod method = DimMethod::Mle;
  int rounded = 1;
};

DimEstimate make_estimate(double value, DimMethod method, Eigen::Index ambient);

DimEstimate estimate_dim_eig(const Vector& eigenvalues, double energy);
DimEstimate estimate_dim_mle(const Matrix& x, int k_min = 6, int k_max = 12);

struct FractalParams {
  // GMST: subsample fractions of n and resamples per size
  std::vector<double> gmst_fractions{0.125, 0.25, 0.5, 1.0};
  int gmst_resamples = 5;
  // CDM: fit region is the middle `cdm_middle` share of the ln r interval
  // between these two percentiles of the pairwise distances
  double cdm_low_percentile = 0.5;
  double cdm_high_percentile = 10.0;
  double cdm_middle = 0.6;
  int cdm_points = 20;
  std::uint64_t seed = 0;
};

DimEstimate estimate_dim_gmst(const Matrix& x, const FractalParams& p = {});
DimEstimate estimate_dim_cdm(const Matrix& x, const FractalParams& p = {});

// Total length of the Euclidean minimum spanning tree over the rows.
double mst_length(const Matrix& x);

}  // namespace eraloc
