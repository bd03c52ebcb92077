#include "eraloc/linalg.hpp"
#include "eraloc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace eraloc {

const char* dim_method_name(DimMethod m) {
  switch (m) {
    case DimMethod::Eig: return "eig";
    case DimMethod::Mle: return "mle";
    case DimMethod::Gmst: return "gmst";
    case DimMethod::Cdm: return "cdm";
  }
  return "mle";
}

DimMethod parse_dim_method(const std::string& s) {
  if (s == "eig" || s == "EIG") return DimMethod::Eig;
  if (s == "mle" || s == "MLE") return DimMethod::Mle;
  if (s == "gmst" || s == "GMST") return DimMethod::Gmst;
  if (s == "cdm" || s == "CDM") return DimMethod::Cdm;
  fail(ErrorCode::InvalidInput, "unknown dimension method: " + s);
}

DimEstimate make_estimate(double value, DimMethod method, Eigen::Index ambient) {
  DimEstimate e;
  e.value = value;
  e.method = method;
  long r = std::lround(value);
  r = std::max(1L, r);
  if (ambient > 0) r = std::min<long>(r, static_cast<long>(ambient));
  e.rounded = static_cast<int>(r);
  return e;
}

DimEstimate estimate_dim_eig(const Vector& eigenvalues, double energy) {
  if (eigenvalues.size() == 0) fail(ErrorCode::InvalidInput, "empty spectrum");
  if (!(energy > 0.0 && energy <= 1.0)) fail(ErrorCode::InvalidInput, "energy must be in (0, 1]");
  for (Eigen::Index i = 1; i < eigenvalues.size(); ++i)
    if (eigenvalues(i) > eigenvalues(i - 1))
      fail(ErrorCode::InvalidInput, "eigenvalues must be sorted descending");
  if (eigenvalues.minCoeff() < 0.0) fail(ErrorCode::InvalidInput, "negative eigenvalue");
  const double total = eigenvalues.sum();
  if (!(total > 0.0)) fail(ErrorCode::DegenerateSpectrum, "all eigenvalues are zero");
  double cum = 0.0;
  Eigen::Index d = eigenvalues.size();
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    cum += eigenvalues(i);
    if (cum / total >= energy) {
      d = i + 1;
      break;
    }
  }
  return make_estimate(static_cast<double>(d), DimMethod::Eig, eigenvalues.size());
}

DimEstimate estimate_dim_mle(const Matrix& x, int k_min, int k_max) {
  const Eigen::Index n = x.rows();
  if (k_min < 2 || k_max < k_min) fail(ErrorCode::InvalidInput, "need 2 <= k_min <= k_max");
  if (n <= k_max)
    fail(ErrorCode::InsufficientData,
         "MLE needs more than " + std::to_string(k_max) + " samples, got " + std::to_string(n));
  const auto K = static_cast<std::size_t>(k_max);
  Matrix xt = x.transpose();  // columns are points, contiguous

  // k_max nearest-neighbor distances per point, ascending
  std::vector<std::vector<double>> nn(static_cast<std::size_t>(n));
  double min_pos = std::numeric_limits<double>::infinity();
  std::vector<double> row(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      double d = (xt.col(i) - xt.col(j)).norm();
      if (d > 0.0 && d < min_pos) min_pos = d;
      row[c++] = d;
    }
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(K), row.end());
    nn[static_cast<std::size_t>(i)].assign(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(K));
  }
  if (!std::isfinite(min_pos)) fail(ErrorCode::DegenerateData, "all points coincide");
  const double eps = min_pos * 1e-6;
  for (auto& v : nn)
    for (auto& d : v)
      if (d == 0.0) d = eps;

  double acc = 0.0;
  int ks = 0;
  for (int k = k_min; k <= k_max; ++k) {
    double sum_m = 0.0;
    std::size_t used = 0;
    for (const auto& v : nn) {
      const double tk = v[static_cast<std::size_t>(k - 1)];
      double s = 0.0;
      for (int j = 0; j < k - 1; ++j) s += std::log(tk / v[static_cast<std::size_t>(j)]);
      if (s <= 0.0) continue;  // all k neighbors equidistant: no information
      sum_m += static_cast<double>(k - 1) / s;
      ++used;
    }
    if (used == 0) continue;
    acc += sum_m / static_cast<double>(used);
    ++ks;
  }
  if (ks == 0) fail(ErrorCode::DegenerateData, "no point has distinct neighbor distances");
  return make_estimate(acc / ks, DimMethod::Mle, x.cols());
}

double mst_length(const Matrix& x) {
  const Eigen::Index n = x.rows();
  if (n < 2) return 0.0;
  Matrix xt = x.transpose();
  std::vector<double> best(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<char> in(static_cast<std::size_t>(n), 0);
  Eigen::Index cur = 0;
  in[0] = 1;
  double total = 0.0;
  for (Eigen::Index step = 1; step < n; ++step) {
    Eigen::Index next = -1;
    double next_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      auto uj = static_cast<std::size_t>(j);
      if (in[uj]) continue;
      double d = (xt.col(cur) - xt.col(j)).norm();
      if (d < best[uj]) best[uj] = d;
      if (best[uj] < next_d) {
        next_d = best[uj];
        next = j;
      }
    }
    in[static_cast<std::size_t>(next)] = 1;
    total += next_d;
    cur = next;
  }
  return total;
}

namespace {

// Least-squares slope of y on x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx <= 0.0) fail(ErrorCode::DegenerateData, "regression abscissae coincide");
  return sxy / sxx;
}

double percentile(const std::vector<double>& sorted, double pct) {
  double pos = pct / 100.0 * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double t = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - t) + sorted[hi] * t;
}

constexpr Eigen::Index kCdmMaxPoints = 3000;

}  // namespace

DimEstimate estimate_dim_gmst(const Matrix& x, const FractalParams& p) {
  const Eigen::Index n = x.rows();
  if (n < 50) fail(ErrorCode::InsufficientData, "GMST needs at least 50 samples");
  Rng rng(p.seed);
  std::vector<double> lx, ly;
  for (double f : p.gmst_fractions) {
    auto size = static_cast<std::size_t>(std::max<double>(2.0, std::round(f * static_cast<double>(n))));
    size = std::min(size, static_cast<std::size_t>(n));
    for (int r = 0; r < p.gmst_resamples; ++r) {
      auto idx = rng.sample(static_cast<std::size_t>(n), size);
      Matrix sub(static_cast<Eigen::Index>(size), x.cols());
      for (std::size_t i = 0; i < size; ++i) sub.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
      double len = mst_length(sub);
      if (!(len > 0.0)) fail(ErrorCode::DegenerateData, "minimum spanning tree has zero length");
      lx.push_back(std::log(static_cast<double>(size)));
      ly.push_back(std::log(len));
    }
  }
  double slope = ls_slope(lx, ly);
  if (slope >= 1.0) fail(ErrorCode::DegenerateData, "MST growth slope >= 1");
  return make_estimate(1.0 / (1.0 - slope), DimMethod::Gmst, x.cols());
}

DimEstimate estimate_dim_cdm(const Matrix& x, const FractalParams& p) {
  Eigen::Index n = x.rows();
  if (n < 50) fail(ErrorCode::InsufficientData, "CDM needs at least 50 samples");
  Matrix pts = x;
  if (n > kCdmMaxPoints) {
    Rng rng(p.seed);
    auto idx = rng.sample(static_cast<std::size_t>(n), static_cast<std::size_t>(kCdmMaxPoints));
    pts.resize(kCdmMaxPoints, x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) pts.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
    n = kCdmMaxPoints;
  }
  Matrix xt = pts.transpose();
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((xt.col(i) - xt.col(j)).norm());
  std::sort(d.begin(), d.end());
  if (!(d.back() > 0.0)) fail(ErrorCode::DegenerateData, "all points coincide");

  double r_lo = percentile(d, p.cdm_low_percentile);
  double r_hi = percentile(d, p.cdm_high_percentile);
  if (!(r_lo > 0.0) || !(r_hi > r_lo)) fail(ErrorCode::DegenerateData, "distance percentiles coincide");
  double a = std::log(r_lo), b = std::log(r_hi);
  double c = 0.5 * (a + b), w = 0.5 * (b - a) * p.cdm_middle;
  std::vector<double> lr, lc;
  const double pairs = static_cast<double>(d.size());
  for (int i = 0; i < p.cdm_points; ++i) {
    double t = p.cdm_points == 1 ? 0.5 : static_cast<double>(i) / (p.cdm_points - 1);
    double lnr = c - w + 2.0 * w * t;
    auto cnt = std::upper_bound(d.begin(), d.end(), std::exp(lnr)) - d.begin();
    if (cnt == 0) continue;
    lr.push_back(lnr);
    lc.push_back(std::log(static_cast<double>(cnt) / pairs));
  }
  if (lr.size() < 2) fail(ErrorCode::DegenerateData, "correlation integral empty in fit region");
  return make_estimate(ls_slope(lr, lc), DimMethod::Cdm, x.cols());
}

}  // namespace eraloc
