#include "oracles.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace eraloc::oracle {

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c = Matrix::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

Eigen2 jacobi_eigen(const Matrix& in, int sweeps) {
  const Eigen::Index n = in.rows();
  Matrix a = in;
  Matrix v = Matrix::Identity(n, n);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) > a(y, y); });
  Eigen2 out{Vector(n), Matrix(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = a(order[i], order[i]);
    out.vectors.col(i) = v.col(order[i]);
  }
  return out;
}

Matrix covariance(const Matrix& x) {
  const Eigen::Index n = x.rows(), D = x.cols();
  Vector mean = Vector::Zero(D);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < D; ++j) mean(j) += x(i, j);
  mean /= static_cast<double>(n);
  Matrix c = Matrix::Zero(D, D);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index a = 0; a < D; ++a)
      for (Eigen::Index b = 0; b < D; ++b) c(a, b) += (x(i, a) - mean(a)) * (x(i, b) - mean(b));
  return c / static_cast<double>(n - 1);
}

Matrix orthonormalize(const Matrix& a) {
  Matrix q = a;
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    for (Eigen::Index i = 0; i < j; ++i) q.col(j) -= q.col(i).dot(q.col(j)) * q.col(i);
    q.col(j) /= q.col(j).norm();
  }
  return q;
}

Matrix gfk_quadrature(const Matrix& p, const Matrix& q, int panels) {
  const Eigen::Index D = p.rows();
  // Geodesic Y(t) = P V cos(tΘ) + U sin(tΘ) with U tan(Θ) Vᵀ the thin SVD of
  // (I - PPᵀ) Q (PᵀQ)^{-1}. ΦΦᵀ does not depend on the basis chosen for Y(t).
  Matrix ptq = p.transpose() * q;
  Matrix h = (q - p * ptq) * ptq.inverse();
  Eigen::JacobiSVD<Matrix> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector theta = svd.singularValues().array().atan();
  const Matrix pv = p * svd.matrixV();
  const Matrix& u = svd.matrixU();
  auto phi = [&](double t) {
    Matrix y(D, p.cols());
    for (Eigen::Index i = 0; i < p.cols(); ++i)
      y.col(i) = pv.col(i) * std::cos(t * theta(i)) + u.col(i) * std::sin(t * theta(i));
    return Matrix(y * y.transpose());
  };
  double h_step = 1.0 / panels;
  Matrix acc = phi(0.0) + phi(1.0);
  for (int i = 1; i < panels; ++i) acc += (i % 2 ? 4.0 : 2.0) * phi(i * h_step);
  return acc * (h_step / 3.0);
}

double mle_dimension(const Matrix& x, int k_min, int k_max) {
  const Eigen::Index n = x.rows();
  std::vector<std::vector<double>> dist(static_cast<std::size_t>(n));
  double min_pos = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      double d = std::sqrt((x.row(i) - x.row(j)).squaredNorm());
      dist[i].push_back(d);
      if (d > 0) min_pos = std::min(min_pos, d);
    }
    std::sort(dist[i].begin(), dist[i].end());
  }
  for (auto& row : dist)
    for (auto& d : row)
      if (d == 0.0) d = 1e-6 * min_pos;
  double total = 0.0;
  for (int k = k_min; k <= k_max; ++k) {
    double sum = 0.0;
    int used = 0;
    for (const auto& row : dist) {
      double s = 0.0;
      for (int j = 0; j < k - 1; ++j) s += std::log(row[k - 1] / row[j]);
      if (s <= 0.0) continue;
      sum += (k - 1) / s;
      ++used;
    }
    total += sum / used;
  }
  return total / (k_max - k_min + 1);
}

double gmm_loglik(const Matrix& x, const Vector& w, const Matrix& mu, const Matrix& var) {
  const double log2pi = std::log(2.0 * 3.14159265358979323846);
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::vector<double> terms;
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      double t = std::log(w(k));
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        double diff = x(i, j) - mu(k, j);
        t -= 0.5 * (log2pi + std::log(var(k, j)) + diff * diff / var(k, j));
      }
      terms.push_back(t);
    }
    double m = *std::max_element(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) s += std::exp(t - m);
    total += m + std::log(s);
  }
  return total / static_cast<double>(x.rows());
}

Vector fisher_by_differences(const Matrix& x, const Vector& w, const Matrix& mu, const Matrix& var, double step) {
  const Eigen::Index K = w.size(), d = mu.cols();
  const double n = static_cast<double>(x.rows());
  // Summed log-likelihood as a function of means and standard deviations.
  auto total = [&](const Matrix& m, const Matrix& sd) {
    return gmm_loglik(x, w, m, sd.array().square().matrix()) * n;
  };
  Matrix sd = var.array().sqrt();
  Vector fv(2 * K * d);
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index j = 0; j < d; ++j) {
      Matrix up = mu, dn = mu;
      up(k, j) += step;
      dn(k, j) -= step;
      double g_mu = (total(up, sd) - total(dn, sd)) / (2 * step);
      Matrix su = sd, sdn = sd;
      su(k, j) += step;
      sdn(k, j) -= step;
      double g_sd = (total(mu, su) - total(mu, sdn)) / (2 * step);
      // d/dμ = Σγ(x-μ)/σ², d/dσ = Σγ[(x-μ)²/σ³ - 1/σ]; rescale to the FV blocks.
      fv(k * 2 * d + j) = g_mu * sd(k, j) / (n * std::sqrt(w(k)));
      fv(k * 2 * d + d + j) = g_sd * sd(k, j) / (n * std::sqrt(2.0 * w(k)));
    }
  }
  return fv;
}

double average_precision(const std::vector<bool>& hits, std::size_t relevant) {
  double sum = 0.0;
  std::size_t found = 0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (!hits[i]) continue;
    ++found;
    sum += static_cast<double>(found) / static_cast<double>(i + 1);
  }
  return relevant ? sum / static_cast<double>(relevant) : 0.0;
}

Eigen::Index brute_nearest(const Matrix& train, const Vector& q) {
  Eigen::Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < train.rows(); ++i) {
    double d = 0.0;
    for (Eigen::Index j = 0; j < train.cols(); ++j) d += (train(i, j) - q(j)) * (train(i, j) - q(j));
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

double kmeans_restarts(const Matrix& x, int k, int restarts, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const Eigen::Index n = x.rows();
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), gen);
    Matrix c(k, x.cols());
    for (int i = 0; i < k; ++i) c.row(i) = x.row(idx[i]);
    double cost = 0.0;
    for (int it = 0; it < 300; ++it) {
      std::vector<Eigen::Index> assign(static_cast<std::size_t>(n));
      cost = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        assign[i] = brute_nearest(c, x.row(i).transpose());
        cost += (x.row(i) - c.row(assign[i])).squaredNorm();
      }
      Matrix next = Matrix::Zero(k, x.cols());
      std::vector<int> count(static_cast<std::size_t>(k), 0);
      for (Eigen::Index i = 0; i < n; ++i) {
        next.row(assign[i]) += x.row(i);
        ++count[assign[i]];
      }
      for (int j = 0; j < k; ++j) next.row(j) = count[j] ? Matrix(next.row(j) / count[j]) : Matrix(c.row(j));
      bool moved = (next - c).cwiseAbs().maxCoeff() > 1e-12;
      c = next;
      if (!moved) break;
    }
    best = std::min(best, cost);
  }
  return best;
}

}  // namespace eraloc::oracle
