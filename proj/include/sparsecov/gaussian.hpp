#pragma once

// Zero-mean multivariate normal sampling and Kullback-Leibler divergences
// against the identity covariance, with the quadratic upper/lower bounds.
//
// Bound convention. The KL of N(0, I + eps*Delta) from N(0, I) equals
//   1/2 sum_j g(eps*l_j) (eps*l_j)^2,   g(x) = (x - log(1+x)) / x^2,
// over the eigenvalues l_j of Delta. Monotonicity of g gives the bounds
//   (1 - log 2) eps^2 ||Delta||^2 / 2  <=  KL  <=  g(-eps) eps^2 ||Delta||^2 / 2,
// the lower one when ||Delta||_2 <= 1, the upper one when I + Delta is PSD.
// Both carry the eps^2 factor; dropping it would still give a valid upper
// bound for eps < 1 but a looser one.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "sparsecov/error.hpp"
#include "sparsecov/matrix.hpp"
#include "sparsecov/random.hpp"

namespace sparsecov {

/// N_p(0, sigma) with its Cholesky factor cached at construction.
class GaussianModel {
 public:
  explicit GaussianModel(SymMatrix sigma) : sigma_(std::move(sigma)), chol_(cholesky(sigma_)) {}

  const SymMatrix& sigma() const noexcept { return sigma_; }
  const LowerTriangular& chol() const noexcept { return chol_; }
  std::size_t dim() const noexcept { return sigma_.dim(); }

  /// n i.i.d. rows L z, z ~ N(0, I). Same seed gives identical output.
  DataMatrix sample(std::size_t n, RngSeed seed) const {
    if (n == 0) throw InvalidParameter("sample: n must be >= 1");
    Rng rng(seed);
    return sample(n, rng);
  }

  DataMatrix sample(std::size_t n, Rng& rng) const {
    const std::size_t p = dim();
    DataMatrix out(n, p);
    std::vector<double> z(p);
    for (std::size_t t = 0; t < n; ++t) {
      for (double& zi : z) zi = rng.normal();
      for (std::size_t i = 0; i < p; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k <= i; ++k) s += chol_(i, k) * z[k];
        out(t, i) = s;
      }
    }
    return out;
  }

 private:
  SymMatrix sigma_;
  LowerTriangular chol_;
};

/// (eps - log(1+eps)) / eps^2, continuous at 0 with value 1/2.
inline double g_factor(double eps) {
  if (!(eps > -1.0)) throw DomainError("g_factor: eps must be > -1");
  if (std::abs(eps) < 0.05) {
    // sum_{k>=0} (-eps)^k / (k+2); truncation error below 1e-17 here.
    double term = 1.0;
    double sum = 0.0;
    for (int k = 0; k < 14; ++k) {
      sum += term / (k + 2);
      term *= -eps;
    }
    return sum;
  }
  return (eps - std::log1p(eps)) / (eps * eps);
}

/// KL(N(0, sigma) || N(0, I)) = 1/2 sum_j (l_j - 1 - log l_j) over eigenvalues of sigma.
inline double kl_exact(const SymMatrix& sigma) {
  const auto ev = eigenvalues(sigma);
  if (!(ev.front() > 0.0)) throw NotPositiveDefinite("kl_exact: covariance is not positive definite");
  double s = 0.0;
  for (double l : ev) {
    const double x = l - 1.0;
    s += x - std::log1p(x);
  }
  return 0.5 * s;
}

/// KL(N(0, I + eps*Delta) || N(0, I)) written as 1/2 sum_j [eps l_j - log(1 + eps l_j)]
/// over the eigenvalues of Delta. Independent route to kl_exact(I + eps*Delta).
inline double kl_from_perturbation(const SymMatrix& delta, double eps) {
  const auto ev = eigenvalues(delta);
  double s = 0.0;
  for (double l : ev) {
    const double x = eps * l;
    if (!(x > -1.0)) throw NotPositiveDefinite("kl_from_perturbation: I + eps*Delta is not positive definite");
    s += x - std::log1p(x);
  }
  return 0.5 * s;
}

/// KL(N(0, sigma1) || N(0, sigma0)) via the eigenvalues of L0^{-1} sigma1 L0^{-T}.
inline double kl_exact_pair(const SymMatrix& sigma1, const SymMatrix& sigma0) {
  if (sigma1.dim() != sigma0.dim()) throw DimensionMismatch("kl_exact_pair: dimension mismatch");
  const std::size_t p = sigma0.dim();
  const LowerTriangular l0 = cholesky(sigma0);
  // W = L0^{-1} sigma1, column by column with forward substitution.
  std::vector<double> w(p * p);
  for (std::size_t c = 0; c < p; ++c) {
    for (std::size_t i = 0; i < p; ++i) {
      double s = sigma1(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= l0(i, k) * w[k * p + c];
      w[i * p + c] = s / l0(i, i);
    }
  }
  // M = W L0^{-T}, i.e. solve L0 M^T = W^T row by row; M is symmetric.
  std::vector<double> m(p * p);
  for (std::size_t r = 0; r < p; ++r) {
    for (std::size_t i = 0; i < p; ++i) {
      double s = w[r * p + i];
      for (std::size_t k = 0; k < i; ++k) s -= l0(i, k) * m[r * p + k];
      m[r * p + i] = s / l0(i, i);
    }
  }
  const SymMatrix whitened = SymMatrix::from_upper(
      p, [&](std::size_t i, std::size_t j) { return 0.5 * (m[i * p + j] + m[j * p + i]); });
  return kl_exact(whitened);
}

/// g(-eps) * eps^2 * ||Delta||^2 / 2. Requires 0 < eps < 1 and I + Delta PSD
/// (smallest eigenvalue of Delta >= -1 - 1e-10).
inline double kl_upper_bound(const SymMatrix& delta, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("kl_upper_bound: eps must lie in (0, 1)");
  const auto ev = eigenvalues(delta);
  if (ev.front() < -1.0 - 1e-10) throw DomainError("kl_upper_bound: I + Delta is not PSD");
  const double f = frobenius_norm(delta);
  return 0.5 * g_factor(-eps) * eps * eps * f * f;
}

/// (1 - log 2) * eps^2 * ||Delta||^2 / 2. Requires 0 < eps < 1 and ||Delta||_2 <= 1.
inline double kl_lower_bound(const SymMatrix& delta, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("kl_lower_bound: eps must lie in (0, 1)");
  if (spectral_norm(delta) > 1.0 + 1e-12) throw DomainError("kl_lower_bound: ||Delta||_2 exceeds 1");
  const double f = frobenius_norm(delta);
  return 0.5 * (1.0 - std::numbers::ln2) * eps * eps * f * f;
}

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

/// Mean log-likelihood ratio log dP_sigma/dP_I (X) over X ~ N(0, sigma).
/// With X = L z the ratio is -sum log L_ii - |z|^2/2 + |L z|^2/2.
inline MonteCarloEstimate kl_monte_carlo(const GaussianModel& model, std::size_t samples, RngSeed seed) {
  if (samples < 2) throw InvalidParameter("kl_monte_carlo: need at least 2 samples");
  const std::size_t p = model.dim();
  const auto& l = model.chol();
  double half_logdet = 0.0;
  for (std::size_t i = 0; i < p; ++i) half_logdet += std::log(l(i, i));

  Rng rng(seed);
  std::vector<double> z(p);
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t t = 0; t < samples; ++t) {
    double zz = 0.0;
    for (double& zi : z) {
      zi = rng.normal();
      zz += zi * zi;
    }
    double xx = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k <= i; ++k) s += l(i, k) * z[k];
      xx += s * s;
    }
    const double llr = -half_logdet - 0.5 * zz + 0.5 * xx;
    const double d = llr - mean;
    mean += d / static_cast<double>(t + 1);
    m2 += d * (llr - mean);
  }
  const double var = m2 / static_cast<double>(samples - 1);
  return {mean, std::sqrt(var / static_cast<double>(samples)), samples};
}

}  // namespace sparsecov
