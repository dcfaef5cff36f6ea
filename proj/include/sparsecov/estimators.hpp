#pragma once

// Sample covariance and entrywise thresholding estimators.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "sparsecov/error.hpp"
#include "sparsecov/gaussian.hpp"
#include "sparsecov/matrix.hpp"
#include "sparsecov/random.hpp"

namespace sparsecov {

/// Parameters of the universal threshold tau = A * gamma * sqrt(log p / n).
struct ThresholdConfig {
  double A = 2.0;
  double gamma = 1.0;
  /// Upper cap on tau under which the oracle inequality is claimed.
  double delta = 1.0;
  std::size_t n = 0;
  std::size_t p = 0;
};

struct Threshold {
  double tau = 0.0;
  /// tau > delta: outside the validity range. Reported, not fatal.
  bool exceeds_cap = false;
};

inline Threshold threshold_value(const ThresholdConfig& cfg) {
  if (!(cfg.A > 1.0)) throw InvalidParameter("threshold_value: A must be > 1");
  if (!(cfg.gamma > 0.0)) throw InvalidParameter("threshold_value: gamma must be > 0");
  if (!(cfg.delta > 0.0)) throw InvalidParameter("threshold_value: delta must be > 0");
  if (cfg.p < 2) throw InvalidParameter("threshold_value: p must be >= 2");
  if (cfg.n < 1) throw InvalidParameter("threshold_value: n must be >= 1");
  const double tau = cfg.A * cfg.gamma *
                     std::sqrt(std::log(static_cast<double>(cfg.p)) / static_cast<double>(cfg.n));
  return {tau, tau > cfg.delta};
}

enum class Centering {
  /// (1/n) sum_t X_t X_t^T; the model is zero mean.
  ZeroMean,
  /// Subtract the column means and divide by n - 1.
  Demean,
};

inline SymMatrix sample_covariance(const DataMatrix& data, Centering centering = Centering::ZeroMean) {
  if (data.n < 2) throw InvalidInput("sample_covariance: need at least 2 observations");
  if (data.p < 1 || data.values.size() != data.n * data.p)
    throw InvalidInput("sample_covariance: malformed data matrix");
  for (double x : data.values)
    if (!std::isfinite(x)) throw InvalidInput("sample_covariance: non-finite observation");

  const std::size_t n = data.n;
  const std::size_t p = data.p;
  std::vector<double> mean(p, 0.0);
  if (centering == Centering::Demean) {
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t j = 0; j < p; ++j) mean[j] += data(t, j);
    for (double& m : mean) m /= static_cast<double>(n);
  }
  std::vector<double> acc(p * p, 0.0);
  std::vector<double> row(p);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t j = 0; j < p; ++j) row[j] = data(t, j) - mean[j];
    for (std::size_t i = 0; i < p; ++i) {
      const double xi = row[i];
      double* dst = &acc[i * p];
      for (std::size_t j = i; j < p; ++j) dst[j] += xi * row[j];
    }
  }
  const double div = centering == Centering::Demean ? static_cast<double>(n - 1) : static_cast<double>(n);
  return SymMatrix::from_upper(p, [&](std::size_t i, std::size_t j) { return acc[i * p + j] / div; });
}

/// sign(x) (|x| - tau)_+; exact zero when |x| <= tau.
inline double soft(double x, double tau) noexcept {
  const double a = std::abs(x);
  if (a <= tau) return 0.0;
  return x > 0.0 ? a - tau : tau - a;
}

/// x when |x| > tau, else exact zero.
inline double hard(double x, double tau) noexcept { return std::abs(x) > tau ? x : 0.0; }

namespace detail {

template <typename Rule>
SymMatrix threshold_offdiag(const SymMatrix& sigma_star, double tau, Rule rule) {
  if (!(tau > 0.0)) throw InvalidParameter("threshold: tau must be > 0");
  return SymMatrix::from_upper(sigma_star.dim(), [&](std::size_t i, std::size_t j) {
    return i == j ? 1.0 : rule(sigma_star(i, j), tau);
  });
}

}  // namespace detail

/// Soft thresholding of the off-diagonal entries; diagonal set to 1.
inline SymMatrix soft_threshold(const SymMatrix& sigma_star, double tau) {
  return detail::threshold_offdiag(sigma_star, tau, soft);
}

/// Hard thresholding of the off-diagonal entries; diagonal set to 1.
inline SymMatrix hard_threshold(const SymMatrix& sigma_star, double tau) {
  return detail::threshold_offdiag(sigma_star, tau, hard);
}

/// max_{i != j} |a_ij - b_ij|.
inline double max_entrywise_deviation(const SymMatrix& a, const SymMatrix& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch("max_entrywise_deviation: dimension mismatch");
  double best = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = i + 1; j < a.dim(); ++j) best = std::max(best, std::abs(a(i, j) - b(i, j)));
  return best;
}

/// Replaces eigenvalues below `floor` by `floor`. Optional post-processing;
/// not part of the thresholding estimators themselves.
inline SymMatrix clip_eigenvalues(const SymMatrix& m, double floor) {
  const auto eig = jacobi_eigen(m, true);
  const std::size_t p = m.dim();
  return SymMatrix::from_upper(p, [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < p; ++k)
      s += std::max(eig.values[k], floor) * eig.vectors[k * p + i] * eig.vectors[k * p + j];
    return s;
  });
}

/// Linear-interpolation sample quantile (type 7). Sorts a copy.
inline double quantile(std::vector<double> xs, double level) {
  if (xs.empty()) throw InvalidInput("quantile: empty sample");
  if (!(level >= 0.0 && level <= 1.0)) throw InvalidParameter("quantile: level must lie in [0, 1]");
  std::sort(xs.begin(), xs.end());
  const double h = level * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

/// Per-trial statistics max_{i != j} |sigma*_ij| * sqrt(n / log p) under N_p(0, I).
inline std::vector<double> gamma_statistics(std::size_t p, std::size_t n, std::size_t trials, RngSeed seed) {
  if (p < 2) throw InvalidParameter("calibrate_gamma: p must be >= 2");
  if (n < 2) throw InvalidParameter("calibrate_gamma: n must be >= 2");
  const double scale = std::sqrt(static_cast<double>(n) / std::log(static_cast<double>(p)));
  const SymMatrix eye = SymMatrix::identity(p);
  std::vector<double> stats(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, {t}));
    DataMatrix x(n, p);
    for (double& v : x.values) v = rng.normal();
    stats[t] = max_entrywise_deviation(sample_covariance(x), eye) * scale;
  }
  return stats;
}

/// Empirical gamma for Gaussian data: the `level` quantile of
/// max_{i != j} |sigma*_ij| * sqrt(n / log p) over `trials` draws from N_p(0, I).
inline double calibrate_gamma(std::size_t p, std::size_t n, std::size_t trials, double level, RngSeed seed) {
  if (trials < 100) throw InvalidParameter("calibrate_gamma: trials must be >= 100");
  if (!(level > 0.0 && level < 1.0)) throw InvalidParameter("calibrate_gamma: quantile must lie in (0, 1)");
  return quantile(gamma_statistics(p, n, trials, seed), level);
}

}  // namespace sparsecov
