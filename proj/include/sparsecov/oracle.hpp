#pragma once

// Right-hand sides of the soft-thresholding oracle inequalities, the minimax
// rate functions psi0 / psi1, and the admissibility conditions under which the
// lower bounds are stated.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include "sparsecov/error.hpp"
#include "sparsecov/matrix.hpp"

namespace sparsecov {

/// ((1 + sqrt 2) / 2)^2, the leading constant of the l0 oracle inequality.
inline constexpr double kOracleConstant =
    (1.0 + std::numbers::sqrt2) * (1.0 + std::numbers::sqrt2) / 4.0;

/// Per-entry penalty ((1+sqrt2)/2)^2 A^2 gamma^2 log p / n.
inline double penalty_lambda(double A, double gamma, std::size_t p, std::size_t n) {
  if (p < 2 || n < 1) throw InvalidParameter("penalty_lambda: need p >= 2 and n >= 1");
  return kOracleConstant * A * A * gamma * gamma * std::log(static_cast<double>(p)) /
         static_cast<double>(n);
}

/// Per-entry penalty expressed through the threshold: ((1+sqrt2)/2)^2 tau^2.
inline double lambda_from_tau(double tau) noexcept { return kOracleConstant * tau * tau; }

struct OracleBoundL0 {
  double value = 0.0;
  /// Off-diagonal support of the minimizer, both orientations counted.
  std::size_t best_support_size = 0;
  double lambda = 0.0;
};

/// min_S { ||S - sigma||^2 + lambda |S|_0 } over all p x p matrices S.
///
/// The objective separates over entries. The diagonal of S copies sigma at no
/// cost, and each off-diagonal entry contributes min(sigma_ij^2, lambda).
/// An entry is kept iff sigma_ij^2 > lambda.
inline OracleBoundL0 oracle_l0(const SymMatrix& sigma, double lambda) {
  if (!(lambda > 0.0)) throw InvalidParameter("oracle_l0: lambda must be > 0");
  OracleBoundL0 out;
  out.lambda = lambda;
  const std::size_t p = sigma.dim();
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) {
      const double s2 = sigma(i, j) * sigma(i, j);
      if (s2 > lambda) {
        out.value += 2.0 * lambda;
        out.best_support_size += 2;
      } else {
        out.value += 2.0 * s2;
      }
    }
  }
  return out;
}

/// Coefficient c(q, lambda) = (2 / (2 - q)) 2^{q/2} lambda^{1 - q/2} of the
/// real-k optimum of 2 M^{2/q} k^{1-2/q} / (2/q - 1) + lambda k, which equals
/// c(q, lambda) * M. With lambda = kappa log p / n this is C' ((log p)/n)^{1-q/2}.
inline double lq_penalty_coefficient(double q, double lambda) {
  if (!(q > 0.0 && q < 2.0)) throw InvalidParameter("lq_penalty_coefficient: q must lie in (0, 2)");
  if (!(lambda > 0.0)) throw InvalidParameter("lq_penalty_coefficient: lambda must be > 0");
  return 2.0 / (2.0 - q) * std::pow(2.0, q / 2.0) * std::pow(lambda, 1.0 - q / 2.0);
}

struct OracleBoundLq {
  /// Integer-scan evaluation (valid upper bound on the l0 oracle).
  double value = 0.0;
  std::size_t best_truncation = 0;
  /// Same scan with the real-k optimum plugged in for the inner truncation.
  double analytic_value = 0.0;
  std::size_t analytic_truncation = 0;
  /// lq_penalty_coefficient(q, lambda).
  double coefficient = 0.0;
};

/// Evaluates min_S { 2 ||S - sigma||^2 + pen_q(S) } with S restricted to the
/// truncations sigma_m of sigma (its m largest off-diagonal entries in
/// absolute value, m = 0 .. p(p-1), diagonal copied).
///
/// pen_q(S) is the l_q penalty obtained by truncating S once more at level k:
///   k = 0       : 2 |S|_2^2
///   0 < k < m   : 2 M^{2/q} k^{1-2/q} / (2/q - 1) + lambda k,  M = |S|_q^q
///   k = m       : lambda m
/// `value` minimizes pen_q over integers k, `analytic_value` replaces it by
/// its real-k minimum coefficient(q, lambda) * M.
inline OracleBoundLq oracle_lq(const SymMatrix& sigma, double q, double lambda) {
  if (!(q > 0.0 && q < 2.0)) throw InvalidParameter("oracle_lq: q must lie in (0, 2)");
  if (!(lambda > 0.0)) throw InvalidParameter("oracle_lq: lambda must be > 0");

  const std::size_t p = sigma.dim();
  std::vector<double> mags;
  mags.reserve(p * (p - 1));
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) {
      mags.push_back(std::abs(sigma(i, j)));
      mags.push_back(std::abs(sigma(i, j)));
    }
  std::sort(mags.begin(), mags.end(), std::greater<>());
  const std::size_t total = mags.size();

  // tail[m] = sum of squares beyond the m largest.
  std::vector<double> tail(total + 1, 0.0);
  for (std::size_t m = total; m-- > 0;) tail[m] = tail[m + 1] + mags[m] * mags[m];

  const double coef = lq_penalty_coefficient(q, lambda);
  const double ratio = 2.0 / q - 1.0;
  auto surrogate = [&](double mass, double k) {
    return 2.0 * std::pow(mass, 2.0 / q) * std::pow(k, 1.0 - 2.0 / q) / ratio + lambda * k;
  };

  OracleBoundLq out;
  out.coefficient = coef;
  out.value = std::numeric_limits<double>::infinity();
  out.analytic_value = std::numeric_limits<double>::infinity();

  double mass = 0.0;
  double head_sq = 0.0;
  for (std::size_t m = 0; m <= total; ++m) {
    if (m > 0) {
      const double a = mags[m - 1];
      if (a > 0.0) mass += std::pow(a, q);
      head_sq += a * a;
    }
    double pen = std::min(2.0 * head_sq, lambda * static_cast<double>(m));
    if (m > 1 && mass > 0.0) {
      const double kstar = mass * std::pow(2.0 / lambda, q / 2.0);
      const double lo = std::clamp(std::floor(kstar), 1.0, static_cast<double>(m - 1));
      const double hi = std::clamp(std::ceil(kstar), 1.0, static_cast<double>(m - 1));
      pen = std::min({pen, surrogate(mass, lo), surrogate(mass, hi)});
    }
    // Near-ties (within rounding) go to the smaller truncation.
    const double candidate = 2.0 * tail[m] + pen;
    if (candidate < out.value * (1.0 - 1e-12)) {
      out.value = candidate;
      out.best_truncation = m;
    }
    const double analytic = 2.0 * tail[m] + coef * mass;
    if (analytic < out.analytic_value * (1.0 - 1e-12)) {
      out.analytic_value = analytic;
      out.analytic_truncation = m;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Minimax rates

struct RateParams {
  double c0 = std::numbers::e / 4.0;
  std::size_t n = 1;
  std::size_t p = 2;
  double R = 1.0;
  double q = 0.0;

  void validate(double qmax) const {
    if (n < 1) throw InvalidParameter("RateParams: n must be >= 1");
    if (p < 2) throw InvalidParameter("RateParams: p must be >= 2");
    if (!(R > 0.0)) throw InvalidParameter("RateParams: R must be > 0");
    if (!(c0 > 0.0)) throw InvalidParameter("RateParams: c0 must be > 0");
    if (!(q >= 0.0)) throw InvalidParameter("RateParams: q must be >= 0");
    if (q > qmax) throw DomainError("RateParams: q exceeds the admissible range");
  }
};

/// Exponent of 1/n-type factor in psi0: 1/2 - q/4.
inline double psi0_exponent(double q) noexcept { return 0.5 - q / 4.0; }

/// Exponent in psi1: (1 - q)/2. Zero at q = 1.
inline double psi1_exponent(double q) noexcept { return (1.0 - q) / 2.0; }

/// R^{1/2} ((1/n) log(1 + c0 p^2 / (R n^{q/2})))^{1/2 - q/4}.
inline double rate_psi0(const RateParams& rp) {
  rp.validate(2.0);
  const double n = static_cast<double>(rp.n);
  const double p = static_cast<double>(rp.p);
  if (rp.q == 0.0) return std::sqrt(rp.R) * std::sqrt(std::log1p(rp.c0 * p * p / rp.R) / n);
  const double inner = std::log1p(rp.c0 * p * p / (rp.R * std::pow(n, rp.q / 2.0))) / n;
  return std::sqrt(rp.R) * std::pow(inner, psi0_exponent(rp.q));
}

/// R ((1/n) log(1 + c0 p / (R n^{q/2})))^{(1 - q)/2}; q must lie in [0, 1].
inline double rate_psi1(const RateParams& rp) {
  rp.validate(1.0);
  const double n = static_cast<double>(rp.n);
  const double p = static_cast<double>(rp.p);
  if (rp.q == 1.0) return rp.R;
  if (rp.q == 0.0) return rp.R * std::sqrt(std::log1p(rp.c0 * p / rp.R) / n);
  const double inner = std::log1p(rp.c0 * p / (rp.R * std::pow(n, rp.q / 2.0))) / n;
  return rp.R * std::pow(inner, psi1_exponent(rp.q));
}

/// Upper-bound-side rate R^{1/2} ((log p)/n)^{1/2 - q/4} (Frobenius, global class).
inline double upper_rate0(const RateParams& rp) {
  rp.validate(2.0);
  const double t = std::log(static_cast<double>(rp.p)) / static_cast<double>(rp.n);
  return std::sqrt(rp.R) * std::pow(t, psi0_exponent(rp.q));
}

/// Upper-bound-side rate R ((log p)/n)^{(1 - q)/2} (operator l1, column class).
inline double upper_rate1(const RateParams& rp) {
  rp.validate(1.0);
  const double t = std::log(static_cast<double>(rp.p)) / static_cast<double>(rp.n);
  return rp.R * std::pow(t, psi1_exponent(rp.q));
}

struct Conditions2 {
  bool first = false;   ///< R ((log p)/n)^{1 - q/2} <= C0
  bool second = false;  ///< R ((log p)/n)^{(1 - q)/2} <= C0
  bool third = false;   ///< R^{-1} ((log p)/n)^{q/2} <= C0

  /// Requirement for the Frobenius lower bound.
  bool frobenius() const noexcept { return first && third; }
  /// Requirement for the operator-l1 lower bound.
  bool operator_l1() const noexcept { return second && third; }
};

inline Conditions2 check_conditions_2(const RateParams& rp, double C0) {
  if (rp.p < 2) throw InvalidParameter("check_conditions_2: p must be >= 2");
  if (rp.n < 1) throw InvalidParameter("check_conditions_2: n must be >= 1");
  if (!(rp.R > 0.0)) throw InvalidParameter("check_conditions_2: R must be > 0");
  if (!(C0 > 0.0)) throw InvalidParameter("check_conditions_2: C0 must be > 0");
  const double t = std::log(static_cast<double>(rp.p)) / static_cast<double>(rp.n);
  Conditions2 c;
  c.first = rp.R * std::pow(t, 1.0 - rp.q / 2.0) <= C0;
  c.second = rp.R * std::pow(t, (1.0 - rp.q) / 2.0) <= C0;
  c.third = (rp.q == 0.0 ? 1.0 : std::pow(t, rp.q / 2.0)) / rp.R <= C0;
  return c;
}

// ---------------------------------------------------------------------------
// Loss functionals w(.) applied to recorded losses

/// w(t) = t: the mean loss.
inline double expected_loss(const std::vector<double>& losses) {
  if (losses.empty()) throw InvalidInput("expected_loss: empty sample");
  double s = 0.0;
  for (double x : losses) s += x;
  return s / static_cast<double>(losses.size());
}

/// w(t) = 1{t > level}: the fraction of losses exceeding `level`.
inline double exceedance_probability(const std::vector<double>& losses, double level) {
  if (losses.empty()) throw InvalidInput("exceedance_probability: empty sample");
  std::size_t hits = 0;
  for (double x : losses)
    if (x > level) ++hits;
  return static_cast<double>(hits) / static_cast<double>(losses.size());
}

}  // namespace sparsecov
