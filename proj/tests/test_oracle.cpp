#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sparsecov/oracle.hpp"
#include "test_support.hpp"

using namespace sparsecov;
using sparsecov::testing::random_sym;

namespace {

// Minimizes ||S - sigma||^2 + lambda |S|_0 over all supports of the strictly
// upper triangle (S symmetric, diagonal free). Given a support, the best S
// copies sigma on it. The objective is accumulated pair by pair, both
// orientations at once, so that the comparison can be exact.
double brute_oracle_l0(const SymMatrix& sigma, double lambda) {
  const std::size_t p = sigma.dim();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) pairs.emplace_back(i, j);
  double best = std::numeric_limits<double>::infinity();
  for (std::uint64_t mask = 0; mask < (1ull << pairs.size()); ++mask) {
    SymMatrix s = SymMatrix::diagonal(std::vector<double>(p, 0.0));
    for (std::size_t i = 0; i < p; ++i) s.set(i, i, sigma(i, i));
    for (std::size_t b = 0; b < pairs.size(); ++b)
      if (mask >> b & 1) s.set(pairs[b].first, pairs[b].second, sigma(pairs[b].first, pairs[b].second));
    double obj = 0.0;
    for (std::size_t i = 0; i < p; ++i) obj += (s(i, i) - sigma(i, i)) * (s(i, i) - sigma(i, i));
    for (const auto& [i, j] : pairs) {
      const double r = s(i, j) - sigma(i, j);
      obj += 2.0 * (r * r) + (s(i, j) != 0.0 ? 2.0 * lambda : 0.0);
    }
    best = std::min(best, obj);
  }
  return best;
}

// Direct scan over truncation levels m with the penalty evaluated at every
// integer inner level k (0..m), independent of the floor/ceil shortcut.
double brute_oracle_lq(const SymMatrix& sigma, double q, double lambda) {
  std::vector<double> a;
  for (std::size_t i = 0; i < sigma.dim(); ++i)
    for (std::size_t j = 0; j < sigma.dim(); ++j)
      if (i != j) a.push_back(std::abs(sigma(i, j)));
  std::sort(a.rbegin(), a.rend());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m <= a.size(); ++m) {
    double tail = 0.0, head = 0.0, mass = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) {
      if (t < m) {
        head += a[t] * a[t];
        if (a[t] > 0) mass += std::pow(a[t], q);
      } else {
        tail += a[t] * a[t];
      }
    }
    double pen = std::min(2 * head, lambda * static_cast<double>(m));
    if (mass > 0)
      for (std::size_t k = 1; k < m; ++k)
        pen = std::min(pen, 2 * std::pow(mass, 2 / q) * std::pow(static_cast<double>(k), 1 - 2 / q) / (2 / q - 1) +
                                lambda * static_cast<double>(k));
    best = std::min(best, 2 * tail + pen);
  }
  return best;
}

}  // namespace

TEST(OracleL0, Examples) {
  const auto id = oracle_l0(SymMatrix::identity(4), 0.3);
  EXPECT_EQ(id.value, 0.0);
  EXPECT_EQ(id.best_support_size, 0u);

  auto s = SymMatrix::identity(4);
  s.set(0, 1, 0.5);
  const auto keep = oracle_l0(s, 0.1);
  EXPECT_NEAR(keep.value, 0.2, 1e-15);
  EXPECT_EQ(keep.best_support_size, 2u);
  EXPECT_NEAR(brute_oracle_l0(s, 0.1), 0.2, 1e-15);

  const auto drop = oracle_l0(s, 0.5);
  EXPECT_NEAR(drop.value, 0.5, 1e-15);
  EXPECT_EQ(drop.best_support_size, 0u);
  EXPECT_NEAR(brute_oracle_l0(s, 0.5), 0.5, 1e-15);

  EXPECT_THROW(oracle_l0(s, 0.0), InvalidParameter);
}

TEST(OracleL0, MatchesBruteForce) {
  Rng rng(RngSeed{61});
  for (int rep = 0; rep < 200; ++rep) {
    auto s = random_sym(4, rng, 0.6);
    for (std::size_t i = 0; i < 4; ++i) s.set(i, i, 1.0);
    const double lambda = 0.01 + 0.3 * rng.uniform();
    EXPECT_EQ(oracle_l0(s, lambda).value, brute_oracle_l0(s, lambda));
  }
}

TEST(OracleL0, ShapeInLambda) {
  Rng rng(RngSeed{62});
  for (int rep = 0; rep < 50; ++rep) {
    const auto s = random_sym(6, rng, 0.5);
    const double off = offdiag_sq_sum(s);
    double prev = 0.0, prev_slope = std::numeric_limits<double>::infinity();
    const double h = 0.01;
    for (double lambda = h; lambda < 0.4; lambda += h) {
      const double v = oracle_l0(s, lambda).value;
      EXPECT_GE(v, prev - 1e-15);
      const double slope = (v - prev) / h;
      if (lambda > h) {
        EXPECT_LE(slope, prev_slope + 1e-9);
      }
      EXPECT_LE(v, off + 1e-15);
      EXPECT_LE(v, lambda * static_cast<double>(offdiag_l0(s, 0.0)) + 1e-15);
      prev = v;
      prev_slope = slope;
    }
  }
}

TEST(OracleL0, PenaltyParametrizations) {
  const double A = 2.0, g = 0.7;
  const std::size_t p = 50, n = 100;
  const double tau = A * g * std::sqrt(std::log(50.0) / 100.0);
  EXPECT_NEAR(penalty_lambda(A, g, p, n), lambda_from_tau(tau), 1e-15);
  EXPECT_NEAR(kOracleConstant, std::pow((1 + std::numbers::sqrt2) / 2, 2), 1e-15);
}

TEST(OracleLq, Examples) {
  const auto id = oracle_lq(SymMatrix::identity(4), 0.5, 0.1);
  EXPECT_EQ(id.value, 0.0);
  EXPECT_EQ(id.best_truncation, 0u);

  // Geometric decay with a large penalty: keeping nothing is optimal.
  auto s = SymMatrix::identity(5);
  double v = 0.3;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = i + 1; j < 5; ++j, v *= 0.5) s.set(i, j, v);
  const auto big = oracle_lq(s, 0.5, 10.0);
  EXPECT_EQ(big.best_truncation, 0u);
  EXPECT_NEAR(big.value, 2.0 * offdiag_sq_sum(s), 1e-15);

  EXPECT_THROW(oracle_lq(s, 0.0, 0.1), InvalidParameter);
  EXPECT_THROW(oracle_lq(s, 2.0, 0.1), InvalidParameter);
  EXPECT_THROW(oracle_lq(s, 1.0, 0.0), InvalidParameter);
}

TEST(OracleLq, MatchesExhaustiveScan) {
  Rng rng(RngSeed{63});
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t p = 3 + rng.below(4);
    const auto s = random_sym(p, rng, 0.5);
    const double q = 0.1 + 1.8 * rng.uniform();
    const double lambda = 0.001 + 0.2 * rng.uniform();
    const auto r = oracle_lq(s, q, lambda);
    EXPECT_NEAR(r.value, brute_oracle_lq(s, q, lambda), 1e-12 * (1 + r.value));
  }
}

TEST(OracleLq, DominatesL0OracleAndAnalyticDominatesScan) {
  Rng rng(RngSeed{64});
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t p = 3 + rng.below(6);
    const auto s = random_sym(p, rng, 0.5);
    const double q = 0.1 + 1.8 * rng.uniform();
    const double lambda = 0.001 + 0.2 * rng.uniform();
    const auto r = oracle_lq(s, q, lambda);
    // Every scan candidate is 2 ||S - sigma||^2 plus an upper bound on the
    // l0 penalty of some truncation of S, hence >= the l0 oracle.
    EXPECT_GE(r.value * (1 + 1e-12), oracle_l0(s, lambda).value);
    EXPECT_GE(r.analytic_value * (1 + 1e-12), r.value);
    EXPECT_NEAR(r.coefficient, lq_penalty_coefficient(q, lambda), 0.0);
  }
}

TEST(OracleLq, CoefficientIsRealOptimum) {
  for (double q : {0.2, 0.5, 1.0, 1.5}) {
    for (double lambda : {0.01, 0.1, 1.0}) {
      const double M = 0.7;
      const double r = 2 / q - 1;
      // Golden-section-free check: dense scan over real k.
      double best = std::numeric_limits<double>::infinity();
      for (double k = 1e-3; k < 200; k *= 1.0001)
        best = std::min(best, 2 * std::pow(M, 2 / q) * std::pow(k, 1 - 2 / q) / r + lambda * k);
      EXPECT_NEAR(lq_penalty_coefficient(q, lambda) * M, best, 1e-6 * best) << q << " " << lambda;
    }
  }
}

TEST(Rates, Psi0Examples) {
  const double e4 = std::numbers::e / 4;
  RateParams rp{e4, 100, 10, 2.0, 0.0};
  EXPECT_NEAR(rate_psi0(rp), std::sqrt(2.0) * std::sqrt(std::log(1 + e4 * 100 / 2) / 100), 1e-15);
  rp.q = 1e-9;
  const double near0 = rate_psi0(rp);
  rp.q = 0.0;
  EXPECT_NEAR(near0, rate_psi0(rp), 1e-7);
  double prev = 1e300;
  for (std::size_t n = 10; n < 100000; n *= 2) {
    for (double q : {0.0, 0.5, 1.0, 1.5}) {
      (void)q;
    }
    rp.n = n;
    const double v = rate_psi0(rp);
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_NEAR(psi0_exponent(0.0), 0.5, 0.0);
  EXPECT_NEAR(psi0_exponent(2.0), 0.0, 0.0);
}

TEST(Rates, Psi1Examples) {
  const double e4 = std::numbers::e / 4;
  for (std::size_t n : {10u, 100u, 100000u}) {
    EXPECT_EQ(rate_psi1({e4, n, 50, 3.5, 1.0}), 3.5);
    EXPECT_EQ(psi1_exponent(1.0), 0.0);
  }
  EXPECT_NEAR(rate_psi1({e4, 200, 50, 4.0, 0.0}), 4.0 * std::sqrt(std::log(1 + e4 * 50 / 4) / 200), 1e-15);
  for (double q : {0.0, 0.3, 0.9}) {
    double prev = 1e300;
    for (std::size_t n = 10; n < 100000; n *= 2) {
      const double v = rate_psi1({e4, n, 50, 2.0, q});
      EXPECT_LT(v, prev);
      prev = v;
    }
  }
  EXPECT_THROW(rate_psi1({e4, 10, 50, 2.0, 1.5}), DomainError);
  EXPECT_THROW(rate_psi0({e4, 10, 50, 2.0, 2.5}), DomainError);
  EXPECT_THROW(rate_psi0({e4, 10, 1, 2.0, 0.5}), InvalidParameter);
  EXPECT_THROW(rate_psi0({e4, 10, 50, 0.0, 0.5}), InvalidParameter);
}

TEST(Rates, ComparableToUpperRates) {
  // With R n^{q/2} <= p^alpha, alpha < 1, log(1 + c0 p^2 / (R n^{q/2})) sits
  // between (2 - alpha) log p - const and 2 log p + const, so the ratios are bounded.
  double lo0 = 1e300, hi0 = 0, lo1 = 1e300, hi1 = 0;
  for (std::size_t p : {100u, 1000u, 10000u}) {
    for (std::size_t n : {50u, 200u, 1000u}) {
      for (double q : {0.0, 0.25, 0.5, 0.75}) {
        const double alpha = 0.5;
        const double R = std::pow(static_cast<double>(p), alpha) / std::pow(static_cast<double>(n), q / 2);
        if (R <= 0.01) continue;
        const RateParams rp{std::numbers::e / 4, n, p, R, q};
        const double r0 = rate_psi0(rp) / upper_rate0(rp);
        const double r1 = rate_psi1(rp) / upper_rate1(rp);
        lo0 = std::min(lo0, r0);
        hi0 = std::max(hi0, r0);
        lo1 = std::min(lo1, r1);
        hi1 = std::max(hi1, r1);
      }
    }
  }
  EXPECT_GT(lo0, 0.5);
  EXPECT_LT(hi0, 2.0);
  EXPECT_GT(lo1, 0.5);
  EXPECT_LT(hi1, 2.0);
}

TEST(Conditions, Examples) {
  // Large n: everything holds for q > 0.
  const auto big = check_conditions_2({std::numbers::e / 4, 100000000, 100, 5.0, 0.5}, 1.0);
  EXPECT_TRUE(big.first && big.second && big.third);
  // q = 0: third reads 1/R <= C0.
  EXPECT_TRUE(check_conditions_2({1.0, 100, 10, 2.0, 0.0}, 0.5).third);
  EXPECT_FALSE(check_conditions_2({1.0, 100, 10, 1.0, 0.0}, 0.5).third);
  // Equality at the boundary counts: R (log p / n)^{1 - q/2} = C0 exactly.
  const double t = std::log(16.0) / 4.0;  // = log 2
  const double R = 1.0;
  const auto c = check_conditions_2({1.0, 4, 16, R, 0.0}, R * t);
  EXPECT_TRUE(c.first);
  EXPECT_TRUE(c.frobenius() == (c.first && c.third));
  EXPECT_TRUE(c.operator_l1() == (c.second && c.third));
}

TEST(LossFunctionals, Wrappers) {
  EXPECT_NEAR(expected_loss({1, 2, 3, 6}), 3.0, 1e-15);
  EXPECT_NEAR(exceedance_probability({1, 2, 3, 6}, 2.0), 0.5, 1e-15);
  EXPECT_THROW(expected_loss({}), InvalidInput);
}
