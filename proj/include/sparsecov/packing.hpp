#pragma once

// Packing families for the minimax lower bounds: sets of covariance matrices
// I + (a/2) B with binary B, pairwise separated in the loss metric and each
// within a small KL budget of the identity.
//
// Two geometries are supported:
//   Banded   - exactly k ones above the diagonal, all inside the band
//              1 <= j - i <= floor(sqrt k). Frobenius loss, global class.
//   FirstRow - exactly k ones among positions (1, 2..p) of the first row
//              (mirrored into the first column). Operator-l1 loss, column class.
//
// Existence of large well-separated families is a combinatorial fact with no
// algorithm attached; here families are built greedily from random candidates
// and then certified exhaustively.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sparsecov/error.hpp"
#include "sparsecov/gaussian.hpp"
#include "sparsecov/matrix.hpp"
#include "sparsecov/oracle.hpp"
#include "sparsecov/random.hpp"

namespace sparsecov {

enum class PackingVariant { Banded, FirstRow };

inline const char* to_string(PackingVariant v) noexcept {
  return v == PackingVariant::Banded ? "banded" : "first_row";
}

struct PackingConfig {
  std::size_t p = 0;
  std::size_t k = 1;
  double a0 = 0.1;
  PackingVariant variant = PackingVariant::Banded;
  std::size_t n = 1;
};

/// floor(sqrt(k)) computed exactly on integers.
inline std::size_t band_width(std::size_t k) noexcept {
  auto w = static_cast<std::size_t>(std::sqrt(static_cast<double>(k)));
  while (w * w > k) --w;
  while ((w + 1) * (w + 1) <= k) ++w;
  return w;
}

/// Over-diagonal positions where a one may appear, in row-major order.
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> packing_slots(const PackingConfig& cfg) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> slots;
  if (cfg.variant == PackingVariant::FirstRow) {
    for (std::size_t j = 1; j < cfg.p; ++j) slots.emplace_back(0u, static_cast<std::uint32_t>(j));
    return slots;
  }
  const std::size_t w = band_width(cfg.k);
  for (std::size_t i = 0; i < cfg.p; ++i)
    for (std::size_t j = i + 1; j < cfg.p && j - i <= w; ++j)
      slots.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
  return slots;
}

/// Number of admissible slots (M for the banded family, p - 1 for the first row).
inline std::size_t slot_count(const PackingConfig& cfg) {
  if (cfg.variant == PackingVariant::FirstRow) return cfg.p > 0 ? cfg.p - 1 : 0;
  const std::size_t w = band_width(cfg.k);
  std::size_t m = 0;
  for (std::size_t d = 1; d <= w && d < cfg.p; ++d) m += cfg.p - d;
  return m;
}

/// Checks that k ones fit into the slot set.
inline void validate_feasible(const PackingConfig& cfg) {
  if (cfg.p < 2) throw InvalidParameter("PackingConfig: p must be >= 2");
  if (cfg.k < 1) throw InvalidParameter("PackingConfig: k must be >= 1");
  if (cfg.n < 1) throw InvalidParameter("PackingConfig: n must be >= 1");
  if (!(cfg.a0 > 0.0)) throw InvalidParameter("PackingConfig: a0 must be > 0");
  if (slot_count(cfg) < cfg.k)
    throw ConstructionError("PackingConfig: k exceeds the number of admissible slots");
}

/// Full regime check for building certified families: feasibility plus
/// k <= p^2/16 (Banded) or k <= (p-1)/2 (FirstRow).
inline void validate_packing(const PackingConfig& cfg) {
  validate_feasible(cfg);
  const double k = static_cast<double>(cfg.k);
  const double p = static_cast<double>(cfg.p);
  if (cfg.variant == PackingVariant::Banded && k > p * p / 16.0)
    throw InvalidParameter("PackingConfig: banded family requires k <= p^2/16");
  if (cfg.variant == PackingVariant::FirstRow && k > (p - 1.0) / 2.0)
    throw InvalidParameter("PackingConfig: first-row family requires k <= (p-1)/2");
}

/// a = a0 sqrt(log(1 + e p / (4 sqrt k)) / n) (Banded) or
/// a = a0 sqrt(log(1 + e (p-1) / k) / n) (FirstRow).
inline double amplitude(const PackingConfig& cfg) {
  if (cfg.p < 2 || cfg.k < 1 || cfg.n < 1 || !(cfg.a0 > 0.0))
    throw InvalidParameter("amplitude: invalid packing configuration");
  const double p = static_cast<double>(cfg.p);
  const double k = static_cast<double>(cfg.k);
  const double n = static_cast<double>(cfg.n);
  const double ratio = cfg.variant == PackingVariant::Banded ? std::numbers::e * p / (4.0 * std::sqrt(k))
                                                             : std::numbers::e * (p - 1.0) / k;
  return cfg.a0 * std::sqrt(std::log1p(ratio) / n);
}

/// A binary symmetric pattern, stored as its sorted over-diagonal ones.
struct BinarySupport {
  std::size_t p = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> ones;

  SymMatrix to_matrix() const {
    SymMatrix b(p);
    for (auto [i, j] : ones) b.set(i, j, 1.0);
    return b;
  }

  friend bool operator==(const BinarySupport&, const BinarySupport&) = default;
};

/// Number of over-diagonal positions where two patterns differ.
inline std::size_t symmetric_difference(const BinarySupport& a, const BinarySupport& b) {
  std::size_t common = 0;
  auto ia = a.ones.begin();
  auto ib = b.ones.begin();
  while (ia != a.ones.end() && ib != b.ones.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  return a.ones.size() + b.ones.size() - 2 * common;
}

/// Uniform k-subset of the admissible slots (partial Fisher-Yates).
inline BinarySupport sample_binary_support(const PackingConfig& cfg, Rng& rng) {
  validate_feasible(cfg);
  auto slots = packing_slots(cfg);
  const std::size_t m = slots.size();
  for (std::size_t i = 0; i < cfg.k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(m - i));
    std::swap(slots[i], slots[j]);
  }
  BinarySupport out{cfg.p, {slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(cfg.k)}};
  std::sort(out.ones.begin(), out.ones.end());
  return out;
}

inline SymMatrix sample_binary_member(const PackingConfig& cfg, RngSeed seed) {
  Rng rng(seed);
  return sample_binary_support(cfg, rng).to_matrix();
}

/// Minimum admissible distance between two binary patterns:
/// ||B - B'||^2 >= (k+1)/4 (Banded), |b_(1) - b'_(1)|_1 >= (k+1)/4 (FirstRow).
inline bool supports_separated(const PackingConfig& cfg, const BinarySupport& a, const BinarySupport& b) {
  const auto diff = static_cast<double>(symmetric_difference(a, b));
  const double need = (static_cast<double>(cfg.k) + 1.0) / 4.0;
  // Frobenius counts each over-diagonal difference twice.
  const double dist = cfg.variant == PackingVariant::Banded ? 2.0 * diff : diff;
  return dist >= need;
}

/// Separation guaranteed between distinct members by the acceptance rule, in
/// the family's metric: (a/2) sqrt((k+1)/4) (Frobenius) or (a/2)(k+1)/4 (l1).
inline double separation_threshold(PackingVariant variant, std::size_t k, double amp) {
  const double need = (static_cast<double>(k) + 1.0) / 4.0;
  return variant == PackingVariant::Banded ? 0.5 * amp * std::sqrt(need) : 0.5 * amp * need;
}

struct CertificateReport {
  /// Frobenius^2 (Banded) or operator-l1^2 (FirstRow), over distinct pairs of
  /// members and member-to-identity pairs.
  double min_pairwise_sq_distance = 0.0;
  double log_cardinality = 0.0;
  /// max over members of n * KL(P_Sigma, P_I), exact.
  double max_kl_times_n = 0.0;
  /// Same maximum with the quadratic KL upper bound at Delta = aB, eps = 1/2.
  double max_kl_bound_times_n = 0.0;
  /// sqrt(min_pairwise_sq_distance) - psi; >= 0 means the separation holds.
  double condition_i_margin = 0.0;
  /// kl_budget * log(card) - max_kl_times_n; >= 0 means the KL budget holds.
  double condition_ii_margin = 0.0;
  double psi = 0.0;
  double kl_budget = 1.0 / 16.0;
  bool all_positive_definite = false;
  bool all_diagonally_dominant = false;

  bool satisfied() const noexcept {
    return condition_i_margin >= 0.0 && condition_ii_margin >= 0.0 && all_positive_definite &&
           all_diagonally_dominant;
  }
};

struct PackingFamily {
  PackingConfig config;
  /// a0 after the diagonal-dominance shrink loop.
  double a0_used = 0.0;
  double amplitude = 0.0;
  std::vector<BinarySupport> binary_supports;
  /// I + (a/2) B for each support.
  std::vector<SymMatrix> members;
  std::size_t target_cardinality = 0;
  std::size_t attempts_used = 0;
  bool below_target = false;
  RngSeed seed;
  CertificateReport certificate;
};

/// Loss metric of the family: Frobenius (Banded) or operator l1 (FirstRow).
inline double family_distance(PackingVariant variant, const SymMatrix& a, const SymMatrix& b) {
  const SymMatrix d = a - b;
  return variant == PackingVariant::Banded ? frobenius_norm(d) : op_l1_norm(d);
}

/// Exhaustive verification of separation (psi) and KL budget for a family.
inline CertificateReport certify(const PackingFamily& family, std::size_t n, double psi,
                                 double kl_budget = 1.0 / 16.0) {
  if (family.members.empty()) throw InvalidInput("certify: empty family");
  const PackingVariant variant = family.config.variant;
  const std::size_t p = family.config.p;
  const SymMatrix eye = SymMatrix::identity(p);

  CertificateReport rep;
  rep.psi = psi;
  rep.kl_budget = kl_budget;
  rep.log_cardinality = std::log(static_cast<double>(family.members.size()));
  rep.all_positive_definite = true;
  rep.all_diagonally_dominant = true;

  double min_dist = std::numeric_limits<double>::infinity();
  const auto& ms = family.members;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    min_dist = std::min(min_dist, family_distance(variant, ms[i], eye));
    for (std::size_t j = i + 1; j < ms.size(); ++j)
      min_dist = std::min(min_dist, family_distance(variant, ms[i], ms[j]));
  }
  rep.min_pairwise_sq_distance = min_dist * min_dist;

  const double nd = static_cast<double>(n);
  for (std::size_t i = 0; i < ms.size(); ++i) {
    rep.all_positive_definite = rep.all_positive_definite && is_positive_definite(ms[i], 0.0);
    rep.all_diagonally_dominant = rep.all_diagonally_dominant && is_diagonally_dominant(ms[i]);
    rep.max_kl_times_n = std::max(rep.max_kl_times_n, nd * kl_exact(ms[i]));
    const SymMatrix delta = family.amplitude * family.binary_supports[i].to_matrix();
    rep.max_kl_bound_times_n = std::max(rep.max_kl_bound_times_n, nd * kl_upper_bound(delta, 0.5));
  }
  rep.condition_i_margin = min_dist - psi;
  rep.condition_ii_margin = kl_budget * rep.log_cardinality - rep.max_kl_times_n;
  return rep;
}

/// Greedy maximal packing: draw candidates, keep those far enough from every
/// accepted pattern, stop at `target_card` members or `max_attempts` draws.
/// a0 is halved until I + aB is diagonally dominant for every admissible B.
/// The family is certified with psi = separation_threshold(...).
inline PackingFamily build_packing(const PackingConfig& config, std::size_t target_card,
                                   std::size_t max_attempts, RngSeed seed) {
  validate_packing(config);
  if (target_card < 1) throw InvalidParameter("build_packing: target_card must be >= 1");
  if (max_attempts < 1) throw InvalidParameter("build_packing: max_attempts must be >= 1");

  PackingFamily fam;
  fam.config = config;
  fam.seed = seed;
  fam.target_cardinality = target_card;

  // Largest possible row count of ones.
  const double row_ones = config.variant == PackingVariant::Banded
                              ? static_cast<double>(2 * band_width(config.k))
                              : static_cast<double>(config.k);
  PackingConfig cfg = config;
  for (int halvings = 0; amplitude(cfg) * row_ones >= 1.0; ++halvings) {
    if (halvings >= 60) throw ConstructionError("build_packing: cannot reach diagonal dominance");
    cfg.a0 *= 0.5;
  }
  fam.a0_used = cfg.a0;
  fam.amplitude = amplitude(cfg);

  Rng rng(seed);
  std::size_t attempts = 0;
  while (fam.binary_supports.size() < target_card && attempts < max_attempts) {
    ++attempts;
    BinarySupport cand = sample_binary_support(cfg, rng);
    bool ok = true;
    for (const auto& b : fam.binary_supports) {
      if (!supports_separated(cfg, cand, b)) {
        ok = false;
        break;
      }
    }
    if (ok) fam.binary_supports.push_back(std::move(cand));
  }
  fam.attempts_used = attempts;
  fam.below_target = fam.binary_supports.size() < target_card;

  const SymMatrix eye = SymMatrix::identity(config.p);
  for (const auto& b : fam.binary_supports) {
    SymMatrix m = eye + (0.5 * fam.amplitude) * b.to_matrix();
    if (!is_diagonally_dominant(m)) throw ConstructionError("build_packing: member lost diagonal dominance");
    fam.members.push_back(std::move(m));
  }
  fam.certificate = certify(fam, config.n, separation_threshold(config.variant, config.k, fam.amplitude));
  return fam;
}

struct LowerBoundReport {
  bool feasible = false;
  std::string reason;
  Conditions2 conditions;
  std::size_t k = 0;
  double amplitude = 0.0;
  std::optional<PackingFamily> family;
  /// sqrt(min pairwise squared distance) of the certified family.
  double empirical_rate = 0.0;
  /// psi0 (Banded) or psi1 (FirstRow) at the same (n, p, R, q).
  double reference_rate = 0.0;
  double rate_ratio = 0.0;
};

struct LowerBoundOptions {
  double C0 = 1.0;
  double c0 = std::numbers::e / 4.0;
  std::size_t target_card = 64;
  std::size_t max_attempts = 4096;
  RngSeed seed;
};

/// Largest k allowed for the variant in dimension p.
inline std::size_t max_packing_k(PackingVariant variant, std::size_t p) {
  if (variant == PackingVariant::FirstRow) return p >= 3 ? (p - 1) / 2 : 0;
  std::size_t k = (p * p) / 16;
  PackingConfig probe{p, k, 1.0, variant, 1};
  while (k > 0 && (probe.k = k, slot_count(probe) < k)) --k;
  return k;
}

/// Builds and certifies the family realizing the lower bound over the
/// global (Banded) or column (FirstRow) l_q class of radius R.
///
/// q = 0: k = R/2 (global) or k = R (column). q > 0: the largest k with
/// 2 k a(k)^q <= R (global) or k a(k)^q <= R (column), found by scanning k
/// downward, since the amplitude a depends on k.
inline LowerBoundReport lower_bound_report(PackingConfig config, std::size_t n, double R, double q,
                                           const LowerBoundOptions& opt = {}) {
  LowerBoundReport rep;
  config.n = n;
  const bool banded = config.variant == PackingVariant::Banded;
  RateParams rp{opt.c0, n, config.p, R, q};
  rp.validate(banded ? 2.0 : 1.0);
  rep.conditions = check_conditions_2(rp, opt.C0);
  const bool cond_ok = banded ? rep.conditions.frobenius() : rep.conditions.operator_l1();
  if (!cond_ok) {
    rep.reason = banded ? "conditions (first, third) violated" : "conditions (second, third) violated";
    return rep;
  }

  const std::size_t kmax = max_packing_k(config.variant, config.p);
  std::size_t k = 0;
  if (q == 0.0) {
    const double kk = banded ? R / 2.0 : R;
    if (kk != std::floor(kk)) {
      rep.reason = "R must be an even integer (global) or an integer (column) when q = 0";
      return rep;
    }
    k = static_cast<std::size_t>(kk);
    if (k > kmax) {
      rep.reason = "k exceeds the admissible packing regime";
      return rep;
    }
  } else {
    for (std::size_t cand = kmax; cand >= 1; --cand) {
      config.k = cand;
      const double a = amplitude(config);
      const double mass = (banded ? 2.0 : 1.0) * static_cast<double>(cand) * std::pow(a, q);
      if (mass <= R) {
        k = cand;
        break;
      }
    }
  }
  if (k < 1) {
    rep.reason = "no feasible k >= 1";
    return rep;
  }
  config.k = k;
  rep.k = k;
  rep.amplitude = amplitude(config);

  PackingFamily fam = build_packing(config, opt.target_card, opt.max_attempts, opt.seed);
  rep.empirical_rate = std::sqrt(fam.certificate.min_pairwise_sq_distance);
  rep.reference_rate = banded ? rate_psi0(rp) : rate_psi1(rp);
  rep.rate_ratio = rep.empirical_rate / rep.reference_rate;
  rep.family = std::move(fam);
  rep.feasible = true;
  return rep;
}

}  // namespace sparsecov
