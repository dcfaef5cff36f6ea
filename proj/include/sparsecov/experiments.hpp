#pragma once

// Monte Carlo harness: sparse model generators, parameter sweeps over (n, p),
// record serialization, and log-log rate fits.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "sparsecov/error.hpp"
#include "sparsecov/estimators.hpp"
#include "sparsecov/gaussian.hpp"
#include "sparsecov/matrix.hpp"
#include "sparsecov/oracle.hpp"
#include "sparsecov/packing.hpp"
#include "sparsecov/random.hpp"

namespace sparsecov {

// ---------------------------------------------------------------------------
// Enumerations and their text names

enum class ModelGenerator { ExactSparse, ApproxSparse, BandedPerturbation, FirstRowSpike };
enum class EstimatorKind { Sample, Hard, Soft };
enum class LossKind { Frobenius, OpL1 };

inline const char* to_string(ModelGenerator g) noexcept {
  switch (g) {
    case ModelGenerator::ExactSparse: return "exact_sparse";
    case ModelGenerator::ApproxSparse: return "approx_sparse";
    case ModelGenerator::BandedPerturbation: return "banded_perturbation";
    case ModelGenerator::FirstRowSpike: return "first_row_spike";
  }
  return "?";
}
inline const char* to_string(EstimatorKind e) noexcept {
  switch (e) {
    case EstimatorKind::Sample: return "sample";
    case EstimatorKind::Hard: return "hard";
    case EstimatorKind::Soft: return "soft";
  }
  return "?";
}
inline const char* to_string(LossKind l) noexcept {
  return l == LossKind::Frobenius ? "frobenius" : "op_l1";
}
inline const char* to_string(ClassVariant v) noexcept {
  return v == ClassVariant::Global ? "global" : "column";
}
inline const char* to_string(Centering c) noexcept {
  return c == Centering::ZeroMean ? "zero_mean" : "demean";
}

template <typename E>
E parse_enum(const std::string& s);

template <>
inline ModelGenerator parse_enum<ModelGenerator>(const std::string& s) {
  for (auto g : {ModelGenerator::ExactSparse, ModelGenerator::ApproxSparse,
                 ModelGenerator::BandedPerturbation, ModelGenerator::FirstRowSpike})
    if (s == to_string(g)) return g;
  throw InvalidInput("unknown generator '" + s + "'");
}
template <>
inline EstimatorKind parse_enum<EstimatorKind>(const std::string& s) {
  for (auto e : {EstimatorKind::Sample, EstimatorKind::Hard, EstimatorKind::Soft})
    if (s == to_string(e)) return e;
  throw InvalidInput("unknown estimator '" + s + "'");
}
template <>
inline LossKind parse_enum<LossKind>(const std::string& s) {
  for (auto l : {LossKind::Frobenius, LossKind::OpL1})
    if (s == to_string(l)) return l;
  throw InvalidInput("unknown loss '" + s + "'");
}
template <>
inline ClassVariant parse_enum<ClassVariant>(const std::string& s) {
  for (auto v : {ClassVariant::Global, ClassVariant::Column})
    if (s == to_string(v)) return v;
  throw InvalidInput("unknown class '" + s + "'");
}
template <>
inline Centering parse_enum<Centering>(const std::string& s) {
  for (auto c : {Centering::ZeroMean, Centering::Demean})
    if (s == to_string(c)) return c;
  throw InvalidInput("unknown centering '" + s + "'");
}

// ---------------------------------------------------------------------------
// Model generation

namespace detail {

using Pair = std::pair<std::size_t, std::size_t>;

/// Walks `slots` in random order and keeps those whose endpoints both have
/// fewer than `degree_cap` kept entries, until `count` slots are kept.
inline std::vector<Pair> place_entries(std::vector<Pair> slots, std::size_t count, std::size_t p,
                                       std::size_t degree_cap, Rng& rng) {
  std::vector<std::size_t> degree(p, 0);
  std::vector<Pair> kept;
  for (std::size_t i = 0; i < slots.size() && kept.size() < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(slots.size() - i));
    std::swap(slots[i], slots[j]);
    const auto [a, b] = slots[i];
    if (degree[a] >= degree_cap || degree[b] >= degree_cap) continue;
    ++degree[a];
    ++degree[b];
    kept.push_back(slots[i]);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

inline std::vector<Pair> all_pairs(std::size_t p) {
  std::vector<Pair> out;
  out.reserve(p * (p - 1) / 2);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) out.emplace_back(i, j);
  return out;
}

inline double max_offdiag_row_sum(const SymMatrix& m) {
  double best = 0.0;
  for (std::size_t i = 0; i < m.dim(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.dim(); ++j)
      if (j != i) s += std::abs(m(i, j));
    best = std::max(best, s);
  }
  return best;
}

inline SymMatrix scale_offdiag(const SymMatrix& m, double s) {
  return SymMatrix::from_upper(m.dim(), [&](std::size_t i, std::size_t j) { return i == j ? m(i, j) : s * m(i, j); });
}

/// Largest scale s <= 1 keeping the off-diagonal l_q budget of `cls`.
inline double budget_scale(const SymMatrix& m, const SparsityClass& cls) {
  if (cls.q == 0.0) return 1.0;
  double mass = 0.0;
  if (cls.variant == ClassVariant::Global) {
    mass = offdiag_lq_mass(m, cls.q);
  } else {
    for (std::size_t j = 0; j < m.dim(); ++j) mass = std::max(mass, column_lq_mass(m, j, cls.q));
  }
  if (mass <= cls.R || mass == 0.0) return 1.0;
  // Slightly inside the ball so rounding cannot push the mass above R.
  return std::pow(cls.R / mass, 1.0 / cls.q) * (1.0 - 1e-12);
}

}  // namespace detail

/// Unit-diagonal positive definite model of dimension p.
///
/// ExactSparse        random support (per class budget), magnitudes in [0.5, 0.9]
///                    with random signs, then rescaled into the class.
/// ApproxSparse       sigma_ij = c |i-j|^{-decay}, c chosen so every row has
///                    off-diagonal l1 mass <= 0.9; dense, so not in any l0 class.
/// BandedPerturbation ones placed inside the band |i-j| <= floor(sqrt k), as in
///                    the banded packing family, magnitudes as ExactSparse.
/// FirstRowSpike      all off-diagonal mass in the first row/column.
///
/// Every generator except ApproxSparse verifies class_membership before
/// returning; failures after 50 shrink steps raise ConstructionError.
inline SymMatrix generate_model(const SparsityClass& cls, ModelGenerator gen, std::size_t p, RngSeed seed,
                                double decay = 2.0) {
  if (p < 2) throw InvalidParameter("generate_model: p must be >= 2");
  cls.validate(p);
  Rng rng(seed);

  if (gen == ModelGenerator::ApproxSparse) {
    if (!(decay > 0.0)) throw InvalidParameter("generate_model: decay must be > 0");
    SymMatrix m = SymMatrix::from_upper(p, [&](std::size_t i, std::size_t j) {
      return i == j ? 1.0 : std::pow(static_cast<double>(j - i), -decay);
    });
    const double c = 0.9 / detail::max_offdiag_row_sum(m);
    m = detail::scale_offdiag(m, c);
    if (!is_positive_definite(m)) throw ConstructionError("generate_model: approx-sparse model not PD");
    return m;
  }

  const bool column = cls.variant == ClassVariant::Column;
  const std::size_t npairs = p * (p - 1) / 2;
  std::size_t count = 0;
  std::size_t degree_cap = p;
  if (cls.q == 0.0) {
    if (column) {
      degree_cap = static_cast<std::size_t>(cls.R);
      count = p * degree_cap / 2;
    } else {
      count = static_cast<std::size_t>(cls.R) / 2;
    }
  } else if (column) {
    degree_cap = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(cls.R)), 1, p - 1);
    count = p * degree_cap / 2;
  } else {
    count = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(cls.R / 2.0)), 1, npairs);
  }
  if (count == 0 || degree_cap == 0) return SymMatrix::identity(p);

  std::vector<detail::Pair> slots;
  switch (gen) {
    case ModelGenerator::ExactSparse:
      slots = detail::all_pairs(p);
      break;
    case ModelGenerator::BandedPerturbation: {
      const std::size_t w = std::max<std::size_t>(1, band_width(count));
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i + 1; j < p && j - i <= w; ++j) slots.emplace_back(i, j);
      break;
    }
    case ModelGenerator::FirstRowSpike:
      for (std::size_t j = 1; j < p; ++j) slots.emplace_back(0, j);
      count = std::min(count, p - 1);
      break;
    case ModelGenerator::ApproxSparse:
      break;
  }
  const auto support = detail::place_entries(std::move(slots), count, p, degree_cap, rng);

  SymMatrix m = SymMatrix::identity(p);
  for (auto [i, j] : support) {
    double v;
    if (gen == ModelGenerator::FirstRowSpike) {
      v = 0.9 / static_cast<double>(support.size());
    } else {
      v = 0.5 + 0.4 * rng.uniform();
      if (rng.uniform() < 0.5) v = -v;
    }
    m.set(i, j, v);
  }
  const double row = detail::max_offdiag_row_sum(m);
  if (row >= 0.95) m = detail::scale_offdiag(m, 0.95 / row);
  m = detail::scale_offdiag(m, detail::budget_scale(m, cls));

  for (int attempt = 0; attempt < 50; ++attempt) {
    if (class_membership(m, cls)) return m;
    m = detail::scale_offdiag(m, 0.9);
  }
  throw ConstructionError("generate_model: could not place the model inside the class");
}

// ---------------------------------------------------------------------------
// Sweep specification and records

struct GridPoint {
  std::size_t n = 0;
  std::size_t p = 0;
  friend auto operator<=>(const GridPoint&, const GridPoint&) = default;
};

struct GammaSetting {
  /// When set, gamma is estimated with calibrate_gamma at every grid point.
  bool calibrate = false;
  double value = 1.0;
  std::size_t calibration_trials = 200;
  double calibration_quantile = 0.99;
};

struct ExperimentSpec {
  std::vector<GridPoint> grid;
  SparsityClass cls;
  ModelGenerator generator = ModelGenerator::ExactSparse;
  double decay = 2.0;
  std::vector<EstimatorKind> estimators{EstimatorKind::Sample, EstimatorKind::Hard, EstimatorKind::Soft};
  std::vector<LossKind> losses{LossKind::Frobenius, LossKind::OpL1};
  double A = 2.0;
  double delta = 1.0;
  GammaSetting gamma;
  std::size_t trials = 1;
  RngSeed seed;
  /// Draw a fresh model for every trial instead of one per dimension p.
  bool regenerate_model = false;
  Centering centering = Centering::ZeroMean;

  void validate() const {
    if (trials < 1) throw InvalidParameter("spec: trials must be >= 1");
    if (grid.empty()) throw InvalidParameter("spec: grid is empty");
    for (const auto& g : grid) {
      if (g.n < 2) throw InvalidParameter("spec: every grid point needs n >= 2");
      if (g.p < 2) throw InvalidParameter("spec: every grid point needs p >= 2");
      cls.validate(g.p);
    }
    if (estimators.empty()) throw InvalidParameter("spec: no estimators selected");
    if (losses.empty()) throw InvalidParameter("spec: no losses selected");
    if (!(A > 1.0)) throw InvalidParameter("spec: A must be > 1");
    if (!(delta > 0.0)) throw InvalidParameter("spec: delta must be > 0");
    if (gamma.calibrate) {
      if (gamma.calibration_trials < 100) throw InvalidParameter("spec: calibration_trials must be >= 100");
      if (!(gamma.calibration_quantile > 0.0 && gamma.calibration_quantile < 1.0))
        throw InvalidParameter("spec: calibration_quantile must lie in (0, 1)");
    } else if (!(gamma.value > 0.0)) {
      throw InvalidParameter("spec: gamma must be > 0");
    }
    if (generator == ModelGenerator::ApproxSparse && !(decay > 0.0))
      throw InvalidParameter("spec: decay must be > 0");
  }
};

/// One (grid point, trial, estimator, loss) outcome.
struct ExperimentRecord {
  std::size_t n = 0;
  std::size_t p = 0;
  ClassVariant variant = ClassVariant::Global;
  double q = 0.0;
  double R = 0.0;
  ModelGenerator generator = ModelGenerator::ExactSparse;
  double decay = 0.0;
  double A = 0.0;
  double gamma = 0.0;
  double delta = 0.0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  EstimatorKind estimator = EstimatorKind::Sample;
  LossKind loss = LossKind::Frobenius;
  double loss_value = 0.0;
  double loss_squared = 0.0;
  double tau = 0.0;
  /// tau <= delta.
  bool tau_valid = false;
  /// max_{i != j} |sigma*_ij - sigma_ij| for this trial.
  double max_deviation = 0.0;
  /// tau > 2 * max_deviation: the deterministic oracle inequality applies.
  bool tau_condition = false;
  /// oracle_l0(sigma, ((1+sqrt2)/2)^2 tau^2).value.
  double oracle_bound = 0.0;
  /// ||estimate - sigma||^2 <= oracle_bound.
  bool oracle_satisfied = false;
  std::string error;
  double wall_ms = 0.0;

  friend bool operator==(const ExperimentRecord&, const ExperimentRecord&) = default;
};

namespace detail {

inline double loss_of(LossKind loss, const SymMatrix& est, const SymMatrix& truth) {
  const SymMatrix d = est - truth;
  return loss == LossKind::Frobenius ? frobenius_norm(d) : op_l1_norm(d);
}

inline SymMatrix apply_estimator(EstimatorKind e, const SymMatrix& sigma_star, double tau) {
  switch (e) {
    case EstimatorKind::Sample: return sigma_star;
    case EstimatorKind::Hard: return hard_threshold(sigma_star, tau);
    case EstimatorKind::Soft: return soft_threshold(sigma_star, tau);
  }
  return sigma_star;
}

inline std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SPARSECOV_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Model seeds depend on p (and the trial when regenerating) but not on n, so
/// every n at a given p sees the same covariance.
inline RngSeed model_seed(const ExperimentSpec& spec, std::size_t p, std::size_t trial) {
  return spec.regenerate_model ? derive_seed(spec.seed, {0x6d6f64656cULL, p, trial})
                               : derive_seed(spec.seed, {0x6d6f64656cULL, p});
}

}  // namespace detail

/// Runs every (grid point, trial) cell. Output is sorted by grid order, then
/// trial, estimator and loss, whatever the thread count; with timing disabled
/// the records are a pure function of the spec.
///
/// threads == 0 means: SPARSECOV_THREADS, else hardware concurrency.
inline std::vector<ExperimentRecord> run_sweep(const ExperimentSpec& spec, std::size_t threads = 0) {
  spec.validate();

  struct PointSetup {
    double gamma = 0.0;
    Threshold threshold;
    std::optional<GaussianModel> model;
    std::string error;
  };
  std::vector<PointSetup> setup(spec.grid.size());
  std::map<std::size_t, std::pair<std::optional<GaussianModel>, std::string>> models;
  for (std::size_t g = 0; g < spec.grid.size(); ++g) {
    const auto [n, p] = spec.grid[g];
    auto& s = setup[g];
    s.gamma = spec.gamma.calibrate
                  ? calibrate_gamma(p, n, spec.gamma.calibration_trials, spec.gamma.calibration_quantile,
                                    derive_seed(spec.seed, {0x67616d6d61ULL, n, p}))
                  : spec.gamma.value;
    s.threshold = threshold_value(ThresholdConfig{spec.A, s.gamma, spec.delta, n, p});
    if (!spec.regenerate_model) {
      auto it = models.find(p);
      if (it == models.end()) {
        std::pair<std::optional<GaussianModel>, std::string> entry;
        try {
          entry.first.emplace(generate_model(spec.cls, spec.generator, p, detail::model_seed(spec, p, 0), spec.decay));
        } catch (const Error& e) {
          entry.second = e.what();
        }
        it = models.emplace(p, std::move(entry)).first;
      }
      s.model = it->second.first;
      s.error = it->second.second;
    }
  }

  const std::size_t cells = spec.grid.size() * spec.trials;
  const std::size_t per_cell = spec.estimators.size() * spec.losses.size();
  std::vector<ExperimentRecord> out(cells * per_cell);

  auto run_cell = [&](std::size_t cell) {
    const std::size_t g = cell / spec.trials;
    const std::size_t trial = cell % spec.trials;
    const auto [n, p] = spec.grid[g];
    const auto& s = setup[g];
    const RngSeed data_seed = derive_seed(spec.seed, {0x64617461ULL, n, p, trial});
    const auto start = std::chrono::steady_clock::now();

    ExperimentRecord base;
    base.n = n;
    base.p = p;
    base.variant = spec.cls.variant;
    base.q = spec.cls.q;
    base.R = spec.cls.R;
    base.generator = spec.generator;
    base.decay = spec.generator == ModelGenerator::ApproxSparse ? spec.decay : 0.0;
    base.A = spec.A;
    base.gamma = s.gamma;
    base.delta = spec.delta;
    base.trial = trial;
    base.seed = data_seed.value;
    base.tau = s.threshold.tau;
    base.tau_valid = !s.threshold.exceeds_cap;

    std::optional<GaussianModel> local;
    const GaussianModel* model = nullptr;
    std::string error = s.error;
    if (spec.regenerate_model) {
      try {
        local.emplace(generate_model(spec.cls, spec.generator, p, detail::model_seed(spec, p, trial), spec.decay));
        model = &*local;
      } catch (const Error& e) {
        error = e.what();
      }
    } else if (s.model) {
      model = &*s.model;
    }

    std::size_t slot = cell * per_cell;
    if (!model) {
      for (auto e : spec.estimators)
        for (auto l : spec.losses) {
          ExperimentRecord r = base;
          r.estimator = e;
          r.loss = l;
          r.error = error.empty() ? "model unavailable" : error;
          out[slot++] = std::move(r);
        }
      return;
    }

    const SymMatrix& truth = model->sigma();
    const SymMatrix sigma_star = sample_covariance(model->sample(n, data_seed), spec.centering);
    base.max_deviation = max_entrywise_deviation(sigma_star, truth);
    base.tau_condition = s.threshold.tau > 2.0 * base.max_deviation;
    base.oracle_bound = oracle_l0(truth, lambda_from_tau(s.threshold.tau)).value;

    for (auto e : spec.estimators) {
      const SymMatrix est = detail::apply_estimator(e, sigma_star, s.threshold.tau);
      const SymMatrix diff = est - truth;
      const double fro = frobenius_norm(diff);
      for (auto l : spec.losses) {
        ExperimentRecord r = base;
        r.estimator = e;
        r.loss = l;
        r.loss_value = l == LossKind::Frobenius ? fro : op_l1_norm(diff);
        r.loss_squared = r.loss_value * r.loss_value;
        // Killing every entry makes loss and bound equal up to rounding.
        r.oracle_satisfied = fro * fro <= base.oracle_bound * (1.0 + 1e-12);
        out[slot++] = std::move(r);
      }
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    for (std::size_t i = cell * per_cell; i < slot; ++i) out[i].wall_ms = ms;
  };

  const std::size_t nthreads = std::min(detail::resolve_threads(threads), std::max<std::size_t>(cells, 1));
  if (nthreads <= 1) {
    for (std::size_t c = 0; c < cells; ++c) run_cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < nthreads; ++t)
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < cells; c = next++) run_cell(c);
      });
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline const std::vector<std::string>& record_columns() {
  static const std::vector<std::string> cols{
      "n",     "p",          "class",         "q",             "R",            "generator",
      "decay", "A",          "gamma",         "delta",         "trial",        "seed",
      "estimator", "loss",   "loss_value",    "loss_squared",  "tau",          "tau_valid",
      "max_deviation", "tau_condition", "oracle_bound", "oracle_satisfied", "error"};
  return cols;
}

/// Header row plus one row per record, '.' decimals, 17 significant digits.
/// `include_timing` appends a wall_ms column (which breaks byte-for-byte
/// reproducibility).
inline void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records,
                              bool include_timing = false) {
  const auto& cols = record_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  if (include_timing) out << ",wall_ms";
  out << '\n';
  for (const auto& r : records) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << r.n << ',' << r.p << ',' << to_string(r.variant) << ',' << format_double(r.q) << ','
        << format_double(r.R) << ',' << to_string(r.generator) << ',' << format_double(r.decay) << ','
        << format_double(r.A) << ',' << format_double(r.gamma) << ',' << format_double(r.delta) << ','
        << r.trial << ',' << r.seed << ',' << to_string(r.estimator) << ',' << to_string(r.loss) << ','
        << format_double(r.loss_value) << ',' << format_double(r.loss_squared) << ','
        << format_double(r.tau) << ',' << (r.tau_valid ? 1 : 0) << ',' << format_double(r.max_deviation)
        << ',' << (r.tau_condition ? 1 : 0) << ',' << format_double(r.oracle_bound) << ','
        << (r.oracle_satisfied ? 1 : 0) << ',' << err;
    if (include_timing) out << ',' << format_double(r.wall_ms);
    out << '\n';
  }
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw InvalidInput("");
    return v;
  } catch (const std::exception&) {
    throw InvalidInput("cannot parse " + what + " from '" + s + "'");
  }
}

inline std::uint64_t to_u64(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    if (!s.empty() && s[0] == '-') throw InvalidInput("");
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw InvalidInput("");
    return v;
  } catch (const std::exception&) {
    throw InvalidInput("cannot parse " + what + " from '" + s + "'");
  }
}

}  // namespace detail

inline std::vector<ExperimentRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("records csv: missing header");
  auto header = detail::split(detail::trim(line), ',');
  const auto& cols = record_columns();
  if (header.size() < cols.size() || !std::equal(cols.begin(), cols.end(), header.begin()))
    throw InvalidInput("records csv: unexpected header");
  const bool timing = header.size() == cols.size() + 1 && header.back() == "wall_ms";
  if (header.size() != cols.size() && !timing) throw InvalidInput("records csv: unexpected header");

  std::vector<ExperimentRecord> out;
  while (std::getline(in, line)) {
    line = detail::trim(line);
    if (line.empty()) continue;
    auto f = detail::split(line, ',');
    if (f.size() != header.size()) throw InvalidInput("records csv: wrong field count");
    ExperimentRecord r;
    std::size_t i = 0;
    r.n = detail::to_u64(f[i++], "n");
    r.p = detail::to_u64(f[i++], "p");
    r.variant = parse_enum<ClassVariant>(f[i++]);
    r.q = detail::to_double(f[i++], "q");
    r.R = detail::to_double(f[i++], "R");
    r.generator = parse_enum<ModelGenerator>(f[i++]);
    r.decay = detail::to_double(f[i++], "decay");
    r.A = detail::to_double(f[i++], "A");
    r.gamma = detail::to_double(f[i++], "gamma");
    r.delta = detail::to_double(f[i++], "delta");
    r.trial = detail::to_u64(f[i++], "trial");
    r.seed = detail::to_u64(f[i++], "seed");
    r.estimator = parse_enum<EstimatorKind>(f[i++]);
    r.loss = parse_enum<LossKind>(f[i++]);
    r.loss_value = detail::to_double(f[i++], "loss_value");
    r.loss_squared = detail::to_double(f[i++], "loss_squared");
    r.tau = detail::to_double(f[i++], "tau");
    r.tau_valid = f[i++] == "1";
    r.max_deviation = detail::to_double(f[i++], "max_deviation");
    r.tau_condition = f[i++] == "1";
    r.oracle_bound = detail::to_double(f[i++], "oracle_bound");
    r.oracle_satisfied = f[i++] == "1";
    r.error = f[i++];
    if (timing) r.wall_ms = detail::to_double(f[i++], "wall_ms");
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation and rate fitting

struct SummaryRow {
  std::size_t n = 0;
  std::size_t p = 0;
  EstimatorKind estimator = EstimatorKind::Sample;
  LossKind loss = LossKind::Frobenius;
  std::size_t count = 0;
  std::size_t errors = 0;
  double mean_loss = 0.0;
  double mean_loss_squared = 0.0;
  /// Standard error of mean_loss_squared.
  double stderr_loss_squared = 0.0;
  double stderr_loss = 0.0;
  double oracle_frequency = 0.0;
  double tau_condition_frequency = 0.0;
  /// Trials with tau_condition set but the oracle inequality violated.
  std::size_t deterministic_violations = 0;
  double tau = 0.0;
};

/// Per (n, p, estimator, loss) statistics in first-appearance order.
inline std::vector<SummaryRow> summarize(const std::vector<ExperimentRecord>& records) {
  using Key = std::tuple<std::size_t, std::size_t, int, int>;
  std::vector<Key> order;
  std::map<Key, std::vector<const ExperimentRecord*>> groups;
  for (const auto& r : records) {
    Key k{r.n, r.p, static_cast<int>(r.estimator), static_cast<int>(r.loss)};
    auto [it, inserted] = groups.try_emplace(k);
    if (inserted) order.push_back(k);
    it->second.push_back(&r);
  }
  std::vector<SummaryRow> out;
  for (const auto& k : order) {
    const auto& rs = groups[k];
    SummaryRow row;
    row.n = std::get<0>(k);
    row.p = std::get<1>(k);
    row.estimator = static_cast<EstimatorKind>(std::get<2>(k));
    row.loss = static_cast<LossKind>(std::get<3>(k));
    double s1 = 0.0, s2 = 0.0, q1 = 0.0, q2 = 0.0;
    std::size_t oracle = 0, cond = 0;
    for (const auto* r : rs) {
      if (!r->error.empty()) {
        ++row.errors;
        continue;
      }
      ++row.count;
      row.tau = r->tau;
      s1 += r->loss_value;
      q1 += r->loss_value * r->loss_value;
      s2 += r->loss_squared;
      q2 += r->loss_squared * r->loss_squared;
      if (r->oracle_satisfied) ++oracle;
      if (r->tau_condition) ++cond;
      if (r->tau_condition && !r->oracle_satisfied) ++row.deterministic_violations;
    }
    if (row.count > 0) {
      const double c = static_cast<double>(row.count);
      row.mean_loss = s1 / c;
      row.mean_loss_squared = s2 / c;
      if (row.count > 1) {
        row.stderr_loss = std::sqrt(std::max(0.0, (q1 - c * row.mean_loss * row.mean_loss) / (c - 1.0)) / c);
        row.stderr_loss_squared =
            std::sqrt(std::max(0.0, (q2 - c * row.mean_loss_squared * row.mean_loss_squared) / (c - 1.0)) / c);
      }
      row.oracle_frequency = static_cast<double>(oracle) / c;
      row.tau_condition_frequency = static_cast<double>(cond) / c;
    }
    out.push_back(row);
  }
  return out;
}

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double intercept_stderr = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares of log(y) on log(x). Needs >= 3 distinct x values
/// and positive data.
inline LogLogFit fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw DimensionMismatch("fit_loglog: x and y sizes differ");
  std::set<double> distinct(xs.begin(), xs.end());
  if (distinct.size() < 3) throw InvalidInput("fit_loglog: need at least 3 distinct x values");
  const std::size_t m = xs.size();
  std::vector<double> lx(m), ly(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) throw InvalidInput("fit_loglog: data must be positive");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw InvalidInput("fit_loglog: degenerate x range");
  LogLogFit fit;
  fit.points = m;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = ly[i] - fit.intercept - fit.slope * lx[i];
    sse += r * r;
  }
  const double s2 = sse / static_cast<double>(m - 2);
  fit.slope_stderr = std::sqrt(s2 / sxx);
  fit.intercept_stderr = std::sqrt(s2 * (1.0 / static_cast<double>(m) + mx * mx / sxx));
  return fit;
}

enum class RateAxis { N, P, R, LogPOverN };

inline double axis_value(RateAxis axis, const ExperimentRecord& r) {
  switch (axis) {
    case RateAxis::N: return static_cast<double>(r.n);
    case RateAxis::P: return static_cast<double>(r.p);
    case RateAxis::R: return r.R;
    case RateAxis::LogPOverN: return std::log(static_cast<double>(r.p)) / static_cast<double>(r.n);
  }
  return 0.0;
}

/// Fits log(mean loss) against log(axis) over the records of one estimator
/// and loss. Uses the squared loss when `squared` is set.
inline LogLogFit fit_rate(const std::vector<ExperimentRecord>& records, RateAxis axis, EstimatorKind estimator,
                          LossKind loss, bool squared = true) {
  std::map<double, std::pair<double, std::size_t>> acc;
  for (const auto& r : records) {
    if (!r.error.empty() || r.estimator != estimator || r.loss != loss) continue;
    auto& [sum, count] = acc[axis_value(axis, r)];
    sum += squared ? r.loss_squared : r.loss_value;
    ++count;
  }
  std::vector<double> xs, ys;
  for (const auto& [x, sc] : acc) {
    xs.push_back(x);
    ys.push_back(sc.first / static_cast<double>(sc.second));
  }
  return fit_loglog(xs, ys);
}

// ---------------------------------------------------------------------------
// Spec file
//
//   # comment
//   key = value            top-level settings
//   [grid]                 repeated section; n and p accept comma lists and
//   n = 100, 200           expand to their cartesian product
//   p = 50
//
// Top-level keys: trials seed class q R generator decay estimators losses A
// gamma (number or "calibrate") calibration_trials calibration_quantile delta
// regenerate_model centering. Unknown keys are errors.

inline ExperimentSpec parse_spec(std::istream& in) {
  ExperimentSpec spec;
  spec.grid.clear();
  std::set<std::string> seen;
  struct Section {
    std::vector<std::size_t> ns, ps;
  };
  std::vector<Section> sections;
  bool in_grid = false;
  std::string line;
  std::size_t lineno = 0;

  auto fail = [&](const std::string& msg) -> void {
    throw InvalidInput("spec line " + std::to_string(lineno) + ": " + msg);
  };
  auto parse_list = [&](const std::string& v, const std::string& what) {
    std::vector<std::size_t> xs;
    for (const auto& item : detail::split(v, ',')) xs.push_back(detail::to_u64(detail::trim(item), what));
    if (xs.empty()) fail("empty list for " + what);
    return xs;
  };
  auto parse_bool = [&](const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail("expected a boolean, got '" + v + "'");
    return false;
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line != "[grid]") fail("unknown section " + line);
      sections.emplace_back();
      in_grid = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (value.empty()) fail("empty value for " + key);

    if (in_grid) {
      auto& sec = sections.back();
      if (key == "n") {
        if (!sec.ns.empty()) fail("duplicate key n");
        sec.ns = parse_list(value, "n");
      } else if (key == "p") {
        if (!sec.ps.empty()) fail("duplicate key p");
        sec.ps = parse_list(value, "p");
      } else {
        fail("unknown grid key '" + key + "'");
      }
      continue;
    }
    if (!seen.insert(key).second) fail("duplicate key " + key);
    try {
      if (key == "trials") spec.trials = detail::to_u64(value, key);
      else if (key == "seed") spec.seed = RngSeed{detail::to_u64(value, key)};
      else if (key == "class") spec.cls.variant = parse_enum<ClassVariant>(value);
      else if (key == "q") spec.cls.q = detail::to_double(value, key);
      else if (key == "R") spec.cls.R = detail::to_double(value, key);
      else if (key == "generator") spec.generator = parse_enum<ModelGenerator>(value);
      else if (key == "decay") spec.decay = detail::to_double(value, key);
      else if (key == "A") spec.A = detail::to_double(value, key);
      else if (key == "delta") spec.delta = detail::to_double(value, key);
      else if (key == "gamma") {
        if (value == "calibrate") {
          spec.gamma.calibrate = true;
        } else {
          spec.gamma.calibrate = false;
          spec.gamma.value = detail::to_double(value, key);
        }
      } else if (key == "calibration_trials") spec.gamma.calibration_trials = detail::to_u64(value, key);
      else if (key == "calibration_quantile") spec.gamma.calibration_quantile = detail::to_double(value, key);
      else if (key == "regenerate_model") spec.regenerate_model = parse_bool(value);
      else if (key == "centering") spec.centering = parse_enum<Centering>(value);
      else if (key == "estimators") {
        spec.estimators.clear();
        for (const auto& s : detail::split(value, ',')) spec.estimators.push_back(parse_enum<EstimatorKind>(detail::trim(s)));
      } else if (key == "losses") {
        spec.losses.clear();
        for (const auto& s : detail::split(value, ',')) spec.losses.push_back(parse_enum<LossKind>(detail::trim(s)));
      } else {
        fail("unknown key '" + key + "'");
      }
    } catch (const InvalidInput& e) {
      const std::string msg = e.what();
      if (msg.rfind("spec line", 0) == 0) throw;
      fail(msg);
    }
  }
  for (const auto& sec : sections) {
    if (sec.ns.empty() || sec.ps.empty()) throw InvalidInput("spec: every [grid] section needs n and p");
    for (std::size_t p : sec.ps)
      for (std::size_t n : sec.ns) spec.grid.push_back({n, p});
  }
  return spec;
}

inline ExperimentSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open spec file '" + path + "'");
  return parse_spec(in);
}

}  // namespace sparsecov
