#pragma once

// Dense symmetric matrices, the norms used throughout the library, sparsity
// class membership, Jacobi eigendecomposition and Cholesky factorization.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sparsecov/error.hpp"

namespace sparsecov {

/// Default tolerance below which an off-diagonal entry counts as zero.
inline constexpr double kZeroTol = 1e-12;

/// Dense symmetric p x p matrix. Every write is mirrored, so the stored array
/// is always exactly symmetric.
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(std::size_t dim) : dim_(dim), data_(dim * dim, 0.0) {
    if (dim == 0) throw InvalidParameter("SymMatrix: dimension must be >= 1");
  }

  static SymMatrix zero(std::size_t dim) { return SymMatrix(dim); }

  static SymMatrix identity(std::size_t dim) {
    SymMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) m.data_[i * dim + i] = 1.0;
    return m;
  }

  static SymMatrix diagonal(const std::vector<double>& diag) {
    SymMatrix m(diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m.set(i, i, diag[i]);
    return m;
  }

  /// Builds from a full row-major array; rejects asymmetry above `sym_tol`
  /// and stores the averaged pair.
  static SymMatrix from_rows(const std::vector<std::vector<double>>& rows,
                             double sym_tol = kZeroTol) {
    const std::size_t p = rows.size();
    SymMatrix m(p);
    for (const auto& r : rows)
      if (r.size() != p) throw DimensionMismatch("SymMatrix: rows must form a square array");
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = i; j < p; ++j) {
        const double a = rows[i][j];
        const double b = rows[j][i];
        if (!std::isfinite(a) || !std::isfinite(b))
          throw InvalidInput("SymMatrix: non-finite entry");
        if (std::abs(a - b) > sym_tol)
          throw InvalidInput("SymMatrix: input is not symmetric at (" + std::to_string(i) +
                             "," + std::to_string(j) + ")");
        m.set(i, j, i == j ? a : 0.5 * (a + b));
      }
    }
    return m;
  }

  /// Builds from f(i, j) evaluated on the upper triangle (i <= j).
  template <typename F>
  static SymMatrix from_upper(std::size_t dim, F&& f) {
    SymMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = i; j < dim; ++j) m.set(i, j, f(i, j));
    return m;
  }

  std::size_t dim() const noexcept { return dim_; }

  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * dim_ + j]; }

  void set(std::size_t i, std::size_t j, double v) noexcept {
    data_[i * dim_ + j] = v;
    data_[j * dim_ + i] = v;
  }

  /// Row-major view of all p*p entries.
  const std::vector<double>& data() const noexcept { return data_; }

  double trace() const noexcept {
    double t = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) t += data_[i * dim_ + i];
    return t;
  }

  SymMatrix& operator+=(const SymMatrix& o) {
    check_same_dim(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  SymMatrix& operator-=(const SymMatrix& o) {
    check_same_dim(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  SymMatrix& operator*=(double c) noexcept {
    for (double& x : data_) x *= c;
    return *this;
  }

  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
  friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
  friend SymMatrix operator*(double c, SymMatrix a) { return a *= c; }
  friend SymMatrix operator*(SymMatrix a, double c) { return a *= c; }

  friend bool operator==(const SymMatrix&, const SymMatrix&) = default;

 private:
  void check_same_dim(const SymMatrix& o) const {
    if (o.dim_ != dim_) throw DimensionMismatch("SymMatrix: dimension mismatch");
  }

  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// n observations of a p-dimensional vector, stored row-major.
struct DataMatrix {
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<double> values;

  DataMatrix() = default;
  DataMatrix(std::size_t rows, std::size_t cols) : n(rows), p(cols), values(rows * cols, 0.0) {}

  double operator()(std::size_t t, std::size_t j) const noexcept { return values[t * p + j]; }
  double& operator()(std::size_t t, std::size_t j) noexcept { return values[t * p + j]; }

  friend bool operator==(const DataMatrix&, const DataMatrix&) = default;
};

// ---------------------------------------------------------------------------
// Norms

inline double frobenius_norm(const SymMatrix& m) {
  double s = 0.0;
  for (double x : m.data()) s += x * x;
  return std::sqrt(s);
}

/// Sum of squares of the off-diagonal entries, both orientations.
inline double offdiag_sq_sum(const SymMatrix& m) {
  const std::size_t p = m.dim();
  double s = 0.0;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) s += 2.0 * m(i, j) * m(i, j);
  return s;
}

/// sum_{i != j} |m_ij|^q, i.e. |m|_q^q. Requires q > 0.
inline double offdiag_lq_mass(const SymMatrix& m, double q) {
  if (!(q > 0.0)) throw InvalidParameter("offdiag_lq_mass: q must be > 0");
  const std::size_t p = m.dim();
  double s = 0.0;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) {
      const double a = std::abs(m(i, j));
      if (a > 0.0) s += 2.0 * (q == 1.0 ? a : std::pow(a, q));
    }
  return s;
}

/// (sum_{i != j} |m_ij|^q)^{1/q}.
inline double offdiag_lq_norm(const SymMatrix& m, double q) {
  if (!(q > 0.0)) throw InvalidParameter("offdiag_lq_norm: q must be > 0");
  return std::pow(offdiag_lq_mass(m, q), 1.0 / q);
}

/// Number of off-diagonal entries with |m_ij| > tol; (i,j) and (j,i) both count.
inline std::size_t offdiag_l0(const SymMatrix& m, double tol = kZeroTol) {
  if (!(tol >= 0.0)) throw InvalidParameter("offdiag_l0: tol must be >= 0");
  const std::size_t p = m.dim();
  std::size_t count = 0;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j)
      if (std::abs(m(i, j)) > tol) count += 2;
  return count;
}

/// Column j with its diagonal entry removed: |sigma_(j)|_q^q (q > 0) or its
/// support size (q == 0, strict |x| > tol).
inline double column_lq_mass(const SymMatrix& m, std::size_t j, double q, double tol = kZeroTol) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.dim(); ++i) {
    if (i == j) continue;
    const double a = std::abs(m(i, j));
    if (q == 0.0) {
      if (a > tol) s += 1.0;
    } else if (a > 0.0) {
      s += std::pow(a, q);
    }
  }
  return s;
}

/// l1 -> l1 operator norm: the largest absolute column sum.
inline double op_l1_norm(const SymMatrix& m) {
  const std::size_t p = m.dim();
  double best = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < p; ++i) s += std::abs(m(i, j));
    best = std::max(best, s);
  }
  return best;
}

inline double max_abs_entry(const SymMatrix& m) {
  double best = 0.0;
  for (double x : m.data()) best = std::max(best, std::abs(x));
  return best;
}

// ---------------------------------------------------------------------------
// Cyclic Jacobi eigendecomposition

struct EigenDecomposition {
  /// Ascending eigenvalues.
  std::vector<double> values;
  /// Column-major p x p; column k is the unit eigenvector for values[k].
  /// Empty when vectors were not requested.
  std::vector<double> vectors;
  std::size_t sweeps = 0;
};

/// Cyclic Jacobi. Sweeps until the off-diagonal Frobenius mass drops below
/// 1e-12 * ||m|| (or 1e-300 absolute for the zero matrix).
inline EigenDecomposition jacobi_eigen(const SymMatrix& m, bool want_vectors = false) {
  const std::size_t p = m.dim();
  std::vector<double> a = m.data();
  std::vector<double> v;
  if (want_vectors) {
    v.assign(p * p, 0.0);
    for (std::size_t i = 0; i < p; ++i) v[i * p + i] = 1.0;
  }
  auto at = [&](std::size_t i, std::size_t j) -> double& { return a[i * p + j]; };

  const double scale = frobenius_norm(m);
  const double target = std::max(1e-12 * scale, 1e-300);
  constexpr std::size_t kMaxSweeps = 100;

  EigenDecomposition out;
  for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = i + 1; j < p; ++j) off += 2.0 * at(i, j) * at(i, j);
    if (std::sqrt(off) <= target) break;
    ++out.sweeps;

    for (std::size_t r = 0; r + 1 < p; ++r) {
      for (std::size_t s = r + 1; s < p; ++s) {
        const double ars = at(r, s);
        if (ars == 0.0) continue;
        const double theta = (at(s, s) - at(r, r)) / (2.0 * ars);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
          if (theta < 0.0) t = -t;
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        // A <- A P (columns r, s), then A <- P^T A (rows r, s).
        for (std::size_t k = 0; k < p; ++k) {
          const double akr = at(k, r);
          const double aks = at(k, s);
          at(k, r) = c * akr - sn * aks;
          at(k, s) = sn * akr + c * aks;
        }
        for (std::size_t k = 0; k < p; ++k) {
          const double ark = at(r, k);
          const double ask = at(s, k);
          at(r, k) = c * ark - sn * ask;
          at(s, k) = sn * ark + c * ask;
        }
        at(r, s) = 0.0;
        at(s, r) = 0.0;
        if (want_vectors) {
          for (std::size_t k = 0; k < p; ++k) {
            const double vkr = v[k * p + r];
            const double vks = v[k * p + s];
            v[k * p + r] = c * vkr - sn * vks;
            v[k * p + s] = sn * vkr + c * vks;
          }
        }
      }
    }
  }

  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return at(x, x) < at(y, y); });
  out.values.resize(p);
  for (std::size_t k = 0; k < p; ++k) out.values[k] = at(order[k], order[k]);
  if (want_vectors) {
    out.vectors.resize(p * p);
    for (std::size_t k = 0; k < p; ++k)
      for (std::size_t i = 0; i < p; ++i) out.vectors[k * p + i] = v[i * p + order[k]];
  }
  return out;
}

/// All eigenvalues, ascending.
inline std::vector<double> eigenvalues(const SymMatrix& m) { return jacobi_eigen(m).values; }

/// Largest absolute eigenvalue (l2 -> l2 operator norm).
inline double spectral_norm(const SymMatrix& m) {
  const auto ev = eigenvalues(m);
  return std::max(std::abs(ev.front()), std::abs(ev.back()));
}

// ---------------------------------------------------------------------------
// Cholesky

/// Lower-triangular factor stored as a dense row-major p x p array.
class LowerTriangular {
 public:
  LowerTriangular() = default;
  explicit LowerTriangular(std::size_t dim) : dim_(dim), data_(dim * dim, 0.0) {}

  std::size_t dim() const noexcept { return dim_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * dim_ + j]; }
  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * dim_ + j]; }

  /// L L^T.
  SymMatrix reconstruct() const {
    return SymMatrix::from_upper(dim_, [&](std::size_t i, std::size_t j) {
      double s = 0.0;
      for (std::size_t k = 0; k <= i; ++k) s += (*this)(i, k) * (*this)(j, k);
      return s;
    });
  }

  double log_determinant_of_product() const {
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) s += 2.0 * std::log((*this)(i, i));
    return s;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

namespace detail {

/// Returns the index of the first pivot <= tol, or dim() on success.
inline std::size_t cholesky_into(const SymMatrix& m, LowerTriangular& l, double tol) {
  const std::size_t p = m.dim();
  for (std::size_t j = 0; j < p; ++j) {
    double d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > tol)) return j;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < p; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return p;
}

}  // namespace detail

inline LowerTriangular cholesky(const SymMatrix& m) {
  LowerTriangular l(m.dim());
  const std::size_t fail = detail::cholesky_into(m, l, 0.0);
  if (fail != m.dim())
    throw NotPositiveDefinite("cholesky: non-positive pivot at index " + std::to_string(fail));
  return l;
}

/// True iff every Cholesky pivot exceeds `tol`.
inline bool is_positive_definite(const SymMatrix& m, double tol = 0.0) {
  LowerTriangular l(m.dim());
  return detail::cholesky_into(m, l, tol) == m.dim();
}

/// Strict row diagonal dominance: m_ii > sum_{j != i} |m_ij| for every i.
inline bool is_diagonally_dominant(const SymMatrix& m) {
  const std::size_t p = m.dim();
  for (std::size_t i = 0; i < p; ++i) {
    double off = 0.0;
    for (std::size_t j = 0; j < p; ++j)
      if (j != i) off += std::abs(m(i, j));
    if (!(m(i, i) > off)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Sparsity classes

enum class ClassVariant {
  Global,  ///< |Sigma|_q^q <= R
  Column,  ///< max_j |sigma_(j)|_q^q <= R
};

struct SparsityClass {
  ClassVariant variant = ClassVariant::Global;
  double q = 0.0;
  double R = 0.0;

  /// Throws InvalidParameter unless the descriptor is admissible for dimension p.
  /// R = 0 with q = 0 is accepted and denotes the diagonal (identity) class.
  void validate(std::size_t p) const {
    const double qmax = variant == ClassVariant::Global ? 2.0 : 1.0;
    if (!(q >= 0.0 && q <= qmax))
      throw InvalidParameter("SparsityClass: q out of range for variant");
    if (!std::isfinite(R) || R < 0.0 || (R == 0.0 && q > 0.0))
      throw InvalidParameter("SparsityClass: R must be positive");
    if (q == 0.0) {
      if (R != std::floor(R)) throw InvalidParameter("SparsityClass: R must be an integer when q = 0");
      const double pd = static_cast<double>(p);
      if (variant == ClassVariant::Global) {
        if (std::fmod(R, 2.0) != 0.0)
          throw InvalidParameter("SparsityClass: R must be even for the global class with q = 0");
        if (R > pd * (pd - 1.0)) throw InvalidParameter("SparsityClass: R exceeds p(p-1)");
      } else if (R > pd - 1.0) {
        throw InvalidParameter("SparsityClass: R exceeds p-1");
      }
    }
  }
};

/// Positive definite, unit diagonal within tol, and inside the class's l_q ball.
inline bool class_membership(const SymMatrix& m, const SparsityClass& cls, double tol = kZeroTol) {
  const std::size_t p = m.dim();
  for (std::size_t i = 0; i < p; ++i)
    if (std::abs(m(i, i) - 1.0) > tol) return false;
  if (!is_positive_definite(m, 0.0)) return false;
  if (cls.variant == ClassVariant::Global) {
    const double mass = cls.q == 0.0 ? static_cast<double>(offdiag_l0(m, tol))
                                     : offdiag_lq_mass(m, cls.q);
    return mass <= cls.R + tol;
  }
  for (std::size_t j = 0; j < p; ++j)
    if (column_lq_mass(m, j, cls.q, tol) > cls.R + tol) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Text format: first line p, then p lines of p whitespace-separated numbers.

inline SymMatrix read_matrix(std::istream& in, double sym_tol = kZeroTol) {
  long long p = 0;
  if (!(in >> p) || p < 1) throw InvalidInput("read_matrix: missing or invalid dimension line");
  const auto dim = static_cast<std::size_t>(p);
  std::vector<std::vector<double>> rows(dim, std::vector<double>(dim));
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j)
      if (!(in >> rows[i][j])) throw InvalidInput("read_matrix: truncated matrix body");
  std::string extra;
  if (in >> extra) throw InvalidInput("read_matrix: trailing content after matrix body");
  return SymMatrix::from_rows(rows, sym_tol);
}

inline void write_matrix(std::ostream& out, const SymMatrix& m) {
  const auto old_flags = out.flags();
  const auto old_prec = out.precision();
  out << m.dim() << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < m.dim(); ++i) {
    for (std::size_t j = 0; j < m.dim(); ++j) {
      if (j) out << ' ';
      out << m(i, j);
    }
    out << '\n';
  }
  out.flags(old_flags);
  out.precision(old_prec);
}

}  // namespace sparsecov
