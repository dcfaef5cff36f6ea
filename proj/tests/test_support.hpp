#pragma once

// Random inputs for property tests.

#include <cmath>
#include <cstddef>

#include "sparsecov/matrix.hpp"
#include "sparsecov/random.hpp"

namespace sparsecov::testing {

/// Symmetric matrix with i.i.d. uniform(-scale, scale) upper triangle.
inline SymMatrix random_sym(std::size_t p, Rng& rng, double scale = 1.0) {
  return SymMatrix::from_upper(p, [&](std::size_t, std::size_t) { return scale * (2.0 * rng.uniform() - 1.0); });
}

/// L L^T + shift I with L lower triangular, uniform(-1, 1) entries.
inline SymMatrix random_psd(std::size_t p, Rng& rng, double shift = 0.0) {
  std::vector<double> l(p * p, 0.0);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j <= i; ++j) l[i * p + j] = 2.0 * rng.uniform() - 1.0;
  return SymMatrix::from_upper(p, [&](std::size_t i, std::size_t j) {
    double s = i == j ? shift : 0.0;
    for (std::size_t k = 0; k < p; ++k) s += l[i * p + k] * l[j * p + k];
    return s;
  });
}

/// Symmetric matrix rescaled so that its spectral norm is `target`.
inline SymMatrix random_with_spectral_norm(std::size_t p, Rng& rng, double target) {
  SymMatrix m = random_sym(p, rng);
  return (target / spectral_norm(m)) * m;
}

}  // namespace sparsecov::testing
