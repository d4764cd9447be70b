#ifndef CVSEP_TESTS_SUPPORT_HPP
#define CVSEP_TESTS_SUPPORT_HPP

#include <random>

#include "cvsep/gaussian_state.hpp"

namespace cvsep::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

/// Random symplectic matrix on n modes from local rotations, squeezers and
/// beam splitters on random pairs.
inline Mat random_symplectic(std::size_t n, Rng& rng, int layers = 4, double max_r = 1.0) {
  Mat s = Mat::Identity(2 * n, 2 * n);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (int l = 0; l < layers; ++l) {
    for (std::size_t m = 0; m < n; ++m) {
      const std::array<std::size_t, 1> mode{m};
      s = phase_shift(uniform(rng, 0.0, 6.283185307179586)).embedded(mode, n) * s;
      s = squeezer(uniform(rng, -max_r, max_r)).embedded(mode, n) * s;
    }
    if (n >= 2) {
      const std::size_t a = pick(rng);
      std::size_t b = pick(rng);
      while (b == a) b = pick(rng);
      const std::array<std::size_t, 2> pair{a, b};
      s = beam_splitter(uniform(rng, 0.0, 1.0)).embedded(pair, n) * s;
    }
  }
  return s;
}

/// Random physical covariance S diag(nu_k) S^T with symplectic eigenvalues
/// nu_k in [1, max_nu].
inline Mat random_physical_gamma(std::size_t n, Rng& rng, double max_nu = 3.0, double max_r = 1.0) {
  Mat d = Mat::Zero(2 * n, 2 * n);
  for (std::size_t k = 0; k < n; ++k) {
    const double nu = uniform(rng, 1.0, max_nu);
    d(2 * k, 2 * k) = d(2 * k + 1, 2 * k + 1) = nu;
  }
  const Mat s = random_symplectic(n, rng, 4, max_r);
  return symmetrized(s * d * s.transpose());
}

/// Random real symmetric matrix with entries in [-1, 1].
inline Mat random_symmetric(Eigen::Index n, Rng& rng) {
  Mat m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) m(i, j) = m(j, i) = uniform(rng, -1.0, 1.0);
  return m;
}

}  // namespace cvsep::testing

#endif  // CVSEP_TESTS_SUPPORT_HPP
