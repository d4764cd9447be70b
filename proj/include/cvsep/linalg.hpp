#ifndef CVSEP_LINALG_HPP
#define CVSEP_LINALG_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "errors.hpp"

namespace cvsep {

/// Dense row-major storage; the matrices here are at most 2N x 2N with N <= 8.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

inline double max_abs(const Mat& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double asymmetry(const Mat& m) {
  return max_abs(m - m.transpose());
}

inline Mat symmetrized(const Mat& m) {
  return 0.5 * (m + m.transpose());
}

/// Symplectic form: N-fold direct sum of J = [[0, 1], [-1, 0]].
class SymplecticForm {
 public:
  explicit SymplecticForm(std::size_t n_modes) : n_modes_(n_modes) {
    detail::require(n_modes >= 1, "symplectic form needs at least one mode");
    omega_ = Mat::Zero(2 * n_modes, 2 * n_modes);
    for (std::size_t j = 0; j < n_modes; ++j) {
      omega_(2 * j, 2 * j + 1) = 1.0;
      omega_(2 * j + 1, 2 * j) = -1.0;
    }
  }

  std::size_t n_modes() const { return n_modes_; }
  const Mat& matrix() const { return omega_; }

 private:
  std::size_t n_modes_;
  Mat omega_;
};

inline Mat symplectic_form(std::size_t n_modes) {
  return SymplecticForm(n_modes).matrix();
}

inline const Mat& single_mode_J() {
  static const Mat j = symplectic_form(1);
  return j;
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations, sorted
/// descending. Sweeps stop once every off-diagonal element is below
/// rel_tol * max|A|.
inline std::vector<double> symmetric_eigenvalues(const Mat& input, double rel_tol = 1e-12,
                                                 int max_sweeps = 100) {
  detail::require(input.rows() == input.cols(), "symmetric_eigenvalues: matrix must be square");
  detail::require(input.allFinite(), "symmetric_eigenvalues: entries must be finite");
  const Eigen::Index n = input.rows();
  Mat a = symmetrized(input);
  const double scale = max_abs(a);
  std::vector<double> out(static_cast<std::size_t>(n));
  if (scale == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return out;
  }
  const double threshold = rel_tol * scale;

  auto off_max = [&] {
    double m = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) m = std::max(m, std::abs(a(i, j)));
    return m;
  };

  int sweep = 0;
  while (off_max() >= threshold) {
    if (++sweep > max_sweeps)
      throw numerical_error("Jacobi eigensolver did not converge after " +
                            std::to_string(max_sweeps) + " sweeps");
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 0.1 * threshold) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
      }
    }
  }

  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = a(i, i);
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

/// Eigenvalues of the Hermitian matrix re + i*im, sorted descending.
///
/// The real symmetric embedding [[re, -im], [im, re]] carries every
/// eigenvalue of the Hermitian matrix twice; after sorting, neighbouring
/// values are paired and averaged.
inline std::vector<double> hermitian_eigenvalues(const Mat& re, const Mat& im) {
  detail::require(re.rows() == re.cols() && im.rows() == im.cols() && re.rows() == im.rows(),
                  "hermitian_eigenvalues: real and imaginary parts must be square and equal size");
  const Eigen::Index n = re.rows();
  const double scale = std::max({1.0, max_abs(re), max_abs(im)});
  if (asymmetry(re) > 1e-9 * scale || max_abs(im + im.transpose()) > 1e-9 * scale)
    throw std::invalid_argument("hermitian_eigenvalues: matrix is not Hermitian");

  Mat embed(2 * n, 2 * n);
  embed.topLeftCorner(n, n) = re;
  embed.topRightCorner(n, n) = -im;
  embed.bottomLeftCorner(n, n) = im;
  embed.bottomRightCorner(n, n) = re;

  const auto doubled = symmetric_eigenvalues(embed);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * (doubled[2 * i] + doubled[2 * i + 1]);
  return out;
}

}  // namespace cvsep

#endif  // CVSEP_LINALG_HPP
