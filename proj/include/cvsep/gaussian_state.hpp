#ifndef CVSEP_GAUSSIAN_STATE_HPP
#define CVSEP_GAUSSIAN_STATE_HPP

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace cvsep {

/// Tolerance on min-eig(gamma + i*Omega) below which a covariance is unphysical.
inline constexpr double kPhysicalityTolerance = 1e-7;
/// Symmetry tolerance, relative to max(1, max|gamma|).
inline constexpr double kSymmetryTolerance = 1e-9;
inline constexpr double kSymplecticTolerance = 1e-9;

enum class SqueezeAxis { position, momentum };

/// Gaussian state of N modes: covariance gamma and first moments.
///
/// Components are ordered (x_1, p_1, ..., x_N, p_N). The covariance is the
/// symmetrized second moment Tr[rho {xi_j - d_j, xi_k - d_k}], so the vacuum
/// covariance is the identity and a quadrature variance in these units is
/// twice the canonical variance (vacuum: 1/2).
class GaussianState {
 public:
  GaussianState(Mat gamma, Vec mean) {
    detail::require(gamma.rows() == gamma.cols(), "covariance matrix must be square");
    detail::require(gamma.rows() > 0 && gamma.rows() % 2 == 0,
                    "covariance matrix dimension must be even and positive, got " +
                        std::to_string(gamma.rows()));
    detail::require(mean.size() == gamma.rows(), "mean vector length " + std::to_string(mean.size()) +
                                                     " does not match covariance dimension " +
                                                     std::to_string(gamma.rows()));
    detail::require(gamma.allFinite() && mean.allFinite(), "covariance and mean must be finite");
    const double scale = std::max(1.0, max_abs(gamma));
    const double asym = asymmetry(gamma);
    detail::require(asym <= kSymmetryTolerance * scale,
                    "covariance matrix is not symmetric (max |g_ij - g_ji| = " + std::to_string(asym) + ")");
    gamma_ = symmetrized(gamma);
    mean_ = std::move(mean);
  }

  explicit GaussianState(Mat gamma) : GaussianState(gamma, Vec::Zero(gamma.rows())) {}

  std::size_t n_modes() const { return static_cast<std::size_t>(gamma_.rows() / 2); }
  Eigen::Index dim() const { return gamma_.rows(); }
  const Mat& gamma() const { return gamma_; }
  const Vec& mean() const { return mean_; }

  double min_physicality_eigenvalue() const {
    const auto eig = hermitian_eigenvalues(gamma_, symplectic_form(n_modes()));
    return eig.back();
  }

  bool physical() const { return min_physicality_eigenvalue() >= -kPhysicalityTolerance; }

  /// Marginal on the listed modes, in the listed order.
  GaussianState reduced(std::span<const std::size_t> modes) const {
    detail::require(!modes.empty(), "reduced: empty mode list");
    const auto idx = quadrature_indices(modes);
    const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
    Mat g(m, m);
    Vec d(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      d(i) = mean_(idx[i]);
      for (Eigen::Index j = 0; j < m; ++j) g(i, j) = gamma_(idx[i], idx[j]);
    }
    return GaussianState(std::move(g), std::move(d));
  }

  GaussianState reduced(std::initializer_list<std::size_t> modes) const {
    return reduced(std::span<const std::size_t>(modes.begin(), modes.size()));
  }

  /// Row/column indices of the listed modes' quadratures; validates the list.
  std::vector<Eigen::Index> quadrature_indices(std::span<const std::size_t> modes) const {
    std::vector<Eigen::Index> idx;
    idx.reserve(2 * modes.size());
    for (std::size_t a = 0; a < modes.size(); ++a) {
      detail::require(modes[a] < n_modes(), "mode index " + std::to_string(modes[a]) + " out of range for " +
                                                std::to_string(n_modes()) + "-mode state");
      for (std::size_t b = 0; b < a; ++b)
        detail::require(modes[a] != modes[b], "duplicate mode index " + std::to_string(modes[a]));
      idx.push_back(static_cast<Eigen::Index>(2 * modes[a]));
      idx.push_back(static_cast<Eigen::Index>(2 * modes[a] + 1));
    }
    return idx;
  }

 private:
  Mat gamma_;
  Vec mean_;
};

/// Symplectic transformation on one or more modes; S Omega S^T = Omega is
/// checked on construction.
class SymplecticOp {
 public:
  SymplecticOp(Mat matrix, std::string label) : matrix_(std::move(matrix)), label_(std::move(label)) {
    detail::require(matrix_.rows() == matrix_.cols() && matrix_.rows() > 0 && matrix_.rows() % 2 == 0,
                    "symplectic matrix must be square with even dimension");
    detail::require(matrix_.allFinite(), "symplectic matrix must be finite");
    const Mat omega = symplectic_form(n_modes());
    const double err = max_abs(matrix_ * omega * matrix_.transpose() - omega);
    detail::require(err < kSymplecticTolerance,
                    label_ + ": matrix is not symplectic (|S W S^T - W| = " + std::to_string(err) + ")");
  }

  std::size_t n_modes() const { return static_cast<std::size_t>(matrix_.rows() / 2); }
  const Mat& matrix() const { return matrix_; }
  const std::string& label() const { return label_; }

  /// Full 2N x 2N matrix acting as this op on `modes` and identity elsewhere.
  Mat embedded(std::span<const std::size_t> modes, std::size_t total_modes) const {
    detail::require(modes.size() == n_modes(), label_ + ": acts on " + std::to_string(n_modes()) +
                                                   " modes but " + std::to_string(modes.size()) +
                                                   " indices were given");
    std::vector<Eigen::Index> idx;
    for (std::size_t a = 0; a < modes.size(); ++a) {
      detail::require(modes[a] < total_modes, label_ + ": mode index " + std::to_string(modes[a]) +
                                                  " out of range");
      for (std::size_t b = 0; b < a; ++b)
        detail::require(modes[a] != modes[b], label_ + ": duplicate mode index " + std::to_string(modes[a]));
      idx.push_back(static_cast<Eigen::Index>(2 * modes[a]));
      idx.push_back(static_cast<Eigen::Index>(2 * modes[a] + 1));
    }
    const auto dim = static_cast<Eigen::Index>(2 * total_modes);
    Mat full = Mat::Identity(dim, dim);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < idx.size(); ++j)
        full(idx[i], idx[j]) = matrix_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return full;
  }

 private:
  Mat matrix_;
  std::string label_;
};

/// Linear form u . xi over the quadratures of a state.
struct QuadratureCombination {
  Vec coefficients;
  std::optional<double> gain;
};

inline GaussianState vacuum_state(std::size_t n_modes) {
  detail::require(n_modes >= 1, "vacuum_state: n_modes must be at least 1");
  const auto dim = static_cast<Eigen::Index>(2 * n_modes);
  return GaussianState(Mat::Identity(dim, dim), Vec::Zero(dim));
}

inline GaussianState squeezed_vacuum(double r, SqueezeAxis axis) {
  detail::require(std::isfinite(r) && r >= 0.0, "squeezed_vacuum: r must be finite and non-negative");
  const double anti = std::exp(2.0 * r);
  const double squeezed = std::exp(-2.0 * r);
  Mat g = Mat::Zero(2, 2);
  if (axis == SqueezeAxis::momentum) {
    g(0, 0) = anti;
    g(1, 1) = squeezed;
  } else {
    g(0, 0) = squeezed;
    g(1, 1) = anti;
  }
  return GaussianState(std::move(g));
}

/// Two-mode beam splitter with transmittance T:
/// [[sqrt(T) I, sqrt(1-T) I], [-sqrt(1-T) I, sqrt(T) I]].
/// The second output port carries the reflected amplitude of the first input
/// with a minus sign.
inline SymplecticOp beam_splitter(double transmittance) {
  detail::require(std::isfinite(transmittance) && transmittance >= 0.0 && transmittance <= 1.0,
                  "beam_splitter: transmittance must lie in [0, 1]");
  const double t = std::sqrt(transmittance);
  const double s = std::sqrt(1.0 - transmittance);
  Mat m = Mat::Zero(4, 4);
  m.topLeftCorner(2, 2) = t * Mat::Identity(2, 2);
  m.topRightCorner(2, 2) = s * Mat::Identity(2, 2);
  m.bottomLeftCorner(2, 2) = -s * Mat::Identity(2, 2);
  m.bottomRightCorner(2, 2) = t * Mat::Identity(2, 2);
  return SymplecticOp(std::move(m), "beam splitter");
}

/// Rotation by phi acting on (x, p): [[cos, sin], [-sin, cos]].
inline SymplecticOp phase_shift(double phi) {
  detail::require(std::isfinite(phi), "phase_shift: phi must be finite");
  Mat m(2, 2);
  m << std::cos(phi), std::sin(phi), -std::sin(phi), std::cos(phi);
  return SymplecticOp(std::move(m), "phase shift");
}

/// Single-mode squeezer diag(e^{r}, e^{-r}) on (x, p); squeezes momentum for r > 0.
inline SymplecticOp squeezer(double r) {
  detail::require(std::isfinite(r), "squeezer: r must be finite");
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = std::exp(r);
  m(1, 1) = std::exp(-r);
  return SymplecticOp(std::move(m), "squeezer");
}

/// Exchange of two modes.
inline SymplecticOp mode_swap() {
  Mat m = Mat::Zero(4, 4);
  m.topRightCorner(2, 2) = Mat::Identity(2, 2);
  m.bottomLeftCorner(2, 2) = Mat::Identity(2, 2);
  return SymplecticOp(std::move(m), "mode swap");
}

inline GaussianState apply_symplectic(const GaussianState& state, const SymplecticOp& op,
                                      std::span<const std::size_t> modes) {
  const Mat s = op.embedded(modes, state.n_modes());
  return GaussianState(s * state.gamma() * s.transpose(), s * state.mean());
}

inline GaussianState apply_symplectic(const GaussianState& state, const SymplecticOp& op,
                                      std::initializer_list<std::size_t> modes) {
  return apply_symplectic(state, op, std::span<const std::size_t>(modes.begin(), modes.size()));
}

inline GaussianState displace(const GaussianState& state, const Vec& shift) {
  detail::require(shift.size() == state.dim(), "displace: shift length " + std::to_string(shift.size()) +
                                                   " does not match state dimension " +
                                                   std::to_string(state.dim()));
  detail::require(shift.allFinite(), "displace: shift must be finite");
  return GaussianState(state.gamma(), state.mean() + shift);
}

/// Direct sum: modes of `b` appended after those of `a`.
inline GaussianState tensor(const GaussianState& a, const GaussianState& b) {
  const Eigen::Index n = a.dim() + b.dim();
  Mat g = Mat::Zero(n, n);
  g.topLeftCorner(a.dim(), a.dim()) = a.gamma();
  g.bottomRightCorner(b.dim(), b.dim()) = b.gamma();
  Vec d(n);
  d << a.mean(), b.mean();
  return GaussianState(std::move(g), std::move(d));
}

/// Flips the sign of the momentum row and column of `mode`.
inline Mat partial_transpose(const Mat& gamma, std::size_t mode) {
  detail::require(gamma.rows() == gamma.cols() && gamma.rows() % 2 == 0,
                  "partial_transpose: covariance must be square with even dimension");
  detail::require(static_cast<Eigen::Index>(2 * mode + 1) < gamma.rows(),
                  "partial_transpose: mode index " + std::to_string(mode) + " out of range");
  Mat out = gamma;
  const auto p = static_cast<Eigen::Index>(2 * mode + 1);
  out.row(p) *= -1.0;
  out.col(p) *= -1.0;
  return out;
}

inline double min_physicality_eigenvalue(const GaussianState& state) {
  return state.min_physicality_eigenvalue();
}

/// u^T gamma u; the vacuum gives u^T u.
inline double quadratic_form_variance(const GaussianState& state, const QuadratureCombination& u) {
  detail::require(u.coefficients.size() == state.dim(),
                  "quadratic_form_variance: coefficient length does not match state dimension");
  return u.coefficients.dot(state.gamma() * u.coefficients);
}

}  // namespace cvsep

#endif  // CVSEP_GAUSSIAN_STATE_HPP
