#ifndef CVSEP_DEPHASING_HPP
#define CVSEP_DEPHASING_HPP

#include <cmath>
#include <numbers>
#include <string_view>

#include "gaussian_state.hpp"

namespace cvsep {

// Gaussian phase noise on mode A in front of a beam splitter, tracked exactly
// at the level of first and second moments.
//
// With phi ~ N(0, sigma2) acting on mode A of (A, C):
//   gamma' = U (Sigma gamma Sigma + pi (+) 0) U^T,   d' = U Sigma d,
//   Sigma  = diag(e^{-sigma2/2}, e^{-sigma2/2}, 1, 1),
//   pi     = (1 - e^{-sigma2})^2 / 2 (A + alpha) + (1 - e^{-2 sigma2}) / 2 J (A + alpha) J^T,
// where A is the mode-A block of gamma and alpha = 2 d_A d_A^T.
// The inverse has the same shape with sigma2 -> -sigma2 applied to the
// measured blocks (see dephase_invert).

enum class PhaseVarianceReading {
  square_degrees,  // value is a variance in deg^2
  degree_std,      // value is a standard deviation in degrees
};

inline PhaseVarianceReading phase_reading_from_string(std::string_view s) {
  if (s == "square-degrees" || s == "deg2") return PhaseVarianceReading::square_degrees;
  if (s == "degree-std" || s == "deg-std") return PhaseVarianceReading::degree_std;
  throw std::invalid_argument("unknown phase variance reading '" + std::string(s) + "'");
}

/// Phase variance in rad^2 from a value quoted in degrees.
inline double phase_variance_from_degrees(double value, PhaseVarianceReading reading) {
  detail::require(std::isfinite(value) && value >= 0.0, "phase variance must be finite and non-negative");
  const double rad = std::numbers::pi / 180.0;
  return reading == PhaseVarianceReading::square_degrees ? value * rad * rad : (value * rad) * (value * rad);
}

class DephasingParams {
 public:
  DephasingParams(double sigma2, double transmittance) : sigma2_(sigma2), transmittance_(transmittance) {
    detail::require(std::isfinite(sigma2) && sigma2 >= 0.0, "dephasing: sigma2 must be finite and >= 0");
    detail::require(std::isfinite(transmittance) && transmittance >= 0.0 && transmittance <= 1.0,
                    "dephasing: transmittance must lie in [0, 1]");
  }

  double sigma2() const { return sigma2_; }
  double transmittance() const { return transmittance_; }

  Mat sigma_matrix() const {
    Mat s = Mat::Identity(4, 4);
    s(0, 0) = s(1, 1) = std::exp(-sigma2_ / 2.0);
    return s;
  }

  Mat sigma_inverse() const {
    Mat s = Mat::Identity(4, 4);
    s(0, 0) = s(1, 1) = std::exp(sigma2_ / 2.0);
    return s;
  }

 private:
  double sigma2_;
  double transmittance_;
};

/// D_ij = d_i d_j.
struct FirstMomentMatrix {
  Mat d;

  static FirstMomentMatrix from_mean(const Vec& mean) { return {mean * mean.transpose()}; }

  /// Recovers the mean up to the global sign, which is fixed by `hint`
  /// (typically the stored mean vector).
  Vec recover_mean(const Vec& hint) const {
    detail::require(hint.size() == d.rows(), "recover_mean: hint length mismatch");
    Eigen::Index k = 0;
    d.diagonal().maxCoeff(&k);
    const double dkk = d(k, k);
    if (dkk <= 0.0) return Vec::Zero(d.rows());
    Vec m = d.col(k) / std::sqrt(dkk);
    if (m.dot(hint) < 0.0) m = -m;
    return m;
  }
};

namespace detail {

inline Mat dephasing_correction(const Mat& a_plus_alpha, double c1, double c2) {
  const Mat& j = single_mode_J();
  return c1 * a_plus_alpha + c2 * j * a_plus_alpha * j.transpose();
}

}  // namespace detail

/// pi = (1 - e^{-s})^2 / 2 (A + alpha) + (1 - e^{-2s}) / 2 J (A + alpha) J^T.
inline Mat pi_matrix(const Mat& a, const Mat& alpha, double sigma2) {
  detail::require(a.rows() == 2 && a.cols() == 2 && alpha.rows() == 2 && alpha.cols() == 2,
                  "pi_matrix: A and alpha must be 2 x 2");
  const double c1 = std::pow(-std::expm1(-sigma2), 2) / 2.0;
  const double c2 = -std::expm1(-2.0 * sigma2) / 2.0;
  return detail::dephasing_correction(a + alpha, c1, c2);
}

/// pi~ = (1 - e^{s})^2 / 2 (A~ + alpha~) + (1 - e^{2s}) / 2 J (A~ + alpha~) J^T.
inline Mat pi_tilde_matrix(const Mat& a, const Mat& alpha, double sigma2) {
  detail::require(a.rows() == 2 && a.cols() == 2 && alpha.rows() == 2 && alpha.cols() == 2,
                  "pi_tilde_matrix: A and alpha must be 2 x 2");
  const double c1 = std::pow(std::expm1(sigma2), 2) / 2.0;
  const double c2 = -std::expm1(2.0 * sigma2) / 2.0;
  return detail::dephasing_correction(a + alpha, c1, c2);
}

struct DephasedMoments {
  Mat gamma;
  Vec mean;
};

inline DephasedMoments dephase_forward(const Mat& gamma_ac, const Vec& d_ac, const DephasingParams& params) {
  detail::require(gamma_ac.rows() == 4 && gamma_ac.cols() == 4 && d_ac.size() == 4,
                  "dephase_forward: expects a two-mode covariance and mean");
  const Mat u = beam_splitter(params.transmittance()).matrix();
  const Mat sigma = params.sigma_matrix();
  const Mat alpha = 2.0 * FirstMomentMatrix::from_mean(d_ac).d.topLeftCorner(2, 2);
  Mat inner = sigma * gamma_ac * sigma;
  inner.topLeftCorner(2, 2) += pi_matrix(gamma_ac.topLeftCorner(2, 2), alpha, params.sigma2());
  return {symmetrized(u * inner * u.transpose()), u * sigma * d_ac};
}

/// gamma_AC = Sigma^{-1} U^T gamma' U Sigma^{-1} + pi~ (+) 0 with
/// A~ = (U^T gamma' U)_A and alpha~ = 2 (U^T D' U)_A.
inline Mat dephase_invert(const Mat& gamma_prime, const Vec& d_prime, const DephasingParams& params) {
  detail::require(gamma_prime.rows() == 4 && gamma_prime.cols() == 4 && d_prime.size() == 4,
                  "dephase_invert: expects a two-mode covariance and mean");
  const double t = params.transmittance();
  detail::require(t > 0.0 && t < 1.0, "dephase_invert: transmittance must lie strictly inside (0, 1)");
  const Mat u = beam_splitter(t).matrix();
  const Mat sigma_inv = params.sigma_inverse();
  const Mat unmixed = u.transpose() * gamma_prime * u;
  const Mat d_unmixed = u.transpose() * FirstMomentMatrix::from_mean(d_prime).d * u;
  Mat out = sigma_inv * unmixed * sigma_inv;
  out.topLeftCorner(2, 2) +=
      pi_tilde_matrix(unmixed.topLeftCorner(2, 2), 2.0 * d_unmixed.topLeftCorner(2, 2), params.sigma2());
  return symmetrized(out);
}

}  // namespace cvsep

#endif  // CVSEP_DEPHASING_HPP
