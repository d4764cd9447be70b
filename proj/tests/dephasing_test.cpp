#include <gtest/gtest.h>

#include <numbers>

#include "cvsep/dephasing.hpp"
#include "cvsep/io.hpp"
#include "cvsep/separability.hpp"
#include "support.hpp"

namespace {

using namespace cvsep;
using cvsep::testing::Rng;

const std::string kRef = CVSEP_REFERENCE_DIR;

// Mixture over phi ~ N(0, sigma2) of the state rotated on mode A, integrated
// with the trapezoid rule: returns (gamma, mean) before the beam splitter.
std::pair<Mat, Vec> dephased_by_quadrature(const Mat& gamma, const Vec& d, double sigma2) {
  const double sd = std::sqrt(sigma2);
  const int points = 4001;
  const double span = 12.0 * sd;
  Mat second = Mat::Zero(4, 4);
  Vec first = Vec::Zero(4);
  double wsum = 0.0;
  for (int k = 0; k < points; ++k) {
    const double phi = -span + 2.0 * span * k / (points - 1);
    const double w = std::exp(-phi * phi / (2.0 * sigma2));
    Mat rot = Mat::Identity(4, 4);
    rot.topLeftCorner(2, 2) = phase_shift(phi).matrix();
    const Vec m = rot * d;
    second += w * (rot * gamma * rot.transpose() + 2.0 * m * m.transpose());
    first += w * m;
    wsum += w;
  }
  second /= wsum;
  first /= wsum;
  return {second - 2.0 * first * first.transpose(), first};
}

Vec random_mean(Rng& rng, double scale) {
  Vec d(4);
  for (Eigen::Index i = 0; i < 4; ++i) d(i) = cvsep::testing::uniform(rng, -scale, scale);
  return d;
}

TEST(PhaseVariance, DegreeReadings) {
  const double rad = std::numbers::pi / 180.0;
  EXPECT_NEAR(phase_variance_from_degrees(0.02, PhaseVarianceReading::square_degrees), 0.02 * rad * rad, 1e-20);
  EXPECT_NEAR(phase_variance_from_degrees(0.02, PhaseVarianceReading::degree_std), 0.0004 * rad * rad, 1e-22);
  EXPECT_EQ(phase_reading_from_string("deg2"), PhaseVarianceReading::square_degrees);
  EXPECT_EQ(phase_reading_from_string("degree-std"), PhaseVarianceReading::degree_std);
  EXPECT_THROW(phase_reading_from_string("radians"), std::invalid_argument);
  EXPECT_THROW(phase_variance_from_degrees(-1.0, PhaseVarianceReading::degree_std), std::invalid_argument);
}

TEST(PiMatrix, ZeroPhaseNoiseVanishes) {
  Rng rng(51);
  const Mat a = cvsep::testing::random_physical_gamma(1, rng);
  EXPECT_EQ(max_abs(pi_matrix(a, Mat::Zero(2, 2), 0.0)), 0.0);
  EXPECT_EQ(max_abs(pi_tilde_matrix(a, Mat::Zero(2, 2), 0.0)), 0.0);
  EXPECT_THROW(pi_matrix(Mat::Zero(3, 3), Mat::Zero(2, 2), 0.1), std::invalid_argument);
}

TEST(Dephasing, ForwardMatchesPhaseAveragedMixture) {
  Rng rng(52);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat g = cvsep::testing::random_physical_gamma(2, rng);
    const Vec d = random_mean(rng, 5.0);
    const double sigma2 = cvsep::testing::uniform(rng, 1e-4, 0.3);
    const double t = cvsep::testing::uniform(rng, 0.05, 0.95);
    const auto [mixed, mean] = dephased_by_quadrature(g, d, sigma2);
    const Mat u = beam_splitter(t).matrix();
    const auto fw = dephase_forward(g, d, DephasingParams(sigma2, t));
    EXPECT_LT(max_abs(fw.gamma - u * mixed * u.transpose()), 1e-9 * std::max(1.0, max_abs(mixed)));
    EXPECT_LT((fw.mean - u * mean).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Dephasing, InverseUndoesForward) {
  Rng rng(53);
  for (int trial = 0; trial < 1000; ++trial) {
    const Mat g = cvsep::testing::random_physical_gamma(2, rng, 3.0, 1.5);
    const Vec d = random_mean(rng, 10.0);
    const DephasingParams p(cvsep::testing::uniform(rng, 0.0, 0.2), cvsep::testing::uniform(rng, 0.01, 0.99));
    const auto fw = dephase_forward(g, d, p);
    const Mat back = dephase_invert(fw.gamma, fw.mean, p);
    ASSERT_LT(max_abs(back - g), 1e-9 * std::max(1.0, max_abs(g)));
  }
}

TEST(Dephasing, ForwardUndoesInverse) {
  Rng rng(54);
  for (int trial = 0; trial < 1000; ++trial) {
    const Mat g = cvsep::testing::random_physical_gamma(2, rng, 3.0, 1.5);
    const Vec d_prime = random_mean(rng, 10.0);
    const DephasingParams p(cvsep::testing::uniform(rng, 0.0, 0.2), cvsep::testing::uniform(rng, 0.01, 0.99));
    const Mat inv = dephase_invert(g, d_prime, p);
    const Vec d = p.sigma_inverse() * beam_splitter(p.transmittance()).matrix().transpose() * d_prime;
    const auto fw = dephase_forward(inv, d, p);
    ASSERT_LT(max_abs(fw.gamma - g), 1e-9 * std::max(1.0, max_abs(g)));
    ASSERT_LT((fw.mean - d_prime).cwiseAbs().maxCoeff(), 1e-9 * 10.0);
  }
}

TEST(Dephasing, ZeroNoiseIsPureBeamSplitter) {
  Rng rng(55);
  const Mat g = cvsep::testing::random_physical_gamma(2, rng);
  const Vec d = random_mean(rng, 3.0);
  const DephasingParams p(0.0, 0.49);
  const auto fw = dephase_forward(g, d, p);
  const Mat u = beam_splitter(0.49).matrix();
  EXPECT_LT(max_abs(fw.gamma - u * g * u.transpose()), 1e-12);
  EXPECT_LT(max_abs(dephase_invert(fw.gamma, fw.mean, p) - g), 1e-12);
}

TEST(Dephasing, ForwardNeverReducesPhysicalityMargin) {
  Rng rng(56);
  for (int trial = 0; trial < 1000; ++trial) {
    const GaussianState in(cvsep::testing::random_physical_gamma(2, rng, 2.0, 1.0));
    const DephasingParams p(cvsep::testing::uniform(rng, 0.0, 1.0), cvsep::testing::uniform(rng, 0.0, 1.0));
    const auto fw = dephase_forward(in.gamma(), random_mean(rng, 3.0), p);
    const GaussianState out(fw.gamma);
    ASSERT_GE(out.min_physicality_eigenvalue(), in.min_physicality_eigenvalue() - 1e-9 * max_abs(in.gamma()));
  }
}

TEST(Dephasing, InversionRejectsDegenerateSplitter) {
  const Mat g = Mat::Identity(4, 4);
  const Vec d = Vec::Zero(4);
  EXPECT_THROW(dephase_invert(g, d, DephasingParams(0.01, 0.0)), std::invalid_argument);
  EXPECT_THROW(dephase_invert(g, d, DephasingParams(0.01, 1.0)), std::invalid_argument);
  EXPECT_THROW(DephasingParams(-0.1, 0.5), std::invalid_argument);
  EXPECT_THROW(DephasingParams(0.1, 1.5), std::invalid_argument);
  EXPECT_THROW(dephase_invert(Mat::Identity(2, 2), d, DephasingParams(0.01, 0.5)), std::invalid_argument);
}

TEST(Dephasing, MeasuredInputsGiveClassicalState) {
  const auto s = read_state_file(kRef + "/gamma_AC_prime.json");
  Vec d(4);
  d << -0.208, 9.876, 13.32, 1.78;
  EXPECT_LT((s.mean() - d).cwiseAbs().maxCoeff(), 1e-15);
  for (auto reading : {PhaseVarianceReading::square_degrees, PhaseVarianceReading::degree_std}) {
    const DephasingParams p(phase_variance_from_degrees(0.02, reading), 0.49);
    const GaussianState g(dephase_invert(s.gamma(), d, p));
    EXPECT_GE(g.min_physicality_eigenvalue(), -kPhysicalityTolerance);
    const auto c = classicality_check(g);
    EXPECT_FALSE(c.squeezed);
    for (double e : c.eigenvalues) EXPECT_GT(e, 1.0);
  }
}

TEST(FirstMoments, RecoverMeanUpToSign) {
  Vec d(4);
  d << 0.5, -2.0, 3.0, 0.25;
  const auto dd = FirstMomentMatrix::from_mean(d);
  EXPECT_LT((dd.recover_mean(d) - d).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((dd.recover_mean(-d) + d).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(FirstMomentMatrix::from_mean(Vec::Zero(4)).recover_mean(d), Vec::Zero(4));
}

}  // namespace
