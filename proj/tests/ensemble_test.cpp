#include <gtest/gtest.h>

#include <numeric>

#include "cvsep/ensemble.hpp"
#include "cvsep/rng.hpp"

namespace {

using namespace cvsep;

ProtocolConfig config_for(double r, Variant v = Variant::displace_b_before_bs, double loss = 0.5) {
  ProtocolConfig c;
  c.r = r;
  c.variant = v;
  c.bob_loss = loss;
  return c;
}

// Standard error of a covariance-matrix element estimated from n Gaussian
// records, in gamma units.
double element_se(const Mat& g, Eigen::Index i, Eigen::Index j, std::size_t n) {
  return std::sqrt((g(i, i) * g(j, j) + g(i, j) * g(i, j)) / static_cast<double>(n));
}

void expect_within_se(const Mat& estimate, const Mat& truth, std::size_t n, double k) {
  for (Eigen::Index i = 0; i < truth.rows(); ++i)
    for (Eigen::Index j = 0; j < truth.cols(); ++j)
      EXPECT_NEAR(estimate(i, j), truth(i, j), k * element_se(truth, i, j, n)) << i << "," << j;
}

TEST(Rng, RecordStreamsDependOnlyOnKey) {
  auto a = record_stream(7, 3, 11);
  auto b = record_stream(7, 3, 11);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a(), b());
  EXPECT_NE(record_stream(7, 3, 11)(), record_stream(7, 3, 12)());
  EXPECT_NE(record_stream(7, 3, 11)(), record_stream(7, 4, 11)());
  EXPECT_NE(record_stream(7, 3, 11)(), record_stream(8, 3, 11)());
}

TEST(Rng, SplitMixUniformity) {
  SplitMix64 g(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double sum = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += u(g);
  EXPECT_NEAR(sum / n, 0.5, 5.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(Ensemble, SameSeedIsBitIdentical) {
  const auto c = config_for(0.5);
  const auto a = simulate_ensemble(c, 8, 50, 42);
  const auto b = simulate_ensemble(c, 8, 50, 42);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.hidden_x, b.hidden_x);
  const auto other = simulate_ensemble(c, 8, 50, 43);
  EXPECT_NE(a.values, other.values);
}

TEST(Ensemble, ThreadCountDoesNotChangeRecords) {
  const auto c = config_for(0.5, Variant::a_posteriori);
  for (auto mode : {SamplingMode::continuous, SamplingMode::grid}) {
    EnsembleOptions one{mode, 5.0, 1}, four{mode, 5.0, 4}, seven{mode, 5.0, 7};
    const auto a = simulate_ensemble(c, 10, 37, 5, one);
    const auto b = simulate_ensemble(c, 10, 37, 5, four);
    const auto d = simulate_ensemble(c, 10, 37, 5, seven);
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(a.values, d.values);
    EXPECT_EQ(a.hidden_p, d.hidden_p);
  }
}

TEST(Ensemble, LayoutAndMetadata) {
  const auto s = simulate_ensemble(config_for(0.3), 4, 5, 9);
  EXPECT_EQ(s.size(), 80u);
  EXPECT_EQ(s.channels(), 6u);
  EXPECT_EQ(s.modes, (std::vector<std::string>{"A'", "C'", "B'"}));
  EXPECT_EQ(s.channel("B'", 1), 5u);
  EXPECT_TRUE(s.has_hidden());
  EXPECT_THROW(s.mode_index("D"), std::invalid_argument);
  EXPECT_THROW(simulate_ensemble(config_for(0.3), 0, 5, 9), std::invalid_argument);
}

TEST(Ensemble, GridCountsFollowGaussianWeights) {
  const auto counts = detail::grid_counts(20, 100000, 5.0);
  EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), std::size_t{0}), 100000u);
  // Symmetric under reflection of either axis, up to largest-remainder ties.
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 20; ++j) {
      const long a = static_cast<long>(counts[i * 20 + j]);
      const long b = static_cast<long>(counts[(19 - i) * 20 + j]);
      EXPECT_LE(std::abs(a - b), 1);
    }
  EXPECT_GT(counts[9 * 20 + 9], counts[0]);
}

TEST(Ensemble, ZeroSqueezingHasNoDisplacement) {
  const auto s = simulate_ensemble(config_for(0.0), 3, 10, 1);
  for (double x : s.hidden_x) EXPECT_EQ(x, 0.0);
}

TEST(Ensemble, CovarianceMatchesAnalyticStates) {
  const auto c = config_for(0.5);
  const auto s = simulate_ensemble(c, 40, 100, 2024);
  const auto t = run_protocol(c);
  const std::size_t n = s.size();
  expect_within_se(estimate_covariance(s, {"A'", "C'"}).gamma(), t.after_bs_ac.reduced({slot::A, slot::C}).gamma(),
                   n, 4.5);
  expect_within_se(estimate_covariance(s, {"A'", "B'"}).gamma(), t.output.gamma(), n, 4.5);
}

TEST(Ensemble, GridSamplingMatchesAnalyticStates) {
  const auto c = config_for(0.5);
  const auto s = simulate_ensemble(c, 40, 100, 77, {SamplingMode::grid, 5.0, 1});
  const auto t = run_protocol(c);
  expect_within_se(estimate_covariance(s, {"A'", "B'"}).gamma(), t.output.gamma(), s.size(), 4.5);
}

TEST(Ensemble, MonteCarloErrorShrinksLikeInverseRootN) {
  const auto c = config_for(0.5);
  const double truth = run_protocol(c).output.gamma()(0, 0);
  std::vector<double> log_n, log_err;
  for (std::size_t inner : {5u, 20u, 80u}) {
    double sq = 0.0;
    const int reps = 30;
    std::size_t n = 0;
    for (int rep = 0; rep < reps; ++rep) {
      const auto s = simulate_ensemble(c, 10, inner, 1000 + static_cast<std::uint64_t>(rep));
      n = s.size();
      const double e = estimate_covariance(s, {"A'"}).gamma()(0, 0) - truth;
      sq += e * e;
    }
    log_n.push_back(std::log(static_cast<double>(n)));
    log_err.push_back(0.5 * std::log(sq / reps));
  }
  const double slope = (log_err.back() - log_err.front()) / (log_n.back() - log_n.front());
  EXPECT_GT(slope, -1.0);
  EXPECT_LT(slope, -0.25);
}

TEST(Correction, RecoversEntanglementFromPostProcessing) {
  const auto c = config_for(0.5, Variant::a_posteriori);
  const auto s = simulate_ensemble(c, 40, 100, 99);
  const auto t = run_protocol(c);
  const std::size_t n = s.size();
  const auto raw = estimate_covariance(s, {"A'", "B'"});
  expect_within_se(raw.gamma(), t.uncorrected_output->gamma(), n, 4.5);
  EXPECT_GT(optimize_gain(raw, 0.05, 2.0).point.product, 1.0);

  const auto res = a_posteriori_correct(s, NoisePlan::for_squeezing(0.5));
  EXPECT_NEAR(res.fraction, 1.0, 1e-12);  // sqrt(2 eta) with eta = 1/2
  EXPECT_LT(res.residual, 1e-12);
  const auto fixed = estimate_covariance(res.samples, {"A'", "B'"});
  expect_within_se(fixed.gamma(), t.output.gamma(), n, 4.5);
  EXPECT_LT(optimize_gain(fixed, 0.05, 2.0).point.product, 1.0);
  ASSERT_TRUE(res.samples.correction_fraction.has_value());
  // A' and C' channels are untouched.
  for (std::size_t r = 0; r < 100; ++r) EXPECT_EQ(res.samples.value(r, 0), s.value(r, 0));
}

TEST(Correction, FractionScalesWithTransmission) {
  for (double loss : {0.0, 0.3, 0.5, 0.8}) {
    const auto s = simulate_ensemble(config_for(0.4, Variant::a_posteriori, loss), 2, 5, 1);
    EXPECT_NEAR(a_posteriori_correct(s, NoisePlan::for_squeezing(0.4)).fraction, std::sqrt(2.0 * (1.0 - loss)), 1e-12);
  }
}

TEST(Correction, ExplicitFractionAndPreconditions) {
  const auto s = simulate_ensemble(config_for(0.4, Variant::a_posteriori), 2, 5, 1);
  const auto zero = a_posteriori_correct(s, NoisePlan::for_squeezing(0.4), 0.0);
  EXPECT_EQ(zero.samples.values, s.values);
  EXPECT_GT(zero.residual, 0.1);
  EXPECT_THROW(a_posteriori_correct(s, NoisePlan::for_squeezing(0.9)), std::invalid_argument);
  auto bare = s;
  bare.hidden_x.clear();
  EXPECT_THROW(a_posteriori_correct(bare, NoisePlan::for_squeezing(0.4)), std::invalid_argument);
}

}  // namespace
