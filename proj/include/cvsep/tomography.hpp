#ifndef CVSEP_TOMOGRAPHY_HPP
#define CVSEP_TOMOGRAPHY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "ensemble.hpp"
#include "gaussian_state.hpp"
#include "rng.hpp"

namespace cvsep {

/// Pair of analyser angles (degrees) in the phase plane of modes A and B.
/// The observable at angle theta is cos(theta) x + sin(theta) p; angles are
/// reduced modulo 180 degrees.
class MeasurementSetting {
 public:
  MeasurementSetting(double theta_a_deg, double theta_b_deg)
      : theta_a_(reduce(theta_a_deg)), theta_b_(reduce(theta_b_deg)) {}

  double theta_a() const { return theta_a_; }
  double theta_b() const { return theta_b_; }

  std::array<double, 2> projector_a() const { return projector(theta_a_); }
  std::array<double, 2> projector_b() const { return projector(theta_b_); }

  friend bool operator==(const MeasurementSetting&, const MeasurementSetting&) = default;

 private:
  static double reduce(double deg) {
    detail::require(std::isfinite(deg), "measurement angle must be finite");
    double r = std::fmod(deg, 180.0);
    if (r < 0.0) r += 180.0;
    return r;
  }

  static std::array<double, 2> projector(double deg) {
    // Exact values on the canonical axes keep the reconstruction free of
    // cos(90 deg) ~ 6e-17 residue.
    if (deg == 0.0) return {1.0, 0.0};
    if (deg == 90.0) return {0.0, 1.0};
    const double rad = deg * std::numbers::pi / 180.0;
    return {std::cos(rad), std::sin(rad)};
  }

  double theta_a_;
  double theta_b_;
};

/// Second moments of one setting in covariance units (vacuum variance 1).
struct PairStatistics {
  MeasurementSetting setting{0.0, 0.0};
  double var_a = 0.0;
  double var_b = 0.0;
  double cov_ab = 0.0;
  std::size_t n = 0;
};

struct ShapeStats {
  double skewness = 0.0;
  double kurtosis = 0.0;
  double skewness_error = std::numeric_limits<double>::quiet_NaN();
  double kurtosis_error = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
};

/// The five analyser pairs that fix all ten independent elements of a
/// two-mode covariance matrix.
inline std::vector<MeasurementSetting> canonical_settings() {
  return {{0.0, 0.0}, {90.0, 0.0}, {0.0, 90.0}, {90.0, 90.0}, {45.0, 45.0}};
}

namespace detail {

inline constexpr std::array<std::array<int, 2>, 10> kCovarianceUnknowns{{
    {0, 0}, {0, 1}, {1, 1}, {2, 2}, {2, 3}, {3, 3}, {0, 2}, {0, 3}, {1, 2}, {1, 3},
}};

inline constexpr std::array<const char*, 10> kCovarianceUnknownNames{
    "x_A x_A", "x_A p_A", "p_A p_A", "x_B x_B", "x_B p_B", "p_B p_B", "x_A x_B", "x_A p_B", "p_A x_B", "p_A p_B",
};

}  // namespace detail

/// Statistics each setting would produce on the covariance `gamma`.
inline std::vector<PairStatistics> project_statistics(const Mat& gamma, std::span<const MeasurementSetting> settings,
                                                      std::size_t n = std::numeric_limits<std::uint32_t>::max()) {
  detail::require(gamma.rows() == 4 && gamma.cols() == 4, "project_statistics: expects a 4 x 4 covariance");
  std::vector<PairStatistics> out;
  for (const auto& s : settings) {
    const auto a = s.projector_a();
    const auto b = s.projector_b();
    Vec u = Vec::Zero(4), v = Vec::Zero(4);
    u << a[0], a[1], 0.0, 0.0;
    v << 0.0, 0.0, b[0], b[1];
    out.push_back({s, u.dot(gamma * u), v.dot(gamma * v), u.dot(gamma * v), n});
  }
  return out;
}

/// Linear reconstruction of the 4 x 4 covariance from analyser statistics;
/// least squares when the settings over-determine the ten unknowns.
inline Mat reconstruct_covariance(std::span<const PairStatistics> stats) {
  detail::require(!stats.empty(), "reconstruct_covariance: no statistics given");
  const auto rows = static_cast<Eigen::Index>(3 * stats.size());
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(rows, 10);
  Eigen::VectorXd rhs(rows);
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const auto& st = stats[i];
    detail::require(st.n >= 2, "reconstruct_covariance: every setting needs at least two samples");
    detail::require(std::isfinite(st.var_a) && std::isfinite(st.var_b) && std::isfinite(st.cov_ab),
                    "reconstruct_covariance: statistics must be finite");
    detail::require(std::abs(st.cov_ab) <= std::sqrt(std::max(0.0, st.var_a * st.var_b)) * (1.0 + 1e-9) + 1e-12,
                    "reconstruct_covariance: |cov_ab| exceeds sqrt(var_a var_b)");
    const auto a = st.setting.projector_a();
    const auto b = st.setting.projector_b();
    const auto r = static_cast<Eigen::Index>(3 * i);
    design(r, 0) = a[0] * a[0];
    design(r, 1) = 2.0 * a[0] * a[1];
    design(r, 2) = a[1] * a[1];
    design(r + 1, 3) = b[0] * b[0];
    design(r + 1, 4) = 2.0 * b[0] * b[1];
    design(r + 1, 5) = b[1] * b[1];
    design(r + 2, 6) = a[0] * b[0];
    design(r + 2, 7) = a[0] * b[1];
    design(r + 2, 8) = a[1] * b[0];
    design(r + 2, 9) = a[1] * b[1];
    rhs(r) = st.var_a;
    rhs(r + 1) = st.var_b;
    rhs(r + 2) = st.cov_ab;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cutoff = 1e-10 * sv(0);
  if (sv.size() < 10 || sv(sv.size() - 1) <= cutoff) {
    // Name the unknown that dominates the weakest right-singular direction.
    const Eigen::VectorXd null = svd.matrixV().col(9);
    Eigen::Index worst = 0;
    null.cwiseAbs().maxCoeff(&worst);
    throw std::invalid_argument(std::string("reconstruct_covariance: settings do not determine the element ") +
                                detail::kCovarianceUnknownNames[static_cast<std::size_t>(worst)]);
  }
  const Eigen::VectorXd sol = svd.solve(rhs);
  Mat gamma(4, 4);
  for (std::size_t k = 0; k < 10; ++k) {
    const auto [i, j] = detail::kCovarianceUnknowns[k];
    gamma(i, j) = sol(static_cast<Eigen::Index>(k));
    gamma(j, i) = sol(static_cast<Eigen::Index>(k));
  }
  return gamma;
}

/// Analyser statistics of modes (label_a, label_b) over the given records.
inline PairStatistics pair_statistics(const SampleSet& samples, std::string_view label_a, std::string_view label_b,
                                      const MeasurementSetting& setting, std::span<const std::size_t> records) {
  detail::require(records.size() >= 2, "pair_statistics: need at least two records");
  const auto a = setting.projector_a();
  const auto b = setting.projector_b();
  const std::size_t ax = samples.channel(label_a, 0), ap = samples.channel(label_a, 1);
  const std::size_t bx = samples.channel(label_b, 0), bp = samples.channel(label_b, 1);
  long double sa = 0, sb = 0;
  for (auto r : records) {
    sa += a[0] * samples.value(r, ax) + a[1] * samples.value(r, ap);
    sb += b[0] * samples.value(r, bx) + b[1] * samples.value(r, bp);
  }
  const long double n = static_cast<long double>(records.size());
  const long double ma = sa / n, mb = sb / n;
  long double vaa = 0, vbb = 0, vab = 0;
  for (auto r : records) {
    const long double da = a[0] * samples.value(r, ax) + a[1] * samples.value(r, ap) - ma;
    const long double db = b[0] * samples.value(r, bx) + b[1] * samples.value(r, bp) - mb;
    vaa += da * da;
    vbb += db * db;
    vab += da * db;
  }
  const long double scale = 2.0L / (n - 1.0L);
  return {setting, static_cast<double>(vaa * scale), static_cast<double>(vbb * scale),
          static_cast<double>(vab * scale), records.size()};
}

struct BlockOptions {
  std::size_t blocks = 10;
  bool shuffled = false;  // random assignment of records to blocks, for i.i.d. data
  std::uint64_t shuffle_seed = 0;
};

/// Spread of a matrix-valued statistic over equal blocks of the data.
struct BlockErrors {
  Mat spread;          // elementwise standard deviation across blocks
  Mat standard_error;  // spread / sqrt(blocks): error of the full-data estimate
  std::size_t blocks = 0;
  std::size_t block_size = 0;
};

/// Splits records 0..n-1 into `blocks` equal parts (dropping the remainder),
/// evaluates `statistic(indices)` on each part and returns the elementwise
/// standard deviation across parts.
template <typename Statistic>
BlockErrors block_errors(std::size_t n, Statistic&& statistic, const BlockOptions& options = {}) {
  const std::size_t k = options.blocks;
  detail::require(k >= 2, "block_errors: need at least two blocks");
  detail::require(n >= k, "block_errors: fewer records (" + std::to_string(n) + ") than blocks (" +
                              std::to_string(k) + ")");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (options.shuffled) {
    SplitMix64 rng(options.shuffle_seed);
    for (std::size_t i = n - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
      std::swap(order[i], order[j]);
    }
  }
  const std::size_t m = n / k;
  std::vector<Mat> per_block;
  per_block.reserve(k);
  for (std::size_t b = 0; b < k; ++b) {
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(b * m),
                                 order.begin() + static_cast<std::ptrdiff_t>((b + 1) * m));
    per_block.push_back(statistic(std::span<const std::size_t>(idx)));
  }
  Mat mean = Mat::Zero(per_block.front().rows(), per_block.front().cols());
  for (const auto& s : per_block) mean += s;
  mean /= static_cast<double>(k);
  Mat var = Mat::Zero(mean.rows(), mean.cols());
  for (const auto& s : per_block) var += (s - mean).cwiseAbs2();
  var /= static_cast<double>(k - 1);
  BlockErrors out;
  out.spread = var.cwiseSqrt();
  out.standard_error = out.spread / std::sqrt(static_cast<double>(k));
  out.blocks = k;
  out.block_size = m;
  return out;
}

namespace detail {

struct Moments {
  double skewness;
  double kurtosis;
};

template <typename Get>
Moments standardized_moments(std::size_t n, Get&& get) {
  long double sum = 0;
  for (std::size_t i = 0; i < n; ++i) sum += get(i);
  const long double mean = sum / static_cast<long double>(n);
  long double m2 = 0, m3 = 0, m4 = 0, scale = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double d = get(i) - mean;
    const long double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
    scale = std::max(scale, std::abs(static_cast<long double>(get(i))));
  }
  const long double nn = static_cast<long double>(n);
  m2 /= nn;
  m3 /= nn;
  m4 /= nn;
  if (!(m2 > 1e-24L * std::max(scale * scale, 1e-280L)))
    throw degenerate_variance("shape_statistics: sample variance is zero");
  const long double s = std::sqrt(m2);
  const double skew = static_cast<double>(m3 / (s * s * s));
  const double kurt = static_cast<double>(m4 / (m2 * m2));
  // Pearson: K >= S^2 + 1 holds for every finite sample.
  if (kurt < skew * skew + 1.0 - 1e-9 * std::max(1.0, kurt))
    throw numerical_error("shape_statistics: Pearson bound K >= S^2 + 1 violated");
  return {skew, kurt};
}

}  // namespace detail

/// Skewness mu3 / s^3 and kurtosis mu4 / s^4 from population central moments,
/// with standard errors from the 10-block spread.
inline ShapeStats shape_statistics(std::span<const double> samples, std::size_t blocks = 10) {
  detail::require(samples.size() >= 4, "shape_statistics: need at least four samples");
  ShapeStats out;
  out.n = samples.size();
  const auto all = detail::standardized_moments(samples.size(), [&](std::size_t i) { return samples[i]; });
  out.skewness = all.skewness;
  out.kurtosis = all.kurtosis;
  if (blocks >= 2 && samples.size() / blocks >= 4) {
    try {
      const auto err = block_errors(samples.size(), [&](std::span<const std::size_t> idx) {
        const auto m = detail::standardized_moments(idx.size(), [&](std::size_t i) { return samples[idx[i]]; });
        Mat v(1, 2);
        v << m.skewness, m.kurtosis;
        return v;
      }, BlockOptions{blocks});
      out.skewness_error = err.standard_error(0, 0);
      out.kurtosis_error = err.standard_error(0, 1);
    } catch (const degenerate_variance&) {
      // A constant block leaves the errors undefined.
    }
  }
  return out;
}

}  // namespace cvsep

#endif  // CVSEP_TOMOGRAPHY_HPP
