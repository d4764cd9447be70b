#ifndef CVSEP_ENSEMBLE_HPP
#define CVSEP_ENSEMBLE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "gaussian_state.hpp"
#include "protocol.hpp"
#include "rng.hpp"

namespace cvsep {

enum class SamplingMode { continuous, grid };

inline std::string_view to_string(SamplingMode m) { return m == SamplingMode::grid ? "grid" : "continuous"; }

inline SamplingMode sampling_mode_from_string(std::string_view s) {
  if (s == "grid") return SamplingMode::grid;
  if (s == "continuous") return SamplingMode::continuous;
  throw std::invalid_argument("unknown sampling mode '" + std::string(s) + "'");
}

struct EnsembleOptions {
  SamplingMode mode = SamplingMode::continuous;
  double grid_half_width = 5.0;  // grid spans +-half_width standard deviations per axis
  unsigned threads = 1;
};

/// Simulated measurement records.
///
/// Outcomes are canonical quadratures ([x, p] = i, vacuum variance 1/2), so
/// twice the sample covariance estimates gamma. Each record carries the hidden
/// classical draws (x, p) that displaced it.
struct SampleSet {
  std::uint64_t seed = 0;
  std::optional<ProtocolConfig> config;
  SamplingMode mode = SamplingMode::continuous;
  std::size_t n_outer = 0;
  std::size_t n_inner = 0;
  std::vector<std::string> modes;  // channel pairs (x, p) per mode, in this order
  std::vector<double> values;      // row-major, size() x channels()
  std::vector<double> hidden_x;
  std::vector<double> hidden_p;
  std::optional<double> correction_fraction;

  std::size_t channels() const { return 2 * modes.size(); }
  std::size_t size() const { return channels() == 0 ? 0 : values.size() / channels(); }
  bool has_hidden() const { return !hidden_x.empty() && hidden_x.size() == size() && hidden_p.size() == size(); }

  double value(std::size_t record, std::size_t channel) const { return values[record * channels() + channel]; }
  double& value(std::size_t record, std::size_t channel) { return values[record * channels() + channel]; }

  std::size_t mode_index(std::string_view label) const {
    for (std::size_t i = 0; i < modes.size(); ++i)
      if (modes[i] == label) return i;
    throw std::invalid_argument("sample set has no mode '" + std::string(label) + "'");
  }

  /// Channel of quadrature q (0 = x, 1 = p) of the labelled mode.
  std::size_t channel(std::string_view label, int q) const { return 2 * mode_index(label) + (q == 0 ? 0 : 1); }
};

inline const std::vector<std::string>& protocol_channel_modes() {
  static const std::vector<std::string> labels{"A'", "C'", "B'"};
  return labels;
}

namespace detail {

/// Per-cell record counts for the displacement grid: proportional to the
/// Gaussian weight of the cell, distributed by largest remainder.
inline std::vector<std::size_t> grid_counts(std::size_t n_outer, std::size_t total, double half_width) {
  const std::size_t cells = n_outer * n_outer;
  std::vector<double> w(cells);
  double sum = 0.0;
  for (std::size_t i = 0; i < n_outer; ++i) {
    const double u = -half_width + 2.0 * half_width * (static_cast<double>(i) + 0.5) / static_cast<double>(n_outer);
    for (std::size_t j = 0; j < n_outer; ++j) {
      const double v = -half_width + 2.0 * half_width * (static_cast<double>(j) + 0.5) / static_cast<double>(n_outer);
      w[i * n_outer + j] = std::exp(-0.5 * (u * u + v * v));
      sum += w[i * n_outer + j];
    }
  }
  std::vector<std::size_t> counts(cells);
  std::vector<std::pair<double, std::size_t>> rem(cells);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < cells; ++c) {
    const double exact = static_cast<double>(total) * w[c] / sum;
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[c];
    rem[c] = {exact - std::floor(exact), c};
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++counts[rem[k % cells].second];
  return counts;
}

inline double grid_coordinate(std::size_t i, std::size_t n_outer, double half_width, double sigma) {
  return sigma * (-half_width + 2.0 * half_width * (static_cast<double>(i) + 0.5) / static_cast<double>(n_outer));
}

template <typename Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  threads = std::max(1u, threads);
  if (threads == 1 || n < 2) {
    body(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t lo = std::min(n, t * chunk);
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo < hi) pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// Monte Carlo ensemble of the protocol: n_outer^2 displacement cells with
/// n_inner records each on average. In grid mode the cell values sit on a
/// regular grid and the record counts follow the Gaussian weight of the cell;
/// in continuous mode every record draws its own displacement.
inline SampleSet simulate_ensemble(const ProtocolConfig& config, std::size_t n_outer, std::size_t n_inner,
                                   std::uint64_t seed, const EnsembleOptions& options = {}) {
  config.validate();
  detail::require(n_outer >= 1 && n_inner >= 1, "simulate_ensemble: n_outer and n_inner must be at least 1");
  detail::require(n_outer <= 4096 && n_inner <= (std::size_t{1} << 32) / (n_outer * n_outer),
                  "simulate_ensemble: requested sample count is too large");
  detail::require(std::isfinite(options.grid_half_width) && options.grid_half_width > 0.0,
                  "simulate_ensemble: grid half width must be positive");

  const ChannelModel model = channel_model(config);
  const double sigma = std::sqrt(model.variance);
  const std::size_t total = n_outer * n_outer * n_inner;

  SampleSet out;
  out.seed = seed;
  out.config = config;
  out.mode = options.mode;
  out.n_outer = n_outer;
  out.n_inner = n_inner;
  out.modes = protocol_channel_modes();
  out.values.assign(total * 6, 0.0);
  out.hidden_x.assign(total, 0.0);
  out.hidden_p.assign(total, 0.0);

  std::vector<std::size_t> offsets;  // grid mode: first record of each cell
  if (options.mode == SamplingMode::grid) {
    const auto counts = detail::grid_counts(n_outer, total, options.grid_half_width);
    offsets.resize(counts.size() + 1, 0);
    std::partial_sum(counts.begin(), counts.end(), offsets.begin() + 1);
  }

  const double vac_sd = std::sqrt(0.5);
  const Eigen::Matrix<double, 6, 8> quantum = model.quantum;
  const Eigen::Matrix<double, 6, 2> physical = model.physical;
  detail::parallel_for(total, options.threads, [&](std::size_t lo, std::size_t hi) {
    Eigen::Matrix<double, 8, 1> vac;
    Eigen::Matrix<double, 2, 1> draw;
    for (std::size_t rec = lo; rec < hi; ++rec) {
      std::size_t cell = 0;
      std::size_t index = 0;
      if (options.mode == SamplingMode::grid) {
        cell = static_cast<std::size_t>(std::upper_bound(offsets.begin(), offsets.end(), rec) - offsets.begin()) - 1;
        index = rec - offsets[cell];
      } else {
        cell = rec / n_inner;
        index = rec % n_inner;
      }
      auto rng = record_stream(seed, cell, index);
      std::normal_distribution<double> normal(0.0, 1.0);
      if (options.mode == SamplingMode::grid) {
        draw(0) = detail::grid_coordinate(cell / n_outer, n_outer, options.grid_half_width, sigma);
        draw(1) = detail::grid_coordinate(cell % n_outer, n_outer, options.grid_half_width, sigma);
      } else {
        draw(0) = sigma * normal(rng);
        draw(1) = sigma * normal(rng);
      }
      for (int k = 0; k < 8; ++k) vac(k) = vac_sd * normal(rng);
      const Eigen::Matrix<double, 6, 1> ch = quantum * vac + physical * draw;
      for (int c = 0; c < 6; ++c) out.values[rec * 6 + static_cast<std::size_t>(c)] = ch(c);
      out.hidden_x[rec] = draw(0);
      out.hidden_p[rec] = draw(1);
    }
  });
  return out;
}

inline std::vector<std::size_t> all_records(const SampleSet& samples) {
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

/// Covariance estimate (twice the unbiased sample covariance) and mean of the
/// listed modes over the given records.
inline GaussianState estimate_covariance(const SampleSet& samples, std::span<const std::string> labels,
                                         std::span<const std::size_t> records) {
  detail::require(!labels.empty(), "estimate_covariance: no modes requested");
  detail::require(records.size() >= 2, "estimate_covariance: need at least two records");
  std::vector<std::size_t> ch;
  for (const auto& l : labels) {
    ch.push_back(samples.channel(l, 0));
    ch.push_back(samples.channel(l, 1));
  }
  const auto m = static_cast<Eigen::Index>(ch.size());
  Vec mean = Vec::Zero(m);
  for (auto r : records)
    for (Eigen::Index i = 0; i < m; ++i) mean(i) += samples.value(r, ch[static_cast<std::size_t>(i)]);
  mean /= static_cast<double>(records.size());
  Mat cov = Mat::Zero(m, m);
  Vec dev(m);
  for (auto r : records) {
    for (Eigen::Index i = 0; i < m; ++i) dev(i) = samples.value(r, ch[static_cast<std::size_t>(i)]) - mean(i);
    cov.noalias() += dev * dev.transpose();
  }
  cov *= 2.0 / static_cast<double>(records.size() - 1);
  return GaussianState(symmetrized(cov), mean);
}

inline GaussianState estimate_covariance(const SampleSet& samples, std::span<const std::string> labels) {
  const auto idx = all_records(samples);
  return estimate_covariance(samples, labels, idx);
}

inline GaussianState estimate_covariance(const SampleSet& samples, std::initializer_list<std::string> labels) {
  const std::vector<std::string> l(labels);
  return estimate_covariance(samples, l);
}

struct CorrectionResult {
  SampleSet samples;
  double fraction = 0.0;
  double residual = 0.0;  // mismatch of the corrected loadings against the target
};

/// Digital removal of Bob's classical noise using the hidden displacement
/// values: Bob's own injected contribution is removed from B', then `fraction`
/// of Alice's classical x noise is subtracted from B'_x and the same fraction
/// of her p noise is added to B'_p. Without an explicit fraction the value
/// that reproduces the displace-before-BS covariance is solved for.
inline CorrectionResult a_posteriori_correct(const SampleSet& samples, const NoisePlan& plan,
                                             std::optional<double> fraction = std::nullopt) {
  detail::require(samples.has_hidden(), "a_posteriori_correct: samples carry no hidden displacement values");
  detail::require(samples.config.has_value(), "a_posteriori_correct: samples carry no protocol configuration");
  detail::require(!fraction || std::isfinite(*fraction), "a_posteriori_correct: fraction must be finite");
  const auto& config = *samples.config;
  const auto expected = NoisePlan::for_squeezing(config.r);
  detail::require(std::abs(plan.displacement_variance - expected.displacement_variance) <=
                      1e-12 * std::max(1.0, expected.displacement_variance),
                  "a_posteriori_correct: noise plan variance does not match the samples' squeezing parameter");

  ChannelModel model = channel_model(config, plan);
  const std::size_t bx = samples.channel("B'", 0), bp = samples.channel("B'", 1);

  const bool injected = config.variant != Variant::a_posteriori;
  const Eigen::RowVector2d a_x = model.physical.row(0);
  const Eigen::RowVector2d a_p = model.physical.row(1);
  const Eigen::RowVector2d inj_x = injected ? Eigen::RowVector2d(model.b_injection.row(4)) : Eigen::RowVector2d::Zero();
  const Eigen::RowVector2d inj_p = injected ? Eigen::RowVector2d(model.b_injection.row(5)) : Eigen::RowVector2d::Zero();
  const Eigen::RowVector2d base_x = Eigen::RowVector2d(model.physical.row(4)) - inj_x;
  const Eigen::RowVector2d base_p = Eigen::RowVector2d(model.physical.row(5)) - inj_p;
  const Eigen::RowVector2d t_x = model.target.row(4);
  const Eigen::RowVector2d t_p = model.target.row(5);

  CorrectionResult result;
  if (fraction) {
    result.fraction = *fraction;
  } else {
    const double denom = a_x.squaredNorm() + a_p.squaredNorm();
    if (denom == 0.0) throw numerical_error("a_posteriori_correct: Alice's channels carry no classical noise");
    result.fraction = (a_x.dot(base_x - t_x) - a_p.dot(base_p - t_p)) / denom;
  }
  const double f = result.fraction;
  result.residual = std::max((base_x - f * a_x - t_x).cwiseAbs().maxCoeff(),
                             (base_p + f * a_p - t_p).cwiseAbs().maxCoeff());

  result.samples = samples;
  auto& s = result.samples;
  for (std::size_t rec = 0; rec < s.size(); ++rec) {
    const Eigen::Vector2d h(s.hidden_x[rec], s.hidden_p[rec]);
    s.value(rec, bx) -= inj_x.dot(h) + f * a_x.dot(h);
    s.value(rec, bp) += -inj_p.dot(h) + f * a_p.dot(h);
  }
  s.correction_fraction = f;
  return result;
}

}  // namespace cvsep

#endif  // CVSEP_ENSEMBLE_HPP
