#ifndef CVSEP_SEPARABILITY_HPP
#define CVSEP_SEPARABILITY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "gaussian_state.hpp"
#include "golden_section.hpp"

namespace cvsep {

/// Eigenvalues of gamma^{T_mode} + i*Omega. For N > 2 modes this decides the
/// bipartition of `mode` against all other modes.
struct PptVerdict {
  std::vector<double> eigenvalues;  // descending
  double min_eigenvalue = 0.0;
  bool separable = false;
  std::size_t transposed_mode = 0;
  double tolerance = kPhysicalityTolerance;
};

/// Normalized variances of g x_A + x_B and g p_A - p_B.
struct CriterionPoint {
  double gain = 0.0;
  double var_x_norm = 0.0;
  double var_p_norm = 0.0;
  double product = 0.0;
};

struct GainOptimum {
  double g_opt = 0.0;
  CriterionPoint point;
  bool flat = false;
};

struct ClassicalityVerdict {
  double min_gamma_eigenvalue = 0.0;
  bool squeezed = false;
  std::vector<double> eigenvalues;
};

inline PptVerdict ppt_test(const GaussianState& state, std::size_t mode) {
  detail::require(state.n_modes() >= 2, "ppt_test: needs a state with at least two modes");
  detail::require(mode < state.n_modes(), "ppt_test: mode index " + std::to_string(mode) + " out of range");
  PptVerdict v;
  v.eigenvalues = hermitian_eigenvalues(partial_transpose(state.gamma(), mode), symplectic_form(state.n_modes()));
  v.min_eigenvalue = v.eigenvalues.back();
  v.separable = v.min_eigenvalue >= -kPhysicalityTolerance;
  v.transposed_mode = mode;
  return v;
}

/// Product of the variances of g x_A + x_B and g p_A - p_B, each divided by
/// the vacuum value g^2 + 1 so that the separability boundary is 1 for every g.
inline CriterionPoint duan_product(const GaussianState& state, double g) {
  detail::require(state.n_modes() == 2, "duan_product: needs a two-mode state");
  detail::require(std::isfinite(g), "duan_product: gain must be finite");
  Vec u(4), v(4);
  u << g, 0.0, 1.0, 0.0;
  v << 0.0, g, 0.0, -1.0;
  const double norm = g * g + 1.0;
  CriterionPoint pt;
  pt.gain = g;
  pt.var_x_norm = quadratic_form_variance(state, {u, g}) / norm;
  pt.var_p_norm = quadratic_form_variance(state, {v, g}) / norm;
  pt.product = pt.var_x_norm * pt.var_p_norm;
  return pt;
}

/// Minimizes the Duan product over g in [g_lo, g_hi]. A flat objective
/// returns the bracket midpoint.
inline GainOptimum optimize_gain(const GaussianState& state, double g_lo, double g_hi, double tol = 1e-6) {
  detail::require(std::isfinite(g_lo) && std::isfinite(g_hi) && g_lo < g_hi,
                  "optimize_gain: bracket must satisfy g_lo < g_hi");
  auto objective = [&](double g) { return duan_product(state, g).product; };

  constexpr int kProbe = 17;
  double lo_val = objective(g_lo);
  double hi_val = lo_val;
  for (int i = 1; i < kProbe; ++i) {
    const double v = objective(g_lo + (g_hi - g_lo) * i / (kProbe - 1));
    lo_val = std::min(lo_val, v);
    hi_val = std::max(hi_val, v);
  }
  if (!std::isfinite(lo_val) || !std::isfinite(hi_val))
    throw std::invalid_argument("optimize_gain: criterion is not finite on the bracket");

  GainOptimum out;
  if (hi_val - lo_val <= 1e-12 * std::max(1.0, std::abs(hi_val))) {
    out.g_opt = 0.5 * (g_lo + g_hi);
    out.point = duan_product(state, out.g_opt);
    out.flat = true;
    return out;
  }
  const auto m = bracketed_minimize(objective, g_lo, g_hi, tol);
  out.g_opt = m.argmin;
  out.point = duan_product(state, m.argmin);
  return out;
}

inline std::vector<CriterionPoint> criterion_curve(const GaussianState& state, double g_lo, double g_hi,
                                                   std::size_t points) {
  detail::require(points >= 2 && g_lo < g_hi, "criterion_curve: need at least two points on a valid range");
  std::vector<CriterionPoint> curve;
  curve.reserve(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double g = g_lo + (g_hi - g_lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    curve.push_back(duan_product(state, g));
  }
  return curve;
}

/// A physical state whose covariance has no eigenvalue below one is a
/// mixture of coherent states.
inline ClassicalityVerdict classicality_check(const GaussianState& state) {
  ClassicalityVerdict v;
  v.eigenvalues = symmetric_eigenvalues(state.gamma());
  v.min_gamma_eigenvalue = v.eigenvalues.back();
  v.squeezed = v.min_gamma_eigenvalue < 1.0 - kPhysicalityTolerance;
  return v;
}

}  // namespace cvsep

#endif  // CVSEP_SEPARABILITY_HPP
