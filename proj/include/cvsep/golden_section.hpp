#ifndef CVSEP_GOLDEN_SECTION_HPP
#define CVSEP_GOLDEN_SECTION_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace cvsep {

struct ScalarMinimum {
  double argmin;
  double value;
  int iterations;
};

/// Golden-section search for a minimum of a unimodal `f` on [lo, hi]; stops
/// once the bracket is narrower than `tol`.
template <typename F>
ScalarMinimum golden_section_minimize(F&& f, double lo, double hi, double tol = 1e-6, int max_iter = 500) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("golden_section_minimize: bracket must satisfy lo < hi");
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  int it = 0;
  while (b - a > tol && it < max_iter) {
    ++it;
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, f(x), it};
}

/// Scans `samples` evenly spaced points, then refines around the best one
/// with golden-section search. Handles objectives that are unimodal only near
/// their minimum.
template <typename F>
ScalarMinimum bracketed_minimize(F&& f, double lo, double hi, double tol = 1e-6, std::size_t samples = 64) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("bracketed_minimize: bracket must satisfy lo < hi");
  if (samples < 3) samples = 3;
  const double step = (hi - lo) / static_cast<double>(samples - 1);
  std::size_t best = 0;
  double best_val = f(lo);
  for (std::size_t i = 1; i < samples; ++i) {
    const double v = f(lo + step * static_cast<double>(i));
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  const double a = best == 0 ? lo : lo + step * static_cast<double>(best - 1);
  const double b = best + 1 >= samples ? hi : lo + step * static_cast<double>(best + 1);
  auto refined = golden_section_minimize(f, a, b, tol);
  if (best_val < refined.value) return {lo + step * static_cast<double>(best), best_val, refined.iterations};
  return refined;
}

}  // namespace cvsep

#endif  // CVSEP_GOLDEN_SECTION_HPP
