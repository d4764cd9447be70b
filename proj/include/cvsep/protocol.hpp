#ifndef CVSEP_PROTOCOL_HPP
#define CVSEP_PROTOCOL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gaussian_state.hpp"
#include "separability.hpp"

namespace cvsep {

/// Slots of the three-mode protocol state. After the first beam splitter the
/// slots hold (A', B, C'); after the second one (A', B', C'').
namespace slot {
inline constexpr std::size_t A = 0;
inline constexpr std::size_t B = 1;
inline constexpr std::size_t C = 2;
}  // namespace slot

/// Where the displacement of Bob's mode happens.
enum class Variant { displace_b_before_bs, displace_b_after_bs, a_posteriori };

/// For the relocated displacement: injected on B' before or after Bob's loss.
/// The injected amplitude is scaled so both orderings give the same output.
enum class InjectionOrder { after_loss, before_loss };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::displace_b_before_bs: return "displace_b_before_bs";
    case Variant::displace_b_after_bs: return "displace_b_after_bs";
    case Variant::a_posteriori: return "a_posteriori";
  }
  return "unknown";
}

namespace detail {

inline std::string underscored(std::string_view s) {
  std::string out(s);
  std::replace(out.begin(), out.end(), '-', '_');
  return out;
}

}  // namespace detail

/// Accepts the enumerator name with '_' or '-' separators, or "before" / "after".
inline Variant variant_from_string(std::string_view text) {
  const auto s = detail::underscored(text);
  if (s == "displace_b_before_bs" || s == "before") return Variant::displace_b_before_bs;
  if (s == "displace_b_after_bs" || s == "after") return Variant::displace_b_after_bs;
  if (s == "a_posteriori") return Variant::a_posteriori;
  throw std::invalid_argument("unknown protocol variant '" + std::string(text) + "'");
}

inline std::string_view to_string(InjectionOrder o) {
  return o == InjectionOrder::after_loss ? "after_loss" : "before_loss";
}

inline InjectionOrder injection_order_from_string(std::string_view text) {
  const auto s = detail::underscored(text);
  if (s == "after_loss") return InjectionOrder::after_loss;
  if (s == "before_loss") return InjectionOrder::before_loss;
  throw std::invalid_argument("unknown injection order '" + std::string(text) + "'");
}

struct GainGrid {
  double lo = 0.05;
  double hi = 2.0;
  std::size_t points = 200;
};

struct ProtocolConfig {
  double r = 0.5;
  Variant variant = Variant::displace_b_before_bs;
  double bob_loss = 0.5;       // fraction of B' power lost at Bob's beam splitter
  double detector_gain = 1.0;  // response of Bob's detector relative to Alice's
  InjectionOrder injection_order = InjectionOrder::after_loss;
  GainGrid grid;

  void validate() const {
    detail::require(std::isfinite(r) && r >= 0.0, "protocol: squeezing parameter r must be finite and >= 0");
    detail::require(std::isfinite(bob_loss) && bob_loss >= 0.0 && bob_loss <= 1.0,
                    "protocol: bob_loss must lie in [0, 1]");
    detail::require(std::isfinite(detector_gain) && detector_gain > 0.0,
                    "protocol: detector_gain must be finite and positive");
    detail::require(std::isfinite(grid.lo) && std::isfinite(grid.hi) && grid.lo < grid.hi && grid.points >= 2,
                    "protocol: gain grid needs lo < hi and at least two points");
  }
};

/// Correlated classical displacements of the resource state:
///   p_A -> p_A - p,  x_C -> x_C + x,  x_B -> x_B + sqrt(2) x,  p_B -> p_B + sqrt(2) p,
/// with x, p independent zero-mean Gaussians of variance (e^{2r} - 1) / 2.
struct NoisePlan {
  double displacement_variance = 0.0;
  /// 6 x 2 loadings: rows (x_A, p_A, x_B, p_B, x_C, p_C), columns (x, p).
  Mat injections = Mat::Zero(6, 2);

  static NoisePlan for_squeezing(double r) {
    detail::require(std::isfinite(r) && r >= 0.0, "noise plan: r must be finite and >= 0");
    NoisePlan plan;
    plan.displacement_variance = std::expm1(2.0 * r) / 2.0;
    const double root2 = std::sqrt(2.0);
    plan.injections(1, 1) = -1.0;   // p_A - p
    plan.injections(2, 0) = root2;  // x_B + sqrt(2) x
    plan.injections(3, 1) = root2;  // p_B + sqrt(2) p
    plan.injections(4, 0) = 1.0;    // x_C + x
    return plan;
  }

  /// 2 x 2 block of the loadings for one mode.
  Mat mode_injection(std::size_t mode) const {
    detail::require(mode < 3, "noise plan: mode index out of range");
    return injections.block(static_cast<Eigen::Index>(2 * mode), 0, 2, 2);
  }

  Mat only_mode(std::size_t mode) const {
    Mat out = Mat::Zero(6, 2);
    out.block(static_cast<Eigen::Index>(2 * mode), 0, 2, 2) = mode_injection(mode);
    return out;
  }

  Mat without_mode(std::size_t mode) const { return injections - only_mode(mode); }
};

/// Quantum Gaussian state plus classical displacement loadings: the ensemble
/// covariance is gamma + 2 v L L^T for displacement variance v.
struct ClassicallyDisplacedState {
  GaussianState quantum;
  Mat loadings;  // dim x 2
  double variance = 0.0;

  GaussianState mixture() const {
    return GaussianState(quantum.gamma() + 2.0 * variance * loadings * loadings.transpose(), quantum.mean());
  }
};

/// Bob's attenuation modelled as a beam splitter with a vacuum ancilla that is
/// traced out afterwards.
inline GaussianState apply_loss(const GaussianState& state, std::size_t mode, double transmittance) {
  detail::require(std::isfinite(transmittance) && transmittance >= 0.0 && transmittance <= 1.0,
                  "apply_loss: transmittance must lie in [0, 1]");
  detail::require(mode < state.n_modes(), "apply_loss: mode index out of range");
  const std::size_t n = state.n_modes();
  const auto widened = apply_symplectic(tensor(state, vacuum_state(1)), beam_splitter(transmittance), {mode, n});
  std::vector<std::size_t> keep(n);
  for (std::size_t i = 0; i < n; ++i) keep[i] = i;
  return widened.reduced(keep);
}

/// Multiplies one mode's quadratures by `factor` (detector response). Not a
/// symplectic map; used only on measured outputs.
inline GaussianState scale_mode(const GaussianState& state, std::size_t mode, double factor) {
  detail::require(mode < state.n_modes(), "scale_mode: mode index out of range");
  Mat scale = Mat::Identity(state.dim(), state.dim());
  scale(static_cast<Eigen::Index>(2 * mode), static_cast<Eigen::Index>(2 * mode)) = factor;
  scale(static_cast<Eigen::Index>(2 * mode + 1), static_cast<Eigen::Index>(2 * mode + 1)) = factor;
  return GaussianState(scale * state.gamma() * scale.transpose(), scale * state.mean());
}

namespace detail {

inline Mat apply_to_loadings(const SymplecticOp& op, std::initializer_list<std::size_t> modes,
                             const Mat& loadings, std::size_t total_modes) {
  return op.embedded(std::span<const std::size_t>(modes.begin(), modes.size()), total_modes) * loadings;
}

inline Mat attenuate_loadings(Mat loadings, std::size_t mode, double transmittance) {
  loadings.middleRows(static_cast<Eigen::Index>(2 * mode), 2) *= std::sqrt(transmittance);
  return loadings;
}

inline Mat quantum_resource_gamma(double r) {
  Mat g = Mat::Identity(6, 6);
  g.topLeftCorner(2, 2) = squeezed_vacuum(r, SqueezeAxis::momentum).gamma();
  g.bottomRightCorner(2, 2) = squeezed_vacuum(r, SqueezeAxis::position).gamma();
  return g;
}

}  // namespace detail

/// Fully separable resource state with modes ordered (A, B, C): A
/// momentum-squeezed, B vacuum, C position-squeezed, all carrying the
/// correlated displacements of NoisePlan.
inline GaussianState build_resource_state(double r) {
  detail::require(std::isfinite(r) && r >= 0.0, "build_resource_state: r must be finite and >= 0");
  const auto plan = NoisePlan::for_squeezing(r);
  return ClassicallyDisplacedState{GaussianState(detail::quantum_resource_gamma(r)), plan.injections,
                                   plan.displacement_variance}
      .mixture();
}

struct ProtocolTrace {
  ProtocolConfig config;
  double tolerance = kPhysicalityTolerance;

  GaussianState resource{Mat::Identity(6, 6)};      // (A, B, C)
  GaussianState after_bs_ac{Mat::Identity(6, 6)};   // (A', B, C')
  GaussianState after_bs_bc{Mat::Identity(6, 6)};   // (A', B', C''), Bob's loss applied
  GaussianState output{Mat::Identity(4, 4)};        // (A', B') as measured
  std::optional<GaussianState> uncorrected_output;  // a_posteriori: before digital correction

  std::array<PptVerdict, 3> resource_cuts;  // A | BC, B | AC, C | AB
  PptVerdict b_vs_ac;                       // B | A'C'
  PptVerdict c_vs_ab;                       // C' | A'B
  PptVerdict final_ab;                      // A' | B'

  std::vector<CriterionPoint> criterion_curve;
  GainOptimum optimum;
};

/// Linear response of the measured channels (A'x, A'p, C'x, C'p, B'x, B'p):
/// channels = quantum * vacuum_noise + loadings * (x, p). Vacuum noise has 8
/// components (A, B, C, loss ancilla), each with canonical variance 1/2.
struct ChannelModel {
  Mat quantum;          // 6 x 8
  Mat physical;         // 6 x 2: classical loadings physically present in the channels
  Mat b_injection;      // 6 x 2: contribution of Bob's own displacement
  Mat target;           // 6 x 2: loadings of the displace-before-BS protocol
  double variance = 0.0;
};

inline ChannelModel channel_model(const ProtocolConfig& config, const NoisePlan& plan) {
  config.validate();
  detail::require(plan.injections.rows() == 6 && plan.injections.cols() == 2,
                  "channel_model: noise plan loadings must be 6 x 2");
  const double eta = 1.0 - config.bob_loss;
  const auto bs = beam_splitter(0.5);
  const auto swap = mode_swap();

  // Stage maps on the 3-mode vector.
  Mat squeeze = Mat::Identity(6, 6);
  squeeze(0, 0) = std::exp(config.r);
  squeeze(1, 1) = std::exp(-config.r);
  squeeze(4, 4) = std::exp(-config.r);
  squeeze(5, 5) = std::exp(config.r);
  const std::array<std::size_t, 2> ac{slot::A, slot::C};
  const std::array<std::size_t, 2> bc{slot::B, slot::C};
  const Mat s_ac = bs.embedded(ac, 3);
  const Mat s_bc = swap.embedded(bc, 3) * bs.embedded(bc, 3);

  auto to_channels = [&](const Mat& three_mode_ac, const Mat& three_mode_final, const Mat& ancilla) {
    Mat out(6, three_mode_ac.cols());
    out.middleRows(0, 2) = three_mode_ac.middleRows(0, 2);
    out.middleRows(2, 2) = three_mode_ac.middleRows(4, 2);
    out.middleRows(4, 2) = config.detector_gain * (std::sqrt(eta) * three_mode_final.middleRows(2, 2) + ancilla);
    return out;
  };

  ChannelModel m;
  m.variance = plan.displacement_variance;

  Mat q_ac = Mat::Zero(6, 8);
  q_ac.leftCols(6) = s_ac * squeeze;
  const Mat q_final = s_bc * q_ac;
  Mat q_anc = Mat::Zero(2, 8);
  q_anc(0, 6) = std::sqrt(1.0 - eta);
  q_anc(1, 7) = std::sqrt(1.0 - eta);
  m.quantum = to_channels(q_ac, q_final, q_anc);

  const Mat zero_anc = Mat::Zero(2, 2);
  const Mat base_ac = s_ac * plan.without_mode(slot::B);
  m.physical = to_channels(base_ac, s_bc * base_ac, zero_anc);
  const Mat b_only = plan.only_mode(slot::B);
  m.b_injection = to_channels(s_ac * b_only, s_bc * s_ac * b_only, zero_anc);
  m.target = m.physical + m.b_injection;
  if (config.variant != Variant::a_posteriori) m.physical = m.target;
  return m;
}

inline ChannelModel channel_model(const ProtocolConfig& config) {
  return channel_model(config, NoisePlan::for_squeezing(config.r));
}

inline ProtocolTrace run_protocol(const ProtocolConfig& config) {
  config.validate();
  ProtocolTrace trace;
  trace.config = config;

  const auto plan = NoisePlan::for_squeezing(config.r);
  const bool b_first = config.variant == Variant::displace_b_before_bs;
  const double eta = 1.0 - config.bob_loss;

  ClassicallyDisplacedState st{GaussianState(detail::quantum_resource_gamma(config.r)),
                               b_first ? plan.injections : plan.without_mode(slot::B),
                               plan.displacement_variance};
  Mat b_pending = b_first ? Mat::Zero(6, 2) : plan.only_mode(slot::B);

  trace.resource = st.mixture();
  for (std::size_t m = 0; m < 3; ++m) trace.resource_cuts[m] = ppt_test(trace.resource, m);

  // Alice: BS_AC on (A, C).
  const auto bs = beam_splitter(0.5);
  st.quantum = apply_symplectic(st.quantum, bs, {slot::A, slot::C});
  st.loadings = detail::apply_to_loadings(bs, {slot::A, slot::C}, st.loadings, 3);
  trace.after_bs_ac = st.mixture();
  trace.b_vs_ac = ppt_test(trace.after_bs_ac, slot::B);
  trace.c_vs_ab = ppt_test(trace.after_bs_ac, slot::C);

  // Bob: BS_BC on (B, C'). The port transmitting C' is B'; swap it into slot B.
  const auto swap = mode_swap();
  st.quantum = apply_symplectic(apply_symplectic(st.quantum, bs, {slot::B, slot::C}), swap, {slot::B, slot::C});
  st.loadings = detail::apply_to_loadings(swap, {slot::B, slot::C},
                                          detail::apply_to_loadings(bs, {slot::B, slot::C}, st.loadings, 3), 3);
  // Image of Bob's displacement on B' when it is relocated behind BS_BC.
  Mat relocated = detail::apply_to_loadings(
      swap, {slot::B, slot::C}, detail::apply_to_loadings(bs, {slot::B, slot::C}, b_pending, 3), 3);
  relocated.topRows(2).setZero();
  relocated.bottomRows(2).setZero();

  const Mat uncorrected_loadings = detail::attenuate_loadings(st.loadings, slot::B, eta);
  if (!b_first && config.injection_order == InjectionOrder::before_loss) st.loadings += relocated;
  st.quantum = apply_loss(st.quantum, slot::B, eta);
  st.loadings = detail::attenuate_loadings(st.loadings, slot::B, eta);
  if (!b_first && config.injection_order == InjectionOrder::after_loss)
    st.loadings += detail::attenuate_loadings(relocated, slot::B, eta);
  trace.after_bs_bc = st.mixture();

  trace.output = scale_mode(trace.after_bs_bc.reduced({slot::A, slot::B}), 1, config.detector_gain);
  if (config.variant == Variant::a_posteriori) {
    const ClassicallyDisplacedState raw{st.quantum, uncorrected_loadings, st.variance};
    trace.uncorrected_output = scale_mode(raw.mixture().reduced({slot::A, slot::B}), 1, config.detector_gain);
  }
  trace.final_ab = ppt_test(trace.output, 1);
  trace.criterion_curve = criterion_curve(trace.output, config.grid.lo, config.grid.hi, config.grid.points);
  trace.optimum = optimize_gain(trace.output, config.grid.lo, config.grid.hi);
  return trace;
}

}  // namespace cvsep

#endif  // CVSEP_PROTOCOL_HPP
