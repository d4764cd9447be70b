// cvsep: command-line front end for the separable-state distribution toolkit.
//
// Exit codes: 0 success, 1 I/O failure, 2 invalid input or usage, 3 numerical failure.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cvsep/cvsep.hpp"

#ifndef CVSEP_REFERENCE_DIR
#define CVSEP_REFERENCE_DIR "reference"
#endif

namespace fs = std::filesystem;
using cvsep::json;

namespace {

constexpr int kExitIo = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitNumerical = 3;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("CVSEP_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used, 0);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw cvsep::validation_error(std::string("CVSEP_SEED is not an unsigned integer: '") + env + "'");
  }
  return 1;
}

// Arguments that do not influence any output are left out of the manifest so
// that runs differing only in them produce identical manifests.
// The effective seed is always recorded so that a replay does not depend on
// the environment.
std::vector<std::string> recorded_argv(const std::vector<std::string>& args,
                                       std::optional<std::uint64_t> seed = std::nullopt) {
  std::vector<std::string> out;
  bool has_seed = false;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a == "--out" || a == "--threads") {
      ++i;
      continue;
    }
    if (a.rfind("--out=", 0) == 0 || a.rfind("--threads=", 0) == 0) continue;
    has_seed = has_seed || a == "--seed" || a.rfind("--seed=", 0) == 0;
    out.push_back(a);
  }
  if (seed && !has_seed) {
    out.push_back("--seed");
    out.push_back(std::to_string(*seed));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> input_digests(const std::vector<fs::path>& paths) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& p : paths) out.emplace_back(p.string(), cvsep::sha256_file(p));
  return out;
}

fs::path manifest_path_for(const fs::path& out_file) {
  fs::path m = out_file;
  m.replace_extension(".manifest.json");
  return m;
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory '" + dir.string() + "'");
}

struct Context {
  std::vector<std::string> args;  // without the program name
};

// Writes a single-document result to stdout, or to `out_file` together with a
// manifest named after it (e.g. report.json -> report.manifest.json).
void emit_json(const json& doc, const std::string& out_file, const Context& ctx, const std::string& command,
               const std::vector<fs::path>& inputs, json config = json::object(),
               std::optional<std::uint64_t> seed = std::nullopt) {
  const auto text = doc.dump(2) + "\n";
  if (out_file.empty()) {
    std::cout << text;
    return;
  }
  cvsep::write_text_file(out_file, text);
  cvsep::RunManifest m;
  m.command = command;
  m.argv = recorded_argv(ctx.args, seed);
  m.config = std::move(config);
  m.seed = seed.value_or(0);
  m.inputs = input_digests(inputs);
  m.outputs = {{fs::path(out_file).filename().string(), cvsep::sha256_hex(text)}};
  cvsep::write_json_file(manifest_path_for(out_file), m.to_json());
}

cvsep::ProtocolConfig protocol_config(double r, const std::string& variant, double loss, double gain,
                                      const std::string& order) {
  cvsep::ProtocolConfig c;
  c.r = r;
  c.variant = cvsep::variant_from_string(variant);
  c.bob_loss = loss;
  c.detector_gain = gain;
  c.injection_order = cvsep::injection_order_from_string(order);
  return c;
}

void add_protocol_options(CLI::App* cmd, double& r, std::string& variant, double& loss, double& gain,
                          std::string& order) {
  cmd->add_option("--r", r, "squeezing parameter")->capture_default_str();
  cmd->add_option("--variant", variant, "displace-b-before-bs | displace-b-after-bs | a-posteriori")
      ->capture_default_str();
  cmd->add_option("--loss", loss, "fraction of B' lost before detection")->capture_default_str();
  cmd->add_option("--gain", gain, "detector response of B' relative to A'")->capture_default_str();
  cmd->add_option("--injection-order", order, "after-loss | before-loss (relocated displacement)")
      ->capture_default_str();
}

// --- run-protocol ----------------------------------------------------------

struct RunProtocolArgs {
  double r = 0.5;
  std::string variant = "displace-b-before-bs";
  double loss = 0.5;
  double gain = 1.0;
  std::string order = "after-loss";
  double g_min = 0.05, g_max = 2.0;
  std::size_t g_points = 200;
  std::uint64_t seed = 0;
  std::string out;
};

int run_protocol_cmd(const RunProtocolArgs& a, const Context& ctx) {
  auto config = protocol_config(a.r, a.variant, a.loss, a.gain, a.order);
  config.grid = {a.g_min, a.g_max, a.g_points};
  const auto trace = cvsep::run_protocol(config);
  const json doc = cvsep::trace_to_json(trace);
  if (a.out.empty()) {
    std::cout << doc.dump(2) << "\n";
    return 0;
  }
  const fs::path dir(a.out);
  ensure_directory(dir);
  const auto trace_text = doc.dump(2) + "\n";
  const auto curve_text = cvsep::curve_to_csv(trace.criterion_curve);
  cvsep::write_text_file(dir / "trace.json", trace_text);
  cvsep::write_text_file(dir / "criterion_curve.csv", curve_text);
  cvsep::RunManifest m;
  m.command = "run-protocol";
  m.argv = recorded_argv(ctx.args, a.seed);
  m.config = cvsep::config_to_json(config);
  m.seed = a.seed;
  m.outputs = {{"trace.json", cvsep::sha256_hex(trace_text)}, {"criterion_curve.csv", cvsep::sha256_hex(curve_text)}};
  cvsep::write_json_file(dir / "manifest.json", m.to_json());
  std::cout << "g_opt " << cvsep::format_g10(trace.optimum.g_opt) << " product "
            << cvsep::format_g10(trace.optimum.point.product) << "\n";
  return 0;
}

// --- analyze ---------------------------------------------------------------

struct AnalyzeArgs {
  std::string file;
  std::size_t mode = 1;
  bool ppt = false, duan = false, physical = false, classical = false;
  double g_min = 0.05, g_max = 2.0;
  std::string out;
};

int analyze_cmd(const AnalyzeArgs& a, const Context& ctx) {
  const auto state = cvsep::read_state_file(a.file);
  const bool all = !(a.ppt || a.duan || a.physical || a.classical);
  json doc{{"schema", cvsep::schema::verdict}, {"input", a.file}, {"n_modes", state.n_modes()}};
  if (all || a.physical) {
    const double m = state.min_physicality_eigenvalue();
    doc["physicality"] = {{"min_eigenvalue", m}, {"physical", m >= -cvsep::kPhysicalityTolerance}};
  }
  if (all || a.ppt) {
    const auto v = cvsep::ppt_test(state, a.mode);
    doc["eigenvalues"] = v.eigenvalues;
    doc["separable"] = v.separable;
    doc["ppt"] = cvsep::ppt_to_json(v);
  }
  if (all || a.duan) {
    if (state.n_modes() != 2) throw cvsep::validation_error("--duan needs a two-mode state");
    const auto opt = cvsep::optimize_gain(state, a.g_min, a.g_max);
    doc["g_opt"] = opt.g_opt;
    doc["product"] = opt.point.product;
    doc["duan"] = cvsep::criterion_to_json(opt.point);
  }
  if (all || a.classical) doc["classicality"] = cvsep::classicality_to_json(cvsep::classicality_check(state));
  std::cout << doc.dump(2) << "\n";
  if (!a.out.empty()) emit_json(doc, a.out, ctx, "analyze", {a.file});
  return 0;
}

// --- dephase ---------------------------------------------------------------

struct DephaseArgs {
  std::string file;
  bool invert = false, forward = false;
  std::vector<double> d;
  std::optional<double> sigma2;
  std::optional<double> sigma2_deg;
  std::string reading = "square-degrees";
  double T = 0.5;
  std::string out;
};

int dephase_cmd(const DephaseArgs& a, const Context& ctx) {
  if (a.invert == a.forward) throw CLI::ValidationError("dephase", "exactly one of --invert or --forward is required");
  if (a.invert && a.d.empty()) throw CLI::RequiredError("--d (required with --invert)");
  if (a.sigma2.has_value() == a.sigma2_deg.has_value())
    throw CLI::ValidationError("dephase", "give exactly one of --sigma2 (rad^2) or --sigma2-deg");
  const double sigma2 =
      a.sigma2 ? *a.sigma2
               : cvsep::phase_variance_from_degrees(*a.sigma2_deg, cvsep::phase_reading_from_string(a.reading));
  const auto state = cvsep::read_state_file(a.file);
  if (state.n_modes() != 2) throw cvsep::validation_error("dephase expects a two-mode state");
  cvsep::Vec d = state.mean();
  if (!a.d.empty()) d = Eigen::Map<const cvsep::Vec>(a.d.data(), 4);
  const cvsep::DephasingParams params(sigma2, a.T);

  cvsep::GaussianState result{cvsep::Mat::Identity(4, 4)};
  if (a.invert) {
    result = cvsep::GaussianState(cvsep::dephase_invert(state.gamma(), d, params), cvsep::Vec::Zero(4));
  } else {
    const auto fw = cvsep::dephase_forward(state.gamma(), d, params);
    result = cvsep::GaussianState(fw.gamma, fw.mean);
  }
  const double phys = result.min_physicality_eigenvalue();
  json doc{{"schema", cvsep::schema::dephase},
           {"direction", a.invert ? "invert" : "forward"},
           {"sigma2_rad2", sigma2},
           {"transmittance", a.T},
           {"d", cvsep::vector_to_json(d)},
           {"state", cvsep::state_to_json(result)},
           {"physicality", {{"min_eigenvalue", phys}, {"physical", phys >= -cvsep::kPhysicalityTolerance}}},
           {"classicality", cvsep::classicality_to_json(cvsep::classicality_check(result))}};
  emit_json(doc, a.out, ctx, "dephase", {a.file},
            {{"direction", a.invert ? "invert" : "forward"}, {"sigma2_rad2", sigma2}, {"transmittance", a.T}});
  return 0;
}

// --- simulate --------------------------------------------------------------

struct SimulateArgs {
  double r = 0.5;
  std::string variant = "displace-b-before-bs";
  double loss = 0.5;
  double gain = 1.0;
  std::string order = "after-loss";
  std::size_t outer = 80;
  std::size_t inner = 20;
  std::uint64_t seed = 0;
  bool grid = false;
  unsigned threads = 1;
  std::string out;
};

int simulate_cmd(const SimulateArgs& a, const Context& ctx) {
  const auto config = protocol_config(a.r, a.variant, a.loss, a.gain, a.order);
  cvsep::EnsembleOptions opt;
  opt.mode = a.grid ? cvsep::SamplingMode::grid : cvsep::SamplingMode::continuous;
  opt.threads = a.threads;
  const auto samples = cvsep::simulate_ensemble(config, a.outer, a.inner, a.seed, opt);
  const fs::path dir(a.out);
  ensure_directory(dir);
  const auto csv = cvsep::samples_to_csv(samples);
  const auto sidecar = cvsep::samples_sidecar(samples).dump(2) + "\n";
  cvsep::write_text_file(dir / "samples.csv", csv);
  cvsep::write_text_file(dir / "samples.json", sidecar);
  cvsep::RunManifest m;
  m.command = "simulate";
  m.argv = recorded_argv(ctx.args, a.seed);
  m.config = cvsep::config_to_json(config);
  m.config["sampling"] = cvsep::to_string(opt.mode);
  m.config["n_outer"] = a.outer;
  m.config["n_inner"] = a.inner;
  m.seed = a.seed;
  m.outputs = {{"samples.csv", cvsep::sha256_hex(csv)}, {"samples.json", cvsep::sha256_hex(sidecar)}};
  cvsep::write_json_file(dir / "manifest.json", m.to_json());
  std::cout << "records " << samples.size() << "\n";
  return 0;
}

// --- tomography ------------------------------------------------------------

struct TomographyArgs {
  std::string in;
  std::string pair = "A',B'";
  std::size_t blocks = 10;
  bool shuffled = false;
  bool correct = false;
  std::optional<double> fraction;
  std::uint64_t seed = 0;
  std::string out;
};

std::string value_pm_error(double value, double error) {
  // Round the value to the second significant digit of its error.
  int decimals = 4;
  if (std::isfinite(error) && error > 0.0)
    decimals = std::clamp(1 - static_cast<int>(std::floor(std::log10(error))), 0, 12);
  std::array<char, 96> buf{};
  std::snprintf(buf.data(), buf.size(), "%.*f ± %.*f", decimals, value, decimals, error);
  return buf.data();
}

int tomography_cmd(const TomographyArgs& a, const Context& ctx) {
  const fs::path csv_path(a.in);
  cvsep::SampleSet samples = cvsep::samples_from_csv(cvsep::read_text_file(csv_path));
  fs::path sidecar = csv_path;
  sidecar.replace_extension(".json");
  const bool have_sidecar = fs::exists(sidecar);
  if (have_sidecar) cvsep::apply_sidecar(samples, cvsep::read_json_file(sidecar));

  const auto comma = a.pair.find(',');
  if (comma == std::string::npos) throw cvsep::validation_error("--pair must look like \"A',B'\"");
  const std::string la = a.pair.substr(0, comma), lb = a.pair.substr(comma + 1);
  samples.mode_index(la);
  samples.mode_index(lb);

  json correction = nullptr;
  if (a.correct) {
    if (!have_sidecar) throw cvsep::validation_error("--correct needs the sidecar '" + sidecar.string() + "'");
    const auto res =
        cvsep::a_posteriori_correct(samples, cvsep::NoisePlan::for_squeezing(samples.config->r), a.fraction);
    samples = res.samples;
    correction = {{"fraction", res.fraction}, {"residual", res.residual}};
  }

  const auto settings = cvsep::canonical_settings();
  auto reconstruct = [&](std::span<const std::size_t> idx) {
    std::vector<cvsep::PairStatistics> stats;
    for (const auto& s : settings) stats.push_back(cvsep::pair_statistics(samples, la, lb, s, idx));
    return cvsep::reconstruct_covariance(stats);
  };
  const auto all = cvsep::all_records(samples);
  const cvsep::Mat gamma = reconstruct(all);
  const auto errs = cvsep::block_errors(samples.size(), reconstruct, {a.blocks, a.shuffled, a.seed});

  json table = json::array();
  for (Eigen::Index i = 0; i < 4; ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < 4; ++j) row.push_back(value_pm_error(gamma(i, j), errs.standard_error(i, j)));
    table.push_back(row);
  }

  json shape = json::array();
  for (const auto& label : {la, lb}) {
    for (int q = 0; q < 2; ++q) {
      const std::size_t ch = samples.channel(label, q);
      std::vector<double> v(samples.size());
      for (std::size_t r = 0; r < samples.size(); ++r) v[r] = samples.value(r, ch);
      const auto st = cvsep::shape_statistics(v, a.blocks);
      shape.push_back({{"mode", label},
                       {"angle_deg", q == 0 ? 0 : 90},
                       {"skewness", st.skewness},
                       {"skewness_error", st.skewness_error},
                       {"kurtosis", st.kurtosis},
                       {"kurtosis_error", st.kurtosis_error},
                       {"n", st.n}});
    }
  }

  const cvsep::GaussianState est(gamma);
  json doc{{"schema", cvsep::schema::tomography},
           {"input", a.in},
           {"pair", {la, lb}},
           {"records", samples.size()},
           {"blocks", errs.blocks},
           {"block_size", errs.block_size},
           {"block_assignment", a.shuffled ? "shuffled" : "contiguous"},
           {"gamma", cvsep::matrix_to_json(gamma)},
           {"errors", cvsep::matrix_to_json(errs.standard_error)},
           {"block_spread", cvsep::matrix_to_json(errs.spread)},
           {"table", table},
           {"shape_stats", shape}};
  if (a.correct) doc["correction"] = correction;
  doc["ppt"] = cvsep::ppt_to_json(cvsep::ppt_test(est, 1));
  const auto opt = cvsep::optimize_gain(est, 0.05, 2.0);
  doc["g_opt"] = opt.g_opt;
  doc["product"] = opt.point.product;
  std::vector<fs::path> inputs{csv_path};
  if (have_sidecar) inputs.push_back(sidecar);
  emit_json(doc, a.out, ctx, "tomography", inputs,
            {{"pair", {la, lb}}, {"blocks", a.blocks}, {"shuffled", a.shuffled}, {"correct", a.correct}},
            a.shuffled ? std::optional<std::uint64_t>(a.seed) : std::nullopt);
  return 0;
}

// --- report ----------------------------------------------------------------

struct ReportArgs {
  std::string reference = CVSEP_REFERENCE_DIR;
  std::string out;
};

int report_cmd(const ReportArgs& a, const Context& ctx) {
  const fs::path ref(a.reference);
  const auto ac = cvsep::read_state_file(ref / "gamma_AC_prime.json");
  const auto ab = cvsep::read_state_file(ref / "gamma_AB_prime.json");
  const auto expected = cvsep::read_json_file(ref / "expected.json");

  json doc{{"schema", cvsep::schema::report}};
  doc["ppt_AC_prime"] = {{"computed", cvsep::ppt_to_json(cvsep::ppt_test(ac, 1))},
                         {"reference", expected.at("ppt_AC_prime_transpose_C")}};
  doc["ppt_AB_prime"] = {{"computed", cvsep::ppt_to_json(cvsep::ppt_test(ab, 1))},
                         {"reference", expected.at("ppt_AB_prime_transpose_B")}};

  const auto& dep = expected.at("dephasing");
  const cvsep::Vec d = cvsep::vector_from_json(dep.at("d_prime"), "d_prime");
  const double t = dep.at("transmittance").get<double>();
  const double deg = dep.at("phase_variance_degrees").get<double>();
  json inversions = json::array();
  for (auto reading : {cvsep::PhaseVarianceReading::square_degrees, cvsep::PhaseVarianceReading::degree_std}) {
    const double s2 = cvsep::phase_variance_from_degrees(deg, reading);
    const cvsep::GaussianState g(cvsep::dephase_invert(ac.gamma(), d, cvsep::DephasingParams(s2, t)));
    inversions.push_back({{"reading", reading == cvsep::PhaseVarianceReading::square_degrees ? "square-degrees"
                                                                                              : "degree-std"},
                          {"sigma2_rad2", s2},
                          {"gamma_AC", cvsep::matrix_to_json(g.gamma())},
                          {"min_physicality_eigenvalue", g.min_physicality_eigenvalue()},
                          {"classicality", cvsep::classicality_to_json(cvsep::classicality_check(g))}});
  }
  doc["dephasing_inversion"] = inversions;

  cvsep::ProtocolConfig config;
  const auto trace = cvsep::run_protocol(config);
  doc["protocol"] = {{"config", cvsep::config_to_json(config)},
                     {"g_opt", trace.optimum.g_opt},
                     {"min_product", trace.optimum.point.product},
                     {"measured_anchor", expected.at("measured_optimum")}};
  doc["measured_duan_AB_prime"] = [&] {
    const auto opt = cvsep::optimize_gain(ab, 0.05, 2.0);
    return json{{"g_opt", opt.g_opt}, {"product", opt.point.product}};
  }();
  emit_json(doc, a.out, ctx, "report",
            {ref / "gamma_AC_prime.json", ref / "gamma_AB_prime.json", ref / "expected.json"});
  return 0;
}

// --- replay ----------------------------------------------------------------

int dispatch(const std::vector<std::string>& args);

int replay_cmd(const std::string& manifest_path, const std::string& out) {
  const auto m = cvsep::RunManifest::from_json(cvsep::read_json_file(manifest_path));
  const bool directory_output = m.command == "run-protocol" || m.command == "simulate";
  if (!directory_output && m.outputs.size() != 1)
    throw cvsep::validation_error("manifest for '" + m.command + "' must list exactly one output");
  for (const auto& [path, digest] : m.inputs) {
    if (cvsep::sha256_file(path) != digest)
      throw cvsep::validation_error("input '" + path + "' has changed since the manifest was written");
  }
  std::vector<std::string> args = m.argv;
  args.push_back("--out");
  if (directory_output) {
    args.push_back(out);
  } else {
    ensure_directory(out);
    args.push_back((fs::path(out) / m.outputs.front().first).string());
  }
  const int rc = dispatch(args);
  if (rc != 0) return rc;
  bool same = true;
  for (const auto& [file, digest] : m.outputs) {
    const auto now = cvsep::sha256_file(fs::path(out) / file);
    std::cout << file << " " << (now == digest ? "identical" : "DIFFERENT") << "\n";
    same = same && now == digest;
  }
  if (!same) throw cvsep::numerical_error("replay produced different outputs");
  return 0;
}

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Gaussian-state toolkit for entanglement distribution with separable states", "cvsep"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cvsep::kToolkitVersion));
  Context ctx{args};
  const std::uint64_t seed = default_seed();

  RunProtocolArgs rp;
  rp.seed = seed;
  auto* run = app.add_subcommand("run-protocol", "trace the three-step protocol and its criterion curve");
  add_protocol_options(run, rp.r, rp.variant, rp.loss, rp.gain, rp.order);
  run->add_option("--g-min", rp.g_min, "lower end of the gain grid")->capture_default_str();
  run->add_option("--g-max", rp.g_max, "upper end of the gain grid")->capture_default_str();
  run->add_option("--g-points", rp.g_points, "gain grid points")->capture_default_str();
  run->add_option("--seed", rp.seed, "seed (recorded; the trace is deterministic)");
  run->add_option("--out", rp.out, "output directory (trace.json, criterion_curve.csv, manifest.json)");

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "separability verdicts for a covariance matrix file");
  analyze->add_option("file", an.file, "state JSON")->required();
  analyze->add_option("--mode", an.mode, "mode to transpose for the PPT test")->capture_default_str();
  analyze->add_flag("--ppt", an.ppt, "PPT test");
  analyze->add_flag("--duan", an.duan, "product criterion with optimized gain");
  analyze->add_flag("--physical", an.physical, "physicality check");
  analyze->add_flag("--classical", an.classical, "classicality (no squeezing) check");
  analyze->add_option("--g-min", an.g_min)->capture_default_str();
  analyze->add_option("--g-max", an.g_max)->capture_default_str();
  analyze->add_option("--out", an.out, "also write the verdict JSON (and its manifest) here");

  DephaseArgs dp;
  auto* dephase = app.add_subcommand("dephase", "phase-noise map before a beam splitter, or its inverse");
  dephase->add_option("file", dp.file, "two-mode state JSON")->required();
  dephase->add_flag("--invert", dp.invert, "recover the covariance before dephasing and mixing");
  dephase->add_flag("--forward", dp.forward, "apply dephasing and the beam splitter");
  dephase->add_option("--d", dp.d, "first moments (4 values)")->expected(4);
  dephase->add_option("--sigma2", dp.sigma2, "phase variance in rad^2");
  dephase->add_option("--sigma2-deg", dp.sigma2_deg, "phase variance quoted in degrees");
  dephase->add_option("--reading", dp.reading, "square-degrees | degree-std")->capture_default_str();
  dephase->add_option("--T", dp.T, "beam splitter transmittance")->capture_default_str();
  dephase->add_option("--out", dp.out, "output file, written with a manifest (stdout if omitted)");

  SimulateArgs sm;
  sm.seed = seed;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo ensemble of the protocol");
  add_protocol_options(simulate, sm.r, sm.variant, sm.loss, sm.gain, sm.order);
  simulate->add_option("--outer", sm.outer, "displacement cells per axis")->capture_default_str();
  simulate->add_option("--inner", sm.inner, "records per cell")->capture_default_str();
  simulate->add_option("--seed", sm.seed, "RNG seed (default $CVSEP_SEED or 1)");
  simulate->add_flag("--grid", sm.grid, "place displacements on a regular grid");
  simulate->add_option("--threads", sm.threads, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  simulate->add_option("--out", sm.out, "output directory")->required();

  TomographyArgs tm;
  tm.seed = seed;
  auto* tomo = app.add_subcommand("tomography", "covariance reconstruction and statistics from samples");
  tomo->add_option("--in", tm.in, "samples CSV (sidecar JSON read from the same stem)")->required();
  tomo->add_option("--pair", tm.pair, "mode pair, e.g. \"A',C'\"")->capture_default_str();
  tomo->add_option("--blocks", tm.blocks, "blocks for the error estimate")->capture_default_str();
  tomo->add_flag("--shuffled", tm.shuffled, "assign records to blocks at random");
  tomo->add_flag("--correct", tm.correct, "apply the a-posteriori noise correction first");
  tomo->add_option("--fraction", tm.fraction, "fixed correction fraction (solved for if omitted)");
  tomo->add_option("--seed", tm.seed, "seed for --shuffled");
  tomo->add_option("--out", tm.out, "output file, written with a manifest (stdout if omitted)");

  ReportArgs rep;
  auto* report = app.add_subcommand("report", "reproduce the reference numbers");
  report->add_option("--reference", rep.reference, "reference data directory")->capture_default_str();
  report->add_option("--out", rep.out, "output file, written with a manifest (stdout if omitted)");

  std::string manifest, replay_out;
  auto* replay = app.add_subcommand("replay", "re-run a manifest and compare output digests");
  replay->add_option("manifest", manifest, "manifest.json")->required();
  replay->add_option("--out", replay_out, "directory for the re-run outputs")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    if (*run) return run_protocol_cmd(rp, ctx);
    if (*analyze) return analyze_cmd(an, ctx);
    if (*dephase) return dephase_cmd(dp, ctx);
    if (*simulate) return simulate_cmd(sm, ctx);
    if (*tomo) return tomography_cmd(tm, ctx);
    if (*report) return report_cmd(rep, ctx);
    if (*replay) return replay_cmd(manifest, replay_out);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }
  return kExitInvalid;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return dispatch(args);
  } catch (const cvsep::validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const cvsep::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  }
}
