#ifndef CVSEP_IO_HPP
#define CVSEP_IO_HPP

#include <array>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"

#include "dephasing.hpp"
#include "ensemble.hpp"
#include "gaussian_state.hpp"
#include "protocol.hpp"
#include "separability.hpp"
#include "tomography.hpp"

namespace cvsep {

inline constexpr std::string_view kToolkitVersion = "0.1.0";

namespace schema {
inline constexpr std::string_view state = "cvsep.state/1";
inline constexpr std::string_view verdict = "cvsep.verdict/1";
inline constexpr std::string_view trace = "cvsep.trace/1";
inline constexpr std::string_view samples = "cvsep.samples/1";
inline constexpr std::string_view tomography = "cvsep.tomography/1";
inline constexpr std::string_view dephase = "cvsep.dephase/1";
inline constexpr std::string_view report = "cvsep.report/1";
inline constexpr std::string_view manifest = "cvsep.manifest/1";
}  // namespace schema

using json = nlohmann::ordered_json;

/// Rejects documents that declare a schema other than `expected`. Documents
/// without a "schema" key are accepted when `optional` is set.
inline void check_schema(const json& doc, std::string_view expected, bool optional = false) {
  if (!doc.is_object()) throw validation_error("expected a JSON object");
  if (!doc.contains("schema")) {
    if (optional) return;
    throw validation_error("document has no \"schema\" field (expected \"" + std::string(expected) + "\")");
  }
  const auto& s = doc.at("schema");
  if (!s.is_string() || s.get<std::string>() != expected)
    throw validation_error("unsupported schema " + s.dump() + " (expected \"" + std::string(expected) + "\")");
}

/// A JSON number, or a decimal string such as "20.90".
inline double parse_number(const json& v, std::string_view what) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    char* end = nullptr;
    errno = 0;
    const double d = std::strtod(s.c_str(), &end);
    if (!s.empty() && end == s.c_str() + s.size() && errno == 0) return d;
  }
  throw validation_error(std::string(what) + ": expected a number, got " + v.dump());
}

inline json matrix_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json vector_to_json(const Vec& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Mat matrix_from_json(const json& rows, std::string_view what) {
  if (!rows.is_array() || rows.empty()) throw validation_error(std::string(what) + ": expected a non-empty array of rows");
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::Index cols = -1;
  Mat m;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array()) throw validation_error(std::string(what) + ": row " + std::to_string(i) + " is not an array");
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      m.resize(n, cols);
    } else if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw validation_error(std::string(what) + ": row " + std::to_string(i) + " has " +
                             std::to_string(row.size()) + " entries, expected " + std::to_string(cols));
    }
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = parse_number(row[static_cast<std::size_t>(j)], what);
  }
  return m;
}

inline Vec vector_from_json(const json& arr, std::string_view what) {
  if (!arr.is_array()) throw validation_error(std::string(what) + ": expected an array");
  Vec v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = parse_number(arr[i], what);
  return v;
}

// --- Gaussian states -------------------------------------------------------

inline json state_to_json(const GaussianState& s) {
  return json{{"schema", schema::state},
              {"n_modes", s.n_modes()},
              {"gamma", matrix_to_json(s.gamma())},
              {"mean", vector_to_json(s.mean())}};
}

/// Reads {"n_modes", "gamma", "mean"}; the mean defaults to zero. Structural
/// problems (odd dimension, asymmetry beyond tolerance, size mismatch) are
/// reported as validation errors.
inline GaussianState state_from_json(const json& doc) {
  check_schema(doc, schema::state, true);
  if (!doc.contains("gamma")) throw validation_error("state: missing \"gamma\"");
  const Mat gamma = matrix_from_json(doc.at("gamma"), "gamma");
  if (gamma.rows() != gamma.cols())
    throw validation_error("state: gamma is " + std::to_string(gamma.rows()) + " x " + std::to_string(gamma.cols()) +
                           ", expected a square matrix");
  if (gamma.rows() % 2 != 0)
    throw validation_error("state: gamma has odd dimension " + std::to_string(gamma.rows()));
  if (doc.contains("n_modes")) {
    const auto& nm = doc.at("n_modes");
    if (!nm.is_number_integer() || nm.get<long long>() * 2 != gamma.rows())
      throw validation_error("state: n_modes " + nm.dump() + " does not match gamma dimension " +
                             std::to_string(gamma.rows()));
  }
  Vec mean = Vec::Zero(gamma.rows());
  if (doc.contains("mean")) {
    mean = vector_from_json(doc.at("mean"), "mean");
    if (mean.size() != gamma.rows())
      throw validation_error("state: mean has length " + std::to_string(mean.size()) + ", expected " +
                             std::to_string(gamma.rows()));
  }
  const double scale = std::max(1.0, max_abs(gamma));
  const double asym = asymmetry(gamma);
  if (asym > kSymmetryTolerance * scale) {
    std::ostringstream msg;
    msg << "state: gamma is not symmetric (max |g_ij - g_ji| = " << asym << ")";
    throw validation_error(msg.str());
  }
  if (!gamma.allFinite() || !mean.allFinite()) throw validation_error("state: entries must be finite");
  return GaussianState(gamma, mean);
}

// --- Verdicts --------------------------------------------------------------

inline json ppt_to_json(const PptVerdict& v) {
  return json{{"eigenvalues", v.eigenvalues},
              {"min_eigenvalue", v.min_eigenvalue},
              {"separable", v.separable},
              {"transposed_mode", v.transposed_mode},
              {"tolerance", v.tolerance}};
}

inline json criterion_to_json(const CriterionPoint& p) {
  return json{{"g", p.gain}, {"var_x_norm", p.var_x_norm}, {"var_p_norm", p.var_p_norm}, {"product", p.product}};
}

inline json classicality_to_json(const ClassicalityVerdict& v) {
  return json{{"eigenvalues", v.eigenvalues}, {"min_gamma_eigenvalue", v.min_gamma_eigenvalue}, {"squeezed", v.squeezed}};
}

// --- Protocol --------------------------------------------------------------

inline json config_to_json(const ProtocolConfig& c) {
  return json{{"r", c.r},
              {"variant", to_string(c.variant)},
              {"bob_loss", c.bob_loss},
              {"detector_gain", c.detector_gain},
              {"injection_order", to_string(c.injection_order)},
              {"gain_grid", {{"lo", c.grid.lo}, {"hi", c.grid.hi}, {"points", c.grid.points}}}};
}

inline ProtocolConfig config_from_json(const json& j) {
  try {
    ProtocolConfig c;
    c.r = parse_number(j.at("r"), "r");
    c.variant = variant_from_string(j.at("variant").get<std::string>());
    c.bob_loss = parse_number(j.at("bob_loss"), "bob_loss");
    c.detector_gain = parse_number(j.at("detector_gain"), "detector_gain");
    if (j.contains("injection_order"))
      c.injection_order = injection_order_from_string(j.at("injection_order").get<std::string>());
    if (j.contains("gain_grid")) {
      const auto& g = j.at("gain_grid");
      c.grid.lo = parse_number(g.at("lo"), "gain_grid.lo");
      c.grid.hi = parse_number(g.at("hi"), "gain_grid.hi");
      c.grid.points = g.at("points").get<std::size_t>();
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw validation_error(std::string("protocol config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw validation_error(std::string("protocol config: ") + e.what());
  }
}

inline json trace_to_json(const ProtocolTrace& t) {
  json stages = json::array();
  stages.push_back({{"name", "resource"}, {"modes", {"A", "B", "C"}}, {"state", state_to_json(t.resource)}});
  stages.push_back({{"name", "after_bs_ac"}, {"modes", {"A'", "B", "C'"}}, {"state", state_to_json(t.after_bs_ac)}});
  stages.push_back({{"name", "after_bs_bc"}, {"modes", {"A'", "B'", "C''"}}, {"state", state_to_json(t.after_bs_bc)}});
  json verdicts = json::array();
  const std::array<const char*, 3> resource_cuts{"A|BC", "B|AC", "C|AB"};
  for (std::size_t i = 0; i < 3; ++i)
    verdicts.push_back({{"stage", "resource"}, {"cut", resource_cuts[i]}, {"ppt", ppt_to_json(t.resource_cuts[i])}});
  verdicts.push_back({{"stage", "after_bs_ac"}, {"cut", "B|A'C'"}, {"ppt", ppt_to_json(t.b_vs_ac)}});
  verdicts.push_back({{"stage", "after_bs_ac"}, {"cut", "C'|A'B"}, {"ppt", ppt_to_json(t.c_vs_ab)}});
  verdicts.push_back({{"stage", "output"}, {"cut", "A'|B'"}, {"ppt", ppt_to_json(t.final_ab)}});
  json curve = json::array();
  for (const auto& p : t.criterion_curve) curve.push_back(criterion_to_json(p));
  json out{{"schema", schema::trace},
           {"config", config_to_json(t.config)},
           {"tolerance", t.tolerance},
           {"stages", stages},
           {"output", state_to_json(t.output)}};
  if (t.uncorrected_output) out["uncorrected_output"] = state_to_json(*t.uncorrected_output);
  out["verdicts"] = verdicts;
  out["criterion_curve"] = curve;
  out["g_opt"] = t.optimum.g_opt;
  out["min_product"] = t.optimum.point.product;
  out["entangled"] = t.optimum.point.product < 1.0;
  return out;
}

// --- Files -----------------------------------------------------------------

inline std::string format_g10(double v) {
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%.10g", v);
  return buf.data();
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

inline json read_json_file(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw validation_error("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

inline GaussianState read_state_file(const std::filesystem::path& path) {
  return state_from_json(read_json_file(path));
}

inline std::string curve_to_csv(const std::vector<CriterionPoint>& curve) {
  std::string out = "g,var_x_norm,var_p_norm,product\n";
  for (const auto& p : curve) {
    out += format_g10(p.gain) + "," + format_g10(p.var_x_norm) + "," + format_g10(p.var_p_norm) + "," +
           format_g10(p.product) + "\n";
  }
  return out;
}

// --- Sample sets -----------------------------------------------------------

inline constexpr std::string_view kSampleCsvHeader = "cell_x,cell_p,mode,quadrature,value";

/// Long-format CSV: one row per (record, mode, quadrature). Records are
/// consecutive blocks of rows in a fixed channel order; cell_x and cell_p
/// hold the hidden displacement of the record (empty when unknown).
inline std::string samples_to_csv(const SampleSet& s) {
  std::string out;
  out.reserve(s.values.size() * 40 + 64);
  out += kSampleCsvHeader;
  out += '\n';
  const bool hidden = s.has_hidden();
  for (std::size_t r = 0; r < s.size(); ++r) {
    const std::string hx = hidden ? format_g10(s.hidden_x[r]) : std::string();
    const std::string hp = hidden ? format_g10(s.hidden_p[r]) : std::string();
    for (std::size_t m = 0; m < s.modes.size(); ++m) {
      for (int q = 0; q < 2; ++q) {
        out += hx;
        out += ',';
        out += hp;
        out += ',';
        out += s.modes[m];
        out += q == 0 ? ",x," : ",p,";
        out += format_g10(s.value(r, 2 * m + static_cast<std::size_t>(q)));
        out += '\n';
      }
    }
  }
  return out;
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

inline double parse_csv_double(std::string_view field, std::size_t line_no) {
  const std::string s(field);
  char* end = nullptr;
  errno = 0;
  const double d = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno != 0 || !std::isfinite(d))
    throw validation_error("samples CSV line " + std::to_string(line_no) + ": invalid number '" + s + "'");
  return d;
}

}  // namespace detail

/// Parses the long-format CSV. The channel layout is taken from the first
/// record (rows up to the first repeated (mode, quadrature) pair).
inline SampleSet samples_from_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    pos = nl + 1;
  }
  if (lines.empty()) throw validation_error("samples CSV is empty");
  if (lines.front() != kSampleCsvHeader)
    throw validation_error("samples CSV header must be '" + std::string(kSampleCsvHeader) + "'");
  if (lines.size() == 1) throw validation_error("samples CSV has no data rows");

  struct Row {
    std::string_view hx, hp, mode, quad;
    double value;
  };
  std::vector<Row> rows;
  rows.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = detail::split_csv_line(lines[i]);
    if (f.size() != 5)
      throw validation_error("samples CSV line " + std::to_string(i + 1) + ": expected 5 fields, got " +
                             std::to_string(f.size()));
    if (f[3] != "x" && f[3] != "p")
      throw validation_error("samples CSV line " + std::to_string(i + 1) + ": quadrature must be x or p");
    rows.push_back({f[0], f[1], f[2], f[3], detail::parse_csv_double(f[4], i + 1)});
  }

  std::size_t layout = 0;
  while (layout < rows.size()) {
    bool repeat = false;
    for (std::size_t j = 0; j < layout; ++j)
      if (rows[j].mode == rows[layout].mode && rows[j].quad == rows[layout].quad) repeat = true;
    if (repeat) break;
    ++layout;
  }
  if (layout % 2 != 0) throw validation_error("samples CSV: every mode needs an x and a p row per record");
  SampleSet s;
  for (std::size_t j = 0; j < layout; j += 2) {
    if (rows[j].mode != rows[j + 1].mode || rows[j].quad != "x" || rows[j + 1].quad != "p")
      throw validation_error("samples CSV: each mode must list its x row followed by its p row");
    s.modes.emplace_back(rows[j].mode);
  }
  if (rows.size() % layout != 0)
    throw validation_error("samples CSV: row count is not a multiple of the " + std::to_string(layout) +
                           "-row record layout");
  const std::size_t n = rows.size() / layout;
  const bool hidden = !rows.front().hx.empty();
  s.values.resize(rows.size());
  if (hidden) {
    s.hidden_x.resize(n);
    s.hidden_p.resize(n);
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < layout; ++j) {
      const auto& row = rows[r * layout + j];
      const std::size_t line_no = r * layout + j + 2;
      if (row.mode != rows[j].mode || row.quad != rows[j].quad)
        throw validation_error("samples CSV line " + std::to_string(line_no) + ": record layout changed");
      if (row.hx.empty() != !hidden || row.hp.empty() != !hidden)
        throw validation_error("samples CSV line " + std::to_string(line_no) + ": hidden values present on some rows only");
      if (hidden) {
        const double hx = detail::parse_csv_double(row.hx, line_no);
        const double hp = detail::parse_csv_double(row.hp, line_no);
        if (j == 0) {
          s.hidden_x[r] = hx;
          s.hidden_p[r] = hp;
        } else if (hx != s.hidden_x[r] || hp != s.hidden_p[r]) {
          throw validation_error("samples CSV line " + std::to_string(line_no) +
                                 ": hidden values differ within one record");
        }
      }
      s.values[r * layout + j] = row.value;
    }
  }
  return s;
}

inline json samples_sidecar(const SampleSet& s) {
  json j{{"schema", schema::samples},
         {"seed", s.seed},
         {"sampling", to_string(s.mode)},
         {"n_outer", s.n_outer},
         {"n_inner", s.n_inner},
         {"records", s.size()},
         {"modes", s.modes},
         {"units", "canonical quadratures, vacuum variance 1/2"}};
  if (s.config) j["config"] = config_to_json(*s.config);
  if (s.correction_fraction) j["correction_fraction"] = *s.correction_fraction;
  return j;
}

/// Applies the sidecar metadata to samples parsed from CSV.
inline void apply_sidecar(SampleSet& s, const json& j) {
  check_schema(j, schema::samples);
  try {
    s.seed = j.at("seed").get<std::uint64_t>();
    s.mode = sampling_mode_from_string(j.at("sampling").get<std::string>());
    s.n_outer = j.at("n_outer").get<std::size_t>();
    s.n_inner = j.at("n_inner").get<std::size_t>();
    if (j.contains("config")) s.config = config_from_json(j.at("config"));
    if (j.contains("correction_fraction")) s.correction_fraction = j.at("correction_fraction").get<double>();
    if (j.contains("records") && j.at("records").get<std::size_t>() != s.size())
      throw validation_error("samples sidecar lists " + j.at("records").dump() + " records, CSV has " +
                             std::to_string(s.size()));
    if (j.contains("modes") && j.at("modes").get<std::vector<std::string>>() != s.modes)
      throw validation_error("samples sidecar mode list does not match the CSV");
  } catch (const json::exception& e) {
    throw validation_error(std::string("samples sidecar: ") + e.what());
  }
}

// --- Digests and manifests -------------------------------------------------

inline std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

inline std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text_file(path)); }

/// Provenance of one command invocation. Contains no timestamps or host data
/// so that identical runs produce identical manifests.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  json config = json::object();
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, sha256
  std::vector<std::pair<std::string, std::string>> outputs;  // file name, sha256

  json to_json() const {
    json in = json::array();
    for (const auto& [p, d] : inputs) in.push_back({{"path", p}, {"sha256", d}});
    json out = json::array();
    for (const auto& [p, d] : outputs) out.push_back({{"file", p}, {"sha256", d}});
    return json{{"schema", schema::manifest},
                {"toolkit_version", kToolkitVersion},
                {"command", command},
                {"argv", argv},
                {"config", config},
                {"seed", seed},
                {"inputs", in},
                {"outputs", out}};
  }

  static RunManifest from_json(const json& j) {
    check_schema(j, schema::manifest);
    try {
      RunManifest m;
      m.command = j.at("command").get<std::string>();
      m.argv = j.at("argv").get<std::vector<std::string>>();
      m.config = j.at("config");
      m.seed = j.at("seed").get<std::uint64_t>();
      for (const auto& e : j.at("inputs")) m.inputs.emplace_back(e.at("path"), e.at("sha256"));
      for (const auto& e : j.at("outputs")) m.outputs.emplace_back(e.at("file"), e.at("sha256"));
      return m;
    } catch (const json::exception& e) {
      throw validation_error(std::string("manifest: ") + e.what());
    }
  }
};

}  // namespace cvsep

#endif  // CVSEP_IO_HPP
