#pragma once

// Scenario runner behind the command-line tool: loads a config, builds the
// states, evaluates the witnesses, and renders a deterministic report.

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fockwit/cc_states.hpp"
#include "fockwit/criteria.hpp"
#include "fockwit/fock.hpp"
#include "fockwit/matrix_json.hpp"
#include "fockwit/phase_space.hpp"
#include "fockwit/sweeps.hpp"
#include "fockwit/version.hpp"

namespace fockwit {

/// Invalid configuration: the run never starts (exit code 2).
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The run started but a numerical validation failed (exit code 3).
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline const std::set<std::string>& known_scenarios() {
  static const std::set<std::string> names = {
      "number-correlated", "gaussian-p", "point-mixture-commutator",
      "perturbation",      "conditioning", "sweep"};
  return names;
}

struct ScenarioConfig {
  std::string scenario;
  std::vector<int> cutoff;  // one or two entries; empty = scenario default
  long samples = 100000;
  std::uint64_t seed = 1;
  std::map<std::string, double> tolerances;
  nlohmann::json params = nlohmann::json::object();
  std::string output;  // empty = stdout
  std::string format = "json";

  double tolerance(const std::string& key, double fallback) const {
    const auto it = tolerances.find(key);
    return it == tolerances.end() ? fallback : it->second;
  }

  double param(const std::string& key, double fallback) const {
    if (!params.contains(key)) return fallback;
    return params.at(key).get<double>();
  }

  std::string param_str(const std::string& key, const std::string& fallback) const {
    if (!params.contains(key)) return fallback;
    const auto& v = params.at(key);
    return v.is_string() ? v.get<std::string>() : v.dump();
  }

  void validate() const {
    if (!known_scenarios().count(scenario))
      throw config_error("unknown scenario \"" + scenario + "\"");
    if (cutoff.size() > 2) throw config_error("cutoff: at most two modes");
    for (int d : cutoff)
      if (d < 2) throw config_error("cutoff: every entry must be >= 2");
    if (samples < 1) throw config_error("samples must be >= 1");
    if (format != "json" && format != "csv")
      throw config_error("format must be json or csv");
  }

  static ScenarioConfig from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw config_error("config must be a JSON object");
    ScenarioConfig c;
    try {
      c.scenario = j.value("scenario", std::string());
      if (j.contains("cutoff")) {
        if (j.at("cutoff").is_number_integer())
          c.cutoff = {j.at("cutoff").get<int>()};
        else
          c.cutoff = j.at("cutoff").get<std::vector<int>>();
      }
      c.samples = j.value("samples", c.samples);
      c.seed = j.value("seed", c.seed);
      if (j.contains("tolerances"))
        c.tolerances = j.at("tolerances").get<std::map<std::string, double>>();
      if (j.contains("params")) c.params = j.at("params");
      if (j.contains("distribution")) c.params["distribution"] = j.at("distribution");
      c.output = j.value("output", c.output);
      c.format = j.value("format", c.format);
    } catch (const nlohmann::json::exception& e) {
      throw config_error(std::string("malformed config: ") + e.what());
    }
    c.validate();
    return c;
  }

  nlohmann::json to_json() const {
    return {{"scenario", scenario}, {"cutoff", cutoff},
            {"samples", samples},   {"seed", seed},
            {"tolerances", tolerances}, {"params", params},
            {"output", output},     {"format", format}};
  }
};

struct ScenarioResult {
  std::vector<WitnessReport> witnesses;
  nlohmann::json results = nlohmann::json::object();
  std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct WarningCollector {
  WarningCollector() {
    collected().clear();
    prev_ = set_warning_handler(&collect);
  }
  ~WarningCollector() { set_warning_handler(prev_); }
  static std::vector<std::string>& collected() {
    static thread_local std::vector<std::string> msgs;
    return msgs;
  }
  static void collect(const std::string& msg) { collected().push_back(msg); }
  WarningHandler prev_;
};

inline ModeDims resolve_two_mode(const ScenarioConfig& c, int fallback_a, int fallback_b) {
  if (c.cutoff.empty()) return ModeDims::two(fallback_a, fallback_b);
  if (c.cutoff.size() == 1) return ModeDims::two(c.cutoff[0], c.cutoff[0]);
  return ModeDims::two(c.cutoff[0], c.cutoff[1]);
}

inline int resolve_single_mode(const ScenarioConfig& c, int fallback) {
  if (c.cutoff.empty()) return fallback;
  return c.cutoff[0];
}

inline PointMixtureP two_atom_fixture() {
  return PointMixtureP({{0.5, Complex(1.0, 0.0), Complex(0.0, 0.0)},
                        {0.5, Complex(-1.0, 0.0), Complex(2.0, 0.0)}});
}

inline PointMixtureP point_distribution(const ScenarioConfig& c) {
  if (!c.params.contains("distribution")) return two_atom_fixture();
  PDistribution p = p_distribution_from_json(c.params.at("distribution"));
  if (!std::holds_alternative<PointMixtureP>(p))
    throw config_error(c.scenario + ": distribution must have type \"points\"");
  return std::get<PointMixtureP>(p);
}

inline void check_density(const DensityMatrix& rho, const ScenarioConfig& c,
                          double default_psd_tol, nlohmann::json& results) {
  DensityTolerances tol;
  tol.psd_tol = c.tolerance("psd_tol", default_psd_tol);
  const DensityDiagnostics diag = validate_density(rho, tol);
  results["state_diagnostics"] = {{"hermiticity_residual", diag.hermiticity_residual},
                                  {"trace", diag.trace},
                                  {"min_eigenvalue", diag.min_eigenvalue},
                                  {"trace_deficit", diag.trace_deficit}};
  if (!diag.ok())
    throw numerical_error("state validation failed (min eigenvalue " +
                          std::to_string(diag.min_eigenvalue) + ", psd_tol " +
                          std::to_string(tol.psd_tol) + ")");
}

// ---------------------------------------------------------------------------
// Individual scenarios

inline ScenarioResult run_number_correlated(const ScenarioConfig& c) {
  ScenarioResult out;
  const ModeDims dims = resolve_two_mode(c, 30, 30);
  const double ratio = c.param("ratio", 0.5);
  const int levels = std::min(dims.dim(Mode::a), dims.dim(Mode::b));
  Eigen::VectorXd p;
  try {
    p = geometric_distribution(ratio, levels);
  } catch (const std::invalid_argument& e) {
    throw config_error(std::string("number-correlated: ") + e.what());
  }
  DensityMatrix rho = number_correlated(p, dims);
  check_density(rho, c, 1e-8, out.results);
  WitnessTolerances wt{.base_tol = c.tolerance("base_tol", 1e-10)};
  out.witnesses.push_back(variance_witness(rho, wt));
  out.results["mean_total_number"] =
      out.witnesses.back().diagnostics.at("mean_total_number");
  out.results["variance"] = out.witnesses.back().diagnostics.at("variance");
  out.results["ratio"] = ratio;
  out.results["levels"] = levels;
  return out;
}

inline ScenarioResult run_gaussian_p(const ScenarioConfig& c) {
  ScenarioResult out;
  GaussianP p = GaussianP::thermal(c.param("nbar_a", 0.5), c.param("nbar_b", 1.0));
  if (c.params.contains("distribution")) {
    PDistribution loaded = p_distribution_from_json(c.params.at("distribution"));
    if (!std::holds_alternative<GaussianP>(loaded))
      throw config_error("gaussian-p: distribution must have type \"gaussian\"");
    p = std::get<GaussianP>(loaded);
  }
  // default cutoff per mode from the synthesized mean occupation
  // <n_m> = |mean_m|^2 + tr(cov block m); Gaussian-P marginals have
  // geometric-like number tails at that scale
  const double nbar_a = std::norm(p.mean_alpha()) + p.cov()(0, 0) + p.cov()(1, 1);
  const double nbar_b = std::norm(p.mean_beta()) + p.cov()(2, 2) + p.cov()(3, 3);
  const ModeDims dims = resolve_two_mode(c, suggested_cutoff_thermal(nbar_a),
                                         suggested_cutoff_thermal(nbar_b));

  const int chunk = static_cast<int>(c.param("chunk", 1024));
  DensityMatrix rho = synthesize_state(p, dims, MonteCarlo{c.samples, c.seed, chunk});
  check_density(rho, c, 1e-2, out.results);

  const auto pts = sample(p, c.samples, c.seed);
  const double se = variance_witness_mc_se(pts);
  WitnessTolerances wt{.base_tol = c.tolerance("base_tol", 1e-10),
                       .mc_standard_error = se};
  out.witnesses.push_back(variance_witness(rho, wt));
  out.results["predicted_floor"] = predicted_variance_floor(p);
  out.results["mc_standard_error"] = se;
  out.results["distribution"] = to_json(p);
  return out;
}

inline ScenarioResult run_point_mixture_commutator(const ScenarioConfig& c) {
  ScenarioResult out;
  PointMixtureP p = point_distribution(c);
  const int d0 = suggested_cutoff(p.max_abs_amplitude());
  const ModeDims dims = resolve_two_mode(c, std::max(40, d0), std::max(40, d0));
  DensityMatrix rho = synthesize_state(p, dims);
  check_density(rho, c, 1e-8, out.results);

  WitnessTolerances wt{.base_tol = c.tolerance("base_tol", 1e-10)};
  out.witnesses.push_back(cc_commutator_witness(rho, wt));
  out.witnesses.push_back(variance_witness(rho, wt));

  const Eigen::MatrixXd m =
      commutator_matrix(rho, Povm::vacuum_split(dims.dim(Mode::b)));
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  out.results["commutator_matrix"] = std::move(rows);
  out.results["distribution"] = to_json(p);
  return out;
}

inline ScenarioResult run_perturbation(const ScenarioConfig& c) {
  ScenarioResult out;
  const int d = resolve_single_mode(c, 40);
  const Complex abar(c.param("alpha_re", 0.0), c.param("alpha_im", 0.0));
  const std::string carrier_kind = c.param_str("carrier", "vacuum");
  DensityMatrix carrier = DensityMatrix::from_ket(vacuum_ket(d));
  if (carrier_kind == "thermal")
    carrier = thermal_state(c.param("nbar", 0.5), d);
  else if (carrier_kind == "coherent")
    carrier = DensityMatrix::from_ket(coherent_ket(
        Complex(c.param("carrier_alpha_re", 0.0), c.param("carrier_alpha_im", 0.0)), d));
  else if (carrier_kind != "vacuum")
    throw config_error("perturbation: carrier must be vacuum, thermal, or coherent");

  std::vector<double> eps_list = {1e-3, 1e-2, 1e-1};
  if (c.params.contains("eps")) eps_list = {c.param("eps", 0.1)};
  const double band = c.tolerance("base_tol", 1e-10);
  for (double eps : eps_list) {
    if (!(eps > 0.0) || !(eps < 1.0))
      throw config_error("perturbation: eps must be in (0, 1)");
    DensityMatrix rho = nowhere_dense_perturbation(carrier, abar, eps);
    const auto q_raw = mandel_q(rho);
    const auto q_disp = mandel_q_displaced(rho, abar);
    WitnessReport report;
    report.name = "mandel_q_displaced[eps=" + format_double(eps) + "]";
    report.value = q_disp.value_or(std::numeric_limits<double>::quiet_NaN());
    report.threshold = 0.0;
    if (!q_disp.has_value())
      report.verdict = Verdict::inconclusive;
    else
      report.verdict = (*q_disp < -band) ? Verdict::nonclassical
                                         : Verdict::classical_consistent;
    report.diagnostics = {{"eps", eps},
                          {"mandel_q_raw", q_raw.value_or(
                                               std::numeric_limits<double>::quiet_NaN())},
                          {"trace_deficit", rho.trace_deficit()}};
    out.witnesses.push_back(std::move(report));
  }
  out.results["carrier"] = carrier_kind;
  out.results["alpha"] = {abar.real(), abar.imag()};
  return out;
}

inline ScenarioResult run_conditioning(const ScenarioConfig& c) {
  ScenarioResult out;
  PointMixtureP p = point_distribution(c);
  const int d0 = suggested_cutoff(p.max_abs_amplitude());
  const ModeDims dims = resolve_two_mode(c, std::max(40, d0), std::max(40, d0));
  DensityMatrix rho = synthesize_state(p, dims);
  check_density(rho, c, 1e-8, out.results);

  const int db = dims.dim(Mode::b);
  const Vector v = vacuum_ket(db).amps();
  const Operator element(Matrix(v * v.adjoint()), ModeDims::single(db), true);
  auto [cond_fock, prob_fock] = conditional_state(rho, element);
  auto [cond_p, prob_p] = conditional_P(p, vacuum_response(), Mode::b);
  DensityMatrix resynth = synthesize_marginal(cond_p, Mode::a, dims.dim(Mode::a));

  const double dist = trace_distance(cond_fock.mat(),
                                     Matrix(resynth.mat() / resynth.trace()));
  out.results["probability_fock"] = prob_fock;
  out.results["probability_phase_space"] = prob_p;
  out.results["trace_distance"] = dist;
  out.results["conditional_distribution"] = to_json(cond_p);
  const double tol = c.tolerance("conditioning_tol", 1e-8);
  if (dist > tol)
    throw numerical_error("conditioning routes disagree: trace distance " +
                          std::to_string(dist));
  return out;
}

inline ScenarioResult run_sweep(const ScenarioConfig& c) {
  ScenarioResult out;
  const int draws = static_cast<int>(c.param("draws", 100));
  if (draws < 1) throw config_error("sweep: draws must be >= 1");
  const std::string kind = c.param_str("kind", "all");
  const int cc_cutoff = static_cast<int>(c.param("cc_cutoff", 8));
  bool any = false;
  if (kind == "cc" || kind == "all") {
    const CcSoundnessSweep s = cc_soundness_sweep(draws, c.seed, cc_cutoff);
    out.results["cc_soundness"] = {{"draws", s.draws},
                                   {"violations", s.violations},
                                   {"max_witness", s.max_witness},
                                   {"max_matrix_entry", s.max_matrix_entry}};
    any = true;
  }
  if (kind == "p" || kind == "all") {
    const PSoundnessSweep s = p_soundness_sweep(draws, c.seed);
    out.results["p_soundness"] = {{"draws", s.draws},
                                  {"violations", s.violations},
                                  {"min_witness_margin", s.min_witness_margin},
                                  {"min_q_margin", s.min_q_margin}};
    any = true;
  }
  if (kind == "pmix" || kind == "all") {
    const PmixSeparationSweep s = pmix_separation_sweep(draws, c.seed);
    out.results["pmix_separation"] = {{"draws", s.draws},
                                      {"positive", s.positive},
                                      {"min_value", s.min_value}};
    any = true;
  }
  if (kind == "nc" || kind == "all") {
    const NcSeparationSweep s = nc_separation_sweep(draws, c.seed);
    out.results["nc_separation"] = {{"draws", s.draws},
                                    {"nonclassical", s.nonclassical},
                                    {"max_value", s.max_value}};
    any = true;
  }
  if (!any) throw config_error("sweep: kind must be cc, p, pmix, nc, or all");
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline ScenarioResult run_scenario(const ScenarioConfig& config) {
  config.validate();
  detail::WarningCollector collector;
  ScenarioResult out;
  if (config.scenario == "number-correlated")
    out = detail::run_number_correlated(config);
  else if (config.scenario == "gaussian-p")
    out = detail::run_gaussian_p(config);
  else if (config.scenario == "point-mixture-commutator")
    out = detail::run_point_mixture_commutator(config);
  else if (config.scenario == "perturbation")
    out = detail::run_perturbation(config);
  else if (config.scenario == "conditioning")
    out = detail::run_conditioning(config);
  else if (config.scenario == "sweep")
    out = detail::run_sweep(config);
  else
    throw config_error("unknown scenario \"" + config.scenario + "\"");
  out.warnings = detail::WarningCollector::collected();
  return out;
}

// ---------------------------------------------------------------------------
// Report rendering.  Reports are deterministic functions of (config, seed):
// no timestamps, no environment, keys in sorted order.

inline nlohmann::json report_json(const ScenarioConfig& config,
                                  const ScenarioResult& result) {
  nlohmann::json witnesses = nlohmann::json::array();
  for (const WitnessReport& w : result.witnesses) witnesses.push_back(w.to_json());
  return {{"fockwit_version", version},
          {"config", config.to_json()},
          {"scenario", config.scenario},
          {"witnesses", std::move(witnesses)},
          {"results", result.results},
          {"warnings", result.warnings}};
}

/// One row per witness; diagnostics flattened as key=value pairs.
inline std::string report_csv(const ScenarioConfig& config, const ScenarioResult& result) {
  std::ostringstream os;
  os << "scenario,name,value,threshold,verdict,diagnostics\n";
  for (const WitnessReport& w : result.witnesses) {
    std::string diag;
    for (const auto& [key, value] : w.diagnostics) {
      if (!diag.empty()) diag += ';';
      diag += key + '=' + detail::format_double(value);
    }
    os << config.scenario << ',' << detail::csv_escape(w.name) << ','
       << detail::format_double(w.value) << ',' << detail::format_double(w.threshold)
       << ',' << to_string(w.verdict) << ',' << detail::csv_escape(diag) << '\n';
  }
  return os.str();
}

inline std::string render_report(const ScenarioConfig& config,
                                 const ScenarioResult& result) {
  if (config.format == "csv") return report_csv(config, result);
  return report_json(config, result).dump(2) + "\n";
}

/// Full run: execute, render, write.  Returns the process exit code
/// (0 success regardless of verdicts, 2 invalid config, 3 numerical failure).
inline int run_to_output(const ScenarioConfig& config, std::string* rendered = nullptr) {
  try {
    const ScenarioResult result = run_scenario(config);
    const std::string text = render_report(config, result);
    if (rendered) *rendered = text;
    if (config.output.empty()) {
      std::fputs(text.c_str(), stdout);
    } else {
      std::ofstream out(config.output, std::ios::binary);
      if (!out) throw numerical_error("cannot open output file " + config.output);
      out << text;
    }
    return 0;
  } catch (const config_error& e) {
    std::fprintf(stderr, "fockwit: config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fockwit: error: %s\n", e.what());
    return 3;
  }
}

}  // namespace fockwit
