#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "fockwit/scenarios.hpp"
#include "fockwit/sweeps.hpp"
#include "oracles.hpp"

using namespace fockwit;
using Catch::Approx;

namespace {

ScenarioConfig make_config(const nlohmann::json& j) {
  return ScenarioConfig::from_json(j);
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_THROWS_AS(make_config({{"scenario", "frobnicate"}}), config_error);
  CHECK_THROWS_AS(make_config({{"scenario", "sweep"}, {"cutoff", {1}}}), config_error);
  CHECK_THROWS_AS(make_config({{"scenario", "sweep"}, {"samples", 0}}), config_error);
  CHECK_THROWS_AS(make_config({{"scenario", "sweep"}, {"format", "xml"}}), config_error);
  CHECK_THROWS_AS(make_config({{"scenario", "sweep"}, {"cutoff", {8, 8, 8}}}),
                  config_error);
  CHECK_THROWS_AS(make_config(nlohmann::json::array()), config_error);

  ScenarioConfig c = make_config({{"scenario", "number-correlated"},
                                  {"cutoff", 30},
                                  {"seed", 7},
                                  {"tolerances", {{"base_tol", 1e-9}}}});
  CHECK(c.cutoff == std::vector<int>{30});
  CHECK(c.seed == 7);
  CHECK(c.tolerance("base_tol", 0.0) == 1e-9);
  CHECK(c.tolerance("missing", 0.25) == 0.25);
}

TEST_CASE("number-correlated scenario report") {
  ScenarioConfig c = make_config({{"scenario", "number-correlated"}, {"cutoff", 30}});
  ScenarioResult r = run_scenario(c);
  REQUIRE(r.witnesses.size() == 1);
  CHECK(r.witnesses[0].name == "variance_witness");
  CHECK(r.witnesses[0].verdict == Verdict::nonclassical);
  CHECK(r.results.at("variance").get<double>() <= 1e-10);
  CHECK(r.witnesses[0].value <= -1.9);
}

TEST_CASE("point-mixture-commutator scenario pins the fixture") {
  ScenarioConfig c = make_config({{"scenario", "point-mixture-commutator"}});
  ScenarioResult r = run_scenario(c);
  REQUIRE(r.witnesses.size() == 2);
  CHECK(r.witnesses[0].name == "cc_commutator_witness");
  CHECK(r.witnesses[0].value ==
        Approx(oracles::kTwoAtomCommutatorNorm).margin(1e-10));
  CHECK(r.witnesses[0].verdict == Verdict::nonclassical);
  // P-classical input: the variance witness must stay clean
  CHECK(r.witnesses[1].name == "variance_witness");
  CHECK(r.witnesses[1].value >= -1e-8);
  const auto m = r.results.at("commutator_matrix");
  CHECK(m[0][1].get<double>() ==
        Approx(oracles::kTwoAtomCommutatorNorm).margin(1e-10));
}

TEST_CASE("gaussian-p scenario stays inside the widened band") {
  ScenarioConfig c = make_config({{"scenario", "gaussian-p"},
                                  {"samples", 4000},
                                  {"seed", 3},
                                  {"params", {{"nbar_a", 0.3}, {"nbar_b", 0.3}}}});
  ScenarioResult r = run_scenario(c);
  REQUIRE(r.witnesses.size() == 1);
  const WitnessReport& w = r.witnesses[0];
  const double band = w.diagnostics.at("band");
  CHECK(w.value >= -band);
  CHECK(w.verdict != Verdict::nonclassical);
  CHECK(r.results.at("predicted_floor").get<double>() == Approx(0.6).margin(1e-12));
  CHECK(r.results.at("mc_standard_error").get<double>() > 0.0);
}

TEST_CASE("gaussian-p thermal nbar=1 lands on the analytic witness value") {
  // witness value for thermal(x)thermal is nbar_a^2 + nbar_b^2 = 2
  ScenarioConfig c = make_config({{"scenario", "gaussian-p"},
                                  {"samples", 20000},
                                  {"seed", 7},
                                  {"params", {{"nbar_a", 1.0}, {"nbar_b", 1.0}}}});
  ScenarioResult r = run_scenario(c);
  const WitnessReport& w = r.witnesses.at(0);
  const double se = w.diagnostics.at("mc_standard_error");
  CHECK(std::abs(w.value - 2.0) <= 3.0 * se);
}

TEST_CASE("perturbation scenario flags every eps") {
  ScenarioConfig c = make_config({{"scenario", "perturbation"}, {"cutoff", 24}});
  ScenarioResult r = run_scenario(c);
  REQUIRE(r.witnesses.size() == 3);
  for (const WitnessReport& w : r.witnesses) {
    CHECK(w.verdict == Verdict::nonclassical);
    CHECK(w.value == Approx(-w.diagnostics.at("eps")).margin(1e-9));
  }
}

TEST_CASE("perturbation scenario with a thermal carrier matches the oracle") {
  ScenarioConfig c = make_config({{"scenario", "perturbation"},
                                  {"cutoff", 40},
                                  {"params",
                                   {{"carrier", "thermal"},
                                    {"nbar", 0.5},
                                    {"alpha_re", 1.0},
                                    {"alpha_im", 0.5},
                                    {"eps", 0.1}}}});
  ScenarioResult r = run_scenario(c);
  REQUIRE(r.witnesses.size() == 1);
  CHECK(r.witnesses[0].diagnostics.at("mandel_q_raw") ==
        Approx(oracles::kPerturbationFixtureQ).margin(1e-8));
}

TEST_CASE("conditioning scenario cross-checks both routes") {
  ScenarioConfig c = make_config({{"scenario", "conditioning"}});
  ScenarioResult r = run_scenario(c);
  CHECK(r.results.at("trace_distance").get<double>() < 1e-8);
  CHECK(r.results.at("probability_fock").get<double>() ==
        Approx(oracles::kConditioningProbability).margin(1e-10));
  CHECK(r.results.at("probability_phase_space").get<double>() ==
        Approx(oracles::kConditioningProbability).margin(1e-12));
}

TEST_CASE("sweep scenario summarizes all four sweeps") {
  ScenarioConfig c = make_config(
      {{"scenario", "sweep"}, {"seed", 11}, {"params", {{"draws", 10}}}});
  ScenarioResult r = run_scenario(c);
  CHECK(r.results.at("cc_soundness").at("violations").get<int>() == 0);
  CHECK(r.results.at("p_soundness").at("violations").get<int>() == 0);
  CHECK(r.results.at("pmix_separation").at("positive").get<int>() == 10);
  CHECK(r.results.at("nc_separation").at("nonclassical").get<int>() == 10);
}

TEST_CASE("reports are byte-identical for identical config and seed") {
  std::vector<nlohmann::json> configs;
  configs.push_back({{"scenario", "gaussian-p"}, {"samples", 2000}, {"seed", 42}});
  configs.push_back({{"scenario", "number-correlated"}, {"cutoff", 20}});
  configs.push_back(
      {{"scenario", "sweep"}, {"seed", 5}, {"params", {{"draws", 5}, {"kind", "pmix"}}}});
  for (const nlohmann::json& j : configs) {
    ScenarioConfig c = make_config(j);
    const std::string r1 = render_report(c, run_scenario(c));
    const std::string r2 = render_report(c, run_scenario(c));
    CHECK(r1 == r2);
    CHECK(!r1.empty());
  }
  // different seed, different report body
  ScenarioConfig a = make_config(
      {{"scenario", "gaussian-p"}, {"samples", 2000}, {"seed", 1}});
  ScenarioConfig b = make_config(
      {{"scenario", "gaussian-p"}, {"samples", 2000}, {"seed", 2}});
  CHECK(render_report(a, run_scenario(a)) != render_report(b, run_scenario(b)));
}

TEST_CASE("report embeds the resolved config and version") {
  ScenarioConfig c = make_config({{"scenario", "number-correlated"}, {"cutoff", 12}});
  nlohmann::json j = report_json(c, run_scenario(c));
  CHECK(j.at("fockwit_version").get<std::string>() == version);
  CHECK(j.at("config").at("scenario") == "number-correlated");
  CHECK(j.at("config").at("seed").get<std::uint64_t>() == c.seed);
  CHECK(j.at("config").at("cutoff")[0].get<int>() == 12);
}

TEST_CASE("csv report has one row per witness") {
  ScenarioConfig c = make_config(
      {{"scenario", "perturbation"}, {"cutoff", 16}, {"format", "csv"}});
  const std::string csv = render_report(c, run_scenario(c));
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  CHECK(line == "scenario,name,value,threshold,verdict,diagnostics");
  int rows = 0;
  while (std::getline(is, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);  // default eps ladder
  CHECK(csv.find("nonclassical") != std::string::npos);
}

TEST_CASE("run_to_output writes the file and reports exit codes") {
  const std::string path = "/tmp/fockwit_test_report.json";
  std::remove(path.c_str());
  ScenarioConfig ok = make_config(
      {{"scenario", "number-correlated"}, {"cutoff", 8}, {"output", path}});
  CHECK(run_to_output(ok) == 0);
  std::ifstream in(path);
  REQUIRE(in.good());
  nlohmann::json j;
  in >> j;
  CHECK(j.at("scenario") == "number-correlated");
  std::remove(path.c_str());

  // config errors surface as exit code 2 before any run starts
  ScenarioConfig bad = ok;
  bad.scenario = "nope";
  CHECK(run_to_output(bad) == 2);

  // a numerical validation failure surfaces as exit code 3; an impossible
  // consistency tolerance forces the conditioning cross-check to fail
  ScenarioConfig strict = make_config(
      {{"scenario", "conditioning"}, {"tolerances", {{"conditioning_tol", 1e-30}}}});
  CHECK(run_to_output(strict) == 3);
}

TEST_CASE("scenario warnings are captured into the report") {
  // a deliberately tight cutoff triggers truncation warnings
  ScenarioConfig c = make_config({{"scenario", "gaussian-p"},
                                  {"samples", 500},
                                  {"seed", 4},
                                  {"cutoff", {4, 4}},
                                  {"params", {{"nbar_a", 1.5}, {"nbar_b", 1.5}}},
                                  {"tolerances", {{"psd_tol", 1.0}}}});
  ScenarioResult r = run_scenario(c);
  CHECK(!r.warnings.empty());
}

TEST_CASE("sweeps are reproducible from the master seed") {
  const CcSoundnessSweep a = cc_soundness_sweep(5, 123);
  const CcSoundnessSweep b = cc_soundness_sweep(5, 123);
  CHECK(a.max_witness == b.max_witness);
  const PmixSeparationSweep p1 = pmix_separation_sweep(5, 9);
  const PmixSeparationSweep p2 = pmix_separation_sweep(5, 9);
  CHECK(p1.min_value == p2.min_value);
}
