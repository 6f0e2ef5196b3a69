#include "test_support.hpp"

#include "gridform/harness.hpp"
#include "gridform/types.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <string>

using namespace gridform;

namespace {

RunConfig base_config(const std::string& command) {
  RunConfig cfg;
  cfg.command = command;
  cfg.case_path = ts::toy_path();
  return cfg;
}

const std::string* artifact(const ArtifactSet& as, const std::string& name) {
  for (const auto& [n, bytes] : as.files)
    if (n == name) return &bytes;
  return nullptr;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GRIDFORM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return (status >> 8) & 0xff;
}

}  // namespace

TEST_CASE("the configuration echo is stable, single-line JSON") {
  RunConfig cfg = base_config("analyze");
  cfg.perturb = {{"delta_g1", 1e-4}};
  const std::string echo = config_echo(cfg);
  CHECK(echo.find('\n') == std::string::npos);
  nlohmann::json j = nlohmann::json::parse(echo);
  CHECK(j["command"] == "analyze");
  CHECK(j["band_lo"].get<double>() == doctest::Approx(0.1));
  CHECK(j["perturb"][0] == "delta_g1=0.0001");
  CHECK_FALSE(j.contains("threads"));
  CHECK(config_echo(cfg) == echo);
}

TEST_CASE("analyze produces traceable, rerun-stable artifacts") {
  RunConfig cfg = base_config("analyze");
  ArtifactSet a = analyze_artifacts(cfg);
  ArtifactSet b = analyze_artifacts(cfg);
  CHECK(a.exit_code == 0);
  REQUIRE(a.files.size() == 2);
  CHECK(a.summary == b.summary);
  for (size_t i = 0; i < a.files.size(); ++i) {
    CHECK(a.files[i].first == b.files[i].first);
    CHECK(a.files[i].second == b.files[i].second);
  }

  const std::string* modes = artifact(a, "modes.csv");
  REQUIRE(modes != nullptr);
  CHECK(modes->rfind("# gridform-ssa", 0) == 0);
  CHECK(modes->find("mode_id,re,im,freq_hz,damping_pct,class,residual") !=
        std::string::npos);

  const std::string* assumptions = artifact(a, "assumptions.json");
  REQUIRE(assumptions != nullptr);
  nlohmann::json aj = nlohmann::json::parse(*assumptions);
  CHECK(aj["case_sha"].is_string());
  CHECK(aj["config"]["command"] == "analyze");
  CHECK(aj["pass"].get<bool>());
  CHECK(aj["more_gfm_than_sg"].get<bool>());
  CHECK(aj["timescale_ok"].get<bool>());
  CHECK(aj["slow_mode_ratios"].contains("4"));
  CHECK(aj["slow_mode_ratios"]["4"]["valid"].get<bool>());
  CHECK(a.summary.find("modes: 5 total, 2 inter-area") != std::string::npos);
  CHECK(a.summary.find("assumptions: pass") != std::string::npos);
}

TEST_CASE("sweeps are byte-identical across worker pool sizes") {
  RunConfig cfg = base_config("sweep");
  cfg.sweep_param = "droop";
  cfg.sweep_from = 0.10;
  cfg.sweep_to = 0.02;
  cfg.sweep_points = 9;
  cfg.sweep_log = true;

  setenv("GRIDFORM_SSA_THREADS", "1", 1);
  ArtifactSet one = sweep_artifacts(cfg);
  setenv("GRIDFORM_SSA_THREADS", "4", 1);
  ArtifactSet four = sweep_artifacts(cfg);
  unsetenv("GRIDFORM_SSA_THREADS");

  REQUIRE(one.files.size() == four.files.size());
  for (size_t i = 0; i < one.files.size(); ++i) {
    CHECK(one.files[i].first == four.files[i].first);
    CHECK(one.files[i].second == four.files[i].second);
  }
  CHECK(one.summary == four.summary);
  REQUIRE(artifact(one, "sweep.csv") != nullptr);
  REQUIRE(artifact(one, "reversal.json") != nullptr);

  nlohmann::json rj = nlohmann::json::parse(*artifact(one, "reversal.json"));
  CHECK(rj["param_name"] == "droop");
  CHECK(rj["modes"]["4"].contains("segments"));
}

TEST_CASE("sweep validation propagates as command errors") {
  RunConfig cfg = base_config("sweep");
  cfg.sweep_param = "droop";
  cfg.sweep_from = 0.10;
  cfg.sweep_to = 0.02;
  cfg.sweep_points = 2;
  CHECK_THROWS_AS(sweep_artifacts(cfg), ValidationError);

  cfg.sweep_points = 5;
  cfg.sweep_param = "voltage";
  CHECK_THROWS_WITH_AS(sweep_artifacts(cfg), doctest::Contains("sweep parameter"),
                       ValidationError);

  cfg.sweep_param = "droop";
  cfg.sweep_log = true;
  cfg.sweep_to = -0.02;
  CHECK_THROWS_WITH_AS(sweep_artifacts(cfg), doctest::Contains("positive"),
                       ValidationError);
}

TEST_CASE("sensitivity command resolves the requested mode") {
  RunConfig cfg = base_config("sensitivity");
  cfg.mode_id = 4;
  ArtifactSet as = sensitivity_artifacts(cfg);
  const std::string* csv = artifact(as, "sensitivity.csv");
  REQUIRE(csv != nullptr);
  CHECK(csv->find("mode_id,dre_dmp,dim_dmp,fd_re,fd_im,rel_err,cond") !=
        std::string::npos);
  CHECK(as.summary.find("mode 4") != std::string::npos);

  cfg.mode_id = 99;
  CHECK_THROWS_AS(sensitivity_artifacts(cfg), ValidationError);
}

TEST_CASE("check-design reports every inter-area mode or the requested one") {
  RunConfig cfg = base_config("check-design");
  ArtifactSet as = design_artifacts(cfg);
  nlohmann::json dj = nlohmann::json::parse(*artifact(as, "design.json"));
  CHECK(dj["modes"].contains("4"));
  CHECK(dj["modes"].contains("5"));

  cfg.mode_id = 5;
  ArtifactSet only5 = design_artifacts(cfg);
  nlohmann::json dj5 = nlohmann::json::parse(*artifact(only5, "design.json"));
  CHECK(dj5["modes"].size() == 1);

  cfg.mode_id = 1;  // an inverter mode: not a design target
  CHECK_THROWS_WITH_AS(design_artifacts(cfg), doctest::Contains("inter-area"),
                       ValidationError);
}

TEST_CASE("ringdown command validates its perturbation labels") {
  RunConfig cfg = base_config("ringdown");
  cfg.horizon = 5.0;
  cfg.dt = 0.01;
  cfg.perturb = {{"delta_g1", 1e-4}};
  ArtifactSet as = ringdown_artifacts(cfg);
  REQUIRE(artifact(as, "trajectory.csv") != nullptr);
  CHECK(as.summary.find("ringdown: 501 samples") != std::string::npos);

  cfg.perturb = {{"delta_zz", 1e-4}};
  CHECK_THROWS_WITH_AS(ringdown_artifacts(cfg), doctest::Contains("delta_zz"),
                       ValidationError);
}

TEST_CASE("the selftest exercises the whole stack in-process") {
  RunConfig cfg = base_config("selftest");
  ArtifactSet as = selftest_artifacts(cfg);
  CHECK(as.exit_code == 0);
  const std::string* txt = artifact(as, "selftest.txt");
  REQUIRE(txt != nullptr);
  CHECK(txt->find("FAIL ") == std::string::npos);
  CHECK(txt->find("selftest: ") != std::string::npos);
}

TEST_CASE("the executable maps failures onto its exit-code contract") {
  CHECK(run_cli("--version") == 0);
  CHECK(run_cli("analyze --case /nonexistent/case.json --outdir /tmp/gf_missing") == 1);
  CHECK(run_cli("analyze --definitely-not-a-flag") == 64);
  CHECK(run_cli("") == 64);  // a subcommand is required
  const std::string toy = ts::toy_path();
  CHECK(run_cli("selftest --case " + toy + " --outdir /tmp/gf_selftest") == 0);
  CHECK(run_cli("sweep --case " + toy +
                " --param droop --from 0.1 --to 0.02 --points 2 --outdir /tmp/gf_bad") ==
        1);
}
