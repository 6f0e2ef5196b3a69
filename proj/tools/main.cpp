// gridform-ssa: command-line front end.  All real work lives in the library's
// harness module; this file only maps flags onto a RunConfig and exceptions
// onto exit codes (0 ok, 1 input rejected, 2 numerical failure, 64 usage).

#include "gridform/harness.hpp"
#include "gridform/types.hpp"
#include "gridform/version.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

using gridform::RunConfig;

int main(int argc, char** argv) {
  CLI::App app{"small-signal stability of power grids with droop-controlled "
               "grid-forming storage"};
  app.set_version_flag("--version", gridform::kVersion);
  app.require_subcommand(1);

  RunConfig cfg;
  std::vector<double> band{cfg.band_lo, cfg.band_hi};
  std::vector<std::string> perturb_raw;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--case", cfg.case_path, "network case file (JSON)")->required();
    sub->add_option("--outdir", cfg.outdir, "directory for result artifacts")
        ->capture_default_str();
    sub->add_option("--band", band, "inter-area frequency band, Hz (lo hi)")
        ->expected(2);
    sub->add_option("--kernel-tol", cfg.kernel_tol,
                    "acceptance threshold for the pencil kernel ratio")
        ->capture_default_str();
    sub->add_option("--slow-threshold", cfg.slow_threshold,
                    "slow-mode validity cut for the expansion diagnostics")
        ->capture_default_str();
    sub->add_option("--seed", cfg.seed, "recorded in artifacts; no effect on results");
  };

  CLI::App* analyze =
      app.add_subcommand("analyze", "modal analysis and model-assumption report");
  add_common(analyze);

  CLI::App* sweep =
      app.add_subcommand("sweep", "track modes over a droop or fleet-size axis");
  add_common(sweep);
  sweep->add_option("--param", cfg.sweep_param, "swept quantity: droop | size")
      ->required();
  sweep->add_option("--from", cfg.sweep_from, "first axis value")->required();
  sweep->add_option("--to", cfg.sweep_to, "last axis value")->required();
  sweep->add_option("--points", cfg.sweep_points, "number of grid points")->required();
  sweep->add_flag("--log", cfg.sweep_log, "geometric instead of linear spacing");

  CLI::App* sens = app.add_subcommand(
      "sensitivity", "analytic droop sensitivity with finite-difference cross-check");
  add_common(sens);
  sens->add_option("--mode", cfg.mode_id, "mode id from analyze")->required();
  sens->add_option("--fd-step", cfg.fd_step,
                   "finite-difference base step (default 1e-4 * m_p)");

  CLI::App* design = app.add_subcommand(
      "check-design", "damping-enhancement conditions and the droop floor");
  add_common(design);
  design->add_option("--mode", cfg.mode_id, "restrict to one inter-area mode id");

  CLI::App* ring =
      app.add_subcommand("ringdown", "nonlinear ringdown from a state perturbation");
  add_common(ring);
  ring->add_option("--perturb", perturb_raw,
                   "initial offset as state=value (repeatable)")
      ->required();
  ring->add_option("--horizon", cfg.horizon, "simulated time, s")->required();
  ring->add_option("--dt", cfg.dt, "integrator step, s")->required();

  CLI::App* self =
      app.add_subcommand("selftest", "deterministic built-in consistency checks");
  add_common(self);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n(run with --help for usage)\n";
    return 64;
  }

  cfg.band_lo = band[0];
  cfg.band_hi = band[1];
  for (CLI::App* sub : {analyze, sweep, sens, design, ring, self})
    if (app.got_subcommand(sub)) cfg.command = sub->get_name();

  try {
    for (const std::string& s : perturb_raw) {
      const auto eq = s.find('=');
      std::size_t used = 0;
      double amp = 0.0;
      if (eq != std::string::npos && eq + 1 < s.size()) {
        try {
          amp = std::stod(s.substr(eq + 1), &used);
        } catch (...) {
          used = 0;
        }
      }
      if (eq == std::string::npos || eq == 0 || used != s.size() - eq - 1)
        throw gridform::ValidationError("malformed --perturb '" + s +
                                        "' (expected state=value)");
      cfg.perturb.emplace_back(s.substr(0, eq), amp);
    }
    return gridform::run_command(cfg);
  } catch (const gridform::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const gridform::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
