#pragma once

#include "gridform/types.hpp"

#include <string>
#include <utility>
#include <vector>

// Run orchestration shared by the CLI and the tests.
//
// Every command resolves to a pure function from RunConfig to a set of named
// artifact bodies; writing them to disk and echoing the summary is the only
// side effect, and it lives in run_command.  Each artifact embeds the tool
// version, the FNV-1a hash of the case file bytes, and a one-line JSON echo of
// the configuration, so any result file can be traced back to exactly what
// produced it.  Nothing here depends on wall-clock time or scheduling, which
// is what makes reruns byte-identical.

namespace gridform {

struct RunConfig {
  std::string command;    // analyze | sweep | sensitivity | check-design |
                          // ringdown | selftest
  std::string case_path;
  double band_lo = 0.1, band_hi = 1.0;  // inter-area band, Hz
  double kernel_tol = 1e-8;             // pencil kernel acceptance
  double slow_threshold = 0.1;          // slow-mode validity cut
  std::string sweep_param;              // "droop" | "size"
  double sweep_from = 0.0, sweep_to = 0.0;
  int sweep_points = 0;
  bool sweep_log = false;               // geometric axis spacing
  int mode_id = 0;                      // sensitivity / check-design target
  double fd_step = 0.0;                 // 0: default 1e-4 * m_p
  std::vector<std::pair<std::string, double>> perturb;  // state -> offset
  double horizon = 0.0, dt = 0.0;
  std::string outdir = ".";
  unsigned long seed = 0;
};

// Single-line JSON echo of the configuration (stable key order).
std::string config_echo(const RunConfig& cfg);

struct ArtifactSet {
  std::vector<std::pair<std::string, std::string>> files;  // name -> bytes
  std::string summary;  // deterministic stdout block
  int exit_code = 0;
};

ArtifactSet analyze_artifacts(const RunConfig& cfg);
ArtifactSet sweep_artifacts(const RunConfig& cfg);
ArtifactSet sensitivity_artifacts(const RunConfig& cfg);
ArtifactSet design_artifacts(const RunConfig& cfg);
ArtifactSet ringdown_artifacts(const RunConfig& cfg);
ArtifactSet selftest_artifacts(const RunConfig& cfg);

// Dispatches on cfg.command, writes artifacts under cfg.outdir, prints the
// summary, and returns the process exit code.
int run_command(const RunConfig& cfg);

}  // namespace gridform
