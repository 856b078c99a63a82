#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kedmd/bounds.hpp"
#include "kedmd/mpc.hpp"
#include "kedmd/report.hpp"
#include "kedmd/sampling.hpp"
#include "kedmd/stability.hpp"
#include "kedmd/surrogate.hpp"
#include "kedmd/systems.hpp"

namespace kedmd {

/// A registered benchmark plant in origin-shifted coordinates, plus the
/// physical equilibrium when a shift was applied.
struct SystemBundle {
    ControlAffineSystem sys;
    std::string name;           // "vdp" or "tanks"
    EquilibriumSpec physical_equilibrium;  // empty vectors for vdp
};

/// "vdp", or "tanks" (optionally with an explicit parameter file; defaults
/// to the checked-in config). Unknown names throw DataError.
SystemBundle make_system(const std::string& name,
                         const std::string& tank_config_path = "");

/// Grid specs: "padua:<order>" (2-D only) or "uniform:<per-axis>"; origin
/// always included first.
Mat make_grid(const std::string& spec, const Box& domain);

/// Benchmark cluster-radius rule: sqrt(2)/d for vdp, 2/d for tanks, with d
/// the number of centers.
double auto_cluster_radius(const std::string& system_name, int center_count);

/// Kernel defaults for a benchmark fit: dimension-matched Wendland spec with
/// support scale from the domain and the size-dependent regularization rule.
KernelSpec default_kernel(const ControlAffineSystem& sys, int center_count);

/// Benchmark stage costs: Q = I, R = 1e-4 I, inputs constrained to the
/// system's box.
MpcConfig default_mpc(const SystemBundle& bundle, int N);

/// Dataset + fitted surrogate for one grid/variant choice (reused across
/// horizon variants in the suites).
struct FittedCell {
    ClusterDataset dataset;
    SurrogateModel model;
    FitReport report;
    double fit_seconds = 0.0;
};

FittedCell fit_for(const SystemBundle& bundle, const std::string& grid_spec,
                   bool physics_informed, int samples_per_cluster,
                   std::uint64_t seed);

struct BenchCellResult {
    std::string label;  // e.g. "vdp_pi_d352_N10"
    int centers = 0;
    int N = 0;
    bool physics_informed = false;
    ClosedLoopTrace trace;
    double mean_solve_seconds = 0.0;
    bool ok = false;
    std::string error;
};

BenchCellResult run_bench_cell(const SystemBundle& bundle, const FittedCell& fitted,
                               int N, int steps, const Vec& x0);

/// Benchmark initial states (shifted coordinates) and step counts.
Vec suite_initial_state(const SystemBundle& bundle);
int suite_steps(const std::string& system_name);

struct SuiteResult {
    std::vector<BenchCellResult> cells;
    RunManifest manifest;
};

/// Full benchmark matrix for "vdp" ({PI, non-PI} x {padua:25, padua:50} x
/// {N=10, 30}) or "tanks" ({PI, non-PI} x {uniform:5,6,7} x N=10). Writes
/// per-cell trace CSVs, an error-overlay SVG, a timing table CSV and a run
/// manifest into out_dir. Per-cell failures are recorded; the suite
/// continues. The timing table is wall-clock and therefore excluded from
/// the manifest's reproducibility hashes.
SuiteResult run_suite(const std::string& suite, const std::string& out_dir,
                      std::uint64_t seed);

}  // namespace kedmd
