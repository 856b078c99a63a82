#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kedmd/surrogate.hpp"
#include "kedmd/types.hpp"

namespace kedmd {

struct SolverOptions {
    int max_iterations = 2000;
    double gradient_tolerance = 1e-12;
    double armijo_c = 1e-4;
    double backtrack = 0.5;
    int nonmonotone_window = 10;  // reference window for the line search
};

/// Receding-horizon setup: quadratic stage cost ||x||_Q^2 + ||u||_R^2 over
/// horizon N with box input constraints.
struct MpcConfig {
    int N = 10;
    Mat Q;
    Mat R;
    Box input_box;
    SolverOptions solver;
    bool warm_start = true;

    /// Throws DataError unless N >= 1 and Q, R are symmetric positive definite.
    void validate() const;
};

struct OcpSolution {
    Mat u_star;            // N x m, one input per row
    Mat predicted_states;  // (N+1) x n surrogate rollout
    double value = 0.0;
    int iterations = 0;
    double kkt_residual = 0.0;  // projected-gradient sup-norm at the iterate
    bool converged = false;
};

/// Local minimizer of the horizon-N cost over the input box: spectral
/// projected gradient with exact adjoint gradients and a nonmonotone
/// backtracking line search. Warm start rows are clamped to the box. A NaN
/// during the rollout aborts with the offending stage index.
OcpSolution solve_ocp(const Dynamics& model, const MpcConfig& cfg, const Vec& x_hat,
                      const Mat* warm = nullptr);

/// Best value over multiple solver starts (zeros, warm if given, seeded
/// random draws in the box); reduces local-minimum risk for value queries.
double value_function(const Dynamics& model, const MpcConfig& cfg, const Vec& x_hat,
                      const Mat* warm = nullptr, std::uint64_t seed = 0,
                      int random_starts = 1);

struct ClosedLoopTrace {
    Mat states;       // (steps+1) x n, true closed-loop states
    Mat inputs;       // steps x m, applied first moves
    Vec stage_costs;  // l(x(k), u(k))
    Vec values;       // V(x(k)) for k = 0..steps (final state solved too)
    std::vector<int> solver_iterations;
    std::vector<double> solve_seconds;
    bool truncated = false;
    std::string failure;
};

/// Runs the receding-horizon loop against the true dynamics with
/// shift-by-one warm starting. Solver aborts and domain violations truncate
/// the trace with a failure record instead of throwing.
ClosedLoopTrace run_closed_loop(const ControlAffineSystem& truth,
                                const Dynamics& model, const MpcConfig& cfg,
                                const Vec& x0, int steps);

struct LyapunovDiagnostics {
    Vec alphas;       // observed per-step decrease ratios
    std::vector<int> excluded;  // steps with stage cost below the guard
    double min_alpha = 0.0;
    double mean_alpha = 0.0;
};

/// Observed relaxed-Lyapunov ratios along the true closed loop:
/// alpha(k) = (V(k) - V(k+1)) / l(x(k), u(k)); stages with l < 1e-14
/// excluded from the statistics. Negative ratios are recorded, not hidden.
LyapunovDiagnostics lyapunov_diagnostics(const ClosedLoopTrace& trace);

/// Trace CSV: k, x..., u..., stage cost, value, alpha-hat.
void write_trace_csv(const ClosedLoopTrace& trace, const std::string& path);

}  // namespace kedmd
