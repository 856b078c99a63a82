#include "kedmd/mpc.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <random>
#include <sstream>

#include "kedmd/systems.hpp"

namespace kedmd {

void MpcConfig::validate() const {
    if (N < 1) throw DataError("MpcConfig: horizon must be >= 1");
    auto check_pd = [](const Mat& M, const char* name) {
        if (M.rows() != M.cols() || !M.isApprox(M.transpose(), 1e-12)) {
            throw DataError(std::string("MpcConfig: ") + name + " must be symmetric");
        }
        Eigen::LLT<Mat> llt(M);
        if (llt.info() != Eigen::Success) {
            throw DataError(std::string("MpcConfig: ") + name +
                            " must be positive definite");
        }
    };
    check_pd(Q, "Q");
    check_pd(R, "R");
    if (input_box.dim() != static_cast<int>(R.rows())) {
        throw DataError("MpcConfig: input box dimension does not match R");
    }
}

namespace {

Mat project_rows(const Mat& U, const Box& box) {
    Mat P = U;
    for (int i = 0; i < P.rows(); ++i) {
        P.row(i) = P.row(i).cwiseMax(box.lo.transpose()).cwiseMin(box.hi.transpose());
    }
    return P;
}

// Surrogate rollout and total cost; throws on non-finite states with the
// stage index in the message.
double rollout(const Dynamics& model, const MpcConfig& cfg, const Vec& x_hat,
               const Mat& U, Mat* states_out) {
    const int n = model.state_dim();
    Mat X(cfg.N + 1, n);
    X.row(0) = x_hat.transpose();
    double J = 0.0;
    Vec x = x_hat;
    for (int i = 0; i < cfg.N; ++i) {
        const Vec u = U.row(i).transpose();
        J += x.dot(cfg.Q * x) + u.dot(cfg.R * u);
        x = model.eval(x, u);
        if (!x.allFinite()) {
            std::ostringstream os;
            os << "OCP rollout produced a non-finite state at stage " << i + 1;
            throw NumericalError(os.str());
        }
        X.row(i + 1) = x.transpose();
    }
    if (states_out) *states_out = std::move(X);
    return J;
}

// Exact gradient of the rollout cost via the adjoint recursion.
Mat adjoint_gradient(const Dynamics& model, const MpcConfig& cfg, const Mat& X,
                     const Mat& U) {
    const int n = model.state_dim();
    Mat G(cfg.N, U.cols());
    Vec p = Vec::Zero(n);  // no terminal cost
    for (int i = cfg.N - 1; i >= 0; --i) {
        const Vec x = X.row(i).transpose();
        const Vec u = U.row(i).transpose();
        auto [Jx, Ju] = model.jacobians(x, u);
        G.row(i) = (2.0 * cfg.R * u + Ju.transpose() * p).transpose();
        p = 2.0 * cfg.Q * x + Jx.transpose() * p;
    }
    return G;
}

}  // namespace

OcpSolution solve_ocp(const Dynamics& model, const MpcConfig& cfg, const Vec& x_hat,
                      const Mat* warm) {
    cfg.validate();
    const int m = model.input_dim();
    Mat U = warm ? project_rows(*warm, cfg.input_box) : Mat::Zero(cfg.N, m);
    if (U.rows() != cfg.N || U.cols() != m) {
        throw DataError("solve_ocp: warm start has the wrong shape");
    }

    const SolverOptions& opt = cfg.solver;
    Mat X;
    double J = rollout(model, cfg, x_hat, U, &X);
    Mat G = adjoint_gradient(model, cfg, X, U);

    std::deque<double> recent{J};
    Mat s_prev, y_prev;
    double step = 1.0 / std::max(1.0, G.cwiseAbs().maxCoeff());

    OcpSolution sol;
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        sol.kkt_residual = (project_rows(U - G, cfg.input_box) - U).cwiseAbs().maxCoeff();
        if (sol.kkt_residual <= opt.gradient_tolerance) {
            sol.converged = true;
            break;
        }
        if (s_prev.size() > 0) {
            const double ss = s_prev.cwiseProduct(s_prev).sum();
            const double sy = s_prev.cwiseProduct(y_prev).sum();
            step = sy > 0.0 ? std::clamp(ss / sy, 1e-10, 1e10) : 1e10;
        }
        const Mat D = project_rows(U - step * G, cfg.input_box) - U;
        const double gd = G.cwiseProduct(D).sum();
        if (D.cwiseAbs().maxCoeff() == 0.0) break;  // no feasible descent move

        const double ref = *std::max_element(recent.begin(), recent.end());
        double lambda = 1.0;
        double J_new = 0.0;
        Mat U_new, X_new;
        bool accepted = false;
        while (lambda >= 1e-16) {
            U_new = U + lambda * D;
            J_new = rollout(model, cfg, x_hat, U_new, &X_new);
            if (J_new <= ref + opt.armijo_c * lambda * gd) {
                accepted = true;
                break;
            }
            lambda *= opt.backtrack;
        }
        if (!accepted) break;  // line search stalled at the noise floor

        const Mat G_new = adjoint_gradient(model, cfg, X_new, U_new);
        s_prev = U_new - U;
        y_prev = G_new - G;
        U = std::move(U_new);
        X = std::move(X_new);
        G = std::move(G_new);
        J = J_new;
        recent.push_back(J);
        if (static_cast<int>(recent.size()) > opt.nonmonotone_window) {
            recent.pop_front();
        }
    }

    sol.u_star = project_rows(U, cfg.input_box);  // feasibility by construction
    sol.value = rollout(model, cfg, x_hat, sol.u_star, &sol.predicted_states);
    sol.iterations = it;
    sol.kkt_residual =
        (project_rows(sol.u_star - G, cfg.input_box) - sol.u_star).cwiseAbs().maxCoeff();
    if (sol.kkt_residual <= opt.gradient_tolerance) sol.converged = true;
    return sol;
}

double value_function(const Dynamics& model, const MpcConfig& cfg, const Vec& x_hat,
                      const Mat* warm, std::uint64_t seed, int random_starts) {
    const int m = model.input_dim();
    std::vector<Mat> starts;
    starts.push_back(Mat::Zero(cfg.N, m));
    if (warm) starts.push_back(*warm);
    std::mt19937_64 rng(seed ^ 0x5bf03635u);
    for (int r = 0; r < random_starts; ++r) {
        Mat U(cfg.N, m);
        for (int i = 0; i < cfg.N; ++i) {
            for (int j = 0; j < m; ++j) {
                std::uniform_real_distribution<double> dist(cfg.input_box.lo(j),
                                                            cfg.input_box.hi(j));
                U(i, j) = dist(rng);
            }
        }
        starts.push_back(std::move(U));
    }

    double best = INFINITY;
    Vec best_first;
    for (const Mat& U0 : starts) {
        const OcpSolution sol = solve_ocp(model, cfg, x_hat, &U0);
        const Vec first = sol.u_star.row(0).transpose();
        bool better = sol.value < best;
        if (sol.value == best && best_first.size() > 0) {
            // Deterministic tie-break: lexicographically smallest first input.
            for (int j = 0; j < m; ++j) {
                if (first(j) != best_first(j)) {
                    better = first(j) < best_first(j);
                    break;
                }
            }
        }
        if (better) {
            best = sol.value;
            best_first = first;
        }
    }
    return best;
}

ClosedLoopTrace run_closed_loop(const ControlAffineSystem& truth,
                                const Dynamics& model, const MpcConfig& cfg,
                                const Vec& x0, int steps) {
    cfg.validate();
    if (!truth.domain.contains(x0, 1e-9)) {
        throw DataError("run_closed_loop: initial state outside the domain");
    }
    const int n = model.state_dim();
    const int m = model.input_dim();

    std::vector<Vec> xs{x0};
    std::vector<Vec> us;
    std::vector<double> costs, values;
    ClosedLoopTrace trace;

    Mat warm;
    bool have_warm = false;
    Vec x = x0;
    for (int k = 0; k < steps; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        OcpSolution sol;
        try {
            sol = solve_ocp(model, cfg, x,
                            (cfg.warm_start && have_warm) ? &warm : nullptr);
        } catch (const NumericalError& e) {
            trace.truncated = true;
            trace.failure = std::string("solver abort at step ") +
                            std::to_string(k) + ": " + e.what();
            break;
        }
        trace.solve_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count());
        trace.solver_iterations.push_back(sol.iterations);

        const Vec u = sol.u_star.row(0).transpose();
        Vec x_next;
        try {
            x_next = step_truth(truth, x, u);
        } catch (const std::runtime_error& e) {
            trace.truncated = true;
            trace.failure = std::string("plant evaluation failed at step ") +
                            std::to_string(k) + ": " + e.what();
            break;
        }
        us.push_back(u);
        costs.push_back(x.dot(cfg.Q * x) + u.dot(cfg.R * u));
        values.push_back(sol.value);
        xs.push_back(x_next);
        if (!truth.domain.contains(x_next, 1e-9)) {
            trace.truncated = true;
            trace.failure = "closed loop left the domain at step " +
                            std::to_string(k + 1);
            x = x_next;
            break;
        }

        // Shift-by-one warm start, repeating the last stage input.
        warm = Mat(cfg.N, m);
        warm.topRows(cfg.N - 1) = sol.u_star.bottomRows(cfg.N - 1);
        warm.row(cfg.N - 1) = sol.u_star.row(cfg.N - 1);
        have_warm = true;
        x = x_next;
    }
    // Value at the final visited state closes the Lyapunov differences.
    if (!trace.truncated || trace.failure.rfind("closed loop left", 0) == 0) {
        try {
            const OcpSolution fin =
                solve_ocp(model, cfg, xs.back(), have_warm ? &warm : nullptr);
            values.push_back(fin.value);
        } catch (const NumericalError&) {
            // leave the final value absent
        }
    }

    trace.states = Mat(xs.size(), n);
    for (std::size_t i = 0; i < xs.size(); ++i) trace.states.row(i) = xs[i].transpose();
    trace.inputs = Mat(us.size(), m);
    for (std::size_t i = 0; i < us.size(); ++i) trace.inputs.row(i) = us[i].transpose();
    trace.stage_costs = Vec(costs.size());
    for (std::size_t i = 0; i < costs.size(); ++i) trace.stage_costs(i) = costs[i];
    trace.values = Vec(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) trace.values(i) = values[i];
    return trace;
}

LyapunovDiagnostics lyapunov_diagnostics(const ClosedLoopTrace& trace) {
    LyapunovDiagnostics diag;
    const int steps = static_cast<int>(trace.values.size()) - 1;
    std::vector<double> alphas;
    for (int k = 0; k < steps && k < trace.stage_costs.size(); ++k) {
        const double l = trace.stage_costs(k);
        if (l < 1e-14) {
            diag.excluded.push_back(k);
            continue;
        }
        alphas.push_back((trace.values(k) - trace.values(k + 1)) / l);
    }
    diag.alphas = Vec(alphas.size());
    for (std::size_t i = 0; i < alphas.size(); ++i) diag.alphas(i) = alphas[i];
    if (!alphas.empty()) {
        diag.min_alpha = diag.alphas.minCoeff();
        diag.mean_alpha = diag.alphas.mean();
    }
    return diag;
}

void write_trace_csv(const ClosedLoopTrace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open trace CSV for writing: " + path);
    const int n = static_cast<int>(trace.states.cols());
    const int m = static_cast<int>(trace.inputs.cols());
    out << "k";
    for (int j = 0; j < n; ++j) out << ",x" << j + 1;
    for (int j = 0; j < m; ++j) out << ",u" << j + 1;
    out << ",stage_cost,value,alpha_hat\n";

    const LyapunovDiagnostics diag = lyapunov_diagnostics(trace);
    // Map step index -> alpha (excluded steps keep NaN).
    std::vector<double> alpha_at(trace.states.rows(), NAN);
    {
        int a = 0;
        const int steps = static_cast<int>(trace.values.size()) - 1;
        for (int k = 0; k < steps && k < trace.stage_costs.size(); ++k) {
            if (std::find(diag.excluded.begin(), diag.excluded.end(), k) !=
                diag.excluded.end()) {
                continue;
            }
            if (a < diag.alphas.size()) alpha_at[k] = diag.alphas(a++);
        }
    }

    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        out << buf;
    };
    for (int k = 0; k < trace.states.rows(); ++k) {
        out << k;
        for (int j = 0; j < n; ++j) put(trace.states(k, j));
        for (int j = 0; j < m; ++j) {
            put(k < trace.inputs.rows() ? trace.inputs(k, j) : NAN);
        }
        put(k < trace.stage_costs.size() ? trace.stage_costs(k) : NAN);
        put(k < trace.values.size() ? trace.values(k) : NAN);
        put(alpha_at[k]);
        out << '\n';
    }
    if (trace.truncated) out << "# truncated: " << trace.failure << '\n';
}

}  // namespace kedmd
