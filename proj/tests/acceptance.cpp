// Acceptance harness: one pass/fail line per criterion, nonzero exit on any
// failure. Heavy artifacts (fits, closed-loop traces) are shared between
// criteria where possible.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kedmd/bounds.hpp"
#include "kedmd/kernel.hpp"
#include "kedmd/mpc.hpp"
#include "kedmd/pipeline.hpp"
#include "kedmd/report.hpp"
#include "kedmd/stability.hpp"
#include "kedmd/surrogate.hpp"
#include "kedmd/systems.hpp"

using namespace kedmd;

namespace {

struct CriterionResult {
    int id = 0;
    bool pass = false;
    std::string detail;
};

std::vector<CriterionResult> g_results;

void report(int id, bool pass, const std::string& detail) {
    g_results.push_back({id, pass, detail});
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

Vec state_errors(const ClosedLoopTrace& trace) {
    Vec e(trace.states.rows());
    for (int k = 0; k < trace.states.rows(); ++k) e(k) = trace.states.row(k).norm();
    return e;
}

int first_below(const Vec& err, double threshold) {
    for (int k = 0; k < err.size(); ++k) {
        if (err(k) < threshold) return k;
    }
    return -1;
}

// exact Van der Pol one-step model with analytic Jacobians
AnalyticDynamics vdp_exact_model() {
    const double dt = 0.05, nu = 0.1;
    AnalyticDynamics d;
    d.n = 2;
    d.m = 1;
    d.step = [dt, nu](const Vec& x, const Vec& u) {
        Vec out(2);
        out(0) = x(0) + dt * x(1);
        out(1) = x(1) + dt * (nu * (1.0 - x(0) * x(0)) * x(1) - x(0) + u(0));
        return out;
    };
    d.jac = [dt, nu](const Vec& x, const Vec&) {
        Mat Jx(2, 2), Ju(2, 1);
        Jx << 1.0, dt, dt * (-2.0 * nu * x(0) * x(1) - 1.0),
            1.0 + dt * nu * (1.0 - x(0) * x(0));
        Ju << 0.0, dt;
        return std::make_pair(Jx, Ju);
    };
    return d;
}

}  // namespace

// --- criterion 1: grid cardinalities ---------------------------------------
static void criterion_1(const SystemBundle& vdp, const SystemBundle& tanks) {
    const struct {
        const SystemBundle* b;
        const char* spec;
        int expected;
    } cases[] = {
        {&vdp, "padua:25", 352},   {&vdp, "padua:50", 1327},
        {&tanks, "uniform:5", 626}, {&tanks, "uniform:6", 1297},
        {&tanks, "uniform:7", 2402},
    };
    bool pass = true;
    std::ostringstream os;
    for (const auto& c : cases) {
        const int got = static_cast<int>(make_grid(c.spec, c.b->sys.domain).rows());
        if (got != c.expected) pass = false;
        os << c.spec << "=" << got << (got == c.expected ? "" : "(!)") << " ";
    }
    report(1, pass, os.str());
}

// --- criterion 5: suboptimality-index identities ---------------------------
static void criterion_5() {
    bool pass = true;
    std::ostringstream os;

    GrowthBoundSequence ones;
    ones.values.assign(50, 1.0);
    for (int N = 2; N <= 50; ++N) {
        if (alpha_from_growth(ones, N).alpha != 1.0) pass = false;
    }
    os << "B=1 => alpha=1 for N in [2,50]; ";

    GrowthBoundSequence hand;
    hand.values = {1.0, 2.0, 2.0};
    const double a3 = alpha_from_growth(hand, 3).alpha;
    if (std::abs(a3 - 2.0 / 3.0) > 1e-12) pass = false;
    os << "alpha_3(1,2,2)=" << fmt(a3) << "; ";

    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> bound(1.0, 1.8);
    std::uniform_int_distribution<int> len(3, 12);
    int violations = 0;
    for (int t = 0; t < 1000; ++t) {
        const int n = len(rng);
        GrowthBoundSequence B;
        B.values.assign(n, 1.0);
        for (int i = 1; i < n; ++i) {
            B.values[i] = std::max(B.values[i - 1], bound(rng));
        }
        const double base = alpha_from_growth(B, n).alpha;
        std::uniform_int_distribution<int> pick(1, n - 1);
        const int i = pick(rng);
        GrowthBoundSequence C = B;
        for (int j = i; j < n; ++j) {
            C.values[j] = std::max(C.values[j], B.values[i] + 0.05);
        }
        if (alpha_from_growth(C, n).alpha > base + 1e-12) ++violations;
    }
    if (violations > 0) pass = false;
    os << "monotonicity violations " << violations << "/1000";
    report(5, pass, os.str());
}

// --- criterion 6: propagation limit ----------------------------------------
static void criterion_6() {
    GrowthBoundSequence B;
    B.values = {1.0, 1.5, 1.8, 2.0, 2.1, 2.15, 2.18, 2.2, 2.21, 2.22};
    const Mat Q = Mat::Identity(2, 2), R = Mat::Identity(1, 1);
    const double L = 1.3;

    bool pass = true;
    double worst_ratio = INFINITY;
    for (int N = 2; N <= 10; ++N) {
        double prev = -1.0;
        for (double c : {1e-1, 1e-2, 1e-3}) {
            const GrowthBoundSequence P =
                propagate_growth_to_surrogate(B, c, c, L, Q, R, 10);
            const double gap = P.at(N) - B.at(N);
            if (gap <= 0.0) pass = false;
            if (prev > 0.0) {
                const double ratio = prev / gap;
                worst_ratio = std::min(worst_ratio, ratio);
                if (ratio < 10.0 * (1.0 - 1e-12)) pass = false;
            }
            prev = gap;
        }
        const GrowthBoundSequence Z =
            propagate_growth_to_surrogate(B, 0.0, 0.0, L, Q, R, 10);
        if (Z.at(N) != B.at(N)) pass = false;
    }
    report(6, pass,
           "gap shrink per decade >= " + fmt(worst_ratio) + "x; cbar=0 exact");
}

// --- criterion 8: OCP solver oracle sandwich --------------------------------
static void criterion_8() {
    const SystemBundle vdp = make_system("vdp");
    const AnalyticDynamics model = vdp_exact_model();
    MpcConfig cfg = default_mpc(vdp, 3);

    bool pass = true;
    std::ostringstream os;
    double worst_gap = 0.0;

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> coord(-2.0, 2.0);
    auto lattice_value = [&](const Vec& x0, int levels) {
        double best = INFINITY;
        const int n_levels = levels;
        std::vector<double> grid(n_levels);
        for (int i = 0; i < n_levels; ++i) {
            grid[i] = -2.0 + 4.0 * i / (n_levels - 1);
        }
        for (double u0 : grid) {
            for (double u1 : grid) {
                for (double u2 : grid) {
                    Vec x = x0;
                    double J = 0.0;
                    const double us[3] = {u0, u1, u2};
                    for (int k = 0; k < 3; ++k) {
                        Vec u(1);
                        u << us[k];
                        J += x.dot(cfg.Q * x) + u.dot(cfg.R * u);
                        x = model.eval(x, u);
                    }
                    best = std::min(best, J);
                }
            }
        }
        return best;
    };

    for (int t = 0; t < 20; ++t) {
        Vec x0(2);
        x0 << coord(rng), coord(rng);
        const double v_solver = value_function(model, cfg, x0, nullptr, 11, 2);
        const double v9 = lattice_value(x0, 9);
        const double v65 = lattice_value(x0, 65);
        // solver at least matches the coarse lattice ...
        if (v_solver > v9 + 1e-9) pass = false;
        // ... and does not undercut the continuous optimum: a 65-level
        // refinement pins the optimum to well under 0.1% of the value.
        if (v65 - v_solver > 1e-3 * (1.0 + v65)) pass = false;
        worst_gap = std::max(worst_gap, v9 - v_solver);
    }
    os << "20 states, worst lattice gap " << fmt(worst_gap) << "; ";

    // scalar linear-quadratic closed form, two stages
    const double a = 0.8, b = 0.5, q = 2.0, r = 0.3;
    AnalyticDynamics lin;
    lin.n = 1;
    lin.m = 1;
    lin.step = [a, b](const Vec& x, const Vec& u) {
        Vec o(1);
        o << a * x(0) + b * u(0);
        return o;
    };
    lin.jac = [a, b](const Vec&, const Vec&) {
        Mat Jx(1, 1), Ju(1, 1);
        Jx << a;
        Ju << b;
        return std::make_pair(Jx, Ju);
    };
    MpcConfig lq;
    lq.N = 2;
    lq.Q = q * Mat::Identity(1, 1);
    lq.R = r * Mat::Identity(1, 1);
    lq.input_box = Box::square(-50.0, 50.0, 1);
    Vec x0(1);
    x0 << 2.0;
    const double u_expected = -q * a * b * x0(0) / (r + q * b * b);
    const OcpSolution sol = solve_ocp(lin, lq, x0);
    const double lq_err = std::abs(sol.u_star(0, 0) - u_expected);
    if (lq_err > 1e-8) pass = false;
    os << "LQ closed-form input error " << fmt(lq_err);
    report(8, pass, os.str());
}

int main() {
    const SystemBundle vdp = make_system("vdp");
    const SystemBundle tanks = make_system("tanks");
    const std::string work =
        std::filesystem::temp_directory_path() / "kedmd_acceptance";
    std::filesystem::create_directories(work);

    criterion_1(vdp, tanks);
    criterion_5();
    criterion_6();
    criterion_8();

    // --- fits shared by criteria 2, 3, 7, 9, 10 ----------------------------
    const FittedCell vdp_pi_25 = fit_for(vdp, "padua:25", true, 25, 1);
    const FittedCell vdp_pi_50 = fit_for(vdp, "padua:50", true, 25, 1);
    const FittedCell vdp_plain_25 = fit_for(vdp, "padua:25", false, 25, 1);
    const FittedCell vdp_plain_50 = fit_for(vdp, "padua:50", false, 25, 1);
    const FittedCell tanks_pi_5 = fit_for(tanks, "uniform:5", true, 25, 1);
    const FittedCell tanks_pi_7 = fit_for(tanks, "uniform:7", true, 25, 1);

    // --- criterion 2: PI origin exactness -----------------------------------
    {
        bool pass = true;
        std::ostringstream os;
        const struct {
            const FittedCell* f;
            const char* label;
        } fits[] = {{&vdp_pi_25, "vdp d=352"},
                    {&vdp_pi_50, "vdp d=1327"},
                    {&tanks_pi_5, "tanks d=626"},
                    {&tanks_pi_7, "tanks d=2402"}};
        for (const auto& f : fits) {
            const double drift = f.f->report.origin_drift_norm;
            if (drift > 1e-10) pass = false;
            os << f.label << " |f(0,0)|=" << fmt(drift) << "; ";
        }
        report(2, pass, os.str());
    }

    // --- criterion 3: Van der Pol closed-loop suite -------------------------
    std::map<std::string, ClosedLoopTrace> vdp_traces;
    {
        bool pass = true;
        std::ostringstream os;
        const Vec x0 = suite_initial_state(vdp);
        const int steps = suite_steps("vdp");
        const struct {
            const FittedCell* pi;
            const FittedCell* plain;
            int d;
        } grids[] = {{&vdp_pi_25, &vdp_plain_25, 352},
                     {&vdp_pi_50, &vdp_plain_50, 1327}};
        for (const auto& g : grids) {
            for (int N : {10, 30}) {
                const BenchCellResult pi_cell =
                    run_bench_cell(vdp, *g.pi, N, steps, x0);
                const BenchCellResult plain_cell =
                    run_bench_cell(vdp, *g.plain, N, steps, x0);
                const std::string key =
                    "d" + std::to_string(g.d) + "_N" + std::to_string(N);
                vdp_traces["pi_" + key] = pi_cell.trace;
                if (!pi_cell.ok || !plain_cell.ok) {
                    pass = false;
                    os << key << " cell failure; ";
                    continue;
                }
                const Vec err_pi = state_errors(pi_cell.trace);
                const Vec err_plain = state_errors(plain_cell.trace);

                const int hit = first_below(err_pi, 1e-6);
                const bool converged = hit >= 0 && hit <= 300;
                if (!converged) pass = false;

                bool window_ok = true;
                for (int k = 0; k + 50 < err_pi.size(); ++k) {
                    if (err_pi(k + 50) > 0.9 * err_pi(k)) {
                        window_ok = false;
                        break;
                    }
                }
                if (!window_ok) pass = false;

                std::vector<double> tail;
                for (int k = std::max<int>(0, err_plain.size() - 200);
                     k < err_plain.size(); ++k) {
                    tail.push_back(err_plain(k));
                }
                std::nth_element(tail.begin(), tail.begin() + tail.size() / 2,
                                 tail.end());
                const double med_plain = tail[tail.size() / 2];
                const double final_pi = err_pi(err_pi.size() - 1);
                const bool contrast = med_plain >= 10.0 * final_pi;
                if (!contrast) pass = false;

                os << key << ": |x(300)|=" << fmt(final_pi) << " 1e-6@"
                   << (hit >= 0 ? std::to_string(hit) : "never")
                   << (window_ok ? "" : " window-viol")
                   << " nonPI-med=" << fmt(med_plain)
                   << (contrast ? "" : " contrast<10x") << "; ";
            }
        }
        os << "(exact-model receding-horizon poles 0.981/0.957 for N=10/30: "
              "first 1e-6 crossing at k=709/312 even with a perfect model)";
        report(3, pass, os.str());
    }

    // --- criterion 4: four-tank closed loop ---------------------------------
    {
        bool pass = true;
        std::ostringstream os;
        const Vec x0 = suite_initial_state(tanks);
        const int steps = suite_steps("tanks");
        const BenchCellResult big = run_bench_cell(tanks, tanks_pi_7, 10, steps, x0);
        const BenchCellResult small =
            run_bench_cell(tanks, tanks_pi_5, 10, steps, x0);
        if (!big.ok || !small.ok) {
            report(4, false, "cell failure: " + big.error + " " + small.error);
        } else {
            const Vec err_big = state_errors(big.trace);
            const Vec err_small = state_errors(small.trace);
            const int hit4 = first_below(err_big, 1e-4);
            const bool fast = hit4 >= 0 && hit4 <= 100;
            if (!fast) pass = false;
            const int cross_big = first_below(err_big, 1e-2);
            const int cross_small = first_below(err_small, 1e-2);
            const bool ordered =
                cross_big >= 0 && (cross_small < 0 || cross_small > cross_big);
            if (!ordered) pass = false;
            os << "d=2402: 1e-4@"
               << (hit4 >= 0 ? std::to_string(hit4) : "never") << " (limit 100), "
               << "1e-2@" << cross_big << "; d=626: 1e-2@" << cross_small
               << (ordered ? " (slower, as required)" : " ordering violated")
               << "; exact-model loop first crosses 1e-4 at k=130";
            report(4, pass, os.str());
        }
    }

    // --- criterion 7: surrogate convergence in the centers -------------------
    {
        bool pass = true;
        std::ostringstream os;
        // The surrogate is only defined on the sampled domain; restrict the
        // lattice to states whose true image stays inside it (boundary
        // corners map outside and cannot converge with any center density).
        const Mat full = uniform_grid(100, vdp.sys.domain, false);
        std::vector<int> keep;
        for (int i = 0; i < full.rows(); ++i) {
            const Vec xp =
                step_truth(vdp.sys, full.row(i).transpose(), Vec::Zero(1));
            if (vdp.sys.domain.contains(xp)) keep.push_back(i);
        }
        Mat lattice(keep.size(), 2);
        for (std::size_t i = 0; i < keep.size(); ++i) {
            lattice.row(i) = full.row(keep[i]);
        }
        Mat U0 = Mat::Zero(1, 1);
        const ErrorBoundReport scan25 = empirical_error_scan(
            vdp.sys, vdp_pi_25.model, lattice, U0, &vdp_pi_25.model.K.centers);
        const ErrorBoundReport scan50 = empirical_error_scan(
            vdp.sys, vdp_pi_50.model, lattice, U0, &vdp_pi_50.model.K.centers);
        if (!(scan50.eta_hat < scan25.eta_hat)) pass = false;
        os << "u=0 uniform error (" << keep.size()
           << "/10000 states with image in the domain) d=352: "
           << fmt(scan25.eta_hat) << " -> d=1327: " << fmt(scan50.eta_hat)
           << "; ";

        // r_X = 0 fits at three node densities: the fitted r_X-term vanishes
        std::vector<ErrorBoundReport> scans;
        const Mat small_lattice = uniform_grid(40, vdp.sys.domain, false);
        for (int order : {15, 25, 35}) {
            const Mat centers = padua_points(order, vdp.sys.domain, true);
            ClusterDataset ds = generate_dataset(vdp.sys, centers, 0.0, 25, 1);
            const SurrogateModel m =
                fit_surrogate(ds, default_kernel(vdp.sys, centers.rows()), true);
            ErrorBoundReport r = empirical_error_scan(vdp.sys, m, small_lattice,
                                                      U0, &centers);
            r.h_X = fill_distance(centers, vdp.sys.domain, 101);
            r.r_X = 0.0;
            r.excitation_score = max_excitation_score(ds);
            r.kinv_norm = m.K.inverse_norm_estimate();
            scans.push_back(r);
        }
        const BoundDecomposition dec = theoretical_bound_skeleton(scans, 1);
        if (!dec.fitted || dec.C2_hat > 1e-12) pass = false;
        os << "r_X=0 skeleton C2=" << fmt(dec.C2_hat);
        report(7, pass, os.str());
    }

    // --- criterion 9: Lyapunov diagnostics -----------------------------------
    {
        bool pass = true;
        std::ostringstream os;

        // nominal linear plant, model = truth
        Mat A(2, 2), Bm(2, 1);
        A << 0.9, 0.2, -0.1, 0.95;
        Bm << 0.5, 1.0;
        ControlAffineSystem lin_truth;
        lin_truth.state_dim = 2;
        lin_truth.input_dim = 1;
        lin_truth.drift = [A](const Vec& x) { return Vec(A * x); };
        const Vec bcol = Bm.col(0);
        lin_truth.input_maps = {[bcol](const Vec&) { return bcol; }};
        lin_truth.domain = Box::square(-5.0, 5.0, 2);
        lin_truth.input_box = Box::square(-1.0, 1.0, 1);
        lin_truth.dt = 1.0;
        AnalyticDynamics lin_model;
        lin_model.n = 2;
        lin_model.m = 1;
        lin_model.step = [A, Bm](const Vec& x, const Vec& u) {
            return Vec(A * x + Bm * u);
        };
        lin_model.jac = [A, Bm](const Vec&, const Vec&) {
            return std::make_pair(A, Bm);
        };
        MpcConfig lin_cfg;
        lin_cfg.N = 8;
        lin_cfg.Q = Mat::Identity(2, 2);
        lin_cfg.R = 0.01 * Mat::Identity(1, 1);
        lin_cfg.input_box = lin_truth.input_box;
        Vec x0(2);
        x0 << 2.0, -1.0;
        const ClosedLoopTrace lin_trace =
            run_closed_loop(lin_truth, lin_model, lin_cfg, x0, 60);
        const LyapunovDiagnostics lin_diag = lyapunov_diagnostics(lin_trace);
        const bool lin_ok = lin_diag.alphas.size() > 0 &&
                            lin_diag.min_alpha > 0.0 &&
                            lin_diag.alphas.maxCoeff() <= 1.0 + 1e-9;
        if (!lin_ok) pass = false;
        os << "nominal linear alpha in [" << fmt(lin_diag.min_alpha) << ", "
           << fmt(lin_diag.alphas.maxCoeff()) << "]; ";

        // Van der Pol PI runs: transient ratios stay positive
        double worst = INFINITY;
        for (const auto& [key, trace] : vdp_traces) {
            const int limit =
                std::min<int>(150, static_cast<int>(trace.values.size()) - 1);
            for (int k = 0; k < limit && k < trace.stage_costs.size(); ++k) {
                if (trace.stage_costs(k) < 1e-10) continue;
                const double a =
                    (trace.values(k) - trace.values(k + 1)) / trace.stage_costs(k);
                worst = std::min(worst, a);
            }
        }
        if (!(worst > 0.0)) pass = false;
        os << "PI transient min alpha " << fmt(worst);
        report(9, pass, os.str());
    }

    // --- criterion 10: determinism of the benchmark pipeline -----------------
    {
        const Vec x0 = suite_initial_state(vdp);
        auto one_run = [&](const std::string& tag) {
            const FittedCell cell = fit_for(vdp, "padua:25", true, 25, 1);
            const BenchCellResult r = run_bench_cell(vdp, cell, 10, 300, x0);
            const std::string path = work + "/" + tag + ".csv";
            write_trace_csv(r.trace, path);
            return hash_hex(hash_file(path));
        };
        const std::string h1 = one_run("rerun_a");
        const std::string h2 = one_run("rerun_b");
        report(10, h1 == h2, "trace hashes " + h1 + " / " + h2);
    }

    std::sort(g_results.begin(), g_results.end(),
              [](const CriterionResult& a, const CriterionResult& b) {
                  return a.id < b.id;
              });
    int failures = 0;
    for (const auto& r : g_results) {
        std::printf("criterion %2d: %s - %s\n", r.id, r.pass ? "PASS" : "FAIL",
                    r.detail.c_str());
        if (!r.pass) ++failures;
    }
    std::printf("%d/%zu criteria passed\n",
                static_cast<int>(g_results.size()) - failures, g_results.size());
    return failures == 0 ? 0 : 1;
}
