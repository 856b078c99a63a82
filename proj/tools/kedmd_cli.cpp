#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "kedmd/pipeline.hpp"

namespace {

using namespace kedmd;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerics = 3;
constexpr int kExitSolver = 4;

Vec parse_vector(const std::string& csv) {
    Vec v(std::count(csv.begin(), csv.end(), ',') + 1);
    std::stringstream ss(csv);
    std::string item;
    int i = 0;
    while (std::getline(ss, item, ',')) v(i++) = std::stod(item);
    return v;
}

Mat input_lattice(const Box& box, int levels) {
    const int m = box.dim();
    long total = 1;
    for (int j = 0; j < m; ++j) total *= levels;
    Mat U(total, m);
    for (long r = 0; r < total; ++r) {
        long rem = r;
        for (int j = 0; j < m; ++j) {
            const int idx = static_cast<int>(rem % levels);
            rem /= levels;
            U(r, j) = box.lo(j) + (box.hi(j) - box.lo(j)) * idx / (levels - 1);
        }
    }
    return U;
}

Mat state_lattice(const Box& box, int per_axis) {
    return uniform_grid(per_axis, box, /*include_origin=*/false);
}

int cmd_generate(const std::string& system, const std::string& grid_spec,
                 const std::string& rx_opt, int di, std::uint64_t seed,
                 const std::string& out_prefix, const std::string& tank_config) {
    const SystemBundle bundle = make_system(system, tank_config);
    const Mat grid = make_grid(grid_spec, bundle.sys.domain);
    const double r_x =
        rx_opt == "auto"
            ? auto_cluster_radius(bundle.name, static_cast<int>(grid.rows()))
            : std::stod(rx_opt);
    ClusterDataset ds = generate_dataset(bundle.sys, grid, r_x, di, seed);
    ds.source = bundle.name + ":" + grid_spec;

    const ValidationReport report =
        validate_dataset(ds, bundle.sys.domain, bundle.sys.input_box);
    if (!report.all_pass()) {
        std::cerr << report.to_string();
        return kExitValidation;
    }
    std::cout << report.to_string();
    write_dataset(ds, out_prefix + ".csv", out_prefix + ".json");
    std::cout << "dataset: " << ds.clusters.size() << " clusters, "
              << ds.total_samples() << " samples, r_x = " << r_x << "\n"
              << "wrote " << out_prefix << ".csv and " << out_prefix << ".json\n";
    return kExitOk;
}

int cmd_fit(const std::string& dataset_prefix, bool pi, double lambda_opt,
            const std::string& out_path) {
    const ClusterDataset ds =
        read_dataset(dataset_prefix + ".csv", dataset_prefix + ".json");
    // Kernel support from the center bounding box (the sampling domain is
    // not stored in the dataset; the centers span it by construction).
    Mat centers(ds.clusters.size(), ds.state_dim);
    for (std::size_t i = 0; i < ds.clusters.size(); ++i) {
        centers.row(i) = ds.clusters[i].center.transpose();
    }
    const Box domain(centers.colwise().minCoeff().transpose(),
                     centers.colwise().maxCoeff().transpose());

    KernelSpec kernel = KernelSpec::for_domain(domain);
    kernel.lambda = lambda_opt >= 0.0
                        ? lambda_opt
                        : default_lambda(static_cast<int>(ds.clusters.size()), kernel);

    FitReport report;
    const SurrogateModel model = fit_surrogate(ds, kernel, pi, &report);
    save_model(model, out_path);
    std::printf("centers: %d  lambda: %g  condition estimate: %.3e\n",
                model.K.size(), kernel.lambda, report.condition_estimate);
    std::printf("worst local-regression residual: %.3e\n", report.max_step1_residual);
    std::printf("origin residual ||f(0,0)||: %.3e%s\n", report.origin_drift_norm,
                pi ? (report.origin_drift_norm <= 1e-10 ? "  (exact at origin)"
                                                        : "  (EXCEEDS 1e-10)")
                   : "");
    std::printf("wrote %s\n", out_path.c_str());
    return kExitOk;
}

int cmd_simulate(const std::string& model_path, const std::string& system,
                 int horizon, int steps, const std::string& x0_csv,
                 const std::string& out_prefix, const std::string& tank_config) {
    const SystemBundle bundle = make_system(system, tank_config);
    const SurrogateModel model = load_model(model_path);
    const MpcConfig cfg = default_mpc(bundle, horizon);
    const Vec x0 = x0_csv.empty() ? suite_initial_state(bundle) : parse_vector(x0_csv);

    const ClosedLoopTrace trace =
        run_closed_loop(bundle.sys, model, cfg, x0, steps);
    write_trace_csv(trace, out_prefix + "_trace.csv");

    PlotSeries err;
    err.name = "||x(k)||";
    for (int k = 0; k < trace.states.rows(); ++k) {
        err.x.push_back(k);
        err.y.push_back(trace.states.row(k).norm());
    }
    PlotOptions opt;
    opt.title = system + " closed-loop error";
    opt.x_label = "step k";
    opt.y_label = "||x(k)||";
    opt.log_y = true;
    write_svg_plot(out_prefix + "_error.svg", {err}, opt);

    if (bundle.sys.state_dim == 2) {
        PlotSeries phase;
        phase.name = "trajectory";
        for (int k = 0; k < trace.states.rows(); ++k) {
            phase.x.push_back(trace.states(k, 0));
            phase.y.push_back(trace.states(k, 1));
        }
        PlotOptions popt;
        popt.title = system + " phase plot";
        popt.x_label = "x1";
        popt.y_label = "x2";
        write_svg_plot(out_prefix + "_phase.svg", {phase}, popt);
    }

    double total = 0.0;
    for (double s : trace.solve_seconds) total += s;
    std::printf("steps: %d  mean solve time: %.4g s\n",
                static_cast<int>(trace.inputs.rows()),
                trace.solve_seconds.empty() ? 0.0
                                            : total / trace.solve_seconds.size());
    if (trace.truncated) {
        std::cerr << "run truncated: " << trace.failure << "\n";
        return kExitSolver;
    }
    return kExitOk;
}

int cmd_certify(const std::string& model_path, const std::string& system,
                int horizon, int nbar, std::uint64_t seed,
                const std::string& out_prefix, const std::string& dataset_prefix,
                const std::string& tank_config) {
    const SystemBundle bundle = make_system(system, tank_config);
    const SurrogateModel model = load_model(model_path);
    const MpcConfig cfg = default_mpc(bundle, horizon);
    nlohmann::json bundle_json;

    // Empirical error constants over a product lattice.
    const int n = bundle.sys.state_dim;
    const int state_res = n <= 2 ? 41 : 9;
    const int input_levels = bundle.sys.input_dim <= 1 ? 9 : 5;
    const Mat states = state_lattice(bundle.sys.domain, state_res);
    const Mat inputs = input_lattice(bundle.sys.input_box, input_levels);
    ErrorBoundReport err =
        empirical_error_scan(bundle.sys, model, states, inputs, &model.K.centers);
    err.r_X = model.r_x;
    err.h_X = fill_distance(model.K.centers, bundle.sys.domain, n <= 2 ? 200 : 12);
    err.L_hat =
        lipschitz_estimate(model, bundle.sys.domain, bundle.sys.input_box,
                           n <= 2 ? 15 : 5);
    err.kinv_norm = model.K.inverse_norm_estimate();
    if (!dataset_prefix.empty()) {
        const ClusterDataset ds =
            read_dataset(dataset_prefix + ".csv", dataset_prefix + ".json");
        err.excitation_score = max_excitation_score(ds);
    }
    if (model.K.size() <= 600) {  // quadform search is O(trials * d^2)
        const QuadformBracket qb = signvector_quadform_bound(model.K, 500, seed);
        err.quadform_lower = qb.lower;
        err.quadform_upper = qb.upper;
    }
    write_error_report_json(err, out_prefix + "_error.json");
    {
        std::ifstream err_in(out_prefix + "_error.json");
        bundle_json["error_bounds"] = nlohmann::json::parse(err_in);
    }

    // Growth bounds on random domain samples with the saturated LQR probe.
    std::mt19937_64 rng(seed);
    Mat samples(100, n);
    for (int i = 0; i < samples.rows(); ++i) {
        for (int j = 0; j < n; ++j) {
            std::uniform_real_distribution<double> dist(bundle.sys.domain.lo(j),
                                                        bundle.sys.domain.hi(j));
            samples(i, j) = dist(rng);
        }
        if (samples.row(i).norm() < 1e-6) samples(i, 0) += 0.1;
    }
    ProbePolicy probe;
    try {
        probe = saturated_lqr_probe(model, cfg.Q, cfg.R, cfg.input_box);
    } catch (const NumericalError& e) {
        bundle_json["growth"]["probe_fallback"] = e.what();
        probe = zero_probe(model.input_dim());
    }
    const GrowthBoundSequence B =
        estimate_growth_bounds(model, samples, nbar, cfg.Q, cfg.R, probe);
    write_growth_csv(out_prefix + "_growth.csv", B);
    bundle_json["growth"]["excluded_samples"] = B.excluded_samples.size();
    bundle_json["growth"]["B"] = B.values;

    nlohmann::json alpha_sweep = nlohmann::json::array();
    for (int N = 2; N <= nbar; ++N) {
        const double a = alpha_from_growth(B, N).alpha;
        alpha_sweep.push_back({{"N", N}, {"alpha", std::isfinite(a) ? a : -1e300}});
    }
    bundle_json["alpha_sweep"] = alpha_sweep;
    const auto N_min = minimal_stabilizing_horizon(B);
    bundle_json["minimal_stabilizing_horizon"] =
        N_min ? nlohmann::json(*N_min) : nlohmann::json("horizon insufficient");

    // Surrogate growth bounds and the per-step decrease margin.
    const GrowthBoundSequence B_eps = propagate_growth_to_surrogate(
        B, err.c_x_hat, err.c_u_hat, err.L_hat, cfg.Q, cfg.R, nbar);
    write_growth_csv(out_prefix + "_growth_eps.csv", B, &B_eps);

    const int N_margin = std::min(horizon, nbar);
    const double alpha_eps =
        N_margin >= 2 ? alpha_from_growth(B_eps, N_margin).alpha : -1.0;
    bundle_json["alpha_eps"] = std::isfinite(alpha_eps) ? alpha_eps : -1e300;
    try {
        // kappa from a short closed-loop run on the surrogate's own loop.
        const ClosedLoopTrace probe_trace = run_closed_loop(
            bundle.sys, model, cfg, suite_initial_state(bundle), 50);
        double kappa = 0.0;
        for (int k = 0; k < probe_trace.inputs.rows(); ++k) {
            const double xn = probe_trace.states.row(k).norm();
            if (xn > 1e-12) {
                kappa = std::max(kappa, probe_trace.inputs.row(k).norm() / xn);
            }
        }
        const StabilityMarginReport margin = stability_margin(
            err, cfg.Q, N_margin, B_eps, err.L_hat, alpha_eps, kappa);
        bundle_json["margin"] = {{"C_x", margin.C_x},
                                 {"C_u", margin.C_u},
                                 {"kappa", margin.kappa},
                                 {"margin", margin.margin},
                                 {"verdict", margin.verdict ? "pass" : "fail"}};
    } catch (const std::exception& e) {
        bundle_json["margin"] = {{"verdict", "refused"}, {"reason", e.what()}};
    }

    std::ofstream out(out_prefix + "_certificate.json", std::ios::binary);
    out << bundle_json.dump(2) << '\n';
    std::cout << "wrote " << out_prefix << "_certificate.json\n";
    return kExitOk;
}

int cmd_bench(const std::string& suite, const std::string& out_dir,
              std::uint64_t seed) {
    const SuiteResult result = run_suite(suite, out_dir, seed);
    int failures = 0;
    for (const auto& c : result.cells) {
        std::printf("%-24s %s%s%s\n", c.label.c_str(), c.ok ? "ok" : "FAILED",
                    c.error.empty() ? "" : ": ", c.error.c_str());
        if (!c.ok) ++failures;
    }
    std::printf("results in %s\n", out_dir.c_str());
    return failures == 0 ? kExitOk : kExitSolver;
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* threads = std::getenv("KEDMD_THREADS")) {
        Eigen::setNbThreads(std::atoi(threads));
    }

    CLI::App app{"kernel-EDMD surrogate modeling and predictive control"};
    app.require_subcommand(1);

    std::string system = "vdp", grid = "padua:25", rx = "auto", tank_config;
    std::string out = "out", dataset, model_path, x0_csv;
    int di = 25, horizon = 10, steps = 300, nbar = 30;
    std::uint64_t seed = 1;
    bool pi = false;
    double lambda_opt = -1.0;

    auto* gen = app.add_subcommand("generate", "sample a clustered dataset");
    gen->add_option("--system", system, "vdp | tanks");
    gen->add_option("--grid", grid, "padua:<order> | uniform:<per-axis>");
    gen->add_option("--rx", rx, "cluster radius or 'auto'");
    gen->add_option("--di", di, "samples per cluster");
    gen->add_option("--seed", seed, "RNG seed");
    gen->add_option("--out", out, "output prefix (.csv/.json)");
    gen->add_option("--tank-config", tank_config, "four-tank parameter JSON");

    auto* fit = app.add_subcommand("fit", "fit a surrogate model");
    fit->add_option("--dataset", dataset, "dataset prefix from 'generate'")
        ->required();
    fit->add_flag("--pi", pi, "physics-informed origin regression");
    fit->add_option("--lambda", lambda_opt, "kernel regularization (default auto)");
    fit->add_option("--out", out, "model output path");

    auto* sim = app.add_subcommand("simulate", "closed-loop MPC run");
    sim->add_option("--model", model_path, "model file from 'fit'")->required();
    sim->add_option("--system", system, "vdp | tanks");
    sim->add_option("--horizon", horizon, "prediction horizon N");
    sim->add_option("--steps", steps, "closed-loop steps");
    sim->add_option("--x0", x0_csv, "initial state, comma separated");
    sim->add_option("--out", out, "output prefix");
    sim->add_option("--tank-config", tank_config, "four-tank parameter JSON");

    auto* cert = app.add_subcommand("certify", "stability certificate bundle");
    cert->add_option("--model", model_path, "model file from 'fit'")->required();
    cert->add_option("--system", system, "vdp | tanks");
    cert->add_option("--horizon", horizon, "prediction horizon N");
    cert->add_option("--nbar", nbar, "growth-bound horizon");
    cert->add_option("--seed", seed, "RNG seed for sampling");
    cert->add_option("--dataset", dataset, "dataset prefix for excitation score");
    cert->add_option("--out", out, "output prefix");
    cert->add_option("--tank-config", tank_config, "four-tank parameter JSON");

    auto* bench = app.add_subcommand("bench", "full benchmark matrix");
    bench->add_option("--suite", system, "vdp | tanks");
    bench->add_option("--seed", seed, "RNG seed");
    bench->add_option("--out", out, "results directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            return cmd_generate(system, grid, rx, di, seed, out, tank_config);
        }
        if (fit->parsed()) return cmd_fit(dataset, pi, lambda_opt, out);
        if (sim->parsed()) {
            return cmd_simulate(model_path, system, horizon, steps, x0_csv, out,
                                tank_config);
        }
        if (cert->parsed()) {
            return cmd_certify(model_path, system, horizon, nbar, seed, out,
                               dataset, tank_config);
        }
        if (bench->parsed()) return cmd_bench(system, out, seed);
    } catch (const kedmd::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerics;
    } catch (const kedmd::DataError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const kedmd::ExcitationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const kedmd::EvaluationError& e) {
        std::cerr << "evaluation error: " << e.what() << "\n";
        return kExitNumerics;
    } catch (const kedmd::CapabilityError& e) {
        std::cerr << "unsupported: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
