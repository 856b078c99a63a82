#include "kedmd/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace kedmd {

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

std::string default_tank_config() {
    return std::string(KEDMD_SOURCE_DIR) + "/config/four_tank.json";
}

}  // namespace

SystemBundle make_system(const std::string& name,
                         const std::string& tank_config_path) {
    if (name == "vdp") {
        return SystemBundle{make_van_der_pol(), "vdp", EquilibriumSpec{}};
    }
    if (name == "tanks") {
        const std::string path =
            tank_config_path.empty() ? default_tank_config() : tank_config_path;
        const TankParams params = TankParams::from_json_file(path);
        const ControlAffineSystem physical = make_four_tank(params);
        EquilibriumSpec eq{params.x_bar, params.u_bar};
        eq = refine_equilibrium(physical, eq);
        ControlAffineSystem shifted =
            shift_to_origin(physical, eq, params.equilibrium_tolerance);
        return SystemBundle{std::move(shifted), "tanks", eq};
    }
    throw DataError("unknown system '" + name + "' (expected vdp or tanks)");
}

Mat make_grid(const std::string& spec, const Box& domain) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) {
        throw DataError("grid spec must look like padua:<order> or uniform:<q>");
    }
    const std::string kind = spec.substr(0, colon);
    int arg = 0;
    try {
        arg = std::stoi(spec.substr(colon + 1));
    } catch (const std::exception&) {
        throw DataError("grid spec has a non-integer parameter: " + spec);
    }
    if (kind == "padua") return padua_points(arg, domain, /*include_origin=*/true);
    if (kind == "uniform") return uniform_grid(arg, domain, /*include_origin=*/true);
    throw DataError("unknown grid kind '" + kind + "'");
}

double auto_cluster_radius(const std::string& system_name, int center_count) {
    if (center_count <= 0) throw DataError("auto_cluster_radius: no centers");
    if (system_name == "vdp") return std::sqrt(2.0) / center_count;
    if (system_name == "tanks") return 2.0 / center_count;
    throw DataError("no cluster-radius rule for system '" + system_name + "'");
}

KernelSpec default_kernel(const ControlAffineSystem& sys, int center_count) {
    KernelSpec spec = KernelSpec::for_domain(sys.domain);
    spec.lambda = default_lambda(center_count, spec);
    return spec;
}

MpcConfig default_mpc(const SystemBundle& bundle, int N) {
    MpcConfig cfg;
    cfg.N = N;
    cfg.Q = Mat::Identity(bundle.sys.state_dim, bundle.sys.state_dim);
    cfg.R = 1e-4 * Mat::Identity(bundle.sys.input_dim, bundle.sys.input_dim);
    cfg.input_box = bundle.sys.input_box;
    return cfg;
}

FittedCell fit_for(const SystemBundle& bundle, const std::string& grid_spec,
                   bool physics_informed, int samples_per_cluster,
                   std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    const Mat grid = make_grid(grid_spec, bundle.sys.domain);
    const double r_x =
        auto_cluster_radius(bundle.name, static_cast<int>(grid.rows()));
    FittedCell cell;
    cell.dataset =
        generate_dataset(bundle.sys, grid, r_x, samples_per_cluster, seed);
    cell.dataset.source = bundle.name + ":" + grid_spec;
    const KernelSpec kernel =
        default_kernel(bundle.sys, static_cast<int>(grid.rows()));
    cell.model =
        fit_surrogate(cell.dataset, kernel, physics_informed, &cell.report);
    cell.fit_seconds = seconds_since(t0);
    return cell;
}

Vec suite_initial_state(const SystemBundle& bundle) {
    if (bundle.name == "vdp") {
        Vec x0(2);
        x0 << 0.5, 0.5;
        return x0;
    }
    if (bundle.name == "tanks") {
        // Physical start at 1 m in every tank, expressed in shifted coordinates.
        return Vec::Ones(4) - bundle.physical_equilibrium.x_bar;
    }
    throw DataError("no benchmark initial state for system '" + bundle.name + "'");
}

int suite_steps(const std::string& system_name) {
    if (system_name == "vdp") return 300;
    if (system_name == "tanks") return 150;
    throw DataError("no benchmark step count for system '" + system_name + "'");
}

BenchCellResult run_bench_cell(const SystemBundle& bundle, const FittedCell& fitted,
                               int N, int steps, const Vec& x0) {
    BenchCellResult res;
    res.centers = fitted.model.K.size();
    res.N = N;
    res.physics_informed = fitted.model.pi_variant;
    std::ostringstream label;
    label << bundle.name << (fitted.model.pi_variant ? "_pi" : "_nonpi") << "_d"
          << res.centers << "_N" << N;
    res.label = label.str();
    try {
        const MpcConfig cfg = default_mpc(bundle, N);
        res.trace = run_closed_loop(bundle.sys, fitted.model, cfg, x0, steps);
        res.ok = !res.trace.truncated;
        res.error = res.trace.failure;
        if (!res.trace.solve_seconds.empty()) {
            double total = 0.0;
            for (double s : res.trace.solve_seconds) total += s;
            res.mean_solve_seconds = total / res.trace.solve_seconds.size();
        }
    } catch (const std::exception& e) {
        res.ok = false;
        res.error = e.what();
    }
    return res;
}

SuiteResult run_suite(const std::string& suite, const std::string& out_dir,
                      std::uint64_t seed) {
    std::vector<std::string> grids;
    std::vector<int> horizons;
    if (suite == "vdp") {
        grids = {"padua:25", "padua:50"};
        horizons = {10, 30};
    } else if (suite == "tanks") {
        grids = {"uniform:5", "uniform:6", "uniform:7"};
        horizons = {10};
    } else {
        throw DataError("unknown suite '" + suite + "' (expected vdp or tanks)");
    }

    std::filesystem::create_directories(out_dir);
    const SystemBundle bundle = make_system(suite);
    const Vec x0 = suite_initial_state(bundle);
    const int steps = suite_steps(suite);

    SuiteResult result;
    result.manifest.command = "bench " + suite;
    {
        nlohmann::json cfg{{"suite", suite}, {"seed", seed},
                           {"grids", grids},  {"horizons", horizons},
                           {"steps", steps},  {"samples_per_cluster", 25}};
        result.manifest.config_snapshot = cfg.dump();
    }

    std::vector<PlotSeries> overlay;
    for (const std::string& grid : grids) {
        for (bool pi : {true, false}) {
            FittedCell fitted;
            try {
                fitted = fit_for(bundle, grid, pi, 25, seed);
            } catch (const std::exception& e) {
                BenchCellResult failed;
                failed.label = bundle.name + (pi ? "_pi_" : "_nonpi_") + grid;
                failed.error = std::string("fit failed: ") + e.what();
                result.cells.push_back(std::move(failed));
                continue;
            }
            result.manifest.timings_s["fit:" + grid +
                                      (pi ? ":pi" : ":nonpi")] = fitted.fit_seconds;
            for (int N : horizons) {
                const auto t0 = std::chrono::steady_clock::now();
                BenchCellResult cell = run_bench_cell(bundle, fitted, N, steps, x0);
                result.manifest.timings_s["cell:" + cell.label] = seconds_since(t0);

                const std::string trace_path = out_dir + "/" + cell.label + ".csv";
                write_trace_csv(cell.trace, trace_path);
                result.manifest.record_output(trace_path);

                PlotSeries series;
                series.name = cell.label;
                for (int k = 0; k < cell.trace.states.rows(); ++k) {
                    series.x.push_back(k);
                    series.y.push_back(cell.trace.states.row(k).norm());
                }
                overlay.push_back(std::move(series));
                result.cells.push_back(std::move(cell));
            }
        }
    }

    {
        PlotOptions opt;
        opt.title = suite + " closed-loop error";
        opt.x_label = "step k";
        opt.y_label = "||x(k)||";
        opt.log_y = true;
        const std::string fig = out_dir + "/" + suite + "_error_overlay.svg";
        write_svg_plot(fig, overlay, opt);
        result.manifest.record_output(fig);
    }

    // Wall-clock timing table; volatile, so not hash-tracked.
    {
        std::ofstream out(out_dir + "/timing.csv", std::ios::binary);
        out << "label,d,N,physics_informed,mean_solve_seconds\n";
        char buf[64];
        for (const auto& c : result.cells) {
            std::snprintf(buf, sizeof buf, "%.6g", c.mean_solve_seconds);
            out << c.label << ',' << c.centers << ',' << c.N << ','
                << (c.physics_informed ? 1 : 0) << ',' << buf << '\n';
        }
    }

    result.manifest.write(out_dir + "/manifest.json");
    return result;
}

}  // namespace kedmd
