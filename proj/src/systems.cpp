#include "kedmd/systems.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace kedmd {

Vec step_truth(const ControlAffineSystem& sys, const Vec& x, const Vec& u) {
    if (u.size() != sys.input_dim || x.size() != sys.state_dim) {
        throw DataError("step_truth: dimension mismatch");
    }
    if (!sys.input_box.contains(u, 1e-9)) {
        throw DataError("step_truth: input outside the admissible box");
    }
    Vec next = sys.drift(x);
    for (int i = 0; i < sys.input_dim; ++i) {
        next += u(i) * sys.input_maps[static_cast<size_t>(i)](x);
    }
    if (!next.allFinite()) {
        throw EvaluationError("step_truth: non-finite successor state");
    }
    return next;
}

double equilibrium_residual(const ControlAffineSystem& sys, const EquilibriumSpec& eq) {
    return (step_truth(sys, eq.x_bar, eq.u_bar) - eq.x_bar).norm();
}

EquilibriumSpec refine_equilibrium(const ControlAffineSystem& sys,
                                   const EquilibriumSpec& eq, int max_iterations) {
    const int n = sys.state_dim;
    EquilibriumSpec out = eq;
    for (int it = 0; it < max_iterations; ++it) {
        const Vec res = step_truth(sys, out.x_bar, out.u_bar) - out.x_bar;
        if (res.norm() < 1e-14) break;
        Mat J(n, n);  // Jacobian of x -> step(x, u_bar) - x
        const double h = 1e-7;
        for (int j = 0; j < n; ++j) {
            Vec xp = out.x_bar, xm = out.x_bar;
            xp(j) += h;
            xm(j) -= h;
            J.col(j) = (step_truth(sys, xp, out.u_bar) - step_truth(sys, xm, out.u_bar)) / (2.0 * h);
        }
        J -= Mat::Identity(n, n);
        out.x_bar -= J.fullPivLu().solve(res);
    }
    return out;
}

ControlAffineSystem make_van_der_pol() {
    static constexpr double dt = 0.05;
    static constexpr double nu = 0.1;
    ControlAffineSystem sys;
    sys.state_dim = 2;
    sys.input_dim = 1;
    sys.dt = dt;
    sys.name = "van_der_pol";
    sys.drift = [](const Vec& x) {
        Vec out(2);
        out(0) = x(0) + dt * x(1);
        out(1) = x(1) + dt * (nu * (1.0 - x(0)) * (1.0 - x(0)) * x(1) - x(0));
        return out;
    };
    sys.input_maps = {[](const Vec&) {
        Vec out(2);
        out << 0.0, dt;
        return out;
    }};
    sys.input_box = Box::square(-2.0, 2.0, 1);
    sys.domain = Box::square(-2.0, 2.0, 2);
    return sys;
}

TankParams TankParams::from_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("TankParams: cannot open " + path);
    nlohmann::json j;
    f >> j;
    TankParams p;
    p.a1 = j.at("a1_m2").get<double>();
    p.a2 = j.at("a2_m2").get<double>();
    p.a3 = j.at("a3_m2").get<double>();
    p.a4 = j.at("a4_m2").get<double>();
    p.S = j.at("S_m2").get<double>();
    p.gamma_a = j.at("gamma_a").get<double>();
    p.gamma_b = j.at("gamma_b").get<double>();
    p.g = j.at("g_m_per_s2").get<double>();
    p.dt = j.at("dt_s").get<double>();
    p.equilibrium_tolerance = j.value("equilibrium_tolerance", 1e-6);
    const auto xb = j.at("x_bar_m").get<std::vector<double>>();
    const auto ub = j.at("u_bar_m3_per_h").get<std::vector<double>>();
    if (xb.size() != 4 || ub.size() != 2) {
        throw DataError("TankParams: x_bar must have 4 entries, u_bar 2");
    }
    p.x_bar = Eigen::Map<const Vec>(xb.data(), 4);
    p.u_bar = Eigen::Map<const Vec>(ub.data(), 2);
    if (p.a1 <= 0 || p.a2 <= 0 || p.a3 <= 0 || p.a4 <= 0 || p.S <= 0 ||
        p.g <= 0 || p.dt <= 0 || p.gamma_a <= 0 || p.gamma_a >= 1 ||
        p.gamma_b <= 0 || p.gamma_b >= 1) {
        throw DataError("TankParams: parameters must be physically positive");
    }
    return p;
}

ControlAffineSystem make_four_tank(const TankParams& p) {
    ControlAffineSystem sys;
    sys.state_dim = 4;
    sys.input_dim = 2;
    sys.dt = p.dt;
    sys.name = "four_tank";

    const double c = std::sqrt(2.0 * p.g);
    const double dt = p.dt;
    const double S = p.S;
    const double a1 = p.a1, a2 = p.a2, a3 = p.a3, a4 = p.a4;

    // Tanks 3/4 drain into tanks 1/2; flows q are in m^3/h, levels in m.
    sys.drift = [=](const Vec& h) {
        for (int i = 0; i < 4; ++i) {
            if (h(i) < 0.0) {
                throw EvaluationError(
                    "four_tank: negative level in tank " + std::to_string(i + 1));
            }
        }
        const double o1 = a1 * c * std::sqrt(h(0));
        const double o2 = a2 * c * std::sqrt(h(1));
        const double o3 = a3 * c * std::sqrt(h(2));
        const double o4 = a4 * c * std::sqrt(h(3));
        Vec out(4);
        out(0) = h(0) + dt * (-o1 + o3) / S;
        out(1) = h(1) + dt * (-o2 + o4) / S;
        out(2) = h(2) + dt * (-o3) / S;
        out(3) = h(3) + dt * (-o4) / S;
        return out;
    };
    const double hours = 3600.0;
    Vec ga(4), gb(4);
    ga << p.gamma_a, 0.0, 0.0, 1.0 - p.gamma_a;
    gb << 0.0, p.gamma_b, 1.0 - p.gamma_b, 0.0;
    ga *= dt / (S * hours);
    gb *= dt / (S * hours);
    sys.input_maps = {[ga](const Vec&) { return ga; },
                      [gb](const Vec&) { return gb; }};

    Vec ulo(2), uhi(2);
    ulo << 0.0, 0.0;
    uhi << 3.26, 4.0;
    sys.input_box = Box(ulo, uhi);
    Vec dlo(4), dhi(4);
    dlo << 0.2, 0.2, 0.2, 0.2;
    dhi << 1.36, 1.36, 1.30, 1.30;
    sys.domain = Box(dlo, dhi);

    const EquilibriumSpec eq{p.x_bar, p.u_bar};
    const double res = equilibrium_residual(sys, eq);
    if (res > p.equilibrium_tolerance) {
        throw DataError("make_four_tank: equilibrium residual " + std::to_string(res) +
                        " exceeds tolerance " + std::to_string(p.equilibrium_tolerance));
    }
    return sys;
}

ControlAffineSystem shift_to_origin(const ControlAffineSystem& sys,
                                    const EquilibriumSpec& eq, double tolerance) {
    const Vec residual = step_truth(sys, eq.x_bar, eq.u_bar) - eq.x_bar;
    if (residual.norm() > tolerance) {
        throw DataError("shift_to_origin: equilibrium residual " +
                        std::to_string(residual.norm()) + " exceeds tolerance");
    }

    ControlAffineSystem shifted;
    shifted.state_dim = sys.state_dim;
    shifted.input_dim = sys.input_dim;
    shifted.dt = sys.dt;
    shifted.name = sys.name + "_shifted";
    const Vec x_bar = eq.x_bar;
    const Vec u_bar = eq.u_bar;
    const auto g0 = sys.drift;
    const auto gi = sys.input_maps;
    // absorb the (tiny) residual so that the shifted origin is a fixed point
    // bit-exactly
    shifted.drift = [g0, gi, x_bar, u_bar, residual](const Vec& x) {
        const Vec y = x + x_bar;
        Vec out = g0(y);
        for (size_t i = 0; i < gi.size(); ++i) {
            out += u_bar(static_cast<Eigen::Index>(i)) * gi[i](y);
        }
        return Vec(out - x_bar - residual);
    };
    shifted.input_maps.reserve(gi.size());
    for (const auto& g : gi) {
        shifted.input_maps.push_back(
            [g, x_bar](const Vec& x) { return g(x + x_bar); });
    }
    shifted.input_box = sys.input_box.shifted(u_bar);
    shifted.domain = sys.domain.shifted(x_bar);
    return shifted;
}

}  // namespace kedmd
