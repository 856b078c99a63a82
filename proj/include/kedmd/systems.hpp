#pragma once

#include <functional>
#include <string>
#include <vector>

#include "kedmd/types.hpp"

namespace kedmd {

/// Discrete-time control-affine system x+ = g0(x) + sum_i u_i g_i(x).
/// Immutable value object; safe to evaluate concurrently.
struct ControlAffineSystem {
    int state_dim = 0;
    int input_dim = 0;
    std::function<Vec(const Vec&)> drift;                    // g0
    std::vector<std::function<Vec(const Vec&)>> input_maps;  // g_1..g_m
    Box input_box;
    Box domain;
    double dt = 0.0;
    std::string name;
};

/// Controlled equilibrium (x_bar, u_bar) of the one-step map.
struct EquilibriumSpec {
    Vec x_bar;
    Vec u_bar;
};

/// Physical parameters of the four-tank benchmark, loaded from JSON.
/// Units: a1..a4 [m^2], S [m^2], g [m/s^2], dt [s], flows in U [m^3/h].
struct TankParams {
    double a1, a2, a3, a4;   // outlet cross sections
    double S;                // tank cross section
    double gamma_a, gamma_b; // valve splits
    double g;                // gravity
    double dt;               // Euler sampling time
    double equilibrium_tolerance = 1e-6;
    Vec x_bar;               // published equilibrium levels [m]
    Vec u_bar;               // published equilibrium flows [m^3/h]

    static TankParams from_json_file(const std::string& path);
};

/// One step of the true dynamics. Throws EvaluationError on domain
/// violations (e.g. negative tank level under a square root); never
/// returns silent NaN.
Vec step_truth(const ControlAffineSystem& sys, const Vec& x, const Vec& u);

/// Residual ||step(x_bar, u_bar) - x_bar|| of the one-step map.
double equilibrium_residual(const ControlAffineSystem& sys, const EquilibriumSpec& eq);

/// Newton refinement of x_bar (u_bar fixed) so that the discrete map has an
/// exact fixed point. Jacobian by central finite differences.
EquilibriumSpec refine_equilibrium(const ControlAffineSystem& sys,
                                   const EquilibriumSpec& eq,
                                   int max_iterations = 30);

/// Euler-discretized Van der Pol oscillator, dt = 0.05, nu = 0.1,
/// U = [-2,2], Omega = [-2,2]^2. Origin is a controlled equilibrium.
ControlAffineSystem make_van_der_pol();

/// Forward-Euler four-tank process (unshifted physical coordinates).
/// Throws DataError if (x_bar, u_bar) from params fails the residual check.
ControlAffineSystem make_four_tank(const TankParams& params);

/// Coordinate shift moving the equilibrium to the origin; boxes are shifted
/// accordingly and the residual constant is absorbed so that the shifted
/// drift satisfies g0(0) = 0 exactly. Refuses (DataError) if the residual
/// exceeds `tolerance`.
ControlAffineSystem shift_to_origin(const ControlAffineSystem& sys,
                                    const EquilibriumSpec& eq,
                                    double tolerance = 1e-6);

}  // namespace kedmd
