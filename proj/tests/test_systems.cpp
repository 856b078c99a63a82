#include <cmath>

#include "doctest.h"
#include "kedmd/systems.hpp"

using namespace kedmd;

namespace {
const char* kTankConfig = KEDMD_SOURCE_DIR "/config/four_tank.json";
}

TEST_CASE("Van der Pol one-step map") {
    const ControlAffineSystem sys = make_van_der_pol();
    CHECK(sys.state_dim == 2);
    CHECK(sys.input_dim == 1);
    CHECK(sys.dt == 0.05);

    // the origin is a controlled equilibrium with u = 0
    CHECK(sys.drift(Vec::Zero(2)).norm() == 0.0);

    // hand evaluation of x+ = x + dt (x2, nu (1-x1)^2 x2 - x1 + u)
    Vec x(2), u(1);
    x << 0.5, -0.3;
    u << 1.25;
    const Vec xp = step_truth(sys, x, u);
    CHECK(xp(0) == doctest::Approx(0.5 + 0.05 * (-0.3)).epsilon(1e-15));
    CHECK(xp(1) ==
          doctest::Approx(-0.3 + 0.05 * (0.1 * 0.25 * (-0.3) - 0.5 + 1.25))
              .epsilon(1e-14));
    // the input map is the constant column (0, dt)
    const Vec g1 = sys.input_maps[0](x);
    CHECK(g1(0) == 0.0);
    CHECK(g1(1) == 0.05);

    // inputs outside the box are rejected
    Vec bad(1);
    bad << 2.5;
    CHECK_THROWS_AS(step_truth(sys, x, bad), DataError);
}

TEST_CASE("Four-tank plant and equilibrium") {
    const TankParams params = TankParams::from_json_file(kTankConfig);
    const ControlAffineSystem sys = make_four_tank(params);
    CHECK(sys.state_dim == 4);
    CHECK(sys.input_dim == 2);

    EquilibriumSpec eq{params.x_bar, params.u_bar};
    // published equilibrium holds to its printed rounding
    CHECK(equilibrium_residual(sys, eq) < 1e-4);

    // Newton refinement reaches an exact fixed point
    const EquilibriumSpec refined = refine_equilibrium(sys, eq);
    CHECK(equilibrium_residual(sys, refined) < 1e-12);
    CHECK((refined.x_bar - eq.x_bar).norm() < 1e-3);

    // negative levels are a domain violation, not silent NaN
    Vec below = params.x_bar;
    below(0) = -0.1;
    CHECK_THROWS_AS(step_truth(sys, below, params.u_bar), EvaluationError);
}

TEST_CASE("Shift to origin") {
    const TankParams params = TankParams::from_json_file(kTankConfig);
    const ControlAffineSystem sys = make_four_tank(params);
    const EquilibriumSpec refined =
        refine_equilibrium(sys, {params.x_bar, params.u_bar});
    const ControlAffineSystem shifted =
        shift_to_origin(sys, refined, params.equilibrium_tolerance);

    // the shifted drift vanishes at the origin exactly
    CHECK(shifted.drift(Vec::Zero(4)).norm() == 0.0);

    // shifted input box: subtract u_bar from the physical bounds
    CHECK(shifted.input_box.lo(0) ==
          doctest::Approx(0.0 - refined.u_bar(0)).epsilon(1e-12));
    CHECK(shifted.input_box.hi(0) ==
          doctest::Approx(3.26 - refined.u_bar(0)).epsilon(1e-12));
    CHECK(shifted.input_box.lo(1) ==
          doctest::Approx(0.0 - refined.u_bar(1)).epsilon(1e-12));
    CHECK(shifted.input_box.hi(1) ==
          doctest::Approx(4.0 - refined.u_bar(1)).epsilon(1e-12));
    // published rounded values for reference: [-1.666, 1.594] x [-1.974, 2.026]
    CHECK(shifted.input_box.lo(0) == doctest::Approx(-1.666).epsilon(1e-2));
    CHECK(shifted.input_box.hi(1) == doctest::Approx(2.026).epsilon(1e-2));

    // shifted dynamics agree with shifting the physical dynamics
    Vec y(4), v(2);
    y << 0.1, -0.05, 0.02, 0.03;
    v << 0.2, -0.1;
    const Vec lhs = step_truth(shifted, y, v);
    const Vec rhs =
        step_truth(sys, Vec(y + refined.x_bar), Vec(v + refined.u_bar)) -
        refined.x_bar;
    CHECK((lhs - rhs).norm() < 1e-12);

    // refusal when the residual exceeds the tolerance
    EquilibriumSpec bad = refined;
    bad.x_bar(0) += 0.05;
    CHECK_THROWS_AS(shift_to_origin(sys, bad, 1e-6), DataError);
}

TEST_CASE("Tank parameter validation") {
    CHECK_THROWS_AS(TankParams::from_json_file("/nonexistent/tanks.json"),
                    DataError);
}
