#include <cmath>
#include <random>

#include "doctest.h"
#include "kedmd/stability.hpp"

using namespace kedmd;

namespace {

GrowthBoundSequence seq(std::vector<double> values) {
    GrowthBoundSequence B;
    B.values = std::move(values);
    B.source = "supplied";
    return B;
}

// scalar stable linear system x+ = a x + b u
AnalyticDynamics scalar_system(double a, double b) {
    AnalyticDynamics d;
    d.n = 1;
    d.m = 1;
    d.step = [a, b](const Vec& x, const Vec& u) {
        Vec out(1);
        out(0) = a * x(0) + b * u(0);
        return out;
    };
    d.jac = [a, b](const Vec&, const Vec&) {
        Mat Jx(1, 1), Ju(1, 1);
        Jx << a;
        Ju << b;
        return std::make_pair(Jx, Ju);
    };
    return d;
}

}  // namespace

TEST_CASE("Suboptimality formula identities") {
    // B == 1 everywhere: the numerator factor B_2 - 1 vanishes
    CHECK(alpha_from_growth(seq(std::vector<double>(50, 1.0)), 2).alpha == 1.0);
    CHECK(alpha_from_growth(seq(std::vector<double>(50, 1.0)), 50).alpha == 1.0);

    // hand-derived: B = (1, 2, 2) gives alpha_3 = 1 - 1/(4 - 1) = 2/3
    CHECK(alpha_from_growth(seq({1, 2, 2}), 3).alpha ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    // N = 2 degenerate products: alpha_2 = 1 - (B_2 - 1)^2
    CHECK(alpha_from_growth(seq({1, 2}), 2).alpha == doctest::Approx(0.0));
    CHECK(alpha_from_growth(seq({1, 1.5}), 2).alpha ==
          doctest::Approx(0.75).epsilon(1e-12));

    // large bounds make the horizon invalid: alpha is (finitely) negative
    const double a = alpha_from_growth(seq({1, 10, 10, 10}), 4).alpha;
    CHECK(std::isfinite(a));
    CHECK(a < 0.0);

    // degenerate input with a nonpositive denominator gives the -inf sentinel
    const double s = alpha_from_growth(seq({1, 0.4, 0.4}), 3).alpha;
    CHECK(std::isinf(s));
    CHECK(s < 0.0);

    CHECK_THROWS_AS(alpha_from_growth(seq({1, 2}), 1), DataError);
    CHECK_THROWS_AS(alpha_from_growth(seq({1, 2}), 3), DataError);
}

TEST_CASE("Alpha is nonincreasing in each growth bound") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> bound(1.0, 1.8);
    std::uniform_int_distribution<int> len(3, 10);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = len(rng);
        std::vector<double> v(n);
        v[0] = 1.0;
        for (int i = 1; i < n; ++i) v[i] = std::max(v[i - 1], bound(rng));
        const double base = alpha_from_growth(seq(v), n).alpha;
        std::uniform_int_distribution<int> pick(1, n - 1);
        std::vector<double> bumped = v;
        const int i = pick(rng);
        for (int j = i; j < n; ++j) bumped[j] = std::max(bumped[j], v[i] + 0.05);
        const double worse = alpha_from_growth(seq(bumped), n).alpha;
        CHECK(worse <= base + 1e-12);
    }
}

TEST_CASE("Growth-bound estimation on a geometric oracle") {
    // x+ = 0.5 x with u = 0 probe, Q = R = 1: J_N / l* = sum_{i<N} 0.25^i
    const AnalyticDynamics sys = scalar_system(0.5, 1.0);
    Mat samples(3, 1);
    samples << 0.3, -0.7, 1.1;
    const Mat Q = Mat::Identity(1, 1), R = Mat::Identity(1, 1);
    const GrowthBoundSequence B =
        estimate_growth_bounds(sys, samples, 12, Q, R, zero_probe(1));
    for (int N = 1; N <= 12; ++N) {
        double expected = 0.0;
        for (int i = 0; i < N; ++i) expected += std::pow(0.25, i);
        CHECK(B.at(N) == doctest::Approx(expected).epsilon(1e-12));
    }
    CHECK(B.at(12) < 4.0 / 3.0 + 1e-9);  // geometric limit
    CHECK(B.at(1) == doctest::Approx(1.0));
    // monotone nondecreasing by construction
    for (int N = 2; N <= 12; ++N) CHECK(B.at(N) >= B.at(N - 1));
    CHECK(B.excluded_samples.empty());
}

TEST_CASE("Diverging probe rollouts are excluded") {
    const AnalyticDynamics sys = scalar_system(3.0, 1.0);  // unstable, u = 0
    Mat samples(2, 1);
    samples << 1.0, 0.5;
    const Mat Q = Mat::Identity(1, 1), R = Mat::Identity(1, 1);
    CHECK_THROWS_AS(estimate_growth_bounds(sys, samples, 20, Q, R, zero_probe(1)),
                    NumericalError);  // every sample diverges
}

TEST_CASE("Saturated LQR probe stabilizes a controllable system") {
    const AnalyticDynamics sys = scalar_system(1.2, 1.0);
    const Mat Q = Mat::Identity(1, 1), R = 0.1 * Mat::Identity(1, 1);
    const Box box = Box::square(-5.0, 5.0, 1);
    const ProbePolicy probe = saturated_lqr_probe(sys, Q, R, box);
    Vec x(1);
    x << 2.0;
    for (int k = 0; k < 50; ++k) {
        const Vec u = probe(x);
        CHECK(box.contains(u));
        x = sys.eval(x, u);
    }
    CHECK(x.norm() < 1e-3);

    Mat samples(2, 1);
    samples << 1.0, -2.0;
    const GrowthBoundSequence B =
        estimate_growth_bounds(sys, samples, 15, Q, R, probe);
    CHECK(B.excluded_samples.empty());
    CHECK(B.at(15) < 50.0);  // bounded despite the open-loop instability
}

TEST_CASE("Propagation to the surrogate growth bounds") {
    const Mat Q = Mat::Identity(2, 2), R = Mat::Identity(1, 1);
    const GrowthBoundSequence B = seq({1.0, 1.5, 1.8, 2.0, 2.1});

    // c = 0 leaves the sequence untouched
    const GrowthBoundSequence same =
        propagate_growth_to_surrogate(B, 0.0, 0.0, 1.3, Q, R, 5);
    for (int N = 1; N <= 5; ++N) CHECK(same.at(N) == B.at(N));

    // hand expansion at N = 2: c_2 = 4 B_1 / lam, cbar_2 = (B_1 + 2 B_2)/(2 lam)
    const double c = 0.01, L = 1.3;
    const GrowthBoundSequence prop =
        propagate_growth_to_surrogate(B, c, c, L, Q, R, 5);
    const double expected2 = 1.5 + c * c * 4.0 * 1.0 + c * (1.0 + 2.0 * 1.5) / 2.0;
    CHECK(prop.at(2) == doctest::Approx(expected2).epsilon(1e-12));

    // strictly increasing in the error constant
    const GrowthBoundSequence prop2 =
        propagate_growth_to_surrogate(B, 2 * c, 2 * c, L, Q, R, 5);
    for (int N = 2; N <= 5; ++N) CHECK(prop2.at(N) > prop.at(N));

    // elementwise convergence as c -> 0, linear leading term
    double prev_gap = 1e300;
    for (double cc : {1e-1, 1e-2, 1e-3}) {
        const GrowthBoundSequence p =
            propagate_growth_to_surrogate(B, cc, cc, L, Q, R, 5);
        const double gap = p.at(5) - B.at(5);
        CHECK(gap > 0.0);
        CHECK(gap < prev_gap / 9.0);  // ~10x smaller per decade
        prev_gap = gap;
    }
}

TEST_CASE("Tail extension") {
    const GrowthBoundSequence B = seq({1.0, 2.0, 3.0});
    const GrowthBoundSequence ext = extend_growth_sequence(B, 0.5, 3, 6);
    CHECK(ext.at(1) == 1.0);
    CHECK(ext.at(3) == 3.0);  // prefix unchanged
    for (int k = 4; k <= 6; ++k) CHECK(ext.at(k) == doctest::Approx(6.0));
    // constant when alpha = 1, monotone in general
    const GrowthBoundSequence flat = extend_growth_sequence(B, 1.0, 3, 5);
    CHECK(flat.at(5) == 3.0);
    for (int k = 2; k <= 6; ++k) CHECK(ext.at(k) >= ext.at(k - 1));
    CHECK_THROWS_AS(extend_growth_sequence(B, 0.0, 3, 6), NumericalError);

    // alpha on the extended sequence stays positive past N
    GrowthBoundSequence base = seq({1.0, 1.4, 1.6});
    const double a3 = alpha_from_growth(base, 3).alpha;
    REQUIRE(a3 > 0.0);
    const GrowthBoundSequence long_ext = extend_growth_sequence(base, a3, 3, 30);
    for (int N = 4; N <= 30; ++N) {
        CHECK(alpha_from_growth(long_ext, N).alpha > 0.0);
    }
}

TEST_CASE("Minimal stabilizing horizon") {
    CHECK(minimal_stabilizing_horizon(seq(std::vector<double>(10, 1.0))) == 2);
    // B = (1, 2, 2, ...): alpha_2 = 0, alpha_3 = 2/3 > 0
    CHECK(minimal_stabilizing_horizon(seq({1, 2, 2, 2, 2})) == 3);
    // linear growth never stabilizes within the sequence
    std::vector<double> lin(12);
    for (int i = 0; i < 12; ++i) lin[i] = i + 1.0;
    CHECK(!minimal_stabilizing_horizon(seq(lin)).has_value());
}
