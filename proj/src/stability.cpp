#include "kedmd/stability.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace kedmd {

SuboptimalityIndex alpha_from_growth(const GrowthBoundSequence& B, int N) {
    if (N < 2) throw DataError("alpha_from_growth: horizon must be at least 2");
    if (B.length() < N) {
        throw DataError("alpha_from_growth: growth sequence shorter than horizon");
    }
    SuboptimalityIndex out;
    out.N = N;
    double tail = 1.0;  // prod_{i=3}^N (B_i - 1), empty product = 1
    for (int i = 3; i <= N; ++i) tail *= B.at(i) - 1.0;
    double prodB = 1.0;  // prod_{i=2}^N B_i
    for (int i = 2; i <= N; ++i) prodB *= B.at(i);
    const double numerator = (B.at(2) - 1.0) * (B.at(N) - 1.0) * tail;
    const double denominator = prodB - (B.at(2) - 1.0) * tail;
    if (denominator <= 0.0) return out;  // -inf sentinel: horizon invalid
    out.alpha = 1.0 - numerator / denominator;
    return out;
}

ProbePolicy zero_probe(int input_dim) {
    return [input_dim](const Vec&) { return Vec(Vec::Zero(input_dim)); };
}

namespace {

// Discrete-time Riccati fixed point for the origin linearization.
Mat dare_fixed_point(const Mat& A, const Mat& Bm, const Mat& Q, const Mat& R) {
    Mat P = Q;
    for (int it = 0; it < 10000; ++it) {
        const Mat S = R + Bm.transpose() * P * Bm;
        const Mat K = S.ldlt().solve(Bm.transpose() * P * A);
        const Mat Pn = Q + A.transpose() * P * (A - Bm * K);
        const double delta = (Pn - P).norm();
        P = 0.5 * (Pn + Pn.transpose());
        if (delta <= 1e-12 * (1.0 + P.norm())) return P;
    }
    throw NumericalError(
        "Riccati iteration did not converge: origin linearization may not be "
        "stabilizable; use the zero probe or supply growth bounds");
}

}  // namespace

ProbePolicy saturated_lqr_probe(const Dynamics& model, const Mat& Q, const Mat& R,
                                const Box& input_box) {
    const int n = model.state_dim();
    const int m = model.input_dim();
    const Vec x0 = Vec::Zero(n);
    const Vec u0 = Vec::Zero(m);
    auto [A, Bm] = model.jacobians(x0, u0);
    const Mat P = dare_fixed_point(A, Bm, Q, R);
    const Mat K = (R + Bm.transpose() * P * Bm).ldlt().solve(Bm.transpose() * P * A);
    Box box = input_box;
    return [K, box](const Vec& x) { return box.clamp(Vec(-K * x)); };
}

GrowthBoundSequence estimate_growth_bounds(const Dynamics& model, const Mat& samples,
                                           int Nbar, const Mat& Q, const Mat& R,
                                           const ProbePolicy& probe,
                                           double divergence_threshold) {
    if (Nbar < 1) throw DataError("estimate_growth_bounds: horizon must be >= 1");
    if (samples.rows() == 0) throw DataError("estimate_growth_bounds: no samples");

    GrowthBoundSequence out;
    out.source = "estimated";
    out.values.assign(Nbar, 0.0);
    out.argmax_states.assign(Nbar, Vec());

    for (int s = 0; s < samples.rows(); ++s) {
        const Vec x0 = samples.row(s).transpose();
        if (x0.norm() == 0.0) {
            throw DataError("estimate_growth_bounds: zero state in sample set");
        }
        const double lstar = x0.dot(Q * x0);

        Vec x = x0;
        double J = 0.0;
        std::vector<double> normalized(Nbar, 0.0);
        bool diverged = false;
        for (int k = 0; k < Nbar; ++k) {
            const Vec u = probe(x);
            J += x.dot(Q * x) + u.dot(R * u);
            normalized[k] = J / lstar;
            if (!std::isfinite(normalized[k]) ||
                normalized[k] > divergence_threshold) {
                diverged = true;
                break;
            }
            x = model.eval(x, u);
        }
        if (diverged) {
            out.excluded_samples.push_back(s);
            continue;
        }
        for (int k = 0; k < Nbar; ++k) {
            if (normalized[k] > out.values[k]) {
                out.values[k] = normalized[k];
                out.argmax_states[k] = x0;
            }
        }
    }
    if (out.excluded_samples.size() == static_cast<std::size_t>(samples.rows())) {
        throw NumericalError(
            "estimate_growth_bounds: every probe rollout diverged");
    }
    // Growth bounds are nondecreasing by definition; enforce by running max.
    for (int k = 1; k < Nbar; ++k) {
        out.values[k] = std::max(out.values[k], out.values[k - 1]);
    }
    return out;
}

GrowthBoundSequence propagate_growth_to_surrogate(const GrowthBoundSequence& B,
                                                  double c_x, double c_u, double L_f,
                                                  const Mat& Q, const Mat& R,
                                                  int Nbar) {
    if (B.length() < Nbar) {
        throw DataError("propagate_growth_to_surrogate: sequence shorter than Nbar");
    }
    const double lam_q =
        Eigen::SelfAdjointEigenSolver<Mat>(Q).eigenvalues().minCoeff();
    const double lam_r =
        Eigen::SelfAdjointEigenSolver<Mat>(R).eigenvalues().minCoeff();
    const double lam = std::min(lam_q, lam_r);
    const double cbar = std::max(c_x, c_u);
    const double d = L_f + c_x;

    GrowthBoundSequence out = B;
    out.values.resize(Nbar);
    out.source = "propagated";
    out.argmax_states.clear();
    for (int N = 1; N <= Nbar; ++N) {
        double c_N = 0.0, sum1 = 0.0, maxterm = 0.0;
        for (int j = 1; j <= N - 1; ++j) {
            c_N += std::pow(2.0 * d * d, j - 1) * B.at(N - j);
            sum1 += std::pow(d, j - 1) * B.at(N - j);
            maxterm = std::max(maxterm, std::pow(d, j - 1) * (N - j));
        }
        c_N *= 4.0 / lam;
        const double cbar_N = (sum1 + 2.0 * B.at(N) * maxterm) / (2.0 * lam);
        out.values[N - 1] = B.at(N) + cbar * cbar * c_N + cbar * cbar_N;
    }
    return out;
}

GrowthBoundSequence extend_growth_sequence(const GrowthBoundSequence& B,
                                           double alpha, int N, int k_max) {
    if (!(alpha > 0.0)) {
        throw NumericalError(
            "extend_growth_sequence: refused, suboptimality index is nonpositive");
    }
    if (B.length() < N) {
        throw DataError("extend_growth_sequence: sequence shorter than N");
    }
    GrowthBoundSequence out = B;
    out.source = "extended";
    out.values.resize(std::max(k_max, B.length()));
    for (int k = N + 1; k <= k_max; ++k) out.values[k - 1] = B.at(N) / alpha;
    return out;
}

std::optional<int> minimal_stabilizing_horizon(const GrowthBoundSequence& B) {
    for (int N = 2; N <= B.length(); ++N) {
        if (alpha_from_growth(B, N).alpha > 0.0) return N;
    }
    return std::nullopt;
}

void write_growth_csv(const std::string& path, const GrowthBoundSequence& B,
                      const GrowthBoundSequence* B_eps) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open growth CSV for writing: " + path);
    out << "N,B_N" << (B_eps ? ",B_N_eps" : "") << ",alpha_N\n";
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
    };
    for (int N = 1; N <= B.length(); ++N) {
        out << N << ',';
        put(B.at(N));
        if (B_eps) {
            out << ',';
            put(B_eps->length() >= N ? B_eps->at(N) : NAN);
        }
        out << ',';
        put(N >= 2 ? alpha_from_growth(B, N).alpha : NAN);
        out << '\n';
    }
}

}  // namespace kedmd
