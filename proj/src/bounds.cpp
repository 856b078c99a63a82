#include "kedmd/bounds.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace kedmd {

namespace {

struct ErrSample {
    double x_norm;
    double u_norm;
    double err;
};

}  // namespace

ErrorBoundReport empirical_error_scan(const ControlAffineSystem& truth,
                                      const Dynamics& model, const Mat& test_states,
                                      const Mat& test_inputs,
                                      const Mat* training_centers,
                                      double min_center_distance) {
    if (test_states.rows() == 0 || test_inputs.rows() == 0) {
        throw DataError("empirical_error_scan: empty test set");
    }

    ErrorBoundReport rep;
    rep.test_inputs = static_cast<int>(test_inputs.rows());

    std::vector<int> kept;
    for (int i = 0; i < test_states.rows(); ++i) {
        bool near_center = false;
        if (training_centers) {
            for (int c = 0; c < training_centers->rows(); ++c) {
                if ((test_states.row(i) - training_centers->row(c)).norm() <
                    min_center_distance) {
                    near_center = true;
                    break;
                }
            }
        }
        if (near_center) {
            ++rep.filtered_states;
        } else {
            kept.push_back(i);
        }
    }
    if (kept.empty()) {
        throw DataError(
            "empirical_error_scan: every test state was filtered as a training "
            "center duplicate");
    }
    rep.test_states = static_cast<int>(kept.size());

    std::vector<ErrSample> samples;
    samples.reserve(kept.size() * test_inputs.rows());
    for (int i : kept) {
        const Vec x = test_states.row(i).transpose();
        for (int j = 0; j < test_inputs.rows(); ++j) {
            const Vec u = test_inputs.row(j).transpose();
            const double err = (step_truth(truth, x, u) - model.eval(x, u)).norm();
            rep.eta_hat = std::max(rep.eta_hat, err);
            if (x.norm() == 0.0 && u.norm() == 0.0) continue;  // trivial point
            samples.push_back({x.norm(), u.norm(), err});
        }
    }

    if (rep.eta_hat == 0.0 || samples.empty()) return rep;  // exact model

    // Hard floors from samples where only one of the two terms is active.
    double cx_floor = 0.0, cu_floor = 0.0, cx_max = 0.0;
    for (const auto& s : samples) {
        if (s.u_norm == 0.0) cx_floor = std::max(cx_floor, s.err / s.x_norm);
        if (s.x_norm == 0.0) cu_floor = std::max(cu_floor, s.err / s.u_norm);
        if (s.x_norm > 0.0) cx_max = std::max(cx_max, s.err / s.x_norm);
    }
    cx_max = std::max(cx_max, cx_floor);

    const double weight = truth.input_box.diameter() / truth.domain.diameter();
    auto cu_for = [&](double cx) {
        double cu = cu_floor;
        for (const auto& s : samples) {
            if (s.u_norm == 0.0) continue;
            cu = std::max(cu, std::max(0.0, s.err - cx * s.x_norm) / s.u_norm);
        }
        return cu;
    };

    // Log sweep from the floor to the all-state envelope; the floor itself is
    // always a candidate (and 0 when no u = 0 sample forces it).
    std::vector<double> candidates{cx_floor};
    const double lo = std::max(cx_floor, 1e-12 * cx_max);
    if (cx_max > lo) {
        const int grid = 60;
        for (int g = 0; g <= grid; ++g) {
            candidates.push_back(lo * std::pow(cx_max / lo, double(g) / grid));
        }
    }
    double best = INFINITY;
    for (double cx : candidates) {
        const double cu = cu_for(cx);
        const double score = cx + weight * cu;
        if (score < best) {
            best = score;
            rep.c_x_hat = cx;
            rep.c_u_hat = cu;
        }
    }
    // Guard against rounding on the envelope's active samples.
    rep.c_x_hat *= 1.0 + 1e-12;
    rep.c_u_hat *= 1.0 + 1e-12;
    return rep;
}

double lipschitz_estimate(const Dynamics& model, const Box& domain,
                          const Box& input_box, int resolution) {
    if (resolution < 2) throw DataError("lipschitz_estimate: resolution must be >= 2");
    const int n = model.state_dim();
    const int m = model.input_dim();
    const long vertex_count = 1L << m;

    double L = 0.0;
    std::vector<int> idx(n, 0);
    while (true) {
        Vec x(n);
        for (int a = 0; a < n; ++a) {
            x(a) = domain.lo(a) +
                   (domain.hi(a) - domain.lo(a)) * idx[a] / (resolution - 1);
        }
        for (long v = 0; v < vertex_count; ++v) {
            Vec u(m);
            for (int b = 0; b < m; ++b) {
                u(b) = ((v >> b) & 1) ? input_box.hi(b) : input_box.lo(b);
            }
            const Mat Jx = model.jacobians(x, u).first;
            L = std::max(L, Eigen::JacobiSVD<Mat>(Jx).singularValues()(0));
        }
        int a = 0;
        for (; a < n; ++a) {
            if (++idx[a] < resolution) break;
            idx[a] = 0;
        }
        if (a == n) break;
    }
    return L;
}

BoundDecomposition theoretical_bound_skeleton(
    const std::vector<ErrorBoundReport>& scans, int smoothness_k) {
    BoundDecomposition out;
    out.smoothness_k = smoothness_k;
    out.uniform_exponent = smoothness_k + 0.5;
    std::ostringstream os;
    os << "eta <= C1 * h_X^" << out.uniform_exponent
       << " + C2 * c * ||K^-1|| * r_X   (C1, C2: unknown RKHS constants; "
          "c tracked via the excitation score)";
    out.formula = os.str();
    for (const auto& s : scans) out.measured.push_back(s.eta_hat);

    if (scans.size() < 3) return out;  // fit refused, symbolic-only

    Mat A(scans.size(), 2);
    Vec b(scans.size());
    for (std::size_t i = 0; i < scans.size(); ++i) {
        A(i, 0) = std::pow(scans[i].h_X, out.uniform_exponent);
        A(i, 1) = scans[i].excitation_score * scans[i].kinv_norm * scans[i].r_X;
        b(i) = scans[i].eta_hat;
    }
    Vec c = A.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(b);
    out.C1_hat = std::max(0.0, c(0));
    out.C2_hat = std::max(0.0, c(1));
    out.fitted = true;
    for (std::size_t i = 0; i < scans.size(); ++i) {
        out.predicted.push_back(out.C1_hat * A(i, 0) + out.C2_hat * A(i, 1));
    }
    return out;
}

StabilityMarginReport stability_margin(const ErrorBoundReport& err, const Mat& Q,
                                       int N, const GrowthBoundSequence& B_eps,
                                       double L_hat, double alpha_eps,
                                       double kappa) {
    if (!(alpha_eps > 0.0)) {
        throw NumericalError(
            "stability_margin: certificate refused, suboptimality index is "
            "nonpositive");
    }
    if (B_eps.length() < N) {
        throw DataError("stability_margin: growth sequence shorter than horizon");
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(Q);
    const double lam_min = es.eigenvalues().minCoeff();
    const double lam_max = es.eigenvalues().maxCoeff();
    const double Q_norm = std::max(std::abs(lam_min), std::abs(lam_max));
    const double root = std::sqrt(B_eps.at(N) * lam_max / lam_min);

    StabilityMarginReport rep;
    rep.alpha_eps = alpha_eps;
    rep.kappa = kappa;
    double Li = 1.0;  // L_hat^i
    for (int i = 0; i < N; ++i) {
        rep.C_x += root * Li * (err.c_x_hat + 0.5 * err.c_u_hat) +
                   std::pow(Li * err.c_x_hat, 2);
        rep.C_u += root * Li * 0.5 * err.c_u_hat + std::pow(Li * err.c_u_hat, 2);
        Li *= L_hat;
    }
    rep.C_x *= 2.0 * Q_norm;
    rep.C_u *= 2.0 * Q_norm;
    rep.margin = rep.C_x + rep.C_u * kappa * kappa - alpha_eps * lam_min;
    rep.verdict = rep.margin < 0.0;
    return rep;
}

namespace {

nlohmann::json report_json(const ErrorBoundReport& r) {
    return {{"eta_hat", r.eta_hat},
            {"c_x_hat", r.c_x_hat},
            {"c_u_hat", r.c_u_hat},
            {"L_hat", r.L_hat},
            {"h_X", r.h_X},
            {"r_X", r.r_X},
            {"excitation_score", r.excitation_score},
            {"kinv_norm", r.kinv_norm},
            {"quadform_lower", r.quadform_lower},
            {"quadform_upper", r.quadform_upper},
            {"test_states", r.test_states},
            {"test_inputs", r.test_inputs},
            {"filtered_states", r.filtered_states}};
}

}  // namespace

void write_error_report_json(const ErrorBoundReport& r, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open report for writing: " + path);
    out << report_json(r).dump(2) << '\n';
}

void append_error_report_csv(const ErrorBoundReport& r, const std::string& path) {
    const bool fresh = !std::ifstream(path).good();
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw DataError("cannot open report CSV for writing: " + path);
    if (fresh) {
        out << "eta_hat,c_x_hat,c_u_hat,L_hat,h_X,r_X,excitation_score,"
               "kinv_norm,quadform_lower,quadform_upper,test_states,test_inputs,"
               "filtered_states\n";
    }
    char buf[64];
    auto put = [&](double v, char sep) {
        std::snprintf(buf, sizeof buf, "%.17g%c", v, sep);
        out << buf;
    };
    put(r.eta_hat, ',');
    put(r.c_x_hat, ',');
    put(r.c_u_hat, ',');
    put(r.L_hat, ',');
    put(r.h_X, ',');
    put(r.r_X, ',');
    put(r.excitation_score, ',');
    put(r.kinv_norm, ',');
    put(r.quadform_lower, ',');
    put(r.quadform_upper, ',');
    out << r.test_states << ',' << r.test_inputs << ',' << r.filtered_states
        << '\n';
}

}  // namespace kedmd
