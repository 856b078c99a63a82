#pragma once

#include <string>
#include <vector>

#include "kedmd/stability.hpp"
#include "kedmd/surrogate.hpp"
#include "kedmd/systems.hpp"
#include "kedmd/types.hpp"

namespace kedmd {

/// Empirical model-error certificate over a product test grid: uniform bound
/// eta_hat and proportional envelope err <= c_x||x|| + c_u||u||, plus the
/// geometric diagnostics the theoretical rate structure consumes.
struct ErrorBoundReport {
    double eta_hat = 0.0;
    double c_x_hat = 0.0;
    double c_u_hat = 0.0;
    double L_hat = 0.0;
    double h_X = 0.0;               // fill distance of the interpolation nodes
    double r_X = 0.0;               // cluster radius
    double excitation_score = 0.0;  // max_i sqrt(d_i) ||U_i^dagger||
    double kinv_norm = 0.0;         // ||(K + lambda I)^{-1}||_2 estimate
    double quadform_lower = 0.0;
    double quadform_upper = 0.0;
    int test_states = 0;
    int test_inputs = 0;
    int filtered_states = 0;  // dropped by the center-distance filter
};

/// Scans the product set test_states x test_inputs, recording the worst
/// one-step error and the minimal-sum proportional envelope (log-grid sweep
/// over c_x with the exact conditional c_u). States within
/// `min_center_distance` of a training center are filtered out when the
/// center set is supplied; the (x,u) = (0,0) sample never enters the
/// envelope fit. Geometric fields (h_X, r_X, ...) are left to the caller.
ErrorBoundReport empirical_error_scan(const ControlAffineSystem& truth,
                                      const Dynamics& model, const Mat& test_states,
                                      const Mat& test_inputs,
                                      const Mat* training_centers = nullptr,
                                      double min_center_distance = 1e-9);

/// Lattice lower bound of the model's state-Lipschitz constant: the largest
/// spectral norm of J_x over `resolution` points per state axis and all
/// input-box vertices. Monotone nondecreasing in `resolution`.
double lipschitz_estimate(const Dynamics& model, const Box& domain,
                          const Box& input_box, int resolution);

/// Structural display of the uniform error rate C1 h^{k+1/2} + C2 c |K^-1| r_X
/// with the inaccessible RKHS constants fitted from scan measurements (>= 3
/// settings) or left symbolic.
struct BoundDecomposition {
    int smoothness_k = 1;
    double uniform_exponent = 1.5;  // k + 1/2
    bool fitted = false;
    double C1_hat = 0.0;  // fitted, not certified
    double C2_hat = 0.0;  // fitted, not certified
    std::vector<double> measured;   // eta_hat per scan
    std::vector<double> predicted;  // fitted-model value per scan
    std::string formula;            // symbolic structure, always present
};

BoundDecomposition theoretical_bound_skeleton(
    const std::vector<ErrorBoundReport>& scans, int smoothness_k);

struct StabilityMarginReport {
    double C_x = 0.0;
    double C_u = 0.0;
    double alpha_eps = 0.0;
    double kappa = 0.0;  // worst observed ||u|| / ||x|| ratio
    double margin = 0.0;
    bool verdict = false;  // pass iff margin < 0
};

/// Per-step decrease certificate: C_x and C_u from the proportional error
/// constants, the Lipschitz estimate and the horizon-N surrogate growth
/// bound; margin = C_x + C_u kappa^2 - alpha_eps lambda_min(Q). Refuses
/// alpha_eps <= 0.
StabilityMarginReport stability_margin(const ErrorBoundReport& err, const Mat& Q,
                                       int N, const GrowthBoundSequence& B_eps,
                                       double L_hat, double alpha_eps,
                                       double kappa);

/// Report serialization: single JSON object / one CSV row per scan.
void write_error_report_json(const ErrorBoundReport& r, const std::string& path);
void append_error_report_csv(const ErrorBoundReport& r, const std::string& path);

}  // namespace kedmd
