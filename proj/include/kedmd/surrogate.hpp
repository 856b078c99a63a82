#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kedmd/kernel.hpp"
#include "kedmd/sampling.hpp"
#include "kedmd/types.hpp"

namespace kedmd {

/// Minimal prediction-model interface used by the MPC and the certification
/// machinery: one-step map plus Jacobians w.r.t. state and input.
struct Dynamics {
    virtual ~Dynamics() = default;
    virtual int state_dim() const = 0;
    virtual int input_dim() const = 0;
    virtual Vec eval(const Vec& x, const Vec& u) const = 0;
    /// (J_x, J_u) at (x, u).
    virtual std::pair<Mat, Mat> jacobians(const Vec& x, const Vec& u) const = 0;
};

/// Wraps explicit step / Jacobian callables (exact models in tests, nominal
/// MPC on a known system).
struct AnalyticDynamics : Dynamics {
    int n = 0;
    int m = 0;
    std::function<Vec(const Vec&, const Vec&)> step;
    std::function<std::pair<Mat, Mat>(const Vec&, const Vec&)> jac;

    int state_dim() const override { return n; }
    int input_dim() const override { return m; }
    Vec eval(const Vec& x, const Vec& u) const override { return step(x, u); }
    std::pair<Mat, Mat> jacobians(const Vec& x, const Vec& u) const override {
        return jac(x, u);
    }
};

/// Step-1 local least-squares estimate H_i = [g~_0(x_i) | G~(x_i)],
/// n x (m+1), from one cluster's triplets.
Mat local_regression(const Cluster& c);

/// Step-1 variant for the origin cluster: the drift column is forced to
/// zero and only the input maps are regressed (controls must be nonzero
/// and the control matrix must have rank m).
Mat local_regression_pi(const Cluster& origin_cluster);

struct FitReport {
    double condition_estimate = 1.0;
    double max_step1_residual = 0.0;  // worst Frobenius residual of Step 1
    double origin_drift_norm = 0.0;   // ||f_eps(0,0)||
};

/// Kernel-EDMD surrogate x+ = g0_eps(x) + G_eps(x) u. Immutable after
/// fitting; evaluation is reentrant.
struct SurrogateModel : Dynamics {
    KernelSpec kernel;
    FactorizedKernelMatrix K;
    std::vector<Mat> coeff;  // (m+1) matrices, each d x n; coeff[0] is the drift
    bool pi_variant = false;
    double r_x = 0.0;
    std::uint64_t data_seed = 0;
    std::string source;

    int m_inputs = 0;

    int state_dim() const override { return static_cast<int>(K.centers.cols()); }
    int input_dim() const override { return m_inputs; }
    Vec eval(const Vec& x, const Vec& u) const override;
    std::pair<Mat, Mat> jacobians(const Vec& x, const Vec& u) const override;

    /// Drift part g0_eps(x) (evaluation with u = 0).
    Vec drift(const Vec& x) const;
    /// Input-map matrix G_eps(x), n x m.
    Mat input_matrix(const Vec& x) const;
};

/// Two-step kEDMD fit: local regression per cluster (PI route for the
/// origin cluster when requested), then kernel interpolation of the
/// propagated coordinate interpolants against the shared factorization.
SurrogateModel fit_surrogate(const ClusterDataset& ds, const KernelSpec& kernel,
                             bool physics_informed, FitReport* report = nullptr);

/// Direct kernel regression of an autonomous flow map from node images:
/// the returned model has input_dim() == 0 and interpolates X -> X_plus.
SurrogateModel fit_flow_regression(const Mat& X, const Mat& X_plus,
                                   const KernelSpec& kernel);

/// Default regularization rule: lambda = 0 up to 1500 centers, then a tiny
/// multiple of phi(0) to stabilize large kernel matrices.
double default_lambda(int center_count, const KernelSpec& spec);

/// Model file: one-line JSON header (kernel spec, dims, flags, blob hash)
/// followed by the coefficient blob, little-endian doubles, column-major.
void save_model(const SurrogateModel& model, const std::string& path);
SurrogateModel load_model(const std::string& path);

}  // namespace kedmd
