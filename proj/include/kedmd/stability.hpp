#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "kedmd/surrogate.hpp"
#include "kedmd/types.hpp"

namespace kedmd {

/// Sampled cost-controllability growth bounds B_1..B_Nbar (values[k-1] = B_k).
struct GrowthBoundSequence {
    std::vector<double> values;
    std::string source;  // "estimated", "supplied", "propagated", "extended"
    std::vector<Vec> argmax_states;   // per-horizon worst sampled state
    std::vector<int> excluded_samples;  // diverging probe rollouts

    int length() const { return static_cast<int>(values.size()); }
    double at(int k) const { return values.at(k - 1); }  // 1-based B_k
};

struct SuboptimalityIndex {
    double alpha = -std::numeric_limits<double>::infinity();
    int N = 0;
};

/// Horizon-N suboptimality degree from the growth bounds:
///   alpha_N = 1 - (B_2-1)(B_N-1) prod_{i=3}^N (B_i-1)
///             / [ prod_{i=2}^N B_i - (B_2-1) prod_{i=3}^N (B_i-1) ],
/// empty products equal to 1. A nonpositive denominator yields the -inf
/// sentinel (horizon invalid), never an exception.
SuboptimalityIndex alpha_from_growth(const GrowthBoundSequence& B, int N);

/// State-feedback probe used to produce admissible candidate sequences for
/// growth-bound estimation.
using ProbePolicy = std::function<Vec(const Vec& x)>;

/// u = 0 probe.
ProbePolicy zero_probe(int input_dim);

/// Receding-horizon LQR of the model's origin linearization, clamped to the
/// input box. The Riccati solution is computed once at construction.
ProbePolicy saturated_lqr_probe(const Dynamics& model, const Mat& Q, const Mat& R,
                                const Box& input_box);

/// For each sampled state, rolls the probe policy for Nbar steps and records
/// B_N = max_x J_N(x) / l*(x) with l*(x) = ||x||_Q^2, monotonized by running
/// max. Samples whose normalized cost exceeds `divergence_threshold` are
/// excluded and reported. Zero-state samples are rejected.
GrowthBoundSequence estimate_growth_bounds(const Dynamics& model, const Mat& samples,
                                           int Nbar, const Mat& Q, const Mat& R,
                                           const ProbePolicy& probe,
                                           double divergence_threshold = 1e6);

/// Perturbation propagation of nominal growth bounds to the surrogate:
/// B_N^eps = B_N + cbar^2 c_N + cbar cbar_N with cbar = max(c_x, c_u) and
/// d = L_f + c_x. Needs B up to index Nbar.
GrowthBoundSequence propagate_growth_to_surrogate(const GrowthBoundSequence& B,
                                                  double c_x, double c_u, double L_f,
                                                  const Mat& Q, const Mat& R,
                                                  int Nbar);

/// Geometric tail extension: B_k = B.at(N) / alpha for k in (N, k_max],
/// prefix unchanged. Refuses alpha <= 0.
GrowthBoundSequence extend_growth_sequence(const GrowthBoundSequence& B,
                                           double alpha, int N, int k_max);

/// Smallest N >= 2 with alpha_from_growth(B, N).alpha > 0, if any.
std::optional<int> minimal_stabilizing_horizon(const GrowthBoundSequence& B);

/// Writes (N, B_N, alpha_N) rows; optional propagated column when B_eps is
/// non-null and long enough.
void write_growth_csv(const std::string& path, const GrowthBoundSequence& B,
                      const GrowthBoundSequence* B_eps = nullptr);

}  // namespace kedmd
