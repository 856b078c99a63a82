#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kedmd/systems.hpp"
#include "kedmd/types.hpp"

namespace kedmd {

/// Data triplets sampled around one virtual observation point.
struct Cluster {
    Vec center;       // x_i
    Mat states;       // d_i x n, rows x_ij
    Mat controls;     // d_i x m, rows u_ij
    Mat next_states;  // d_i x n, rows x_ij^+

    int sample_count() const { return static_cast<int>(states.rows()); }

    /// Excitation matrix U_i = [1 ... 1; u_i1 ... u_id_i], (m+1) x d_i.
    Mat excitation_matrix() const;
};

struct ClusterDataset {
    std::vector<Cluster> clusters;  // clusters[0] is centered at the origin
    double r_x = 0.0;
    std::uint64_t seed = 0;
    std::string source;
    int state_dim = 0;
    int input_dim = 0;

    std::size_t total_samples() const;
};

struct ExcitationDiagnostics {
    int rank = 0;
    double pinv_norm = 0.0;         // ||U_i^dagger|| = 1 / sigma_min
    double excitation_score = 0.0;  // sqrt(d_i) * pinv_norm
};

ExcitationDiagnostics excitation_diagnostics(const Cluster& c);

/// Largest excitation score over all clusters.
double max_excitation_score(const ClusterDataset& ds);

/// Samples d_i triplets per cluster center: states uniform in
/// B_{r_x}(x_i) intersected with the domain, controls uniform in the input
/// box redrawn until rank(U_i) = m+1 with a singular-value floor. The first
/// center must be the origin (its controls exclude zero). Deterministic
/// given the seed, independently per cluster.
ClusterDataset generate_dataset(const ControlAffineSystem& sys, const Mat& centers,
                                double r_x, int samples_per_cluster,
                                std::uint64_t seed);

struct ValidationClause {
    std::string name;
    bool pass = true;
    std::vector<int> offending;  // cluster indices
};

struct ValidationReport {
    std::vector<ValidationClause> clauses;
    bool all_pass() const;
    std::string to_string() const;
};

/// Checks every data-requirement clause: origin-first, cluster radii,
/// excitation ranks, control distinctness, and box membership.
ValidationReport validate_dataset(const ClusterDataset& ds, const Box& domain,
                                  const Box& input_box);

/// CSV with columns cluster_id, x..., u..., x_plus... plus a JSON sidecar
/// (seed, r_x, dims, source) for exact reproduction.
void write_dataset(const ClusterDataset& ds, const std::string& csv_path,
                   const std::string& sidecar_path);
ClusterDataset read_dataset(const std::string& csv_path,
                            const std::string& sidecar_path);

}  // namespace kedmd
