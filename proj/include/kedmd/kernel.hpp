#pragma once

#include <Eigen/Cholesky>
#include <cstdint>
#include <utility>

#include "kedmd/types.hpp"

namespace kedmd {

/// Wendland radial basis function phi_{n,k}(r). Compactly supported on [0,1),
/// C^{2k} at the support boundary. Shipped table: k = 1, n in {2,3,4,5}.
double wendland_phi(int n, int k, double r);

/// First derivative d/dr phi_{n,k}(r).
double wendland_phi_deriv(int n, int k, double r);

/// Compactly supported Wendland kernel k(x,y) = phi_{n,k}(||x-y|| / scale)
/// with Tikhonov regularization parameter lambda for the kernel matrix.
struct KernelSpec {
    int dim = 2;
    int smoothness = 1;
    double scale = 1.0;
    double lambda = 0.0;

    double phi(double r) const { return wendland_phi(dim, smoothness, r); }
    double phi0() const { return wendland_phi(dim, smoothness, 0.0); }

    double eval(const Vec& x, const Vec& y) const {
        return phi((x - y).norm() / scale);
    }

    /// Default support scale for a sampling domain: half the box diameter.
    static KernelSpec for_domain(const Box& domain, int smoothness = 1,
                                 double lambda = 0.0);
};

/// Symmetric factorization of K_X + lambda I over a fixed center set.
/// Immutable after construction; solves against the shared factor are
/// read-only and thread-safe.
struct FactorizedKernelMatrix {
    KernelSpec spec;
    Mat centers;             // d x n, one center per row
    Mat K;                   // kernel matrix (without lambda on the diagonal)
    Eigen::LLT<Mat> llt;     // factor of K + lambda I
    double condition_estimate = 1.0;

    int size() const { return static_cast<int>(centers.rows()); }

    /// Feature vector k_X(x) = (k(x_1,x), ..., k(x_d,x)).
    Vec features(const Vec& x) const;

    /// Row-wise gradient of the feature vector, d x n; row i is grad_x k(x_i, x).
    Mat feature_jacobian(const Vec& x) const;

    template <typename Derived>
    auto solve(const Eigen::MatrixBase<Derived>& rhs) const {
        return llt.solve(rhs);
    }

    /// Power-iteration estimate of ||(K + lambda I)^{-1}||_2.
    double inverse_norm_estimate(int iterations = 50) const;
};

/// Assembles and factorizes K_X + lambda I. Throws DataError on duplicate
/// centers and NumericalError (with a lambda suggestion) if the Cholesky
/// factorization fails.
FactorizedKernelMatrix kernel_matrix(const KernelSpec& spec, const Mat& X);

/// Padua interpolation points of order p, affinely scaled from [-1,1]^2 to
/// `box`. Exactly (p+1)(p+2)/2 points; with include_origin the origin is
/// placed first if not already present.
Mat padua_points(int order, const Box& box, bool include_origin);

/// Uniform lattice with q points per axis (box corners included). With
/// include_origin the origin is placed first if not already a lattice point.
Mat uniform_grid(int per_axis, const Box& box, bool include_origin);

/// Lattice approximation of the fill distance sup_{x in box} min_i ||x - x_i||.
/// Lower bound of the true sup; nondecreasing in `resolution`.
double fill_distance(const Mat& X, const Box& box, int resolution);

struct QuadformBracket {
    double lower = 0.0;  // best certified value of max_{v in {+-1}^d} v^T (K+lI)^{-1} v
    double upper = 0.0;  // entrywise absolute sum of (K+lI)^{-1}
};

/// Certified bracket for the sign-vector quadratic-form maximum
/// max_{v in {+-1}^d} v^T (K + lambda I)^{-1} v. Exact for d <= 16
/// (lower == maximum); randomized search with coordinate ascent otherwise.
QuadformBracket signvector_quadform_bound(const FactorizedKernelMatrix& K,
                                          int random_trials = 2000,
                                          std::uint64_t seed = 0);

/// One point per row, columns separated by commas, full double precision.
void write_points_csv(const std::string& path, const Mat& X);

}  // namespace kedmd
