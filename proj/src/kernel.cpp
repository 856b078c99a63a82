#include "kedmd/kernel.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <vector>

namespace kedmd {

double wendland_phi(int n, int k, double r) {
    if (k != 1 || n < 2 || n > 5) {
        throw CapabilityError("wendland_phi: unsupported (n,k) = (" +
                              std::to_string(n) + "," + std::to_string(k) +
                              "); shipped table covers n in {2,...,5}, k = 1");
    }
    if (r >= 1.0) return 0.0;
    const double q = 1.0 - r;
    if (n <= 3) {
        return (1.0 / 20.0) * q * q * q * q * (4.0 * r + 1.0);
    }
    return (1.0 / 30.0) * q * q * q * q * q * (5.0 * r + 1.0);
}

double wendland_phi_deriv(int n, int k, double r) {
    if (k != 1 || n < 2 || n > 5) {
        throw CapabilityError("wendland_phi_deriv: unsupported (n,k)");
    }
    if (r >= 1.0) return 0.0;
    const double q = 1.0 - r;
    if (n <= 3) return -r * q * q * q;
    return -r * q * q * q * q;
}

KernelSpec KernelSpec::for_domain(const Box& domain, int smoothness, double lambda) {
    KernelSpec spec;
    spec.dim = domain.dim();
    spec.smoothness = smoothness;
    spec.scale = 0.5 * domain.diameter();
    spec.lambda = lambda;
    return spec;
}

Vec FactorizedKernelMatrix::features(const Vec& x) const {
    const int d = size();
    Vec out(d);
    for (int i = 0; i < d; ++i) {
        out(i) = spec.phi((x - centers.row(i).transpose()).norm() / spec.scale);
    }
    return out;
}

Mat FactorizedKernelMatrix::feature_jacobian(const Vec& x) const {
    const int d = size();
    const int n = static_cast<int>(centers.cols());
    Mat out = Mat::Zero(d, n);
    const double scale = spec.scale;
    for (int i = 0; i < d; ++i) {
        const Vec diff = x - centers.row(i).transpose();
        const double r = diff.norm();
        const double s = r / scale;
        if (s >= 1.0) continue;
        // chain rule; phi'(s) ~ -s near zero, so phi'(s)/r stays finite
        double factor;
        if (r < 1e-12 * scale) {
            factor = -1.0 / (scale * scale);
        } else {
            factor = wendland_phi_deriv(spec.dim, spec.smoothness, s) / (scale * r);
        }
        out.row(i) = factor * diff.transpose();
    }
    return out;
}

double FactorizedKernelMatrix::inverse_norm_estimate(int iterations) const {
    const int d = size();
    Vec v = Vec::Ones(d) / std::sqrt(static_cast<double>(d));
    double norm = 0.0;
    for (int it = 0; it < iterations; ++it) {
        v = llt.solve(v);
        norm = v.norm();
        if (norm == 0.0) return 0.0;
        v /= norm;
    }
    return norm;
}

FactorizedKernelMatrix kernel_matrix(const KernelSpec& spec, const Mat& X) {
    const int d = static_cast<int>(X.rows());
    if (d == 0) throw DataError("kernel_matrix: empty center set");

    FactorizedKernelMatrix out;
    out.spec = spec;
    out.centers = X;
    out.K.resize(d, d);
    const double phi0 = spec.phi0();
    for (int i = 0; i < d; ++i) {
        out.K(i, i) = phi0;
        for (int j = i + 1; j < d; ++j) {
            const double r = (X.row(i) - X.row(j)).norm();
            if (r == 0.0) {
                throw DataError("kernel_matrix: duplicate centers at indices " +
                                std::to_string(i) + " and " + std::to_string(j));
            }
            const double v = spec.phi(r / spec.scale);
            out.K(i, j) = v;
            out.K(j, i) = v;
        }
    }

    Mat regularized = out.K;
    regularized.diagonal().array() += spec.lambda;
    out.llt.compute(regularized);
    if (out.llt.info() != Eigen::Success) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.3e", 1e-8 * phi0);
        throw NumericalError(
            "kernel_matrix: factorization of K_X + lambda I failed (matrix "
            "numerically indefinite); suggest lambda >= " + std::string(buf));
    }
    const Vec ldiag = out.llt.matrixLLT().diagonal();
    const double dmin = ldiag.minCoeff();
    const double dmax = ldiag.maxCoeff();
    out.condition_estimate = (dmin > 0.0) ? (dmax / dmin) * (dmax / dmin)
                                          : std::numeric_limits<double>::infinity();
    return out;
}

namespace {

// Inserts the origin as the first row; if a row already equals the origin
// (to tolerance), it is moved to the front instead.
Mat with_origin_first(const Mat& pts, double tol) {
    const int d = static_cast<int>(pts.rows());
    const int n = static_cast<int>(pts.cols());
    int found = -1;
    for (int i = 0; i < d; ++i) {
        if (pts.row(i).norm() <= tol) { found = i; break; }
    }
    Mat out(found >= 0 ? d : d + 1, n);
    out.row(0).setZero();
    int w = 1;
    for (int i = 0; i < d; ++i) {
        if (i == found) continue;
        out.row(w++) = pts.row(i);
    }
    return out;
}

void check_pairwise_distinct(const Mat& pts, const char* what) {
    for (int i = 0; i < pts.rows(); ++i) {
        for (int j = i + 1; j < pts.rows(); ++j) {
            if ((pts.row(i) - pts.row(j)).norm() == 0.0) {
                throw DataError(std::string(what) + ": duplicate points at indices " +
                                std::to_string(i) + " and " + std::to_string(j));
            }
        }
    }
}

}  // namespace

Mat padua_points(int order, const Box& box, bool include_origin) {
    if (box.dim() != 2) {
        throw CapabilityError("padua_points: only 2-D boxes are supported");
    }
    if (order < 1) throw DataError("padua_points: order must be >= 1");

    const int p = order;
    std::vector<Eigen::Vector2d> pts;
    pts.reserve(static_cast<size_t>((p + 1) * (p + 2) / 2));
    const double pi = std::acos(-1.0);
    for (int j = 0; j <= p; ++j) {
        const bool j_odd = (j % 2 == 1);
        const int delta = (p % 2 == 1 && j_odd) ? 1 : 0;
        const int kmax = p / 2 + 1 + delta;
        const double mu = std::cos(j * pi / p);
        for (int k = 1; k <= kmax; ++k) {
            const double eta = j_odd ? std::cos((2.0 * k - 2.0) * pi / (p + 1))
                                     : std::cos((2.0 * k - 1.0) * pi / (p + 1));
            pts.emplace_back(mu, eta);
        }
    }

    Mat out(static_cast<int>(pts.size()), 2);
    for (int i = 0; i < out.rows(); ++i) {
        // affine map [-1,1]^2 -> box
        out(i, 0) = box.lo(0) + 0.5 * (pts[static_cast<size_t>(i)](0) + 1.0) * (box.hi(0) - box.lo(0));
        out(i, 1) = box.lo(1) + 0.5 * (pts[static_cast<size_t>(i)](1) + 1.0) * (box.hi(1) - box.lo(1));
    }
    if (include_origin) {
        out = with_origin_first(out, 1e-12 * box.diameter());
    }
    check_pairwise_distinct(out, "padua_points");
    return out;
}

Mat uniform_grid(int per_axis, const Box& box, bool include_origin) {
    if (per_axis < 2) throw DataError("uniform_grid: need at least 2 points per axis");
    const int n = box.dim();
    long total = 1;
    for (int i = 0; i < n; ++i) total *= per_axis;

    Mat out(total, n);
    std::vector<int> idx(static_cast<size_t>(n), 0);
    for (long row = 0; row < total; ++row) {
        for (int a = 0; a < n; ++a) {
            const double t = static_cast<double>(idx[static_cast<size_t>(a)]) / (per_axis - 1);
            out(row, a) = box.lo(a) + t * (box.hi(a) - box.lo(a));
        }
        for (int a = n - 1; a >= 0; --a) {
            if (++idx[static_cast<size_t>(a)] < per_axis) break;
            idx[static_cast<size_t>(a)] = 0;
        }
    }
    if (include_origin) {
        out = with_origin_first(out, 1e-12 * box.diameter());
    }
    return out;
}

double fill_distance(const Mat& X, const Box& box, int resolution) {
    if (X.rows() == 0) throw DataError("fill_distance: empty point set");
    if (resolution < 2) throw DataError("fill_distance: resolution must be >= 2");
    const int n = box.dim();
    double total_d = 1.0;
    for (int i = 0; i < n; ++i) total_d *= resolution;
    if (total_d > 5e7) {
        throw DataError("fill_distance: test lattice too large; lower the resolution");
    }
    const long total = static_cast<long>(total_d);

    double worst = 0.0;
    std::vector<int> idx(static_cast<size_t>(n), 0);
    Vec x(n);
    for (long row = 0; row < total; ++row) {
        for (int a = 0; a < n; ++a) {
            const double t = static_cast<double>(idx[static_cast<size_t>(a)]) / (resolution - 1);
            x(a) = box.lo(a) + t * (box.hi(a) - box.lo(a));
        }
        const double dmin =
            (X.rowwise() - x.transpose()).rowwise().squaredNorm().minCoeff();
        worst = std::max(worst, dmin);
        for (int a = n - 1; a >= 0; --a) {
            if (++idx[static_cast<size_t>(a)] < resolution) break;
            idx[static_cast<size_t>(a)] = 0;
        }
    }
    return std::sqrt(worst);
}

namespace {

double quadform(const Mat& A, const Vec& v) { return v.dot(A * v); }

// One ascent pass: flip any coordinate that increases v^T A v.
bool ascent_pass(const Mat& A, Vec& v, double& value) {
    bool improved = false;
    Vec Av = A * v;
    for (int i = 0; i < v.size(); ++i) {
        const double delta = -4.0 * v(i) * Av(i) + 4.0 * A(i, i);
        if (delta > 1e-15 * std::abs(value)) {
            Av += (-2.0 * v(i)) * A.col(i);
            v(i) = -v(i);
            value += delta;
            improved = true;
        }
    }
    return improved;
}

}  // namespace

QuadformBracket signvector_quadform_bound(const FactorizedKernelMatrix& K,
                                          int random_trials, std::uint64_t seed) {
    const int d = K.size();
    const Mat inv = K.solve(Mat(Mat::Identity(d, d)));

    QuadformBracket out;
    out.upper = inv.array().abs().sum();

    if (d <= 16) {
        // exact: v and -v give the same value, so fix v_1 = +1
        const std::uint64_t count = 1ull << (d - 1);
        double best = -std::numeric_limits<double>::infinity();
        Vec v(d);
        for (std::uint64_t bits = 0; bits < count; ++bits) {
            v(0) = 1.0;
            for (int i = 1; i < d; ++i) {
                v(i) = (bits >> (i - 1)) & 1u ? -1.0 : 1.0;
            }
            best = std::max(best, quadform(inv, v));
        }
        out.lower = best;
        return out;
    }

    std::mt19937_64 rng(seed ^ 0x5bd1e995u);
    std::bernoulli_distribution coin(0.5);
    double best = quadform(inv, Vec::Ones(d));
    Vec best_v = Vec::Ones(d);
    for (int t = 0; t < random_trials; ++t) {
        Vec v(d);
        for (int i = 0; i < d; ++i) v(i) = coin(rng) ? 1.0 : -1.0;
        const double val = quadform(inv, v);
        if (val > best) {
            best = val;
            best_v = v;
        }
    }
    while (ascent_pass(inv, best_v, best)) {
    }
    out.lower = best;
    return out;
}

void write_points_csv(const std::string& path, const Mat& X) {
    std::ofstream f(path);
    if (!f) throw DataError("write_points_csv: cannot open " + path);
    char buf[32];
    for (int i = 0; i < X.rows(); ++i) {
        for (int j = 0; j < X.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", X(i, j));
            f << buf << (j + 1 < X.cols() ? "," : "\n");
        }
    }
}

}  // namespace kedmd
