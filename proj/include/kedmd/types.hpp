#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace kedmd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Axis-aligned box [lo_1,hi_1] x ... x [lo_n,hi_n].
struct Box {
    Vec lo;
    Vec hi;

    Box() = default;
    Box(Vec lo_, Vec hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
        if (lo.size() != hi.size() || (hi - lo).minCoeff() < 0.0) {
            throw std::invalid_argument("Box: inconsistent bounds");
        }
    }

    static Box square(double lo, double hi, int dim) {
        return Box(Vec::Constant(dim, lo), Vec::Constant(dim, hi));
    }

    int dim() const { return static_cast<int>(lo.size()); }

    bool contains(const Vec& x, double tol = 0.0) const {
        return (x.array() >= lo.array() - tol).all() &&
               (x.array() <= hi.array() + tol).all();
    }

    Vec clamp(const Vec& x) const {
        return x.cwiseMax(lo).cwiseMin(hi);
    }

    Vec center() const { return 0.5 * (lo + hi); }
    Vec widths() const { return hi - lo; }

    /// Euclidean diameter (corner-to-corner distance).
    double diameter() const { return (hi - lo).norm(); }

    Box shifted(const Vec& offset) const { return Box(lo - offset, hi - offset); }
};

/// Thrown when the true dynamics are evaluated outside their validity domain.
struct EvaluationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown for invalid or inconsistent input data (duplicate centers, bad config, ...).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when a cluster's control excitation cannot meet the rank requirement.
struct ExcitationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown on factorization failure or other numerical breakdown.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown for unsupported capability requests (e.g. kernel smoothness not in the table).
struct CapabilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace kedmd
