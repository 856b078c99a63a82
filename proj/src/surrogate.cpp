#include "kedmd/surrogate.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "kedmd/report.hpp"

namespace kedmd {

namespace {

// Least-squares solve of min_H ||A - H U||_F for H (n x rows(U)), with a
// rank check on U. Columns of A are the regression targets.
Mat regress_against(const Mat& U, const Mat& A, const char* what) {
    Eigen::BDCSVD<Mat> svd(U.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smax = svd.singularValues()(0);
    const double tol = std::max(U.rows(), U.cols()) * smax *
                       std::numeric_limits<double>::epsilon();
    int rank = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i) {
        if (svd.singularValues()(i) > tol) ++rank;
    }
    if (rank < U.rows()) {
        std::ostringstream os;
        os << what << ": excitation matrix is rank " << rank << " < "
           << U.rows() << "; controls do not excite all input channels";
        throw ExcitationError(os.str());
    }
    // H^T solves U^T H^T = A^T in the least-squares sense.
    return Mat(svd.solve(A.transpose()).transpose());
}

double step1_residual(const Mat& U, const Mat& H, const Mat& A) {
    return (A - H * U).norm();
}

}  // namespace

Mat local_regression(const Cluster& c) {
    const Mat U = c.excitation_matrix();          // (m+1) x d_i
    const Mat A = c.next_states.transpose();      // n x d_i
    return regress_against(U, A, "local regression");
}

Mat local_regression_pi(const Cluster& origin_cluster) {
    const Cluster& c = origin_cluster;
    for (int j = 0; j < c.controls.rows(); ++j) {
        if (c.controls.row(j).norm() == 0.0) {
            throw ExcitationError(
                "physics-informed origin regression requires nonzero controls");
        }
    }
    const Mat Uc = c.controls.transpose();        // m x d_1
    const Mat A = c.next_states.transpose();      // n x d_1
    const Mat G1 = regress_against(Uc, A, "physics-informed origin regression");
    Mat H = Mat::Zero(A.rows(), Uc.rows() + 1);
    H.rightCols(Uc.rows()) = G1;                  // drift column stays exactly 0
    return H;
}

double default_lambda(int center_count, const KernelSpec& spec) {
    return center_count <= 1500 ? 0.0 : 1e-10 * spec.phi0();
}

Vec SurrogateModel::eval(const Vec& x, const Vec& u) const {
    const Vec phi = K.features(x);
    Vec out = coeff[0].transpose() * phi;
    for (int j = 0; j < m_inputs; ++j) out += u(j) * (coeff[j + 1].transpose() * phi);
    return out;
}

std::pair<Mat, Mat> SurrogateModel::jacobians(const Vec& x, const Vec& u) const {
    const int n = state_dim();
    Mat coeff_eff = coeff[0];
    for (int j = 0; j < m_inputs; ++j) coeff_eff += u(j) * coeff[j + 1];
    const Mat Dphi = K.feature_jacobian(x);       // d x n
    Mat Jx = coeff_eff.transpose() * Dphi;        // n x n
    Mat Ju(n, m_inputs);
    const Vec phi = K.features(x);
    for (int j = 0; j < m_inputs; ++j) Ju.col(j) = coeff[j + 1].transpose() * phi;
    return {std::move(Jx), std::move(Ju)};
}

Vec SurrogateModel::drift(const Vec& x) const {
    return coeff[0].transpose() * K.features(x);
}

Mat SurrogateModel::input_matrix(const Vec& x) const {
    const Vec phi = K.features(x);
    Mat G(state_dim(), m_inputs);
    for (int j = 0; j < m_inputs; ++j) G.col(j) = coeff[j + 1].transpose() * phi;
    return G;
}

SurrogateModel fit_surrogate(const ClusterDataset& ds, const KernelSpec& kernel,
                             bool physics_informed, FitReport* report) {
    if (ds.clusters.empty()) throw DataError("fit_surrogate: empty dataset");
    const int d = static_cast<int>(ds.clusters.size());
    const int n = ds.state_dim;
    const int m = ds.input_dim;

    Mat centers(d, n);
    for (int i = 0; i < d; ++i) centers.row(i) = ds.clusters[i].center.transpose();
    if (physics_informed && centers.row(0).norm() != 0.0) {
        throw DataError(
            "physics-informed fit requires the origin as the first cluster center");
    }

    // Step 1: local estimates H_i = [g~_0(x_i) | G~(x_i)], n x (m+1).
    std::vector<Mat> H(d);
    double worst_residual = 0.0;
    for (int i = 0; i < d; ++i) {
        const Cluster& c = ds.clusters[i];
        H[i] = (physics_informed && i == 0) ? local_regression_pi(c)
                                            : local_regression(c);
        worst_residual = std::max(
            worst_residual,
            step1_residual(c.excitation_matrix(), H[i], c.next_states.transpose()));
    }

    SurrogateModel model;
    model.kernel = kernel;
    model.K = kernel_matrix(kernel, centers);
    model.pi_variant = physics_informed;
    model.r_x = ds.r_x;
    model.data_seed = ds.seed;
    model.source = ds.source;
    model.m_inputs = m;

    // Step 2: interpolate each state coordinate over the centers, propagate
    // the interpolant through the local images, and re-interpolate.
    const Mat A = model.K.solve(centers);         // d x n, coordinate interpolants
    model.coeff.resize(m + 1);
    for (int j = 0; j <= m; ++j) {
        Mat Phi(d, d);                            // row i: features at g~_j(x_i)
        for (int i = 0; i < d; ++i) {
            Phi.row(i) = model.K.features(H[i].col(j)).transpose();
        }
        model.coeff[j] = model.K.solve(Phi * A);
    }

    if (report) {
        report->condition_estimate = model.K.condition_estimate;
        report->max_step1_residual = worst_residual;
        report->origin_drift_norm = model.drift(Vec::Zero(n)).norm();
    }
    return model;
}

SurrogateModel fit_flow_regression(const Mat& X, const Mat& X_plus,
                                   const KernelSpec& kernel) {
    if (X.rows() != X_plus.rows() || X.cols() != X_plus.cols()) {
        throw DataError("fit_flow_regression: node/image shape mismatch");
    }
    SurrogateModel model;
    model.kernel = kernel;
    model.K = kernel_matrix(kernel, X);
    model.m_inputs = 0;
    model.coeff = {model.K.solve(X_plus)};
    return model;
}

namespace {

void append_matrix(std::string& blob, const Mat& M) {
    // Eigen stores column-major; copy the raw doubles (little-endian hosts).
    const std::size_t bytes = sizeof(double) * static_cast<std::size_t>(M.size());
    const std::size_t off = blob.size();
    blob.resize(off + bytes);
    std::memcpy(blob.data() + off, M.data(), bytes);
}

Mat take_matrix(const std::string& blob, std::size_t& off, int rows, int cols) {
    Mat M(rows, cols);
    const std::size_t bytes = sizeof(double) * static_cast<std::size_t>(M.size());
    if (off + bytes > blob.size()) throw DataError("model file: truncated blob");
    std::memcpy(M.data(), blob.data() + off, bytes);
    off += bytes;
    return M;
}

}  // namespace

void save_model(const SurrogateModel& model, const std::string& path) {
    std::string blob;
    append_matrix(blob, model.K.centers);
    for (const Mat& c : model.coeff) append_matrix(blob, c);

    nlohmann::json header;
    header["format"] = "kedmd-model";
    header["version"] = 1;
    header["kernel"] = {{"dim", model.kernel.dim},
                        {"smoothness", model.kernel.smoothness},
                        {"scale", model.kernel.scale},
                        {"lambda", model.kernel.lambda}};
    header["centers"] = model.K.size();
    header["state_dim"] = model.state_dim();
    header["input_dim"] = model.m_inputs;
    header["physics_informed"] = model.pi_variant;
    header["r_x"] = model.r_x;
    header["data_seed"] = model.data_seed;
    header["source"] = model.source;
    header["blob_bytes"] = blob.size();
    header["blob_hash"] = hash_hex(fnv1a(blob.data(), blob.size()));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open model file for writing: " + path);
    out << header.dump() << '\n';
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw DataError("failed writing model file: " + path);
}

SurrogateModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("model file: missing header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
        throw DataError(std::string("model file: bad header: ") + e.what());
    }
    if (header.value("format", "") != "kedmd-model") {
        throw DataError("model file: unrecognized format");
    }

    std::string blob(header.at("blob_bytes").get<std::size_t>(), '\0');
    in.read(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (static_cast<std::size_t>(in.gcount()) != blob.size()) {
        throw DataError("model file: truncated blob");
    }
    if (hash_hex(fnv1a(blob.data(), blob.size())) !=
        header.at("blob_hash").get<std::string>()) {
        throw DataError("model file: blob hash mismatch (corrupted file)");
    }

    SurrogateModel model;
    model.kernel.dim = header.at("kernel").at("dim").get<int>();
    model.kernel.smoothness = header.at("kernel").at("smoothness").get<int>();
    model.kernel.scale = header.at("kernel").at("scale").get<double>();
    model.kernel.lambda = header.at("kernel").at("lambda").get<double>();
    model.pi_variant = header.at("physics_informed").get<bool>();
    model.r_x = header.at("r_x").get<double>();
    model.data_seed = header.at("data_seed").get<std::uint64_t>();
    model.source = header.value("source", "");
    model.m_inputs = header.at("input_dim").get<int>();

    const int d = header.at("centers").get<int>();
    const int n = header.at("state_dim").get<int>();
    std::size_t off = 0;
    const Mat centers = take_matrix(blob, off, d, n);
    model.K = kernel_matrix(model.kernel, centers);
    model.coeff.resize(model.m_inputs + 1);
    for (Mat& c : model.coeff) c = take_matrix(blob, off, d, n);
    return model;
}

}  // namespace kedmd
