#include "kedmd/sampling.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

namespace kedmd {

Mat Cluster::excitation_matrix() const {
    const int di = sample_count();
    const int m = static_cast<int>(controls.cols());
    Mat U(m + 1, di);
    U.row(0).setOnes();
    U.bottomRows(m) = controls.transpose();
    return U;
}

std::size_t ClusterDataset::total_samples() const {
    std::size_t total = 0;
    for (const auto& c : clusters) total += static_cast<std::size_t>(c.sample_count());
    return total;
}

ExcitationDiagnostics excitation_diagnostics(const Cluster& c) {
    const Mat U = c.excitation_matrix();
    Eigen::JacobiSVD<Mat> svd(U);
    const Vec sv = svd.singularValues();
    const double tol = std::max(U.rows(), U.cols()) * sv(0) * 1e-14;
    ExcitationDiagnostics out;
    out.rank = static_cast<int>((sv.array() > tol).count());
    const double smin = sv(sv.size() - 1);
    out.pinv_norm = smin > 0.0 ? 1.0 / smin : std::numeric_limits<double>::infinity();
    out.excitation_score = std::sqrt(static_cast<double>(c.sample_count())) * out.pinv_norm;
    return out;
}

double max_excitation_score(const ClusterDataset& ds) {
    double worst = 0.0;
    for (const auto& c : ds.clusters) {
        worst = std::max(worst, excitation_diagnostics(c).excitation_score);
    }
    return worst;
}

namespace {

// Uniform draw in the ball of radius r around `center` intersected with the
// domain, by rejection. r = 0 returns the center itself.
Vec draw_cluster_state(std::mt19937_64& rng, const Vec& center, double r,
                       const Box& domain) {
    if (r == 0.0) return center;
    const int n = static_cast<int>(center.size());
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int attempt = 0; attempt < 10000; ++attempt) {
        Vec dir(n);
        for (int i = 0; i < n; ++i) dir(i) = gauss(rng);
        const double norm = dir.norm();
        if (norm == 0.0) continue;
        const double radius = r * std::pow(unif(rng), 1.0 / n);
        const Vec x = center + (radius / norm) * dir;
        if (domain.contains(x)) return x;
    }
    throw DataError("generate_dataset: cluster ball does not intersect the domain");
}

Vec draw_control(std::mt19937_64& rng, const Box& ubox) {
    const int m = ubox.dim();
    Vec u(m);
    for (int i = 0; i < m; ++i) {
        std::uniform_real_distribution<double> unif(ubox.lo(i), ubox.hi(i));
        u(i) = unif(rng);
    }
    return u;
}

bool controls_admissible(const Mat& controls, bool exclude_zero, double zero_floor) {
    for (int i = 0; i < controls.rows(); ++i) {
        if (exclude_zero && controls.row(i).norm() < zero_floor) return false;
        for (int j = i + 1; j < controls.rows(); ++j) {
            if ((controls.row(i) - controls.row(j)).norm() == 0.0) return false;
        }
    }
    return true;
}

}  // namespace

ClusterDataset generate_dataset(const ControlAffineSystem& sys, const Mat& centers,
                                double r_x, int samples_per_cluster,
                                std::uint64_t seed) {
    const int d = static_cast<int>(centers.rows());
    const int n = sys.state_dim;
    const int m = sys.input_dim;
    if (d == 0 || centers.cols() != n) throw DataError("generate_dataset: bad center set");
    if (centers.row(0).norm() != 0.0) {
        throw DataError("generate_dataset: first center must be the origin");
    }
    if (r_x < 0.0) throw DataError("generate_dataset: negative cluster radius");
    if (samples_per_cluster < m + 1) {
        throw DataError("generate_dataset: need at least m+1 samples per cluster");
    }

    const double sigma_floor = 1e-3 * sys.input_box.diameter();
    const double zero_floor = 1e-9 * sys.input_box.diameter();

    ClusterDataset ds;
    ds.r_x = r_x;
    ds.seed = seed;
    ds.source = sys.name;
    ds.state_dim = n;
    ds.input_dim = m;
    ds.clusters.resize(static_cast<std::size_t>(d));

    for (int i = 0; i < d; ++i) {
        const Vec center = centers.row(i).transpose();
        if (!sys.domain.contains(center, 1e-12)) {
            throw DataError("generate_dataset: center " + std::to_string(i) +
                            " outside the domain");
        }
        // independent per-cluster stream so serial and parallel generation agree
        std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(i) + 1)));

        Cluster c;
        c.center = center;
        c.states.resize(samples_per_cluster, n);
        c.controls.resize(samples_per_cluster, m);
        c.next_states.resize(samples_per_cluster, n);
        for (int j = 0; j < samples_per_cluster; ++j) {
            c.states.row(j) = draw_cluster_state(rng, center, r_x, sys.domain).transpose();
        }

        const bool origin_cluster = (i == 0);
        bool ok = false;
        for (int attempt = 0; attempt < 100; ++attempt) {
            for (int j = 0; j < samples_per_cluster; ++j) {
                c.controls.row(j) = draw_control(rng, sys.input_box).transpose();
            }
            if (!controls_admissible(c.controls, origin_cluster, zero_floor)) continue;
            const auto diag = excitation_diagnostics(c);
            if (diag.rank == m + 1 && 1.0 / diag.pinv_norm >= sigma_floor) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            throw ExcitationError("generate_dataset: rank condition unreachable for cluster " +
                                  std::to_string(i));
        }
        for (int j = 0; j < samples_per_cluster; ++j) {
            c.next_states.row(j) =
                step_truth(sys, c.states.row(j).transpose(), c.controls.row(j).transpose())
                    .transpose();
        }
        ds.clusters[static_cast<std::size_t>(i)] = std::move(c);
    }
    return ds;
}

bool ValidationReport::all_pass() const {
    for (const auto& c : clauses) {
        if (!c.pass) return false;
    }
    return true;
}

std::string ValidationReport::to_string() const {
    std::ostringstream os;
    for (const auto& c : clauses) {
        os << (c.pass ? "[pass] " : "[FAIL] ") << c.name;
        if (!c.pass && !c.offending.empty()) {
            os << " (clusters:";
            for (std::size_t i = 0; i < c.offending.size() && i < 10; ++i) {
                os << " " << c.offending[i];
            }
            if (c.offending.size() > 10) os << " ...";
            os << ")";
        }
        os << "\n";
    }
    return os.str();
}

ValidationReport validate_dataset(const ClusterDataset& ds, const Box& domain,
                                  const Box& input_box) {
    ValidationReport rep;
    auto& origin = rep.clauses.emplace_back(ValidationClause{"first cluster centered at the origin", true, {}});
    auto& radius = rep.clauses.emplace_back(ValidationClause{"samples within the cluster radius", true, {}});
    auto& member = rep.clauses.emplace_back(ValidationClause{"samples inside domain, controls inside input box", true, {}});
    auto& distinct = rep.clauses.emplace_back(ValidationClause{"pairwise distinct controls per cluster", true, {}});
    auto& rank = rep.clauses.emplace_back(ValidationClause{"excitation matrices have rank m+1", true, {}});
    auto& count = rep.clauses.emplace_back(ValidationClause{"per-cluster sample counts d_i >= m + (1 - delta_1i)", true, {}});

    if (ds.clusters.empty() || ds.clusters.front().center.norm() != 0.0) {
        origin.pass = false;
        origin.offending.push_back(0);
    }
    const int m = ds.input_dim;
    for (int i = 0; i < static_cast<int>(ds.clusters.size()); ++i) {
        const auto& c = ds.clusters[static_cast<std::size_t>(i)];
        const int di = c.sample_count();
        const int required = (i == 0) ? m : m + 1;
        if (di < required) {
            count.pass = false;
            count.offending.push_back(i);
        }
        for (int j = 0; j < di; ++j) {
            if ((c.states.row(j).transpose() - c.center).norm() > ds.r_x * (1.0 + 1e-12)) {
                radius.pass = false;
                radius.offending.push_back(i);
                break;
            }
        }
        for (int j = 0; j < di; ++j) {
            if (!domain.contains(c.states.row(j).transpose(), 1e-12) ||
                !input_box.contains(c.controls.row(j).transpose(), 1e-12)) {
                member.pass = false;
                member.offending.push_back(i);
                break;
            }
        }
        if (!controls_admissible(c.controls, false, 0.0)) {
            distinct.pass = false;
            distinct.offending.push_back(i);
        }
        // the origin cluster with d_1 = m cannot reach rank m+1; skip it there
        if (di >= m + 1 && excitation_diagnostics(c).rank != m + 1) {
            rank.pass = false;
            rank.offending.push_back(i);
        }
    }
    return rep;
}

void write_dataset(const ClusterDataset& ds, const std::string& csv_path,
                   const std::string& sidecar_path) {
    std::ofstream f(csv_path);
    if (!f) throw DataError("write_dataset: cannot open " + csv_path);
    f << "cluster_id";
    for (int j = 0; j < ds.state_dim; ++j) f << ",x" << j;
    for (int j = 0; j < ds.input_dim; ++j) f << ",u" << j;
    for (int j = 0; j < ds.state_dim; ++j) f << ",x_plus" << j;
    f << "\n";
    char buf[32];
    auto emit = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        f << "," << buf;
    };
    for (std::size_t i = 0; i < ds.clusters.size(); ++i) {
        const auto& c = ds.clusters[i];
        for (int j = 0; j < c.sample_count(); ++j) {
            f << i;
            for (int k = 0; k < ds.state_dim; ++k) emit(c.states(j, k));
            for (int k = 0; k < ds.input_dim; ++k) emit(c.controls(j, k));
            for (int k = 0; k < ds.state_dim; ++k) emit(c.next_states(j, k));
            f << "\n";
        }
    }

    nlohmann::json side;
    side["format_version"] = 1;
    side["seed"] = ds.seed;
    side["r_x"] = ds.r_x;
    side["source"] = ds.source;
    side["state_dim"] = ds.state_dim;
    side["input_dim"] = ds.input_dim;
    side["cluster_count"] = ds.clusters.size();
    nlohmann::json centers = nlohmann::json::array();
    for (const auto& c : ds.clusters) {
        centers.push_back(std::vector<double>(c.center.data(), c.center.data() + c.center.size()));
    }
    side["centers"] = centers;
    std::ofstream sf(sidecar_path);
    if (!sf) throw DataError("write_dataset: cannot open " + sidecar_path);
    sf << side.dump(2) << "\n";
}

ClusterDataset read_dataset(const std::string& csv_path, const std::string& sidecar_path) {
    std::ifstream sf(sidecar_path);
    if (!sf) throw DataError("read_dataset: cannot open " + sidecar_path);
    nlohmann::json side;
    sf >> side;

    ClusterDataset ds;
    ds.seed = side.at("seed").get<std::uint64_t>();
    ds.r_x = side.at("r_x").get<double>();
    ds.source = side.at("source").get<std::string>();
    ds.state_dim = side.at("state_dim").get<int>();
    ds.input_dim = side.at("input_dim").get<int>();
    const auto centers = side.at("centers").get<std::vector<std::vector<double>>>();
    ds.clusters.resize(centers.size());
    for (std::size_t i = 0; i < centers.size(); ++i) {
        ds.clusters[i].center =
            Eigen::Map<const Vec>(centers[i].data(), static_cast<Eigen::Index>(centers[i].size()));
    }

    std::ifstream f(csv_path);
    if (!f) throw DataError("read_dataset: cannot open " + csv_path);
    std::string line;
    std::getline(f, line);  // header
    std::vector<std::vector<Vec>> xs(centers.size()), us(centers.size()), xps(centers.size());
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tok;
        std::getline(ls, tok, ',');
        const std::size_t id = static_cast<std::size_t>(std::stoul(tok));
        if (id >= centers.size()) throw DataError("read_dataset: bad cluster id");
        Vec x(ds.state_dim), u(ds.input_dim), xp(ds.state_dim);
        for (int k = 0; k < ds.state_dim; ++k) {
            std::getline(ls, tok, ',');
            x(k) = std::stod(tok);
        }
        for (int k = 0; k < ds.input_dim; ++k) {
            std::getline(ls, tok, ',');
            u(k) = std::stod(tok);
        }
        for (int k = 0; k < ds.state_dim; ++k) {
            std::getline(ls, tok, ',');
            xp(k) = std::stod(tok);
        }
        xs[id].push_back(x);
        us[id].push_back(u);
        xps[id].push_back(xp);
    }
    for (std::size_t i = 0; i < centers.size(); ++i) {
        auto& c = ds.clusters[i];
        const int di = static_cast<int>(xs[i].size());
        c.states.resize(di, ds.state_dim);
        c.controls.resize(di, ds.input_dim);
        c.next_states.resize(di, ds.state_dim);
        for (int j = 0; j < di; ++j) {
            c.states.row(j) = xs[i][static_cast<std::size_t>(j)].transpose();
            c.controls.row(j) = us[i][static_cast<std::size_t>(j)].transpose();
            c.next_states.row(j) = xps[i][static_cast<std::size_t>(j)].transpose();
        }
    }
    return ds;
}

}  // namespace kedmd
