#include "spillover/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "spillover/csv.hpp"

namespace spillover {

void DistanceMatrix::check_invariants() const {
    if (dist.rows() != dist.cols()) throw Error("distance matrix must be square");
    if (!dist.allFinite()) throw Error("distance matrix has non-finite entries");
    for (int i = 0; i < n(); ++i) {
        if (dist(i, i) != 0.0) throw Error("distance matrix diagonal must be zero");
        for (int j = i + 1; j < n(); ++j) {
            if (dist(i, j) < 0) throw Error("distances must be nonnegative");
            if (dist(i, j) != dist(j, i)) throw Error("distance matrix must be symmetric");
        }
    }
}

DistanceMatrix distance_matrix(const Eigen::MatrixXd& coords) {
    if (!coords.allFinite()) throw Error("coordinates must be finite");
    const int n = static_cast<int>(coords.rows());
    DistanceMatrix D;
    D.dist = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double d = std::hypot(coords(i, 0) - coords(j, 0), coords(i, 1) - coords(j, 1));
            D.dist(i, j) = d;
            D.dist(j, i) = d;
        }
    return D;
}

DistanceMatrix distance_matrix_from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open distance file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(csv::parse_double(cell, "distance matrix"));
        rows.push_back(std::move(row));
    }
    const int n = static_cast<int>(rows.size());
    DistanceMatrix D;
    D.metric = DistanceMatrix::Metric::precomputed;
    D.dist.resize(n, n);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(rows[i].size()) != n)
            throw Error("distance matrix is not square");
        for (int j = 0; j < n; ++j) D.dist(i, j) = rows[i][j];
    }
    D.check_invariants();
    return D;
}

double default_bandwidth(const DistanceMatrix& D) {
    double mn = std::numeric_limits<double>::infinity();
    for (int i = 0; i < D.n(); ++i)
        for (int j = i + 1; j < D.n(); ++j)
            if (D.dist(i, j) > 0) mn = std::min(mn, D.dist(i, j));
    return std::isfinite(mn) ? 0.5 * mn : 0.0;
}

int SpilloverMapping::n_supported() const {
    int c = 0;
    for (char s : supported) c += (s != 0);
    return c;
}

double SpilloverMapping::row_sum(int i) const {
    double s = 0;
    for (double w : weights[i]) s += w;
    return s;
}

namespace {

SpilloverMapping from_bins(const DistanceMatrix& D, double d, double bw,
                           SpilloverMapping::Kind kind, bool range_rule) {
    const int n = D.n();
    SpilloverMapping m;
    m.kind = kind;
    m.d = d;
    m.bandwidth = bw;
    m.indices.resize(n);
    m.weights.resize(n);
    m.supported.assign(n, 0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            double dij = D.dist(i, j);
            bool in = range_rule ? (dij > 0.0 && dij <= d) : (std::abs(dij - d) <= bw);
            if (in) m.indices[i].push_back(j);
        }
        if (!m.indices[i].empty()) {
            m.supported[i] = 1;
            m.weights[i].assign(m.indices[i].size(), 1.0 / m.indices[i].size());
        }
    }
    if (m.n_supported() == 0)
        throw EmptyCircle("no unit has a neighbor at distance " + csv::format_double(d));
    return m;
}

}  // namespace

SpilloverMapping circle_mean_weights(const DistanceMatrix& D, double d, double bandwidth) {
    if (d < 0 || bandwidth < 0) throw Error("circle mean needs d >= 0 and bandwidth >= 0");
    if (d == 0.0) {
        // Degenerates to the unit's own outcome: indirect at d=0 is the
        // direct effect.
        SpilloverMapping m = identity_mapping(D.n());
        m.bandwidth = bandwidth;
        return m;
    }
    return from_bins(D, d, bandwidth, SpilloverMapping::Kind::circle, false);
}

SpilloverMapping range_mean_weights(const DistanceMatrix& D, double d) {
    if (d < 0) throw Error("range mean needs d >= 0");
    return from_bins(D, d, 0.0, SpilloverMapping::Kind::range, true);
}

SpilloverMapping identity_mapping(int n) {
    SpilloverMapping m;
    m.kind = SpilloverMapping::Kind::circle;
    m.d = 0.0;
    m.indices.resize(n);
    m.weights.resize(n);
    m.supported.assign(n, 1);
    for (int i = 0; i < n; ++i) {
        m.indices[i] = {i};
        m.weights[i] = {1.0};
    }
    return m;
}

SpilloverMapping custom_mapping(const Eigen::MatrixXd& w) {
    if (w.rows() != w.cols()) throw Error("custom mapping weights must be square");
    if (!w.allFinite() || (w.array() < 0).any())
        throw Error("custom mapping weights must be finite and nonnegative");
    const int n = static_cast<int>(w.rows());
    SpilloverMapping m;
    m.kind = SpilloverMapping::Kind::custom;
    m.indices.resize(n);
    m.weights.resize(n);
    m.supported.assign(n, 0);
    for (int i = 0; i < n; ++i) {
        double s = w.row(i).sum();
        if (s <= 0) continue;
        m.supported[i] = 1;
        for (int j = 0; j < n; ++j)
            if (w(i, j) > 0) {
                m.indices[i].push_back(j);
                m.weights[i].push_back(w(i, j) / s);
            }
    }
    if (m.n_supported() == 0) throw EmptyCircle("custom mapping has no supported row");
    return m;
}

MappedValues apply_mapping(const SpilloverMapping& m, const Eigen::VectorXd& values) {
    if (values.size() != m.n()) throw Error("apply_mapping: size mismatch");
    if (!values.allFinite()) throw Error("apply_mapping: values must be finite");
    MappedValues out;
    out.values = Eigen::VectorXd::Constant(m.n(), std::nan(""));
    out.mask.assign(m.n(), 0);
    for (int i = 0; i < m.n(); ++i) {
        if (!m.supported[i]) continue;
        double acc = 0;
        for (size_t k = 0; k < m.indices[i].size(); ++k)
            acc += m.weights[i][k] * values(m.indices[i][k]);
        out.values(i) = acc;
        out.mask[i] = 1;
    }
    return out;
}

DependencyBound dependency_bound(const DistanceMatrix& D, double effect_radius,
                                 const SpilloverMapping& m, double b_tilde) {
    if (effect_radius < 0) throw Error("effect radius must be nonnegative");
    const int n = D.n();
    DependencyBound out;
    out.counts = Eigen::VectorXi::Ones(n);  // self-dependence always counts
    const double reach = 2.0 * effect_radius;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int i = 0; i < n; ++i) {
        int c = 1;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            bool dep = false;
            for (int a : m.indices[i]) {
                for (int b : m.indices[j]) {
                    if (a == b || D.dist(a, b) < reach) {
                        dep = true;
                        break;
                    }
                }
                if (dep) break;
            }
            if (dep) ++c;
        }
        out.counts(i) = c;
    }
    out.max_count = out.counts.maxCoeff();
    out.ratio_sqrt_n = out.max_count / std::sqrt(static_cast<double>(n));
    out.b_tilde = std::clamp(b_tilde, 1.0, static_cast<double>(out.max_count));
    return out;
}

DependencyBound dependency_bound(const DistanceMatrix& D, double effect_radius, double d,
                                 double bandwidth, double b_tilde) {
    return dependency_bound(D, effect_radius, circle_mean_weights(D, d, bandwidth), b_tilde);
}

}  // namespace spillover
