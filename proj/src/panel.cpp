#include "spillover/panel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "spillover/csv.hpp"

namespace spillover {

const Eigen::MatrixXd& PanelDataset::covariate(const std::string& name) const {
    for (size_t k = 0; k < covariate_names.size(); ++k)
        if (covariate_names[k] == name) return covariates[k];
    throw InvalidPanel("unknown covariate '" + name + "'");
}

void PanelDataset::check_invariants() const {
    if (n_units <= 0 || n_periods <= 0)
        throw InvalidPanel("panel dimensions must be positive");
    auto dims_ok = [&](long r, long c) { return r == n_units && c == n_periods; };
    if (!dims_ok(outcomes.rows(), outcomes.cols()) ||
        !dims_ok(treatments.rows(), treatments.cols()))
        throw InvalidPanel("outcome/treatment matrices must be N x T");
    for (const auto& x : covariates)
        if (!dims_ok(x.rows(), x.cols()))
            throw InvalidPanel("covariate matrices must be N x T");
    if (coords.rows() != n_units || coords.cols() != 2)
        throw InvalidPanel("coords must be N x 2");
    if (!outcomes.allFinite()) throw InvalidPanel("NaN/Inf in outcomes");
    if (!coords.allFinite()) throw InvalidPanel("NaN/Inf in coordinates");
    for (int i = 0; i < n_units; ++i)
        for (int t = 0; t < n_periods; ++t) {
            int z = treatments(i, t);
            if (z != 0 && z != 1)
                throw InvalidTreatment("treatment must be 0/1, got " + std::to_string(z));
        }
}

bool PanelDataset::is_absorbing() const {
    for (int i = 0; i < n_units; ++i)
        for (int t = 1; t < n_periods; ++t)
            if (treatments(i, t - 1) == 1 && treatments(i, t) == 0) return false;
    return true;
}

int PanelDataset::first_treated_period() const {
    for (int t = 0; t < n_periods; ++t)
        if (treatments.col(t).sum() > 0) return t + 1;
    return 0;
}

HistorySpec::HistorySpec(int s, int e, std::vector<int> tgt, std::vector<int> ref)
    : start(s), end(e), target(std::move(tgt)), reference(std::move(ref)) {
    if (start < 1 || end < start)
        throw InvalidHistory("history window must satisfy 1 <= start <= end");
    size_t len = static_cast<size_t>(length());
    if (target.size() != len || reference.size() != len)
        throw InvalidHistory("history vectors must have length end - start + 1");
    for (size_t k = 0; k < len; ++k) {
        if ((target[k] != 0 && target[k] != 1) || (reference[k] != 0 && reference[k] != 1))
            throw InvalidHistory("history entries must be 0/1");
    }
    if (target == reference)
        throw InvalidHistory("target and reference histories must differ");
}

HistorySpec HistorySpec::staggered(int adopt_period, int start, int end) {
    if (adopt_period < start || adopt_period > end)
        throw InvalidHistory("adoption period outside history window");
    std::vector<int> tgt(end - start + 1, 0), ref(end - start + 1, 0);
    for (int p = adopt_period; p <= end; ++p) tgt[p - start] = 1;
    return HistorySpec(start, end, tgt, ref);
}

HistorySpec HistorySpec::truncated(int new_end) const {
    if (new_end < start || new_end > end)
        throw InvalidHistory("truncation period outside history window");
    std::vector<int> tgt(target.begin(), target.begin() + (new_end - start + 1));
    std::vector<int> ref(reference.begin(), reference.begin() + (new_end - start + 1));
    if (tgt == ref)
        throw InvalidHistory("truncated histories coincide; shorten the window instead");
    return HistorySpec(start, new_end, tgt, ref);
}

std::string HistorySpec::label() const {
    std::string s = std::to_string(start) + "-" + std::to_string(end) + ":";
    for (int z : target) s += char('0' + z);
    s += ":";
    for (int z : reference) s += char('0' + z);
    return s;
}

std::pair<Eigen::VectorXi, Eigen::VectorXi> history_indicator(const PanelDataset& panel,
                                                              const HistorySpec& h) {
    if (h.end > panel.n_periods)
        throw InvalidHistory("history window exceeds panel periods");
    Eigen::VectorXi ind_t = Eigen::VectorXi::Zero(panel.n_units);
    Eigen::VectorXi ind_r = Eigen::VectorXi::Zero(panel.n_units);
    for (int i = 0; i < panel.n_units; ++i) {
        bool mt = true, mr = true;
        for (int p = h.start; p <= h.end; ++p) {
            int z = panel.treatments(i, p - 1);
            mt = mt && (z == h.target[p - h.start]);
            mr = mr && (z == h.reference[p - h.start]);
        }
        ind_t(i) = mt ? 1 : 0;
        ind_r(i) = mr ? 1 : 0;
    }
    return {ind_t, ind_r};
}

PanelDiagnostics validate_panel(const PanelDataset& panel,
                                const std::vector<HistorySpec>& histories) {
    panel.check_invariants();
    PanelDiagnostics diag;
    diag.treated_per_period.resize(panel.n_periods);
    for (int t = 0; t < panel.n_periods; ++t)
        diag.treated_per_period[t] = panel.treatments.col(t).sum();
    for (const auto& h : histories) {
        auto [it, ir] = history_indicator(panel, h);
        HistorySupport s;
        s.n_target = it.sum();
        s.n_reference = ir.sum();
        s.zero_support = (s.n_target == 0 || s.n_reference == 0);
        diag.history_support.push_back(s);
    }
    for (int i = 0; i < panel.n_units && !diag.has_coincident_units; ++i)
        for (int j = i + 1; j < panel.n_units; ++j)
            if ((panel.coords.row(i) - panel.coords.row(j)).norm() == 0.0) {
                diag.has_coincident_units = true;
                break;
            }
    return diag;
}

// ---------------------------------------------------------------------------
// CSV ingestion. Requires a balanced panel; rows may arrive in any order and
// are normalized to unit-major, period-minor.
// ---------------------------------------------------------------------------

namespace {

// Sort labels numerically when every label parses as a number, else lexically.
std::vector<std::string> sorted_labels(const std::set<std::string>& labels) {
    std::vector<std::string> out(labels.begin(), labels.end());
    bool all_numeric = true;
    std::vector<double> vals;
    vals.reserve(out.size());
    for (const auto& s : out) {
        try {
            vals.push_back(csv::parse_double(s, "label"));
        } catch (const Error&) {
            all_numeric = false;
            break;
        }
    }
    if (all_numeric) {
        std::vector<size_t> idx(out.size());
        for (size_t k = 0; k < idx.size(); ++k) idx[k] = k;
        std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return vals[a] < vals[b]; });
        std::vector<std::string> sorted;
        sorted.reserve(out.size());
        for (size_t k : idx) sorted.push_back(out[k]);
        return sorted;
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

PanelDataset load_panel(const std::string& path, const CsvSchema& schema) {
    csv::Table table = csv::read_file(path);
    int c_unit = table.require(schema.unit);
    int c_period = table.require(schema.period);
    int c_y = table.require(schema.outcome);
    int c_z = table.require(schema.treatment);
    int c_x1 = table.require(schema.coord1);
    int c_x2 = table.require(schema.coord2);

    std::vector<int> cov_cols;
    std::vector<std::string> cov_names;
    for (size_t j = 0; j < table.header.size(); ++j) {
        int c = static_cast<int>(j);
        if (c == c_unit || c == c_period || c == c_y || c == c_z || c == c_x1 || c == c_x2)
            continue;
        cov_cols.push_back(c);
        cov_names.push_back(table.header[j]);
    }

    std::set<std::string> unit_set, period_set;
    for (const auto& row : table.rows) {
        unit_set.insert(row[c_unit]);
        period_set.insert(row[c_period]);
    }
    std::vector<std::string> units = sorted_labels(unit_set);
    std::vector<std::string> periods = sorted_labels(period_set);
    const int N = static_cast<int>(units.size());
    const int T = static_cast<int>(periods.size());
    std::map<std::string, int> unit_idx, period_idx;
    for (int i = 0; i < N; ++i) unit_idx[units[i]] = i;
    for (int t = 0; t < T; ++t) period_idx[periods[t]] = t;

    if (static_cast<long long>(table.rows.size()) > 1LL * N * T)
        throw DuplicateRow("more rows than unit x period cells");

    PanelDataset panel;
    panel.n_units = N;
    panel.n_periods = T;
    panel.unit_ids = units;
    panel.period_ids = periods;
    panel.outcomes.resize(N, T);
    panel.treatments.resize(N, T);
    panel.coords = Eigen::MatrixXd::Constant(N, 2, std::nan(""));
    panel.covariate_names = cov_names;
    panel.covariates.assign(cov_names.size(), Eigen::MatrixXd::Zero(N, T));

    Eigen::MatrixXi seen = Eigen::MatrixXi::Zero(N, T);
    for (const auto& row : table.rows) {
        int i = unit_idx[row[c_unit]];
        int t = period_idx[row[c_period]];
        if (seen(i, t))
            throw DuplicateRow("duplicate (unit,period) pair: (" + row[c_unit] + "," +
                               row[c_period] + ")");
        seen(i, t) = 1;
        panel.outcomes(i, t) = csv::parse_double(row[c_y], "outcome column");
        double zv = csv::parse_double(row[c_z], "treatment column");
        if (zv != 0.0 && zv != 1.0)
            throw InvalidTreatment("treatment must be 0/1, got '" + row[c_z] + "'");
        panel.treatments(i, t) = static_cast<int>(zv);
        double cx1 = csv::parse_double(row[c_x1], "coord1 column");
        double cx2 = csv::parse_double(row[c_x2], "coord2 column");
        if (std::isnan(panel.coords(i, 0))) {
            panel.coords(i, 0) = cx1;
            panel.coords(i, 1) = cx2;
        } else if (panel.coords(i, 0) != cx1 || panel.coords(i, 1) != cx2) {
            throw InvalidPanel("unit '" + row[c_unit] + "' has time-varying coordinates");
        }
        for (size_t k = 0; k < cov_cols.size(); ++k) {
            const std::string& s = row[cov_cols[k]];
            panel.covariates[k](i, t) =
                (s.empty() || s == "NA" || s == "nan") ? std::nan("")
                                                       : csv::parse_double(s, "covariate " + cov_names[k]);
        }
    }
    if (seen.sum() != N * T) {
        for (int i = 0; i < N; ++i)
            for (int t = 0; t < T; ++t)
                if (!seen(i, t))
                    throw UnbalancedPanel("missing cell for unit '" + units[i] + "', period '" +
                                          periods[t] + "'");
    }
    panel.check_invariants();
    return panel;
}

void write_panel(const PanelDataset& panel, const std::string& path, const CsvSchema& schema) {
    csv::Writer w(path);
    w.field(schema.unit);
    w.field(schema.period);
    w.field(schema.outcome);
    w.field(schema.treatment);
    for (const auto& name : panel.covariate_names) w.field(name);
    w.field(schema.coord1);
    w.field(schema.coord2);
    w.end_row();
    for (int i = 0; i < panel.n_units; ++i)
        for (int t = 0; t < panel.n_periods; ++t) {
            w.field(panel.unit_ids[i]);
            w.field(panel.period_ids[t]);
            w.field(panel.outcomes(i, t));
            w.field(static_cast<long long>(panel.treatments(i, t)));
            for (const auto& x : panel.covariates) {
                double v = x(i, t);
                if (std::isnan(v))
                    w.field(std::string("NA"));
                else
                    w.field(v);
            }
            w.field(panel.coords(i, 0));
            w.field(panel.coords(i, 1));
            w.end_row();
        }
}

}  // namespace spillover
