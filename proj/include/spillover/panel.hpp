#pragma once

// Canonical data model for balanced TSCS panels with geography.
//
// PanelDataset is immutable after construction and safe to share across
// threads. Periods are normalized to consecutive 0-based indices internally;
// the public API for histories speaks 1-based period numbers, matching how
// estimates are reported.

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "spillover/common.hpp"

namespace spillover {

struct PanelDataset {
    int n_units = 0;
    int n_periods = 0;
    Eigen::MatrixXd outcomes;                // N x T
    Eigen::MatrixXi treatments;              // N x T, entries in {0,1}
    std::vector<std::string> covariate_names;
    std::vector<Eigen::MatrixXd> covariates; // each N x T, NaN allowed (masked)
    Eigen::MatrixXd coords;                  // N x 2
    std::vector<std::string> unit_ids;
    std::vector<std::string> period_ids;

    const Eigen::MatrixXd& covariate(const std::string& name) const;
    void check_invariants() const;  // throws InvalidPanel / InvalidTreatment

    // True when no unit ever moves from treated back to control.
    bool is_absorbing() const;
    // First 1-based period with any treated unit; 0 if the panel is all-control.
    int first_treated_period() const;
};

// A contrast of two treatment histories over periods [start, end] (1-based).
struct HistorySpec {
    int start = 1;
    int end = 1;
    std::vector<int> target;
    std::vector<int> reference;

    HistorySpec(int s, int e, std::vector<int> tgt, std::vector<int> ref);

    // Staggered-adoption sugar: target adopts at `adopt_period` and stays
    // treated through `end`; reference is all-control.
    static HistorySpec staggered(int adopt_period, int start, int end);

    int length() const { return end - start + 1; }
    HistorySpec truncated(int new_end) const;  // clip both arms to [start, new_end]
    std::string label() const;
};

struct HistorySupport {
    int n_target = 0;
    int n_reference = 0;
    bool zero_support = false;  // either arm empty
};

struct PanelDiagnostics {
    std::vector<int> treated_per_period;      // length T
    std::vector<HistorySupport> history_support;
    bool has_coincident_units = false;
};

// Indicator vectors (unit-level) for target/reference arms; always disjoint.
std::pair<Eigen::VectorXi, Eigen::VectorXi> history_indicator(const PanelDataset& panel,
                                                              const HistorySpec& h);

PanelDiagnostics validate_panel(const PanelDataset& panel,
                                const std::vector<HistorySpec>& histories = {});

// Long-format CSV: unit,period,y,z,<covariates...>,coord1,coord2.
struct CsvSchema {
    std::string unit = "unit";
    std::string period = "period";
    std::string outcome = "y";
    std::string treatment = "z";
    std::string coord1 = "coord1";
    std::string coord2 = "coord2";
};

PanelDataset load_panel(const std::string& path, const CsvSchema& schema = {});
void write_panel(const PanelDataset& panel, const std::string& path,
                 const CsvSchema& schema = {});

}  // namespace spillover
