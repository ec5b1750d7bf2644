#pragma once

// Per-period treatment probabilities and history propensities W_it.
//
// The default conditioning set is Markov-1: (Z_{i,t-1}, Y_{i,t-1}, X_it),
// optionally augmented with a polynomial of the geographic coordinates to
// absorb smooth unobservables. Fitting is a pooled ridge-stabilized IRLS
// logistic across periods. Staggered-adoption panels are right-censored:
// post-adoption cells contribute factor 1 and pre-rollout cells factor 0,
// and neither enters the fit.

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "spillover/panel.hpp"

namespace spillover {

struct FeatureFrame {
    Eigen::MatrixXd x;                          // rows x features, intercept included
    std::vector<std::string> names;
    std::vector<std::pair<int, int>> obs;       // (unit, period) 0-based per row
};

// Design rows for (i,t) with t >= 2: intercept, Z_{i,t-1}, Y_{i,t-1},
// covariates, coordinate polynomial of total degree <= q.
FeatureFrame build_features(const PanelDataset& panel, int lag_depth, int coord_poly_degree);
// Period-1 rows condition on X_1 alone (plus coordinates).
FeatureFrame build_period1_features(const PanelDataset& panel, int coord_poly_degree);

struct LogisticOptions {
    int max_iter = 200;
    double tol = 1e-8;     // infinity norm of the penalized score
    double ridge = 1e-8;   // exact MLE recovered as ridge -> 0
};

struct LogisticModel {
    Eigen::VectorXd beta;
    std::vector<std::string> feature_names;
    int iterations = 0;
    double grad_norm = 0.0;
    bool converged = false;

    double predict_one(const Eigen::RowVectorXd& row) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
    std::string to_json() const;
};

LogisticModel fit_logistic_irls(const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
                                const LogisticOptions& opts = {},
                                const std::vector<std::string>& names = {});
LogisticModel fit_logistic_irls(const FeatureFrame& frame, const Eigen::VectorXd& z,
                                const LogisticOptions& opts = {});

struct PropensityOptions {
    int coord_poly_degree = 0;
    bool period_dummies = false;
    double clip_lo = 0.01;
    double clip_hi = 0.99;
    enum class Staggered { detect, on, off } staggered = Staggered::detect;
    LogisticOptions fit;
};

// Fitted assignment model plus the structural rules needed to evaluate the
// single-period probability along any treatment path (used by the FRT).
struct PropensityModelBundle {
    bool staggered = false;
    int rollout_period = 0;     // 1-based first stochastic period; 0 = none
    int coord_poly_degree = 0;
    bool period_dummies = false;
    double clip_lo = 0.01, clip_hi = 0.99;
    LogisticModel pooled;       // rows with a lagged conditioning set
    bool has_period1 = false;
    LogisticModel period1;      // covariate-only model for first-period rows

    // P(Z_it = 1 | path) with clipping; z_prev/y_prev describe the path at t-1
    // (ignored for t = 0). 0-based t.
    double prob(const PanelDataset& panel, int i, int t, int z_prev, double y_prev) const;
    double raw_prob(const PanelDataset& panel, int i, int t, int z_prev, double y_prev) const;
    bool is_structural(const PanelDataset& panel, int i, int t, int z_prev) const;
};

struct PropensityTable {
    Eigen::MatrixXd p;          // N x T clipped single-period probabilities
    Eigen::MatrixXd p_raw;      // before clipping
    Eigen::MatrixXi structural; // 1 where p is 0/1 by structure (never clipped)
    double clip_lo = 0.01, clip_hi = 0.99;
    int n_clipped = 0;
};

struct PropensityFit {
    PropensityTable table;
    PropensityModelBundle bundle;
};

PropensityFit estimate_propensities(const PanelDataset& panel, const PropensityOptions& opts = {});

// Plug-in point for externally estimated probabilities (N x T).
PropensityTable propensity_table_from_matrix(const PanelDataset& panel, const Eigen::MatrixXd& p,
                                             double clip_lo = 0.01, double clip_hi = 0.99);

struct HistoryPropensity {
    Eigen::VectorXd w_target;     // per-unit P(Z_i^{s:t} = target history)
    Eigen::VectorXd w_reference;
};

HistoryPropensity history_propensity(const PropensityTable& table, const PanelDataset& panel,
                                     const HistorySpec& h);

struct PositivityReport {
    int n_clipped = 0;
    double min_p = 1.0, max_p = 0.0;      // over non-structural cells, post-clip
    double min_w = 1.0, max_w = 0.0;      // over requested histories, both arms
};

// Re-clips the table in place and reports extremes.
PositivityReport positivity_check(PropensityTable& table, const PanelDataset& panel,
                                  double clip_lo, double clip_hi,
                                  const std::vector<HistorySpec>& histories = {});

}  // namespace spillover
