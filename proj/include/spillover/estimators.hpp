#pragma once

// Point estimation of expected average treatment effects under temporal and
// spatial interference: Horvitz-Thompson, Hajek, and augmented IPTW forms,
// the naive DID comparison, its bias oracle, and period/count aggregations.
//
// All estimators average over mapping-supported units only and report the
// support count; a unit matching neither history contributes zero to both
// sums.

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "spillover/panel.hpp"
#include "spillover/propensity.hpp"
#include "spillover/spatial.hpp"

namespace spillover {

enum class EstimatorKind { horvitz_thompson, hajek, augmented, did };

std::string to_string(EstimatorKind k);

struct EffectEstimate {
    EstimatorKind kind = EstimatorKind::hajek;
    std::string history;          // HistorySpec label (empty for DID)
    int period = 0;               // 1-based outcome period (0 = pooled)
    int period_start = 0;         // for pooled estimates
    double d = 0.0;
    double tau = 0.0;
    double variance = std::nan("");
    double ci_lo = std::nan("");
    double ci_hi = std::nan("");
    double n_target = 0;          // arm sizes among supported units
    double n_reference = 0;
    double weight_sum_target = 0; // sums of 1/W per arm
    double weight_sum_reference = 0;
    int n_supported = 0;          // mapping-supported units
};

EffectEstimate eate_ht(const PanelDataset& panel, const SpilloverMapping& mapping,
                       const HistorySpec& h, int t, const HistoryPropensity& w);

EffectEstimate eate_hajek(const PanelDataset& panel, const SpilloverMapping& mapping,
                          const HistorySpec& h, int t, const HistoryPropensity& w);

// ---------------------------------------------------------------------------
// Diffusion outcome model: Y_it regressed on treated-neighbor counts per
// distance bin plus a linear nuisance in (Y_{i,t-1}, Z_{i,t-1}, X_it).
// ---------------------------------------------------------------------------

struct DiffusionModel {
    std::vector<double> d_grid;   // distance bins, usually including 0 (own Z)
    double bandwidth = 0.0;
    Eigen::VectorXd beta_d;       // per-bin decay coefficients
    Eigen::VectorXd nuisance;     // intercept + lag/covariate coefficients
    std::vector<std::string> nuisance_names;
    Eigen::MatrixXd fitted;       // N x T, NaN outside the fitted window
    int t_begin = 2;              // 1-based first fitted period

    bool is_zero = false;         // degenerate augmentation (testing hook)
    static DiffusionModel zero(const PanelDataset& panel);

    double beta_at(double d) const;  // 0 when d falls outside every bin
};

DiffusionModel fit_diffusion_model(const PanelDataset& panel, const DistanceMatrix& D,
                                   const std::vector<double>& d_grid, double bandwidth,
                                   int t_begin = 2);

EffectEstimate eate_augmented(const PanelDataset& panel, const SpilloverMapping& mapping,
                              const HistorySpec& h, int t, const HistoryPropensity& w,
                              const DiffusionModel& model);

// ---------------------------------------------------------------------------
// DID comparison.
// ---------------------------------------------------------------------------

// Classic 2x2 DID on the (pre, post) slice; treated group = Z_{i,post} == 1.
EffectEstimate did_estimate(const PanelDataset& panel, int post_period,
                            std::optional<int> pre_period = std::nullopt);
// Spatial analogue: outcomes replaced by the mapping values.
EffectEstimate did_estimate(const PanelDataset& panel, const SpilloverMapping& mapping,
                            int post_period, std::optional<int> pre_period = std::nullopt);

// Asymptotic DID bias from the unobservable per-unit propensity p_i and the
// marginalized effect surfaces:
//   bias = Cov[p, g(1)] / E[p] + Cov[p, g(0)] / E[1-p].
double did_bias_oracle(const Eigen::VectorXd& p, const Eigen::VectorXd& gbar1,
                       const Eigen::VectorXd& gbar0);

// Unweighted mean over per-period estimates sharing (kind, history, d).
EffectEstimate aggregate_periods(const std::vector<EffectEstimate>& estimates);

// Hajek contrast between units with g(Z_i^{s:t}) = g and = g_ref, where g is
// the number of treated periods; weights are the estimated probability of
// the realized count (Poisson-binomial over the fitted per-period p's, with
// absorbing transitions when the table marks the panel staggered).
EffectEstimate gstat_contrast(const PanelDataset& panel, const SpilloverMapping& mapping,
                              int s, int t, int g, int g_ref, const PropensityTable& table,
                              bool staggered);

}  // namespace spillover
