#pragma once

// Uncertainty quantification for the Hajek estimator: its weighted-regression
// representation, spatial / two-way HAC sandwich variances, Normal confidence
// intervals, and Fisher randomization tests.
//
// Analytic CIs treat the fitted propensities as known; the nuisance-variance
// component has no closed form and is addressed through the randomization
// test instead.

#include <Eigen/Dense>
#include <vector>

#include "spillover/estimators.hpp"
#include "spillover/panel.hpp"
#include "spillover/propensity.hpp"
#include "spillover/spatial.hpp"

namespace spillover {

struct WlsRepresentation {
    // One row per supported unit in either arm.
    std::vector<int> unit;        // panel unit index
    int period = 0;               // 1-based outcome period
    Eigen::VectorXd y;            // mu_i(Y_t; d)
    Eigen::VectorXi arm;          // 1 = target history
    Eigen::VectorXd weight;       // signed regression weight from the Hajek form
    double alpha = 0.0;           // reference-arm level
    double tau = 0.0;             // equals the Hajek point estimate
    Eigen::VectorXd resid;
    Eigen::VectorXd psi;          // per-row influence on tau
};

WlsRepresentation hajek_wls(const PanelDataset& panel, const SpilloverMapping& mapping,
                            const HistorySpec& h, int t, const HistoryPropensity& w);

enum class HacKernel { uniform, bartlett };

struct VarianceEstimate {
    double value = 0.0;
    double hc0 = 0.0;             // own-score term, the floor
    bool floored = false;         // true when the kernel sum went below hc0... (kept <= value)
    long long n_pairs = 0;        // cross pairs entering the meat
    double cutoff = 0.0;
    double time_cutoff = 0.0;
    HacKernel kernel = HacKernel::uniform;
};

// Spatial HAC for a single-period representation. cutoff = 0 degenerates to
// the heteroskedasticity-robust (HC0) sandwich exactly.
VarianceEstimate spatial_hac(const WlsRepresentation& rep, const DistanceMatrix& D,
                             double cutoff, HacKernel kernel = HacKernel::uniform,
                             bool parallel = true);

// Two-way HAC for the period-pooled estimator (simple average over periods).
// A cross pair enters when it is spatially close (d_ij <= dist_cutoff) or
// temporally close (|t - s| <= time_cutoff); a zero cutoff disables the
// corresponding branch, so (0, 0) is HC0.
VarianceEstimate twoway_hac(const std::vector<WlsRepresentation>& reps, const DistanceMatrix& D,
                            double dist_cutoff, double time_cutoff,
                            HacKernel kernel = HacKernel::uniform, bool parallel = true);

std::pair<double, double> confidence_interval(double tau, double variance, double level);

// Serial reference kernels, kept for verification and benchmarks.
double hac_meat_serial(const Eigen::VectorXd& psi, const std::vector<int>& unit,
                       const std::vector<int>& period, const DistanceMatrix& D,
                       double dist_cutoff, double time_cutoff, HacKernel kernel,
                       long long* n_pairs = nullptr);
double hac_meat_parallel(const Eigen::VectorXd& psi, const std::vector<int>& unit,
                         const std::vector<int>& period, const DistanceMatrix& D,
                         double dist_cutoff, double time_cutoff, HacKernel kernel,
                         long long* n_pairs = nullptr);

// ---------------------------------------------------------------------------
// Fisher randomization test under the sharp null of zero cumulative effect
// for the contrasted histories: treatments are redrawn sequentially from the
// fitted assignment model (Bernoulli across units), outcomes stay fixed.
// ---------------------------------------------------------------------------

struct FrtOptions {
    EstimatorKind estimator = EstimatorKind::hajek;
    int n_draws = 999;
    std::uint64_t seed = 1;
    bool keep_draws = false;
    bool parallel = true;
    // Re-estimate the assignment model on every redraw, so the reference
    // distribution reflects the nuisance estimation step. The draws themselves
    // always come from the model fitted to the observed data.
    bool refit_per_draw = true;
    PropensityOptions refit_options;
};

struct FrtResult {
    double p_value = 1.0;
    double tau_obs = 0.0;
    int n_draws = 0;
    bool low_draw_warning = false;  // n_draws < 100
    std::vector<double> draws;      // reference distribution when kept
};

FrtResult randomization_test(const PanelDataset& panel, const PropensityModelBundle& model,
                             const SpilloverMapping& mapping, const HistorySpec& h, int t,
                             const FrtOptions& opts);

}  // namespace spillover
