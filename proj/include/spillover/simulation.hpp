#pragma once

// Simulation harness: staggered-adoption DGP on a raster of units with a
// kriged unit-effect surface, a Monte-Carlo ground-truth EATE oracle, and a
// replication driver for bias/coverage studies.
//
// Replications and the truth oracle run in parallel with per-slot seeds and
// serial reduction, so results are identical for any thread count.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spillover/estimators.hpp"
#include "spillover/panel.hpp"
#include "spillover/spatial.hpp"
#include "spillover/variance.hpp"

namespace spillover {

struct EffectFunction {
    double amplitude = 2.5;    // value at d = 0
    double range = 1.5;        // amplitude * exp(-d / range)
    double max_radius = 4.0;   // hard truncation
    double operator()(double d) const {
        if (d > max_radius) return 0.0;
        return amplitude * std::exp(-d / range);
    }
};

struct SimConfig {
    int rows = 20, cols = 20;
    int n_periods = 5;
    double mu = 5.0;
    double out_x1 = 0.3, out_x2 = 0.5;

    // Sequential assignment logit; an extra standard-Normal disturbance enters
    // the link, so the fitted marginal logistic is mildly attenuated.
    std::string assignment = "sequential_logit";  // or "unit_bernoulli"
    double asg_intercept = -2.0;
    double asg_x1 = 0.2, asg_x2 = 0.2, asg_y_lag = 0.05, asg_z_lag = 0.4;
    double asg_noise_sd = 1.0;
    double unit_intercept = 0.0;   // unit_bernoulli: p_i = sigmoid(b0 + conf * alpha_i)

    // Unit-effect surface: ordinary kriging of standard-Normal anchors with an
    // exponential kernel, then scaled. The surface scale and the effect
    // amplitude are calibrated jointly so the default design reproduces the
    // reference treated counts (about 85 treated in the rollout period rising
    // to about 210 two periods later; the second count is reached through the
    // outcome-feedback channel in the assignment).
    int n_anchors = 16;
    double gp_range = 8.0;
    double gp_sill = 1.0;
    double gp_nugget = 1e-10;
    double alpha_scale = 7.0;

    EffectFunction effect;
    double lag_discount = 0.6;     // carryover of last period's received effect
    bool heterogeneous = true;     // received effect scaled by 1 + sigmoid(alpha_i)
    bool confounded = false;       // alpha enters the assignment process
    double confounding_strength = 1.0;
    int rollout_period = 3;        // 1-based first stochastic period
    bool staggered = true;         // absorbing treatment
    double y_bound = 1e3;          // Assumption-style boundedness guard
    std::uint64_t seed = 20240501;

    void validate() const;
    std::string to_json_string() const;
    static SimConfig from_json_string(const std::string& text);
};

// Ordinary-kriging interpolation over a grid: exact at anchors and exact for
// constant anchor values.
Eigen::VectorXd krige_grid(int rows, int cols, const std::vector<int>& anchor_cells,
                           const Eigen::VectorXd& anchor_values, double range, double sill,
                           double nugget);

// Ordinary-kriging interpolation of iid standard-Normal anchor values placed
// at distinct uniform-random grid cells; deterministic per seed.
Eigen::VectorXd gp_surface(int rows, int cols, int n_anchors, double range, double sill,
                           double nugget, std::uint64_t seed);

struct SimSurface {
    Eigen::MatrixXd coords;    // N x 2
    DistanceMatrix D;
    Eigen::VectorXd alpha;     // scaled surface
    Eigen::VectorXd scale;     // received-effect multiplier per unit
    Eigen::MatrixXd effectw;   // f(d_ij), truncated at max radius; diagonal f(0)
};

SimSurface make_surface(const SimConfig& cfg);

// Cumulative received effect for a full treatment matrix:
//   E_t = scale .* (effectw * Z_t) + lag_discount * E_{t-1}.
Eigen::MatrixXd received_effects(const SimSurface& surface, const SimConfig& cfg,
                                 const Eigen::MatrixXi& z);

struct SimTruth {
    SimConfig cfg;
    PanelDataset panel;
    Eigen::MatrixXd assign_prob;   // conditional P(Z_it=1) used for each draw
    Eigen::MatrixXd assign_lin;    // linear predictor before the link noise (NaN if structural)
    Eigen::MatrixXd received;      // cumulative received effect E_it
    Eigen::VectorXd unit_prob;     // unit_bernoulli design only
    std::vector<int> cohort;       // 1-based first treated period, 0 = never
    int n_bound_violations = 0;
};

SimTruth draw_panel(const SimSurface& surface, const SimConfig& cfg, std::uint64_t draw_seed);
SimTruth simulate_panel(const SimConfig& cfg);

struct TrueEffectCurve {
    std::vector<double> d_grid;
    Eigen::VectorXd eate;
    Eigen::VectorXd mc_se;
    std::vector<int> n_supported;
    int n_reps = 0;
    std::string history;
    int period = 0;
};

// Forced-history marginalization: draw a full assignment, force each unit's
// window to the target/reference history holding others' draws fixed, and
// average the mapped outcome differences over units and replications.
TrueEffectCurve true_eate_mc(const SimConfig& cfg, const HistorySpec& h,
                             const std::vector<double>& d_grid, int t, int n_reps,
                             std::uint64_t seed, std::optional<double> bandwidth = std::nullopt,
                             bool parallel = true);

// ---------------------------------------------------------------------------
// Replication driver.
// ---------------------------------------------------------------------------

struct EstimatorSpec {
    EstimatorKind kind = EstimatorKind::hajek;
    int coord_poly_degree = 0;
    bool period_dummies = false;
    double clip_lo = 0.01, clip_hi = 0.99;
    enum class Var { none, hc0, spatial, twoway } variance = Var::none;
    double cutoff = 0.0, time_cutoff = 0.0;
    HacKernel kernel = HacKernel::uniform;
    double ci_level = 0.95;
    std::vector<double> model_d_grid;  // augmented-estimator model bins (defaults to d grid)
};

struct ReplicateCell {
    double d = 0;
    int t = 0;
    double truth = 0, truth_se = 0;
    double mean_est = 0, mc_se = 0, sd_est = 0;
    double bias = 0;
    double coverage = std::nan("");
    int n_ok = 0;
};

struct ReplicationTable {
    std::vector<double> d_grid;
    std::vector<int> t_list;
    std::vector<ReplicateCell> cells;       // d-major, t-minor
    Eigen::MatrixXd draws;                  // n_reps x n_cells, NaN on failure
    Eigen::MatrixXd ci_lo, ci_hi;           // populated when variance requested
    int cell_index(int di, int ti) const { return di * static_cast<int>(t_list.size()) + ti; }
};

ReplicationTable replicate(const SimConfig& cfg, const HistorySpec& h,
                           const std::vector<double>& d_grid, const std::vector<int>& t_list,
                           const EstimatorSpec& spec, int n_reps, std::uint64_t seed,
                           int truth_reps = 100, bool parallel = true);

// DID-vs-truth comparison with the closed-form bias oracle. The oracle column
// is filled for the unit-Bernoulli design, where the per-unit propensity is
// exact and forcing equals conditioning.
struct DidCompareRow {
    double d = 0;
    double mean_did = 0, se_did = 0;
    double truth = 0;
    double oracle_bias = std::nan("");
    double oracle_se = std::nan("");
};

std::vector<DidCompareRow> did_compare(const SimConfig& cfg, const std::vector<double>& d_grid,
                                       int n_reps, int oracle_reps, std::uint64_t seed,
                                       bool parallel = true);

}  // namespace spillover
