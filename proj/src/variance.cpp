#include "spillover/variance.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace spillover {

WlsRepresentation hajek_wls(const PanelDataset& panel, const SpilloverMapping& mapping,
                            const HistorySpec& h, int t, const HistoryPropensity& w) {
    if (t < h.end) throw Error("outcome period precedes the history window end");
    auto [ind_t, ind_r] = history_indicator(panel, h);
    MappedValues mu = apply_mapping(mapping, panel.outcomes.col(t - 1));

    WlsRepresentation rep;
    rep.period = t;
    std::vector<double> ys, ws;
    std::vector<int> arms;
    for (int i = 0; i < panel.n_units; ++i) {
        if (!mu.mask[i]) continue;
        if (ind_t(i)) {
            rep.unit.push_back(i);
            ys.push_back(mu.values(i));
            ws.push_back(1.0 / w.w_target(i));
            arms.push_back(1);
        } else if (ind_r(i)) {
            rep.unit.push_back(i);
            ys.push_back(mu.values(i));
            ws.push_back(-1.0 / w.w_reference(i));
            arms.push_back(0);
        }
    }
    const long n = static_cast<long>(ys.size());
    bool any_t = false, any_r = false;
    for (long r = 0; r < n; ++r) (arms[r] ? any_t : any_r) = true;
    if (!any_t || !any_r) throw NoSupport("singular weighted design: an arm is empty");

    rep.y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
    rep.weight = Eigen::Map<Eigen::VectorXd>(ws.data(), n);
    rep.arm.resize(n);
    for (long r = 0; r < n; ++r) rep.arm(r) = arms[r];

    // Weighted least squares of mu on (1, arm) with the paper's signed
    // weights; the arm coefficient reproduces the Hajek estimate.
    Eigen::MatrixXd x(n, 2);
    x.col(0).setOnes();
    x.col(1) = rep.arm.cast<double>();
    Eigen::Matrix2d xtwx = x.transpose() * rep.weight.asDiagonal() * x;
    Eigen::Vector2d xtwy = x.transpose() * rep.weight.asDiagonal() * rep.y;
    double det = xtwx(0, 0) * xtwx(1, 1) - xtwx(0, 1) * xtwx(1, 0);
    if (std::abs(det) < 1e-300) throw NoSupport("singular weighted normal equations");
    Eigen::Matrix2d bread;
    bread << xtwx(1, 1), -xtwx(0, 1), -xtwx(1, 0), xtwx(0, 0);
    bread /= det;
    Eigen::Vector2d coef = bread * xtwy;
    rep.alpha = coef(0);
    rep.tau = coef(1);
    rep.resid = rep.y - x * coef;
    // Influence of each row on tau: [ (X'WX)^{-1} x_r w_r e_r ]_tau.
    rep.psi.resize(n);
    for (long r = 0; r < n; ++r) {
        Eigen::Vector2d score = x.row(r).transpose() * (rep.weight(r) * rep.resid(r));
        rep.psi(r) = (bread * score)(1);
    }
    return rep;
}

namespace {

inline double pair_kernel(double dij, double dt, double dist_cutoff, double time_cutoff,
                          HacKernel kernel, bool& include) {
    bool spatial = dist_cutoff > 0 && dij <= dist_cutoff;
    bool temporal = time_cutoff > 0 && dt <= time_cutoff;
    include = spatial || temporal;
    if (!include) return 0.0;
    if (kernel == HacKernel::uniform) return 1.0;
    double k = 0.0;
    if (spatial) k = std::max(k, 1.0 - dij / dist_cutoff);
    if (temporal) k = std::max(k, 1.0 - dt / time_cutoff);
    return k;
}

}  // namespace

double hac_meat_serial(const Eigen::VectorXd& psi, const std::vector<int>& unit,
                       const std::vector<int>& period, const DistanceMatrix& D,
                       double dist_cutoff, double time_cutoff, HacKernel kernel,
                       long long* n_pairs) {
    const long n = psi.size();
    double meat = 0;
    long long pairs = 0;
    // Row partials mirror the parallel kernel's reduction order, so the two
    // implementations agree bitwise.
    for (long a = 0; a < n; ++a) {
        double acc = psi(a) * psi(a);
        for (long b = a + 1; b < n; ++b) {
            bool include = false;
            double k = pair_kernel(D.dist(unit[a], unit[b]),
                                   std::abs(period[a] - period[b]), dist_cutoff,
                                   time_cutoff, kernel, include);
            if (include) {
                acc += 2.0 * k * psi(a) * psi(b);
                ++pairs;
            }
        }
        meat += acc;
    }
    if (n_pairs) *n_pairs = pairs;
    return meat;
}

double hac_meat_parallel(const Eigen::VectorXd& psi, const std::vector<int>& unit,
                         const std::vector<int>& period, const DistanceMatrix& D,
                         double dist_cutoff, double time_cutoff, HacKernel kernel,
                         long long* n_pairs) {
    const long n = psi.size();
    // Per-row partial sums into slots, reduced serially afterwards, so results
    // are identical for any thread count.
    std::vector<double> slot(n, 0.0);
    std::vector<long long> pair_slot(n, 0);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16)
#endif
    for (long a = 0; a < n; ++a) {
        double acc = psi(a) * psi(a);
        long long pairs = 0;
        for (long b = a + 1; b < n; ++b) {
            bool include = false;
            double k = pair_kernel(D.dist(unit[a], unit[b]),
                                   std::abs(period[a] - period[b]), dist_cutoff,
                                   time_cutoff, kernel, include);
            if (include) {
                acc += 2.0 * k * psi(a) * psi(b);
                ++pairs;
            }
        }
        slot[a] = acc;
        pair_slot[a] = pairs;
    }
    double meat = 0;
    long long pairs = 0;
    for (long a = 0; a < n; ++a) {
        meat += slot[a];
        pairs += pair_slot[a];
    }
    if (n_pairs) *n_pairs = pairs;
    return meat;
}

namespace {

VarianceEstimate hac_from_psi(const Eigen::VectorXd& psi, const std::vector<int>& unit,
                              const std::vector<int>& period, const DistanceMatrix& D,
                              double dist_cutoff, double time_cutoff, HacKernel kernel,
                              bool parallel) {
    VarianceEstimate v;
    v.cutoff = dist_cutoff;
    v.time_cutoff = time_cutoff;
    v.kernel = kernel;
    v.hc0 = psi.squaredNorm();
    double meat = parallel
                      ? hac_meat_parallel(psi, unit, period, D, dist_cutoff, time_cutoff,
                                          kernel, &v.n_pairs)
                      : hac_meat_serial(psi, unit, period, D, dist_cutoff, time_cutoff,
                                        kernel, &v.n_pairs);
    if (meat < 0.0) {
        // Uniform-kernel cross terms can push the estimate negative; fall back
        // to the own-score term and flag it.
        v.value = v.hc0;
        v.floored = true;
    } else {
        v.value = meat;
    }
    return v;
}

}  // namespace

VarianceEstimate spatial_hac(const WlsRepresentation& rep, const DistanceMatrix& D,
                             double cutoff, HacKernel kernel, bool parallel) {
    if (cutoff < 0) throw Error("HAC cutoff must be nonnegative");
    std::vector<int> period(rep.unit.size(), rep.period);
    return hac_from_psi(rep.psi, rep.unit, period, D, cutoff, 0.0, kernel, parallel);
}

VarianceEstimate twoway_hac(const std::vector<WlsRepresentation>& reps, const DistanceMatrix& D,
                            double dist_cutoff, double time_cutoff, HacKernel kernel,
                            bool parallel) {
    if (reps.empty()) throw Error("two-way HAC needs at least one period representation");
    if (dist_cutoff < 0 || time_cutoff < 0) throw Error("HAC cutoffs must be nonnegative");
    const double K = static_cast<double>(reps.size());
    std::vector<int> unit, period;
    std::vector<double> psi;
    for (const auto& rep : reps)
        for (long r = 0; r < rep.psi.size(); ++r) {
            unit.push_back(rep.unit[r]);
            period.push_back(rep.period);
            psi.push_back(rep.psi(r) / K);  // influence on the period average
        }
    Eigen::VectorXd psi_v = Eigen::Map<Eigen::VectorXd>(psi.data(), static_cast<long>(psi.size()));
    return hac_from_psi(psi_v, unit, period, D, dist_cutoff, time_cutoff, kernel, parallel);
}

std::pair<double, double> confidence_interval(double tau, double variance, double level) {
    if (variance < 0) throw Error("variance must be nonnegative");
    if (!(level > 0 && level < 1)) throw Error("confidence level must lie in (0,1)");
    double z = norm_quantile(0.5 + level / 2.0);
    double hw = z * std::sqrt(variance);
    return {tau - hw, tau + hw};
}

// ---------------------------------------------------------------------------
// Fisher randomization test.
// ---------------------------------------------------------------------------

namespace {

// Redraw a full treatment path from the fitted sequential model, holding the
// observed outcomes fixed (valid under the sharp null).
Eigen::MatrixXi redraw_treatments(const PanelDataset& panel, const PropensityModelBundle& model,
                                  Rng& rng) {
    Eigen::MatrixXi z(panel.n_units, panel.n_periods);
    for (int t = 0; t < panel.n_periods; ++t)
        for (int i = 0; i < panel.n_units; ++i) {
            int z_prev = t > 0 ? z(i, t - 1) : 0;
            double y_prev = t > 0 ? panel.outcomes(i, t - 1) : 0.0;
            double p = model.prob(panel, i, t, z_prev, y_prev);
            z(i, t) = rng.uniform() < p ? 1 : 0;
        }
    return z;
}

// Single-period probabilities along a given path (for history weights).
Eigen::MatrixXd path_probabilities(const PanelDataset& panel, const PropensityModelBundle& model,
                                   const Eigen::MatrixXi& z) {
    Eigen::MatrixXd p(panel.n_units, panel.n_periods);
    for (int t = 0; t < panel.n_periods; ++t)
        for (int i = 0; i < panel.n_units; ++i) {
            int z_prev = t > 0 ? z(i, t - 1) : 0;
            double y_prev = t > 0 ? panel.outcomes(i, t - 1) : 0.0;
            p(i, t) = model.prob(panel, i, t, z_prev, y_prev);
        }
    return p;
}

double estimate_on_path(const PanelDataset& panel, const Eigen::MatrixXi& z,
                        const Eigen::MatrixXd& p, const MappedValues& mu,
                        const HistorySpec& h, EstimatorKind kind) {
    double num_t = 0, den_t = 0, num_r = 0, den_r = 0;
    int n_supported = 0;
    for (int i = 0; i < panel.n_units; ++i) {
        if (!mu.mask[i]) continue;
        ++n_supported;
        bool mt = true, mr = true;
        for (int per = h.start; per <= h.end; ++per) {
            int zz = z(i, per - 1);
            mt = mt && (zz == h.target[per - h.start]);
            mr = mr && (zz == h.reference[per - h.start]);
        }
        if (!mt && !mr) continue;
        double w = 1.0;
        for (int per = h.start; per <= h.end; ++per) {
            double pp = p(i, per - 1);
            int zh = (mt ? h.target : h.reference)[per - h.start];
            w *= zh == 1 ? pp : 1.0 - pp;
        }
        if (w <= 0) continue;  // numerically impossible path, skip
        if (mt) {
            num_t += mu.values(i) / w;
            den_t += 1.0 / w;
        } else {
            num_r += mu.values(i) / w;
            den_r += 1.0 / w;
        }
    }
    if (kind == EstimatorKind::horvitz_thompson)
        return (num_t - num_r) / std::max(n_supported, 1);
    if (den_t <= 0 || den_r <= 0) return std::nan("");
    return num_t / den_t - num_r / den_r;
}

}  // namespace

FrtResult randomization_test(const PanelDataset& panel, const PropensityModelBundle& model,
                             const SpilloverMapping& mapping, const HistorySpec& h, int t,
                             const FrtOptions& opts) {
    if (opts.n_draws <= 0) throw Error("randomization test needs n_draws > 0");
    if (opts.estimator != EstimatorKind::hajek &&
        opts.estimator != EstimatorKind::horvitz_thompson)
        throw Error("randomization test supports the HT and Hajek estimators");

    FrtResult res;
    res.n_draws = opts.n_draws;
    res.low_draw_warning = opts.n_draws < 100;

    MappedValues mu = apply_mapping(mapping, panel.outcomes.col(t - 1));
    Eigen::MatrixXd p_obs = path_probabilities(panel, model, panel.treatments);
    res.tau_obs = estimate_on_path(panel, panel.treatments, p_obs, mu, h, opts.estimator);
    if (std::isnan(res.tau_obs))
        throw NoSupport("observed data has an empty arm for the contrasted histories");

    std::vector<double> draws(opts.n_draws, std::nan(""));
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (opts.parallel)
#endif
    for (int k = 0; k < opts.n_draws; ++k) {
        Rng rng(split_seed(opts.seed, static_cast<std::uint64_t>(k)));
        Eigen::MatrixXi z = redraw_treatments(panel, model, rng);
        Eigen::MatrixXd p;
        if (opts.refit_per_draw) {
            PanelDataset redrawn = panel;
            redrawn.treatments = z;
            try {
                PropensityFit fit = estimate_propensities(redrawn, opts.refit_options);
                p = path_probabilities(redrawn, fit.bundle, z);
            } catch (const Error&) {
                continue;  // degenerate redraw; carries no evidence
            }
        } else {
            p = path_probabilities(panel, model, z);
        }
        draws[k] = estimate_on_path(panel, z, p, mu, h, opts.estimator);
    }

    int exceed = 0, valid = 0;
    double ref = std::abs(res.tau_obs);
    for (double v : draws) {
        if (std::isnan(v)) continue;  // draw with an empty arm carries no evidence
        ++valid;
        if (std::abs(v) >= ref - 1e-12) ++exceed;
    }
    res.p_value = (1.0 + exceed) / (valid + 1.0);
    if (opts.keep_draws) res.draws = std::move(draws);
    return res;
}

}  // namespace spillover
