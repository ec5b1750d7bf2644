#include "spillover/estimators.hpp"

#include <algorithm>
#include <cmath>

namespace spillover {

std::string to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::horvitz_thompson: return "ht";
        case EstimatorKind::hajek: return "hajek";
        case EstimatorKind::augmented: return "augmented";
        case EstimatorKind::did: return "did";
    }
    return "?";
}

namespace {

struct ArmSums {
    double num_t = 0, num_r = 0;   // sum of ind * y / W per arm
    double den_t = 0, den_r = 0;   // sum of ind / W per arm
    int n_t = 0, n_r = 0;
    int n_supported = 0;
};

ArmSums arm_sums(const PanelDataset& panel, const SpilloverMapping& mapping,
                 const HistorySpec& h, int t, const HistoryPropensity& w,
                 const Eigen::VectorXd& values) {
    if (t < h.end) throw Error("outcome period precedes the history window end");
    if (t > panel.n_periods) throw Error("outcome period exceeds panel");
    auto [ind_t, ind_r] = history_indicator(panel, h);
    MappedValues mu = apply_mapping(mapping, values);
    ArmSums s;
    for (int i = 0; i < panel.n_units; ++i) {
        if (!mu.mask[i]) continue;
        ++s.n_supported;
        if (ind_t(i)) {
            if (w.w_target(i) <= 0)
                throw Error("matched unit has zero target-history propensity");
            s.num_t += mu.values(i) / w.w_target(i);
            s.den_t += 1.0 / w.w_target(i);
            ++s.n_t;
        } else if (ind_r(i)) {
            if (w.w_reference(i) <= 0)
                throw Error("matched unit has zero reference-history propensity");
            s.num_r += mu.values(i) / w.w_reference(i);
            s.den_r += 1.0 / w.w_reference(i);
            ++s.n_r;
        }
    }
    return s;
}

EffectEstimate base_estimate(EstimatorKind kind, const SpilloverMapping& mapping,
                             const HistorySpec& h, int t, const ArmSums& s) {
    EffectEstimate e;
    e.kind = kind;
    e.history = h.label();
    e.period = t;
    e.period_start = t;
    e.d = mapping.d;
    e.n_target = s.n_t;
    e.n_reference = s.n_r;
    e.weight_sum_target = s.den_t;
    e.weight_sum_reference = s.den_r;
    e.n_supported = s.n_supported;
    return e;
}

}  // namespace

EffectEstimate eate_ht(const PanelDataset& panel, const SpilloverMapping& mapping,
                       const HistorySpec& h, int t, const HistoryPropensity& w) {
    ArmSums s = arm_sums(panel, mapping, h, t, w, panel.outcomes.col(t - 1));
    if (s.n_t == 0 && s.n_r == 0)
        throw NoSupport("no supported unit matches either history");
    EffectEstimate e = base_estimate(EstimatorKind::horvitz_thompson, mapping, h, t, s);
    e.tau = (s.num_t - s.num_r) / s.n_supported;
    return e;
}

EffectEstimate eate_hajek(const PanelDataset& panel, const SpilloverMapping& mapping,
                          const HistorySpec& h, int t, const HistoryPropensity& w) {
    ArmSums s = arm_sums(panel, mapping, h, t, w, panel.outcomes.col(t - 1));
    if (s.den_t <= 0) throw NoSupport("target arm has zero weighted count");
    if (s.den_r <= 0) throw NoSupport("reference arm has zero weighted count");
    EffectEstimate e = base_estimate(EstimatorKind::hajek, mapping, h, t, s);
    e.tau = s.num_t / s.den_t - s.num_r / s.den_r;
    return e;
}

// ---------------------------------------------------------------------------
// Diffusion model.
// ---------------------------------------------------------------------------

DiffusionModel DiffusionModel::zero(const PanelDataset& panel) {
    DiffusionModel m;
    m.is_zero = true;
    m.fitted = Eigen::MatrixXd::Zero(panel.n_units, panel.n_periods);
    m.t_begin = 1;
    return m;
}

double DiffusionModel::beta_at(double d) const {
    if (is_zero) return 0.0;
    for (size_t k = 0; k < d_grid.size(); ++k)
        if (std::abs(d - d_grid[k]) <= bandwidth || d == d_grid[k]) return beta_d(k);
    return 0.0;
}

DiffusionModel fit_diffusion_model(const PanelDataset& panel, const DistanceMatrix& D,
                                   const std::vector<double>& d_grid, double bandwidth,
                                   int t_begin) {
    if (d_grid.empty()) throw Error("diffusion model needs a nonempty distance grid");
    for (double d : d_grid)
        if (!(d >= 0) || !std::isfinite(d)) throw Error("distance grid must be finite and >= 0");
    if (t_begin < 2 || t_begin > panel.n_periods)
        throw Error("diffusion model needs lagged outcomes: 2 <= t_begin <= T");

    const int N = panel.n_units;
    const int K = static_cast<int>(d_grid.size());
    // Treated-neighbor count per bin; bin 0 (d == 0) is the unit's own status.
    auto bin_counts = [&](int i, int t, Eigen::VectorXd& row) {
        for (int k = 0; k < K; ++k) {
            double cnt = 0;
            if (d_grid[k] == 0.0) {
                cnt = panel.treatments(i, t);
            } else {
                for (int j = 0; j < N; ++j)
                    if (j != i && std::abs(D.dist(i, j) - d_grid[k]) <= bandwidth)
                        cnt += panel.treatments(j, t);
            }
            row(k) = cnt;
        }
    };

    std::vector<std::string> nuis = {"(intercept)", "y_lag1", "z_lag1"};
    for (const auto& n : panel.covariate_names) nuis.push_back(n);
    const int P = K + static_cast<int>(nuis.size());
    const long rows = static_cast<long>(N) * (panel.n_periods - t_begin + 1);
    Eigen::MatrixXd X(rows, P);
    Eigen::VectorXd y(rows);
    long r = 0;
    Eigen::VectorXd counts(K);
    for (int t = t_begin - 1; t < panel.n_periods; ++t)
        for (int i = 0; i < N; ++i, ++r) {
            bin_counts(i, t, counts);
            X.block(r, 0, 1, K) = counts.transpose();
            X(r, K) = 1.0;
            X(r, K + 1) = panel.outcomes(i, t - 1);
            X(r, K + 2) = panel.treatments(i, t - 1);
            for (size_t k = 0; k < panel.covariates.size(); ++k)
                X(r, K + 3 + static_cast<long>(k)) = panel.covariates[k](i, t);
            y(r) = panel.outcomes(i, t);
        }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < P)
        throw RankDeficient("diffusion design is rank-deficient (rank " +
                            std::to_string(qr.rank()) + " of " + std::to_string(P) +
                            "); coarsen the distance grid");
    Eigen::VectorXd coef = qr.solve(y);

    DiffusionModel m;
    m.d_grid = d_grid;
    m.bandwidth = bandwidth;
    m.t_begin = t_begin;
    m.beta_d = coef.head(K);
    m.nuisance = coef.tail(P - K);
    m.nuisance_names = nuis;
    m.fitted = Eigen::MatrixXd::Constant(N, panel.n_periods, std::nan(""));
    Eigen::VectorXd yhat = X * coef;
    r = 0;
    for (int t = t_begin - 1; t < panel.n_periods; ++t)
        for (int i = 0; i < N; ++i, ++r) m.fitted(i, t) = yhat(r);
    return m;
}

EffectEstimate eate_augmented(const PanelDataset& panel, const SpilloverMapping& mapping,
                              const HistorySpec& h, int t, const HistoryPropensity& w,
                              const DiffusionModel& model) {
    if (t < model.t_begin && !model.is_zero)
        throw Error("diffusion model does not cover the outcome period");
    Eigen::VectorXd resid = panel.outcomes.col(t - 1) - model.fitted.col(t - 1);
    if (!resid.allFinite()) throw Error("diffusion model fitted values missing at period");
    ArmSums s = arm_sums(panel, mapping, h, t, w, resid);
    if (s.n_t == 0 && s.n_r == 0)
        throw NoSupport("no supported unit matches either history");
    // Additive-model shortcut: the mean difference of marginalized fitted
    // values equals beta at the mapping's distance when the contrasted
    // histories differ at the outcome period, and 0 otherwise.
    double marginal = 0.0;
    if (t == h.end) {
        int dz = h.target.back() - h.reference.back();
        marginal = dz * model.beta_at(mapping.d);
    }
    EffectEstimate e = base_estimate(EstimatorKind::augmented, mapping, h, t, s);
    e.tau = (s.num_t - s.num_r) / s.n_supported + marginal;
    return e;
}

// ---------------------------------------------------------------------------
// DID.
// ---------------------------------------------------------------------------

EffectEstimate did_estimate(const PanelDataset& panel, const SpilloverMapping& mapping,
                            int post_period, std::optional<int> pre_period) {
    int post = post_period;
    int pre = pre_period.value_or(post - 1);
    if (pre < 1 || post > panel.n_periods || pre >= post)
        throw Error("DID needs 1 <= pre < post <= T");
    MappedValues mu_post = apply_mapping(mapping, panel.outcomes.col(post - 1));
    MappedValues mu_pre = apply_mapping(mapping, panel.outcomes.col(pre - 1));
    double sum_t = 0, sum_c = 0;
    int n_t = 0, n_c = 0, n_supported = 0;
    for (int i = 0; i < panel.n_units; ++i) {
        if (!mu_post.mask[i] || !mu_pre.mask[i]) continue;
        ++n_supported;
        double delta = mu_post.values(i) - mu_pre.values(i);
        if (panel.treatments(i, post - 1) == 1) {
            sum_t += delta;
            ++n_t;
        } else {
            sum_c += delta;
            ++n_c;
        }
    }
    if (n_t == 0) throw NoSupport("DID: no treated unit at the post period");
    if (n_c == 0) throw NoSupport("DID: no control unit at the post period");
    EffectEstimate e;
    e.kind = EstimatorKind::did;
    e.period = post;
    e.period_start = pre;
    e.d = mapping.d;
    e.tau = sum_t / n_t - sum_c / n_c;
    e.n_target = n_t;
    e.n_reference = n_c;
    e.n_supported = n_supported;
    return e;
}

EffectEstimate did_estimate(const PanelDataset& panel, int post_period,
                            std::optional<int> pre_period) {
    return did_estimate(panel, identity_mapping(panel.n_units), post_period, pre_period);
}

double did_bias_oracle(const Eigen::VectorXd& p, const Eigen::VectorXd& gbar1,
                       const Eigen::VectorXd& gbar0) {
    const long n = p.size();
    if (gbar1.size() != n || gbar0.size() != n)
        throw Error("bias oracle inputs must share length");
    double pbar = p.mean();
    if (pbar <= 0 || pbar >= 1) throw Error("bias oracle needs 0 < E[p] < 1");
    auto cov = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return (a.array() - a.mean()).matrix().dot((b.array() - b.mean()).matrix()) / n;
    };
    return cov(p, gbar1) / pbar + cov(p, gbar0) / (1.0 - pbar);
}

EffectEstimate aggregate_periods(const std::vector<EffectEstimate>& estimates) {
    if (estimates.empty()) throw Error("nothing to aggregate");
    EffectEstimate out = estimates.front();
    for (const auto& e : estimates) {
        if (e.kind != out.kind || e.history != out.history || e.d != out.d)
            throw Mismatch("period aggregation requires identical estimator, history, and d");
    }
    double tau = 0, nt = 0, nr = 0;
    int t_min = estimates.front().period, t_max = estimates.front().period;
    for (const auto& e : estimates) {
        tau += e.tau;
        nt += e.n_target;
        nr += e.n_reference;
        t_min = std::min(t_min, e.period);
        t_max = std::max(t_max, e.period);
    }
    out.tau = tau / static_cast<double>(estimates.size());
    out.n_target = nt / static_cast<double>(estimates.size());
    out.n_reference = nr / static_cast<double>(estimates.size());
    out.period = t_max;
    out.period_start = t_min;
    out.variance = std::nan("");
    out.ci_lo = std::nan("");
    out.ci_hi = std::nan("");
    return out;
}

// ---------------------------------------------------------------------------
// g-statistic contrast: aggregate histories by the number of treated periods.
// ---------------------------------------------------------------------------

namespace {

// P(number of treated periods in [s,t] equals each count), walking the
// per-period fitted probabilities. Under staggered adoption the chain is
// absorbing: once treated, later periods are treated with probability 1.
Eigen::VectorXd count_distribution(const PropensityTable& table, int i, int s, int t,
                                   bool staggered) {
    const int len = t - s + 1;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(len + 1);
    if (staggered) {
        // state: still untreated after walking periods s..per
        double p_untreated = 1.0;
        for (int per = s; per <= t; ++per) {
            double p = table.p(i, per - 1);
            // adopting at per yields count = t - per + 1
            out(t - per + 1) += p_untreated * p;
            p_untreated *= (1.0 - p);
        }
        out(0) = p_untreated;
    } else {
        out(0) = 1.0;
        for (int per = s; per <= t; ++per) {
            double p = table.p(i, per - 1);
            for (int c = per - s + 1; c >= 1; --c)
                out(c) = out(c) * (1.0 - p) + out(c - 1) * p;
            out(0) *= (1.0 - p);
        }
    }
    return out;
}

}  // namespace

EffectEstimate gstat_contrast(const PanelDataset& panel, const SpilloverMapping& mapping,
                              int s, int t, int g, int g_ref, const PropensityTable& table,
                              bool staggered) {
    if (s < 1 || t > panel.n_periods || s > t) throw Error("invalid g-statistic window");
    if (g == g_ref) {
        EffectEstimate e;
        e.kind = EstimatorKind::hajek;
        e.period = t;
        e.period_start = s;
        e.d = mapping.d;
        e.tau = 0.0;
        return e;  // identical levels contrast to zero by construction
    }
    const int len = t - s + 1;
    if (g < 0 || g > len || g_ref < 0 || g_ref > len)
        throw Error("treated-period count outside the window length");
    MappedValues mu = apply_mapping(mapping, panel.outcomes.col(t - 1));
    double num_t = 0, den_t = 0, num_r = 0, den_r = 0;
    int n_t = 0, n_r = 0, n_supported = 0;
    for (int i = 0; i < panel.n_units; ++i) {
        if (!mu.mask[i]) continue;
        ++n_supported;
        int count = 0;
        for (int per = s; per <= t; ++per) count += panel.treatments(i, per - 1);
        if (count != g && count != g_ref) continue;
        double w = count_distribution(table, i, s, t, staggered)(count);
        if (w <= 0) throw Error("realized count has zero estimated probability");
        if (count == g) {
            num_t += mu.values(i) / w;
            den_t += 1.0 / w;
            ++n_t;
        } else {
            num_r += mu.values(i) / w;
            den_r += 1.0 / w;
            ++n_r;
        }
    }
    if (n_t == 0) throw NoSupport("g-statistic level g is unrealized");
    if (n_r == 0) throw NoSupport("g-statistic level g' is unrealized");
    EffectEstimate e;
    e.kind = EstimatorKind::hajek;
    e.history = "g=" + std::to_string(g) + ":g'=" + std::to_string(g_ref);
    e.period = t;
    e.period_start = s;
    e.d = mapping.d;
    e.tau = num_t / den_t - num_r / den_r;
    e.n_target = n_t;
    e.n_reference = n_r;
    e.weight_sum_target = den_t;
    e.weight_sum_reference = den_r;
    e.n_supported = n_supported;
    return e;
}

}  // namespace spillover
