#include "spillover/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "spillover/propensity.hpp"

namespace spillover {

void SimConfig::validate() const {
    if (rows < 2 || cols < 2) throw ConfigError("grid must be at least 2 x 2");
    if (n_periods < 2) throw ConfigError("simulation needs T >= 2");
    if (!(lag_discount >= 0 && lag_discount <= 1))
        throw ConfigError("lag discount must lie in [0,1]");
    if (!std::isfinite(effect.amplitude)) throw ConfigError("effect amplitude must be finite");
    if (effect.range <= 0 || effect.max_radius < 0)
        throw ConfigError("effect range must be positive and max radius nonnegative");
    if (n_anchors < 3) throw ConfigError("kriging needs at least 3 anchors");
    if (rollout_period < 2 || rollout_period > n_periods)
        throw ConfigError("rollout period must lie in [2, T]");
    if (assignment != "sequential_logit" && assignment != "unit_bernoulli")
        throw ConfigError("unknown assignment kind: " + assignment);
}

std::string SimConfig::to_json_string() const {
    nlohmann::json j;
    j["rows"] = rows;
    j["cols"] = cols;
    j["n_periods"] = n_periods;
    j["mu"] = mu;
    j["out_x1"] = out_x1;
    j["out_x2"] = out_x2;
    j["assignment"] = assignment;
    j["asg_intercept"] = asg_intercept;
    j["asg_x1"] = asg_x1;
    j["asg_x2"] = asg_x2;
    j["asg_y_lag"] = asg_y_lag;
    j["asg_z_lag"] = asg_z_lag;
    j["asg_noise_sd"] = asg_noise_sd;
    j["unit_intercept"] = unit_intercept;
    j["n_anchors"] = n_anchors;
    j["gp_range"] = gp_range;
    j["gp_sill"] = gp_sill;
    j["gp_nugget"] = gp_nugget;
    j["alpha_scale"] = alpha_scale;
    j["effect_amplitude"] = effect.amplitude;
    j["effect_range"] = effect.range;
    j["effect_max_radius"] = effect.max_radius;
    j["lag_discount"] = lag_discount;
    j["heterogeneous"] = heterogeneous;
    j["confounded"] = confounded;
    j["confounding_strength"] = confounding_strength;
    j["rollout_period"] = rollout_period;
    j["staggered"] = staggered;
    j["y_bound"] = y_bound;
    j["seed"] = seed;
    return j.dump(2);
}

SimConfig SimConfig::from_json_string(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    SimConfig c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("rows", c.rows);
    get("cols", c.cols);
    get("n_periods", c.n_periods);
    get("mu", c.mu);
    get("out_x1", c.out_x1);
    get("out_x2", c.out_x2);
    get("assignment", c.assignment);
    get("asg_intercept", c.asg_intercept);
    get("asg_x1", c.asg_x1);
    get("asg_x2", c.asg_x2);
    get("asg_y_lag", c.asg_y_lag);
    get("asg_z_lag", c.asg_z_lag);
    get("asg_noise_sd", c.asg_noise_sd);
    get("unit_intercept", c.unit_intercept);
    get("n_anchors", c.n_anchors);
    get("gp_range", c.gp_range);
    get("gp_sill", c.gp_sill);
    get("gp_nugget", c.gp_nugget);
    get("alpha_scale", c.alpha_scale);
    get("effect_amplitude", c.effect.amplitude);
    get("effect_range", c.effect.range);
    get("effect_max_radius", c.effect.max_radius);
    get("lag_discount", c.lag_discount);
    get("heterogeneous", c.heterogeneous);
    get("confounded", c.confounded);
    get("confounding_strength", c.confounding_strength);
    get("rollout_period", c.rollout_period);
    get("staggered", c.staggered);
    get("y_bound", c.y_bound);
    get("seed", c.seed);
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Kriged unit-effect surface.
// ---------------------------------------------------------------------------

Eigen::VectorXd krige_grid(int rows, int cols, const std::vector<int>& anchor_cells,
                           const Eigen::VectorXd& anchor_values, double range, double sill,
                           double nugget) {
    const int n = rows * cols;
    const int m = static_cast<int>(anchor_cells.size());
    if (m < 3) throw ConfigError("kriging needs at least 3 anchors");
    if (anchor_values.size() != m) throw ConfigError("anchor cells/values size mismatch");

    auto cell_xy = [&](int c) {
        return Eigen::Vector2d(static_cast<double>(c % cols), static_cast<double>(c / cols));
    };
    auto kern = [&](double d) { return sill * std::exp(-d / range); };

    // Dual ordinary kriging: solve [K 1; 1' 0] [beta; beta0] = [v; 0]; the
    // prediction k(x)'beta + beta0 interpolates anchors and reproduces
    // constant fields exactly.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m + 1, m + 1);
    for (int a = 0; a < m; ++a) {
        for (int b = 0; b < m; ++b)
            A(a, b) = kern((cell_xy(anchor_cells[a]) - cell_xy(anchor_cells[b])).norm());
        A(a, a) += nugget;
        A(a, m) = 1.0;
        A(m, a) = 1.0;
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
    rhs.head(m) = anchor_values;
    Eigen::VectorXd sol = A.fullPivLu().solve(rhs);

    Eigen::VectorXd field(n);
    for (int c = 0; c < n; ++c) {
        double acc = sol(m);
        for (int a = 0; a < m; ++a)
            acc += sol(a) * kern((cell_xy(c) - cell_xy(anchor_cells[a])).norm());
        field(c) = acc;
    }
    return field;
}

Eigen::VectorXd gp_surface(int rows, int cols, int n_anchors, double range, double sill,
                           double nugget, std::uint64_t seed) {
    if (n_anchors < 3) throw ConfigError("kriging needs at least 3 anchors");
    const int n = rows * cols;
    if (n_anchors > n) throw ConfigError("more anchors than grid cells");
    Rng rng(seed);
    std::vector<int> anchors;
    std::vector<char> used(n, 0);
    while (static_cast<int>(anchors.size()) < n_anchors) {
        int c = rng.uniform_int(n);
        if (used[c]) continue;
        used[c] = 1;
        anchors.push_back(c);
    }
    Eigen::VectorXd values(n_anchors);
    for (int k = 0; k < n_anchors; ++k) values(k) = rng.normal();
    return krige_grid(rows, cols, anchors, values, range, sill, nugget);
}

SimSurface make_surface(const SimConfig& cfg) {
    cfg.validate();
    SimSurface s;
    const int n = cfg.rows * cfg.cols;
    s.coords.resize(n, 2);
    for (int c = 0; c < n; ++c) {
        s.coords(c, 0) = static_cast<double>(c % cfg.cols);
        s.coords(c, 1) = static_cast<double>(c / cfg.cols);
    }
    s.D = distance_matrix(s.coords);
    s.alpha = cfg.alpha_scale * gp_surface(cfg.rows, cfg.cols, cfg.n_anchors, cfg.gp_range,
                                           cfg.gp_sill, cfg.gp_nugget,
                                           split_seed(cfg.seed, 0xa1fa));
    s.scale.resize(n);
    for (int i = 0; i < n; ++i)
        s.scale(i) = cfg.heterogeneous ? 1.0 + sigmoid(s.alpha(i)) : 1.0;
    s.effectw.resize(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) s.effectw(i, j) = cfg.effect(s.D.dist(i, j));
    return s;
}

Eigen::MatrixXd received_effects(const SimSurface& surface, const SimConfig& cfg,
                                 const Eigen::MatrixXi& z) {
    const int N = static_cast<int>(surface.alpha.size());
    const int T = static_cast<int>(z.cols());
    Eigen::MatrixXd e(N, T);
    Eigen::VectorXd prev = Eigen::VectorXd::Zero(N);
    for (int t = 0; t < T; ++t) {
        Eigen::VectorXd c =
            surface.scale.array() * (surface.effectw * z.col(t).cast<double>()).array();
        prev = c + cfg.lag_discount * prev;
        e.col(t) = prev;
    }
    return e;
}

// ---------------------------------------------------------------------------
// Forward simulation.
// ---------------------------------------------------------------------------

SimTruth draw_panel(const SimSurface& surface, const SimConfig& cfg, std::uint64_t draw_seed) {
    const int N = static_cast<int>(surface.alpha.size());
    const int T = cfg.n_periods;
    Rng rng(draw_seed);

    Eigen::VectorXd xi(T);
    for (int t = 0; t < T; ++t) xi(t) = rng.normal();
    Eigen::MatrixXd x1(N, T), x2(N, T), eps(N, T);
    for (int t = 0; t < T; ++t)
        for (int i = 0; i < N; ++i) {
            x1(i, t) = rng.normal();
            x2(i, t) = surface.alpha(i) + rng.normal();
            eps(i, t) = rng.normal();
        }

    SimTruth out;
    out.cfg = cfg;
    out.assign_prob = Eigen::MatrixXd::Zero(N, T);
    out.assign_lin = Eigen::MatrixXd::Constant(N, T, std::nan(""));
    out.received = Eigen::MatrixXd::Zero(N, T);
    out.cohort.assign(N, 0);

    const bool unit_design = cfg.assignment == "unit_bernoulli";
    if (unit_design) {
        out.unit_prob.resize(N);
        for (int i = 0; i < N; ++i)
            out.unit_prob(i) = sigmoid(cfg.unit_intercept +
                                       (cfg.confounded ? cfg.confounding_strength * surface.alpha(i)
                                                       : 0.0));
    }

    Eigen::MatrixXi z = Eigen::MatrixXi::Zero(N, T);
    Eigen::MatrixXd y(N, T);
    Eigen::VectorXd e_prev = Eigen::VectorXd::Zero(N);
    for (int t = 0; t < T; ++t) {
        for (int i = 0; i < N; ++i) {
            double p;
            if (t + 1 < cfg.rollout_period) {
                p = 0.0;
            } else if (cfg.staggered && t > 0 && z(i, t - 1) == 1) {
                p = 1.0;
            } else if (unit_design) {
                p = (t + 1 == cfg.rollout_period) ? out.unit_prob(i) : 0.0;
            } else {
                double lin = cfg.asg_intercept + cfg.asg_x1 * x1(i, t) + cfg.asg_x2 * x2(i, t) +
                             cfg.asg_y_lag * (t > 0 ? y(i, t - 1) : 0.0) +
                             cfg.asg_z_lag * (t > 0 ? z(i, t - 1) : 0);
                if (cfg.confounded) lin += cfg.confounding_strength * surface.alpha(i);
                out.assign_lin(i, t) = lin;
                if (cfg.asg_noise_sd > 0) lin += cfg.asg_noise_sd * rng.normal();
                p = sigmoid(lin);
            }
            out.assign_prob(i, t) = p;
            int zi;
            if (p <= 0.0)
                zi = 0;
            else if (p >= 1.0)
                zi = 1;
            else
                zi = rng.uniform() < p ? 1 : 0;
            z(i, t) = zi;
            if (zi == 1 && out.cohort[i] == 0) out.cohort[i] = t + 1;
        }
        Eigen::VectorXd contemporaneous =
            surface.scale.array() * (surface.effectw * z.col(t).cast<double>()).array();
        Eigen::VectorXd e_t = contemporaneous + cfg.lag_discount * e_prev;
        out.received.col(t) = e_t;
        for (int i = 0; i < N; ++i) {
            double y0 = cfg.mu + cfg.out_x1 * x1(i, t) + cfg.out_x2 * x2(i, t) +
                        surface.alpha(i) + xi(t) + eps(i, t);
            y(i, t) = y0 + e_t(i);
            if (std::abs(y(i, t)) > cfg.y_bound) ++out.n_bound_violations;
        }
        e_prev = e_t;
    }

    auto& panel = out.panel;
    panel.n_units = N;
    panel.n_periods = T;
    panel.outcomes = y;
    panel.treatments = z;
    panel.covariate_names = {"x1", "x2"};
    panel.covariates = {x1, x2};
    panel.coords = surface.coords;
    panel.unit_ids.resize(N);
    for (int i = 0; i < N; ++i) panel.unit_ids[i] = std::to_string(i + 1);
    panel.period_ids.resize(T);
    for (int t = 0; t < T; ++t) panel.period_ids[t] = std::to_string(t + 1);
    return out;
}

SimTruth simulate_panel(const SimConfig& cfg) {
    SimSurface surface = make_surface(cfg);
    return draw_panel(surface, cfg, split_seed(cfg.seed, 0xd0a));
}

// ---------------------------------------------------------------------------
// Ground-truth EATE oracle.
// ---------------------------------------------------------------------------

TrueEffectCurve true_eate_mc(const SimConfig& cfg, const HistorySpec& h,
                             const std::vector<double>& d_grid, int t, int n_reps,
                             std::uint64_t seed, std::optional<double> bandwidth,
                             bool parallel) {
    if (n_reps < 1) throw ConfigError("truth oracle needs n_reps >= 1");
    if (t < h.end || t > cfg.n_periods) throw ConfigError("truth period outside [h.end, T]");
    SimSurface surface = make_surface(cfg);
    const int N = static_cast<int>(surface.alpha.size());
    double bw = bandwidth.value_or(default_bandwidth(surface.D));
    std::vector<SpilloverMapping> maps;
    maps.reserve(d_grid.size());
    for (double d : d_grid) maps.push_back(circle_mean_weights(surface.D, d, bw));
    const int K = static_cast<int>(d_grid.size());

    // Per-rep curves into slots; serial reduction.
    Eigen::MatrixXd rep_curves(n_reps, K);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (parallel)
#endif
    for (int r = 0; r < n_reps; ++r) {
        SimTruth draw = draw_panel(surface, cfg, split_seed(seed, r));
        (void)draw;  // others' draws are held fixed; the additive effect model
                     // makes the forced differences free of them
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(K);
        Eigen::VectorXi cnt = Eigen::VectorXi::Zero(K);
        Eigen::VectorXd delta(N);
        for (int i = 0; i < N; ++i) {
            // Counterfactual outcome difference at period t from switching
            // unit i's window history from reference to target, others fixed:
            // the received-effect recursion applied to the history change.
            delta.setZero();
            Eigen::VectorXd de = Eigen::VectorXd::Zero(N);
            for (int per = h.start; per <= t; ++per) {
                double dz = 0.0;
                if (per <= h.end) dz = h.target[per - h.start] - h.reference[per - h.start];
                de = cfg.lag_discount * de;
                if (dz != 0.0)
                    de += dz * (surface.scale.array() * surface.effectw.col(i).array()).matrix();
            }
            delta = de;
            for (int k = 0; k < K; ++k) {
                const auto& m = maps[k];
                if (!m.supported[i]) continue;
                double mu = 0;
                for (size_t q = 0; q < m.indices[i].size(); ++q)
                    mu += m.weights[i][q] * delta(m.indices[i][q]);
                acc(k) += mu;
                cnt(k) += 1;
            }
        }
        for (int k = 0; k < K; ++k) rep_curves(r, k) = cnt(k) > 0 ? acc(k) / cnt(k) : std::nan("");
    }

    TrueEffectCurve curve;
    curve.d_grid = d_grid;
    curve.n_reps = n_reps;
    curve.history = h.label();
    curve.period = t;
    curve.eate.resize(K);
    curve.mc_se.resize(K);
    curve.n_supported.resize(K);
    for (int k = 0; k < K; ++k) {
        curve.eate(k) = rep_curves.col(k).mean();
        double var = (rep_curves.col(k).array() - curve.eate(k)).square().sum() /
                     std::max(n_reps - 1, 1);
        curve.mc_se(k) = std::sqrt(var / n_reps);
        curve.n_supported[k] = maps[k].n_supported();
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Replication driver.
// ---------------------------------------------------------------------------

namespace {

struct RepOutput {
    Eigen::VectorXd tau, lo, hi;  // per cell
};

RepOutput run_one_rep(const SimSurface& surface, const SimConfig& cfg, const HistorySpec& h,
                      const std::vector<SpilloverMapping>& maps, const std::vector<int>& t_list,
                      const EstimatorSpec& spec, std::uint64_t rep_seed) {
    const int n_cells = static_cast<int>(maps.size() * t_list.size());
    RepOutput out;
    out.tau = Eigen::VectorXd::Constant(n_cells, std::nan(""));
    out.lo = Eigen::VectorXd::Constant(n_cells, std::nan(""));
    out.hi = Eigen::VectorXd::Constant(n_cells, std::nan(""));

    SimTruth draw = draw_panel(surface, cfg, rep_seed);
    const PanelDataset& panel = draw.panel;

    if (spec.kind == EstimatorKind::did) {
        int pre = cfg.rollout_period - 1;
        for (size_t di = 0; di < maps.size(); ++di)
            for (size_t ti = 0; ti < t_list.size(); ++ti) {
                int cell = static_cast<int>(di * t_list.size() + ti);
                try {
                    out.tau(cell) = did_estimate(panel, maps[di], t_list[ti], pre).tau;
                } catch (const Error&) {
                }
            }
        return out;
    }

    PropensityOptions popts;
    popts.coord_poly_degree = spec.coord_poly_degree;
    popts.period_dummies = spec.period_dummies;
    popts.clip_lo = spec.clip_lo;
    popts.clip_hi = spec.clip_hi;
    PropensityFit fit = estimate_propensities(panel, popts);

    DiffusionModel model;
    if (spec.kind == EstimatorKind::augmented) {
        std::vector<double> grid = spec.model_d_grid;
        if (grid.empty())
            for (const auto& m : maps) grid.push_back(m.d);
        model = fit_diffusion_model(panel, surface.D, grid, default_bandwidth(surface.D),
                                    std::max(2, cfg.rollout_period));
    }

    for (size_t ti = 0; ti < t_list.size(); ++ti) {
        int t = t_list[ti];
        HistorySpec ht = t < h.end ? h.truncated(t) : h;
        HistoryPropensity w = history_propensity(fit.table, panel, ht);
        for (size_t di = 0; di < maps.size(); ++di) {
            int cell = static_cast<int>(di * t_list.size() + ti);
            try {
                EffectEstimate e;
                switch (spec.kind) {
                    case EstimatorKind::horvitz_thompson:
                        e = eate_ht(panel, maps[di], ht, t, w);
                        break;
                    case EstimatorKind::augmented:
                        e = eate_augmented(panel, maps[di], ht, t, w, model);
                        break;
                    default:
                        e = eate_hajek(panel, maps[di], ht, t, w);
                }
                out.tau(cell) = e.tau;
                if (spec.variance != EstimatorSpec::Var::none &&
                    spec.kind == EstimatorKind::hajek) {
                    WlsRepresentation rep = hajek_wls(panel, maps[di], ht, t, w);
                    double cutoff =
                        spec.variance == EstimatorSpec::Var::hc0 ? 0.0 : spec.cutoff;
                    VarianceEstimate v =
                        spatial_hac(rep, surface.D, cutoff, spec.kernel, false);
                    auto [lo, hi] = confidence_interval(e.tau, v.value, spec.ci_level);
                    out.lo(cell) = lo;
                    out.hi(cell) = hi;
                }
            } catch (const Error&) {
            }
        }
    }
    return out;
}

}  // namespace

ReplicationTable replicate(const SimConfig& cfg, const HistorySpec& h,
                           const std::vector<double>& d_grid, const std::vector<int>& t_list,
                           const EstimatorSpec& spec, int n_reps, std::uint64_t seed,
                           int truth_reps, bool parallel) {
    if (n_reps < 2) throw ConfigError("replication needs n_reps >= 2");
    if (spec.variance == EstimatorSpec::Var::twoway)
        throw ConfigError("two-way variance applies to pooled estimates; use the CLI estimate path");
    SimSurface surface = make_surface(cfg);
    double bw = default_bandwidth(surface.D);
    std::vector<SpilloverMapping> maps;
    for (double d : d_grid) maps.push_back(circle_mean_weights(surface.D, d, bw));

    ReplicationTable table;
    table.d_grid = d_grid;
    table.t_list = t_list;
    const int n_cells = static_cast<int>(d_grid.size() * t_list.size());
    table.draws = Eigen::MatrixXd::Constant(n_reps, n_cells, std::nan(""));
    table.ci_lo = Eigen::MatrixXd::Constant(n_reps, n_cells, std::nan(""));
    table.ci_hi = Eigen::MatrixXd::Constant(n_reps, n_cells, std::nan(""));

    const std::uint64_t rep_stream = split_seed(seed, 0x5e9);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (parallel)
#endif
    for (int r = 0; r < n_reps; ++r) {
        RepOutput o = run_one_rep(surface, cfg, h, maps, t_list, spec, split_seed(rep_stream, r));
        table.draws.row(r) = o.tau.transpose();
        table.ci_lo.row(r) = o.lo.transpose();
        table.ci_hi.row(r) = o.hi.transpose();
    }

    for (size_t ti = 0; ti < t_list.size(); ++ti) {
        TrueEffectCurve truth = true_eate_mc(cfg, t_list[ti] < h.end ? h.truncated(t_list[ti]) : h,
                                             d_grid, t_list[ti], truth_reps,
                                             split_seed(seed, 0x7457));
        for (size_t di = 0; di < d_grid.size(); ++di) {
            ReplicateCell cell;
            cell.d = d_grid[di];
            cell.t = t_list[ti];
            cell.truth = truth.eate(static_cast<int>(di));
            cell.truth_se = truth.mc_se(static_cast<int>(di));
            int idx = table.cell_index(static_cast<int>(di), static_cast<int>(ti));
            double sum = 0, sum2 = 0;
            int n_ok = 0, covered = 0, with_ci = 0;
            for (int r = 0; r < n_reps; ++r) {
                double v = table.draws(r, idx);
                if (std::isnan(v)) continue;
                ++n_ok;
                sum += v;
                sum2 += v * v;
                if (!std::isnan(table.ci_lo(r, idx))) {
                    ++with_ci;
                    if (table.ci_lo(r, idx) <= cell.truth && cell.truth <= table.ci_hi(r, idx))
                        ++covered;
                }
            }
            cell.n_ok = n_ok;
            if (n_ok > 0) {
                cell.mean_est = sum / n_ok;
                double var = n_ok > 1 ? (sum2 - sum * sum / n_ok) / (n_ok - 1) : 0.0;
                cell.sd_est = std::sqrt(std::max(var, 0.0));
                cell.mc_se = cell.sd_est / std::sqrt(static_cast<double>(n_ok));
                cell.bias = cell.mean_est - cell.truth;
            }
            if (with_ci > 0) cell.coverage = static_cast<double>(covered) / with_ci;
            table.cells.push_back(cell);
        }
    }
    // reorder cells d-major to match cell_index
    std::vector<ReplicateCell> ordered(table.cells.size());
    for (size_t ti = 0; ti < t_list.size(); ++ti)
        for (size_t di = 0; di < d_grid.size(); ++di)
            ordered[table.cell_index(static_cast<int>(di), static_cast<int>(ti))] =
                table.cells[ti * d_grid.size() + di];
    table.cells = ordered;
    return table;
}

// ---------------------------------------------------------------------------
// DID comparison with the bias oracle.
// ---------------------------------------------------------------------------

std::vector<DidCompareRow> did_compare(const SimConfig& cfg, const std::vector<double>& d_grid,
                                       int n_reps, int oracle_reps, std::uint64_t seed,
                                       bool parallel) {
    cfg.validate();
    if (n_reps < 2 || oracle_reps < 2) throw ConfigError("did_compare needs at least 2 reps");
    SimSurface surface = make_surface(cfg);
    const int N = static_cast<int>(surface.alpha.size());
    double bw = default_bandwidth(surface.D);
    std::vector<SpilloverMapping> maps;
    for (double d : d_grid) maps.push_back(circle_mean_weights(surface.D, d, bw));
    const int K = static_cast<int>(d_grid.size());
    const int post = cfg.rollout_period, pre = cfg.rollout_period - 1;

    // Pipeline A: replicated DID estimates.
    Eigen::MatrixXd did_draws = Eigen::MatrixXd::Constant(n_reps, K, std::nan(""));
    const std::uint64_t did_stream = split_seed(seed, 0xd1d);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (parallel)
#endif
    for (int r = 0; r < n_reps; ++r) {
        SimTruth draw = draw_panel(surface, cfg, split_seed(did_stream, r));
        for (int k = 0; k < K; ++k) {
            try {
                did_draws(r, k) = did_estimate(draw.panel, maps[k], post, pre).tau;
            } catch (const Error&) {
            }
        }
    }

    // Pipeline B: forced-history truth at the adoption period.
    HistorySpec h = HistorySpec::staggered(post, post, post);
    TrueEffectCurve truth =
        true_eate_mc(cfg, h, d_grid, post, std::min(oracle_reps, 100), split_seed(seed, 0x7457));

    std::vector<DidCompareRow> rows(K);
    for (int k = 0; k < K; ++k) {
        rows[k].d = d_grid[k];
        rows[k].truth = truth.eate(k);
        double sum = 0, sum2 = 0;
        int n_ok = 0;
        for (int r = 0; r < n_reps; ++r) {
            double v = did_draws(r, k);
            if (std::isnan(v)) continue;
            sum += v;
            sum2 += v * v;
            ++n_ok;
        }
        rows[k].mean_did = n_ok ? sum / n_ok : std::nan("");
        double var = n_ok > 1 ? (sum2 - sum * sum / n_ok) / (n_ok - 1) : 0.0;
        rows[k].se_did = n_ok ? std::sqrt(std::max(var, 0.0) / n_ok) : std::nan("");
    }

    // Pipeline C: closed-form bias oracle, exact per-unit propensities.
    if (cfg.assignment == "unit_bernoulli") {
        // Static own-column correction c_i(d) = mu_i(scale .* f(d_.i); d).
        Eigen::MatrixXd corr(N, K);
        for (int i = 0; i < N; ++i) {
            Eigen::VectorXd col = surface.scale.array() * surface.effectw.col(i).array();
            for (int k = 0; k < K; ++k) {
                const auto& m = maps[k];
                if (!m.supported[i]) {
                    corr(i, k) = std::nan("");
                    continue;
                }
                double mu = 0;
                for (size_t q = 0; q < m.indices[i].size(); ++q)
                    mu += m.weights[i][q] * col(m.indices[i][q]);
                corr(i, k) = mu;
            }
        }
        const int n_batches = 10;
        Eigen::MatrixXd batch_bias = Eigen::MatrixXd::Zero(n_batches, K);
        const std::uint64_t orc_stream = split_seed(seed, 0x09ac);
        std::vector<Eigen::MatrixXd> m0_slots(oracle_reps);
        std::vector<Eigen::VectorXd> z_slots(oracle_reps);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (parallel)
#endif
        for (int r = 0; r < oracle_reps; ++r) {
            SimTruth draw = draw_panel(surface, cfg, split_seed(orc_stream, r));
            Eigen::VectorXd dy =
                draw.panel.outcomes.col(post - 1) - draw.panel.outcomes.col(pre - 1);
            Eigen::MatrixXd m0(N, K);
            for (int k = 0; k < K; ++k) {
                const auto& m = maps[k];
                for (int i = 0; i < N; ++i) {
                    if (!m.supported[i]) {
                        m0(i, k) = std::nan("");
                        continue;
                    }
                    double mu = 0;
                    for (size_t q = 0; q < m.indices[i].size(); ++q)
                        mu += m.weights[i][q] * dy(m.indices[i][q]);
                    m0(i, k) = mu;
                }
            }
            m0_slots[r] = std::move(m0);
            z_slots[r] = draw.panel.treatments.col(post - 1).cast<double>();
        }
        // Batched oracle: per batch, gbar(a) = mean(m0) + (a - mean(z)) * corr.
        int per_batch = oracle_reps / n_batches;
        SimTruth probe = draw_panel(surface, cfg, split_seed(orc_stream, 0));
        const Eigen::VectorXd& p = probe.unit_prob;
        for (int b = 0; b < n_batches; ++b) {
            int lo = b * per_batch, hi = (b == n_batches - 1) ? oracle_reps : lo + per_batch;
            Eigen::MatrixXd m0_mean = Eigen::MatrixXd::Zero(N, K);
            Eigen::VectorXd z_mean = Eigen::VectorXd::Zero(N);
            for (int r = lo; r < hi; ++r) {
                m0_mean += m0_slots[r];
                z_mean += z_slots[r];
            }
            m0_mean /= (hi - lo);
            z_mean /= (hi - lo);
            for (int k = 0; k < K; ++k) {
                std::vector<double> pv, g1v, g0v;
                for (int i = 0; i < N; ++i) {
                    if (std::isnan(corr(i, k))) continue;
                    pv.push_back(p(i));
                    g1v.push_back(m0_mean(i, k) + (1.0 - z_mean(i)) * corr(i, k));
                    g0v.push_back(m0_mean(i, k) + (0.0 - z_mean(i)) * corr(i, k));
                }
                Eigen::Map<Eigen::VectorXd> pm(pv.data(), static_cast<long>(pv.size()));
                Eigen::Map<Eigen::VectorXd> g1(g1v.data(), static_cast<long>(g1v.size()));
                Eigen::Map<Eigen::VectorXd> g0(g0v.data(), static_cast<long>(g0v.size()));
                batch_bias(b, k) = did_bias_oracle(pm, g1, g0);
            }
        }
        for (int k = 0; k < K; ++k) {
            rows[k].oracle_bias = batch_bias.col(k).mean();
            double var = (batch_bias.col(k).array() - rows[k].oracle_bias).square().sum() /
                         (n_batches - 1);
            rows[k].oracle_se = std::sqrt(var / n_batches);
        }
    }
    return rows;
}

}  // namespace spillover
