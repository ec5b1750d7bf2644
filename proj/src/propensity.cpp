#include "spillover/propensity.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace spillover {

namespace {

std::vector<std::string> coord_poly_names(int q) {
    std::vector<std::string> names;
    for (int deg = 1; deg <= q; ++deg)
        for (int a = deg; a >= 0; --a) {
            int b = deg - a;
            std::string n;
            if (a > 0) n += "c1" + (a > 1 ? "^" + std::to_string(a) : "");
            if (a > 0 && b > 0) n += "*";
            if (b > 0) n += "c2" + (b > 1 ? "^" + std::to_string(b) : "");
            names.push_back(n);
        }
    return names;
}

void append_coord_poly(const PanelDataset& panel, int i, int q, std::vector<double>& row) {
    double c1 = panel.coords(i, 0), c2 = panel.coords(i, 1);
    for (int deg = 1; deg <= q; ++deg)
        for (int a = deg; a >= 0; --a)
            row.push_back(std::pow(c1, a) * std::pow(c2, deg - a));
}

double covariate_at(const PanelDataset& panel, size_t k, int i, int t) {
    double v = panel.covariates[k](i, t);
    if (std::isnan(v))
        throw InvalidPanel("missing covariate '" + panel.covariate_names[k] +
                           "' at unit " + std::to_string(i) + ", period " + std::to_string(t + 1) +
                           "; impute upstream or drop the column");
    return v;
}

FeatureFrame assemble(const PanelDataset& panel, const std::vector<std::pair<int, int>>& obs,
                      bool lags, int q, bool period_dummies) {
    FeatureFrame f;
    f.obs = obs;
    f.names.push_back("(intercept)");
    if (lags) {
        f.names.push_back("z_lag1");
        f.names.push_back("y_lag1");
    }
    for (const auto& n : panel.covariate_names) f.names.push_back(n);
    for (const auto& n : coord_poly_names(q)) f.names.push_back(n);
    std::vector<int> dummy_periods;
    if (period_dummies) {
        std::vector<char> present(panel.n_periods, 0);
        for (auto [i, t] : obs) present[t] = 1;
        bool first = true;
        for (int t = 0; t < panel.n_periods; ++t)
            if (present[t]) {
                if (first) {  // base level
                    first = false;
                    continue;
                }
                dummy_periods.push_back(t);
                f.names.push_back("period_" + std::to_string(t + 1));
            }
    }
    f.x.resize(static_cast<long>(obs.size()), static_cast<long>(f.names.size()));
    for (size_t r = 0; r < obs.size(); ++r) {
        auto [i, t] = obs[r];
        std::vector<double> row;
        row.reserve(f.names.size());
        row.push_back(1.0);
        if (lags) {
            if (t == 0) throw InvalidPanel("lagged features need t >= 2");
            row.push_back(panel.treatments(i, t - 1));
            row.push_back(panel.outcomes(i, t - 1));
        }
        for (size_t k = 0; k < panel.covariates.size(); ++k)
            row.push_back(covariate_at(panel, k, i, t));
        append_coord_poly(panel, i, q, row);
        for (int dp : dummy_periods) row.push_back(t == dp ? 1.0 : 0.0);
        for (size_t c = 0; c < row.size(); ++c) f.x(static_cast<long>(r), static_cast<long>(c)) = row[c];
    }
    return f;
}

}  // namespace

FeatureFrame build_features(const PanelDataset& panel, int lag_depth, int coord_poly_degree) {
    if (lag_depth != 1) throw Error("only lag depth 1 is supported");
    if (coord_poly_degree < 0) throw Error("coordinate polynomial degree must be >= 0");
    std::vector<std::pair<int, int>> obs;
    for (int i = 0; i < panel.n_units; ++i)
        for (int t = 1; t < panel.n_periods; ++t) obs.emplace_back(i, t);
    return assemble(panel, obs, true, coord_poly_degree, false);
}

FeatureFrame build_period1_features(const PanelDataset& panel, int coord_poly_degree) {
    std::vector<std::pair<int, int>> obs;
    for (int i = 0; i < panel.n_units; ++i) obs.emplace_back(i, 0);
    return assemble(panel, obs, false, coord_poly_degree, false);
}

// ---------------------------------------------------------------------------
// IRLS with a ridge-stabilized Newton step and step halving.
// ---------------------------------------------------------------------------

namespace {

double penalized_nll(const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
                     const Eigen::VectorXd& beta, double ridge) {
    Eigen::VectorXd eta = x * beta;
    double nll = 0;
    for (long r = 0; r < eta.size(); ++r) {
        double e = eta(r);
        // log(1 + exp(e)) - z*e, stable for large |e|
        nll += (e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e))) - z(r) * e;
    }
    return nll + 0.5 * ridge * beta.squaredNorm();
}

}  // namespace

LogisticModel fit_logistic_irls(const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
                                const LogisticOptions& opts,
                                const std::vector<std::string>& names) {
    const long n = x.rows(), p = x.cols();
    if (z.size() != n) throw Error("logistic fit: response size mismatch");
    double zsum = z.sum();
    if (zsum <= 0 || zsum >= static_cast<double>(n))
        throw DegenerateResponse("response is constant; cannot fit a logistic model");
    if (!x.allFinite()) throw Error("logistic fit: non-finite design entries");

    LogisticModel model;
    model.feature_names = names;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    double nll = penalized_nll(x, z, beta, opts.ridge);

    for (int iter = 1; iter <= opts.max_iter; ++iter) {
        Eigen::VectorXd eta = (x * beta).cwiseMax(-35.0).cwiseMin(35.0);
        Eigen::VectorXd prob = eta.unaryExpr([](double e) { return sigmoid(e); });
        Eigen::VectorXd grad = x.transpose() * (z - prob) - opts.ridge * beta;
        model.grad_norm = grad.lpNorm<Eigen::Infinity>();
        model.iterations = iter - 1;
        if (model.grad_norm <= opts.tol) {
            // Vanishing score at huge coefficients is separation, not a fit.
            if (opts.ridge <= 0 && beta.lpNorm<Eigen::Infinity>() > 30)
                throw SeparationError(
                    "score vanished at diverging coefficients; data may be separated, "
                    "set ridge > 0");
            model.converged = true;
            break;
        }
        Eigen::VectorXd w = (prob.array() * (1.0 - prob.array())).cwiseMax(1e-12);
        Eigen::MatrixXd hess = x.transpose() * w.asDiagonal() * x;
        hess.diagonal().array() += opts.ridge;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
        if (ldlt.info() != Eigen::Success) {
            if (opts.ridge <= 0)
                throw SeparationError(
                    "singular information matrix; data may be separated, set ridge > 0");
            throw Error("logistic fit: Hessian factorization failed");
        }
        Eigen::VectorXd step = ldlt.solve(grad);
        double scale = 1.0;
        Eigen::VectorXd cand;
        double cand_nll = 0;
        for (int h = 0; h < 40; ++h) {
            cand = beta + scale * step;
            cand_nll = penalized_nll(x, z, cand, opts.ridge);
            if (cand_nll <= nll + 1e-14 * std::abs(nll)) break;
            scale *= 0.5;
        }
        beta = cand;
        nll = cand_nll;
        if (opts.ridge <= 0 && beta.lpNorm<Eigen::Infinity>() > 1e2)
            throw SeparationError("coefficients diverging; data may be separated, set ridge > 0");
    }
    if (!model.converged) {
        if (opts.ridge <= 0 && beta.lpNorm<Eigen::Infinity>() > 30)
            throw SeparationError("IRLS did not converge and coefficients are large; "
                                  "data may be separated, set ridge > 0");
        throw ConvergenceError("IRLS did not reach tolerance " + std::to_string(opts.tol) +
                               " in " + std::to_string(opts.max_iter) + " iterations");
    }
    model.beta = beta;
    if (model.feature_names.empty())
        for (long j = 0; j < p; ++j) model.feature_names.push_back("x" + std::to_string(j));
    return model;
}

LogisticModel fit_logistic_irls(const FeatureFrame& frame, const Eigen::VectorXd& z,
                                const LogisticOptions& opts) {
    return fit_logistic_irls(frame.x, z, opts, frame.names);
}

double LogisticModel::predict_one(const Eigen::RowVectorXd& row) const {
    return sigmoid(row * beta);
}

Eigen::VectorXd LogisticModel::predict(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd eta = x * beta;
    return eta.unaryExpr([](double e) { return sigmoid(e); });
}

std::string LogisticModel::to_json() const {
    nlohmann::json j;
    nlohmann::json coefs = nlohmann::json::object();
    for (long k = 0; k < beta.size(); ++k)
        coefs[feature_names.size() > static_cast<size_t>(k) ? feature_names[k]
                                                            : "x" + std::to_string(k)] = beta(k);
    j["coefficients"] = coefs;
    j["iterations"] = iterations;
    j["grad_norm"] = grad_norm;
    j["converged"] = converged;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Propensity pipeline.
// ---------------------------------------------------------------------------

bool PropensityModelBundle::is_structural(const PanelDataset&, int, int t, int z_prev) const {
    if (rollout_period > 0 && t + 1 < rollout_period) return true;   // pre-rollout zero
    if (staggered && t > 0 && z_prev == 1) return true;              // absorbed
    return false;
}

double PropensityModelBundle::prob(const PanelDataset& panel, int i, int t, int z_prev,
                                   double y_prev) const {
    if (rollout_period > 0 && t + 1 < rollout_period) return 0.0;
    if (staggered && t > 0 && z_prev == 1) return 1.0;
    return std::clamp(raw_prob(panel, i, t, z_prev, y_prev), clip_lo, clip_hi);
}

double PropensityModelBundle::raw_prob(const PanelDataset& panel, int i, int t, int z_prev,
                                       double y_prev) const {
    std::vector<double> row;
    row.push_back(1.0);
    const LogisticModel* m;
    if (t == 0) {
        if (!has_period1) throw Error("no period-1 propensity model available");
        m = &period1;
    } else {
        row.push_back(z_prev);
        row.push_back(y_prev);
        m = &pooled;
    }
    for (size_t k = 0; k < panel.covariates.size(); ++k)
        row.push_back(panel.covariates[k](i, t));
    append_coord_poly(panel, i, coord_poly_degree, row);
    if (period_dummies) {
        // dummy layout must match the fitted frame; recover from names
        for (size_t c = row.size(); c < m->feature_names.size(); ++c) {
            const std::string& n = m->feature_names[c];
            int per = std::stoi(n.substr(n.find('_') + 1));
            row.push_back(per == t + 1 ? 1.0 : 0.0);
        }
    }
    Eigen::RowVectorXd r(static_cast<long>(row.size()));
    for (size_t c = 0; c < row.size(); ++c) r(static_cast<long>(c)) = row[c];
    return m->predict_one(r);
}

PropensityFit estimate_propensities(const PanelDataset& panel, const PropensityOptions& opts) {
    if (!(opts.clip_lo > 0 && opts.clip_lo < opts.clip_hi && opts.clip_hi < 1))
        throw Error("clip bounds must satisfy 0 < lo < hi < 1");
    PropensityFit fit;
    auto& b = fit.bundle;
    b.staggered = (opts.staggered == PropensityOptions::Staggered::on) ||
                  (opts.staggered == PropensityOptions::Staggered::detect && panel.is_absorbing());
    b.rollout_period = b.staggered ? panel.first_treated_period() : 0;
    b.coord_poly_degree = opts.coord_poly_degree;
    b.period_dummies = opts.period_dummies;
    b.clip_lo = opts.clip_lo;
    b.clip_hi = opts.clip_hi;

    // At-risk rows enter the fit; structural cells are excluded.
    std::vector<std::pair<int, int>> pooled_obs, p1_obs;
    for (int i = 0; i < panel.n_units; ++i)
        for (int t = 0; t < panel.n_periods; ++t) {
            int z_prev = t > 0 ? panel.treatments(i, t - 1) : 0;
            if (b.is_structural(panel, i, t, z_prev)) continue;
            (t == 0 ? p1_obs : pooled_obs).emplace_back(i, t);
        }
    if (pooled_obs.empty() && p1_obs.empty())
        throw DegenerateResponse("every cell is structurally deterministic; nothing to fit");

    auto response = [&](const std::vector<std::pair<int, int>>& obs) {
        Eigen::VectorXd z(static_cast<long>(obs.size()));
        for (size_t r = 0; r < obs.size(); ++r)
            z(static_cast<long>(r)) = panel.treatments(obs[r].first, obs[r].second);
        return z;
    };
    if (!pooled_obs.empty()) {
        FeatureFrame frame =
            assemble(panel, pooled_obs, true, opts.coord_poly_degree, opts.period_dummies);
        b.pooled = fit_logistic_irls(frame, response(pooled_obs), opts.fit);
    }
    if (!p1_obs.empty()) {
        FeatureFrame frame = assemble(panel, p1_obs, false, opts.coord_poly_degree, false);
        b.period1 = fit_logistic_irls(frame, response(p1_obs), opts.fit);
        b.has_period1 = true;
    }

    auto& t = fit.table;
    t.clip_lo = opts.clip_lo;
    t.clip_hi = opts.clip_hi;
    t.p.resize(panel.n_units, panel.n_periods);
    t.p_raw.resize(panel.n_units, panel.n_periods);
    t.structural = Eigen::MatrixXi::Zero(panel.n_units, panel.n_periods);
    for (int i = 0; i < panel.n_units; ++i)
        for (int per = 0; per < panel.n_periods; ++per) {
            int z_prev = per > 0 ? panel.treatments(i, per - 1) : 0;
            double y_prev = per > 0 ? panel.outcomes(i, per - 1) : 0.0;
            if (b.is_structural(panel, i, per, z_prev)) {
                t.structural(i, per) = 1;
                double v = (b.staggered && per > 0 && z_prev == 1) ? 1.0 : 0.0;
                t.p(i, per) = v;
                t.p_raw(i, per) = v;
            } else {
                double raw = b.raw_prob(panel, i, per, z_prev, y_prev);
                t.p_raw(i, per) = raw;
                t.p(i, per) = std::clamp(raw, opts.clip_lo, opts.clip_hi);
                if (t.p(i, per) != raw) ++t.n_clipped;
            }
        }
    return fit;
}

PropensityTable propensity_table_from_matrix(const PanelDataset& panel, const Eigen::MatrixXd& p,
                                             double clip_lo, double clip_hi) {
    if (p.rows() != panel.n_units || p.cols() != panel.n_periods)
        throw Error("probability matrix must be N x T");
    if (!p.allFinite() || (p.array() < 0).any() || (p.array() > 1).any())
        throw Error("probabilities must lie in [0,1]");
    PropensityTable t;
    t.clip_lo = clip_lo;
    t.clip_hi = clip_hi;
    t.p_raw = p;
    t.structural = Eigen::MatrixXi::Zero(panel.n_units, panel.n_periods);
    t.p = p;
    for (int i = 0; i < panel.n_units; ++i)
        for (int per = 0; per < panel.n_periods; ++per) {
            double v = p(i, per);
            if (v == 0.0 || v == 1.0) {
                t.structural(i, per) = 1;  // treat exact 0/1 as design zeros/ones
            } else {
                t.p(i, per) = std::clamp(v, clip_lo, clip_hi);
                if (t.p(i, per) != v) ++t.n_clipped;
            }
        }
    return t;
}

HistoryPropensity history_propensity(const PropensityTable& table, const PanelDataset& panel,
                                     const HistorySpec& h) {
    if (h.end > panel.n_periods) throw InvalidHistory("history window exceeds panel periods");
    HistoryPropensity out;
    out.w_target = Eigen::VectorXd::Ones(panel.n_units);
    out.w_reference = Eigen::VectorXd::Ones(panel.n_units);
    for (int i = 0; i < panel.n_units; ++i)
        for (int per = h.start; per <= h.end; ++per) {
            double p = table.p(i, per - 1);
            int zt = h.target[per - h.start], zr = h.reference[per - h.start];
            out.w_target(i) *= zt == 1 ? p : 1.0 - p;
            out.w_reference(i) *= zr == 1 ? p : 1.0 - p;
        }
    return out;
}

PositivityReport positivity_check(PropensityTable& table, const PanelDataset& panel,
                                  double clip_lo, double clip_hi,
                                  const std::vector<HistorySpec>& histories) {
    if (!(clip_lo > 0 && clip_lo < clip_hi && clip_hi < 1))
        throw Error("clip bounds must satisfy 0 < lo < hi < 1");
    PositivityReport rep;
    table.clip_lo = clip_lo;
    table.clip_hi = clip_hi;
    table.n_clipped = 0;
    for (int i = 0; i < table.p.rows(); ++i)
        for (int t = 0; t < table.p.cols(); ++t) {
            if (table.structural(i, t)) {
                table.p(i, t) = table.p_raw(i, t);
                continue;
            }
            double v = std::clamp(table.p_raw(i, t), clip_lo, clip_hi);
            table.p(i, t) = v;
            if (v != table.p_raw(i, t)) ++table.n_clipped;
            rep.min_p = std::min(rep.min_p, v);
            rep.max_p = std::max(rep.max_p, v);
        }
    rep.n_clipped = table.n_clipped;
    for (const auto& h : histories) {
        HistoryPropensity w = history_propensity(table, panel, h);
        for (int i = 0; i < w.w_target.size(); ++i) {
            for (double v : {w.w_target(i), w.w_reference(i)}) {
                rep.min_w = std::min(rep.min_w, v);
                rep.max_w = std::max(rep.max_w, v);
            }
        }
    }
    return rep;
}

}  // namespace spillover
