// Batch front-end: simulate / truth / estimate / replicate / frt / did-compare.
//
// Every run resolves a single JSON config (file values overridden by flags),
// writes its outputs as CSV plus a manifest.json capturing the resolved
// config, and exits 0 on success, 1 on configuration errors, 2 on module
// errors (no support, rank deficiency, ...).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "spillover/csv.hpp"
#include "spillover/estimators.hpp"
#include "spillover/panel.hpp"
#include "spillover/propensity.hpp"
#include "spillover/simulation.hpp"
#include "spillover/svg.hpp"
#include "spillover/variance.hpp"

using nlohmann::json;
using namespace spillover;

namespace {

constexpr const char* kVersion = "0.1.0";

struct RunConfig {
    std::string command;
    json sim;                       // SimConfig fields (optional)
    std::string input;              // panel CSV (estimate / frt)
    std::string distances;          // optional precomputed N x N distances
    std::string prob_column;        // optional externally estimated p column
    std::vector<double> d_grid = {0, 1, 2, 3, 4, 5, 6, 7, 8};
    std::optional<double> bandwidth;
    std::string history;            // "s-e:target:reference" or "cohort:a:s-e"
    std::vector<int> t_list;
    std::string estimator = "hajek";
    int coord_poly = 0;
    double clip_lo = 0.01, clip_hi = 0.99;
    std::string variance = "none";  // none|hc0|spatial|twoway
    double cutoff = 0.0, time_cutoff = 0.0;
    std::string kernel = "uniform";
    double level = 0.95;
    int reps = 1000;
    int truth_reps = 200;
    int frt_draws = 999;
    bool dump_draws = false;
    std::uint64_t seed = 20240501;
    std::string out = "out";
    bool svg = false;

    json to_json() const {
        json j;
        j["command"] = command;
        if (!sim.is_null()) j["sim"] = sim;
        j["input"] = input;
        j["distances"] = distances;
        j["prob_column"] = prob_column;
        j["d_grid"] = d_grid;
        if (bandwidth) j["bandwidth"] = *bandwidth;
        j["history"] = history;
        j["t"] = t_list;
        j["estimator"] = estimator;
        j["coord_poly"] = coord_poly;
        j["clip"] = {clip_lo, clip_hi};
        j["variance"] = variance;
        j["cutoff"] = cutoff;
        j["time_cutoff"] = time_cutoff;
        j["kernel"] = kernel;
        j["level"] = level;
        j["reps"] = reps;
        j["truth_reps"] = truth_reps;
        j["frt_draws"] = frt_draws;
        j["dump_draws"] = dump_draws;
        j["seed"] = seed;
        j["out"] = out;
        j["svg"] = svg;
        return j;
    }

    static RunConfig from_json(const json& j) {
        RunConfig c;
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key) && !j.at(key).is_null())
                field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("command", c.command);
        if (j.contains("sim")) c.sim = j.at("sim");
        get("input", c.input);
        get("distances", c.distances);
        get("prob_column", c.prob_column);
        get("d_grid", c.d_grid);
        if (j.contains("bandwidth") && !j.at("bandwidth").is_null())
            c.bandwidth = j.at("bandwidth").get<double>();
        get("history", c.history);
        get("t", c.t_list);
        get("estimator", c.estimator);
        get("coord_poly", c.coord_poly);
        if (j.contains("clip")) {
            auto v = j.at("clip").get<std::vector<double>>();
            if (v.size() != 2) throw ConfigError("config.clip must have two entries");
            c.clip_lo = v[0];
            c.clip_hi = v[1];
        }
        get("variance", c.variance);
        get("cutoff", c.cutoff);
        get("time_cutoff", c.time_cutoff);
        get("kernel", c.kernel);
        get("level", c.level);
        get("reps", c.reps);
        get("truth_reps", c.truth_reps);
        get("frt_draws", c.frt_draws);
        get("dump_draws", c.dump_draws);
        get("seed", c.seed);
        get("out", c.out);
        get("svg", c.svg);
        return c;
    }
};

// ---------------------------------------------------------------------------
// Flag syntax helpers.
// ---------------------------------------------------------------------------

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<double> parse_d_grid(const std::string& text) {
    std::vector<double> grid;
    for (const auto& part : split(text, ',')) {
        auto range = split(part, ':');
        if (range.size() >= 2) {
            double lo = csv::parse_double(range[0], "--d-grid");
            double hi = csv::parse_double(range[1], "--d-grid");
            double step = range.size() > 2 ? csv::parse_double(range[2], "--d-grid") : 1.0;
            if (step <= 0) throw ConfigError("--d-grid step must be positive");
            for (double v = lo; v <= hi + 1e-12; v += step) grid.push_back(v);
        } else {
            grid.push_back(csv::parse_double(part, "--d-grid"));
        }
    }
    return grid;
}

std::pair<int, int> parse_span(const std::string& text) {
    auto parts = split(text, '-');
    if (parts.size() != 2) throw ConfigError("expected 's-e' in history window: " + text);
    return {std::stoi(parts[0]), std::stoi(parts[1])};
}

HistorySpec parse_history(const std::string& text) {
    auto parts = split(text, ':');
    if (parts.size() == 3 && parts[0] == "cohort") {
        auto [s, e] = parse_span(parts[2]);
        return HistorySpec::staggered(std::stoi(parts[1]), s, e);
    }
    if (parts.size() != 3)
        throw ConfigError("history format is 's-e:target:reference' or 'cohort:a:s-e'");
    auto [s, e] = parse_span(parts[0]);
    auto bits = [&](const std::string& b) {
        std::vector<int> v;
        for (char ch : b) {
            if (ch != '0' && ch != '1') throw ConfigError("history bits must be 0/1");
            v.push_back(ch - '0');
        }
        return v;
    };
    try {
        return HistorySpec(s, e, bits(parts[1]), bits(parts[2]));
    } catch (const InvalidHistory& e) {
        throw ConfigError(std::string("history: ") + e.what());
    }
}

EstimatorKind parse_estimator(const std::string& name) {
    if (name == "ht") return EstimatorKind::horvitz_thompson;
    if (name == "hajek") return EstimatorKind::hajek;
    if (name == "augmented") return EstimatorKind::augmented;
    if (name == "did") return EstimatorKind::did;
    throw ConfigError("unknown estimator '" + name + "' (ht|hajek|augmented|did)");
}

HacKernel parse_kernel(const std::string& name) {
    if (name == "uniform") return HacKernel::uniform;
    if (name == "bartlett") return HacKernel::bartlett;
    throw ConfigError("unknown kernel '" + name + "' (uniform|bartlett)");
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

void write_manifest(const RunConfig& cfg, const std::vector<std::string>& outputs) {
    json m;
    m["version"] = kVersion;
    m["command"] = cfg.command;
    m["seed"] = cfg.seed;
    m["config"] = cfg.to_json();
    m["config_hash"] = fnv1a(cfg.to_json().dump());
    m["outputs"] = outputs;
    std::ofstream out(std::filesystem::path(cfg.out) / "manifest.json", std::ios::binary);
    out << m.dump(2) << "\n";
}

SimConfig sim_config(const RunConfig& cfg) {
    SimConfig sc = cfg.sim.is_null() ? SimConfig{} : SimConfig::from_json_string(cfg.sim.dump());
    sc.seed = cfg.seed;
    return sc;
}

HistorySpec resolve_history(const RunConfig& cfg, int default_rollout, int T) {
    if (!cfg.history.empty()) return parse_history(cfg.history);
    return HistorySpec::staggered(std::min(std::max(default_rollout, 1), T), 1, T);
}

std::vector<int> resolve_t(const RunConfig& cfg, int T) {
    if (!cfg.t_list.empty()) return cfg.t_list;
    return {T};
}

void write_truth_csv(const std::string& path, const RunConfig& cfg, const SimConfig& sc,
                     const HistorySpec& h, const std::vector<int>& ts) {
    csv::Writer w(path);
    for (const auto& name : {"d", "t", "eate", "mc_se", "n_supported", "n_reps"})
        w.field(std::string(name));
    w.end_row();
    for (int t : ts) {
        TrueEffectCurve curve =
            true_eate_mc(sc, t < h.end ? h.truncated(t) : h, cfg.d_grid, t, cfg.truth_reps,
                         split_seed(cfg.seed, 0x7457), cfg.bandwidth);
        for (size_t k = 0; k < cfg.d_grid.size(); ++k) {
            w.field(cfg.d_grid[k]);
            w.field(static_cast<long long>(t));
            w.field(curve.eate(static_cast<int>(k)));
            w.field(curve.mc_se(static_cast<int>(k)));
            w.field(static_cast<long long>(curve.n_supported[k]));
            w.field(static_cast<long long>(curve.n_reps));
            w.end_row();
        }
    }
}

// ---------------------------------------------------------------------------
// Estimation context shared by estimate / frt.
// ---------------------------------------------------------------------------

struct EstimateContext {
    PanelDataset panel;
    DistanceMatrix D;
    double bw = 0.5;
    PropensityTable table;
    bool has_bundle = false;
    PropensityModelBundle bundle;
};

EstimateContext load_context(const RunConfig& cfg) {
    EstimateContext ctx;
    if (!cfg.input.empty()) {
        ctx.panel = load_panel(cfg.input);
    } else {
        ctx.panel = simulate_panel(sim_config(cfg)).panel;
    }

    if (!cfg.prob_column.empty()) {
        // Externally estimated per-observation probabilities ride along as a
        // covariate column; strip it before anything touches the features.
        Eigen::MatrixXd p = ctx.panel.covariate(cfg.prob_column);
        std::vector<std::string> names;
        std::vector<Eigen::MatrixXd> covs;
        for (size_t k = 0; k < ctx.panel.covariate_names.size(); ++k)
            if (ctx.panel.covariate_names[k] != cfg.prob_column) {
                names.push_back(ctx.panel.covariate_names[k]);
                covs.push_back(ctx.panel.covariates[k]);
            }
        ctx.panel.covariate_names = names;
        ctx.panel.covariates = covs;
        ctx.table = propensity_table_from_matrix(ctx.panel, p, cfg.clip_lo, cfg.clip_hi);
    } else {
        PropensityOptions popts;
        popts.coord_poly_degree = cfg.coord_poly;
        popts.clip_lo = cfg.clip_lo;
        popts.clip_hi = cfg.clip_hi;
        PropensityFit fit = estimate_propensities(ctx.panel, popts);
        ctx.table = fit.table;
        ctx.bundle = fit.bundle;
        ctx.has_bundle = true;
    }

    ctx.D = cfg.distances.empty() ? distance_matrix(ctx.panel.coords)
                                  : distance_matrix_from_csv(cfg.distances);
    if (ctx.D.n() != ctx.panel.n_units)
        throw ConfigError("distance matrix size does not match the panel");
    ctx.bw = cfg.bandwidth.value_or(default_bandwidth(ctx.D));
    return ctx;
}

void write_estimate_row(csv::Writer& w, const EffectEstimate& e, const std::string& t_label) {
    w.field(to_string(e.kind));
    w.field(e.d);
    w.field(t_label);
    w.field(e.tau);
    w.field(e.variance);
    w.field(e.ci_lo);
    w.field(e.ci_hi);
    w.field(e.n_target);
    w.field(e.n_reference);
    w.end_row();
}

// ---------------------------------------------------------------------------
// Commands.
// ---------------------------------------------------------------------------

int cmd_simulate(const RunConfig& cfg) {
    SimConfig sc = sim_config(cfg);
    SimTruth sim = simulate_panel(sc);
    std::filesystem::create_directories(cfg.out);
    write_panel(sim.panel, (std::filesystem::path(cfg.out) / "panel.csv").string());

    HistorySpec h = resolve_history(cfg, sc.rollout_period, sc.n_periods);
    std::vector<int> ts = resolve_t(cfg, sc.n_periods);
    write_truth_csv((std::filesystem::path(cfg.out) / "truth.csv").string(), cfg, sc, h, ts);

    if (cfg.svg) {
        TrueEffectCurve curve = true_eate_mc(sc, h, cfg.d_grid, ts.back(), cfg.truth_reps,
                                             split_seed(cfg.seed, 0x7457), cfg.bandwidth);
        svg::Series s;
        s.name = "true EATE";
        for (int k = 0; k < curve.eate.size(); ++k) s.y.push_back(curve.eate(k));
        svg::line_chart((std::filesystem::path(cfg.out) / "truth.svg").string(),
                        "True effect curve", cfg.d_grid, {s}, "distance", "effect");
    }
    write_manifest(cfg, {"panel.csv", "truth.csv"});
    return 0;
}

int cmd_truth(const RunConfig& cfg) {
    SimConfig sc = sim_config(cfg);
    HistorySpec h = resolve_history(cfg, sc.rollout_period, sc.n_periods);
    std::vector<int> ts = resolve_t(cfg, sc.n_periods);
    std::filesystem::create_directories(cfg.out);
    write_truth_csv((std::filesystem::path(cfg.out) / "truth.csv").string(), cfg, sc, h, ts);
    write_manifest(cfg, {"truth.csv"});
    return 0;
}

int cmd_estimate(const RunConfig& cfg) {
    EstimateContext ctx = load_context(cfg);
    EstimatorKind kind = parse_estimator(cfg.estimator);
    HistorySpec h = resolve_history(
        cfg, ctx.has_bundle && ctx.bundle.rollout_period > 0 ? ctx.bundle.rollout_period : 2,
        ctx.panel.n_periods);
    std::vector<int> ts = resolve_t(cfg, ctx.panel.n_periods);
    HacKernel kernel = parse_kernel(cfg.kernel);

    std::filesystem::create_directories(cfg.out);
    std::vector<std::string> outputs = {"estimates.csv"};

    DiffusionModel model;
    if (kind == EstimatorKind::augmented) {
        int t_begin = std::max(2, ctx.has_bundle ? ctx.bundle.rollout_period : 2);
        model = fit_diffusion_model(ctx.panel, ctx.D, cfg.d_grid, ctx.bw, t_begin);
    }
    if (ctx.has_bundle) {
        std::ofstream mj(std::filesystem::path(cfg.out) / "propensity_model.json",
                         std::ios::binary);
        mj << ctx.bundle.pooled.to_json() << "\n";
        outputs.push_back("propensity_model.json");
    }

    csv::Writer w((std::filesystem::path(cfg.out) / "estimates.csv").string());
    for (const auto& name :
         {"estimator", "d", "t", "tau", "var", "ci_lo", "ci_hi", "n_target", "n_reference"})
        w.field(std::string(name));
    w.end_row();

    Eigen::MatrixXd heat(static_cast<long>(ts.size()), static_cast<long>(cfg.d_grid.size()));
    heat.setConstant(std::nan(""));
    std::vector<double> curve_tau(cfg.d_grid.size(), std::nan(""));
    std::vector<double> curve_lo(cfg.d_grid.size(), std::nan(""));
    std::vector<double> curve_hi(cfg.d_grid.size(), std::nan(""));

    for (size_t di = 0; di < cfg.d_grid.size(); ++di) {
        SpilloverMapping mapping = circle_mean_weights(ctx.D, cfg.d_grid[di], ctx.bw);
        std::vector<EffectEstimate> per_period;
        std::vector<WlsRepresentation> per_period_rep;
        for (size_t ti = 0; ti < ts.size(); ++ti) {
            int t = ts[ti];
            HistorySpec ht = t < h.end ? h.truncated(t) : h;
            EffectEstimate e;
            if (kind == EstimatorKind::did) {
                e = did_estimate(ctx.panel, mapping, t);
            } else {
                HistoryPropensity hw = history_propensity(ctx.table, ctx.panel, ht);
                switch (kind) {
                    case EstimatorKind::horvitz_thompson:
                        e = eate_ht(ctx.panel, mapping, ht, t, hw);
                        break;
                    case EstimatorKind::augmented:
                        e = eate_augmented(ctx.panel, mapping, ht, t, hw, model);
                        break;
                    default:
                        e = eate_hajek(ctx.panel, mapping, ht, t, hw);
                }
                if (kind == EstimatorKind::hajek && cfg.variance != "none") {
                    WlsRepresentation rep = hajek_wls(ctx.panel, mapping, ht, t, hw);
                    per_period_rep.push_back(rep);
                    if (cfg.variance == "hc0" || cfg.variance == "spatial") {
                        VarianceEstimate v = spatial_hac(
                            rep, ctx.D, cfg.variance == "hc0" ? 0.0 : cfg.cutoff, kernel);
                        e.variance = v.value;
                        std::tie(e.ci_lo, e.ci_hi) =
                            confidence_interval(e.tau, v.value, cfg.level);
                    }
                }
            }
            write_estimate_row(w, e, std::to_string(t));
            heat(static_cast<long>(ti), static_cast<long>(di)) = e.tau;
            if (ti + 1 == ts.size()) {
                curve_tau[di] = e.tau;
                curve_lo[di] = e.ci_lo;
                curve_hi[di] = e.ci_hi;
            }
            per_period.push_back(e);
        }
        if (cfg.variance == "twoway" && kind == EstimatorKind::hajek && per_period.size() > 1) {
            EffectEstimate pooled = aggregate_periods(per_period);
            VarianceEstimate v =
                twoway_hac(per_period_rep, ctx.D, cfg.cutoff, cfg.time_cutoff, kernel);
            pooled.variance = v.value;
            std::tie(pooled.ci_lo, pooled.ci_hi) =
                confidence_interval(pooled.tau, v.value, cfg.level);
            write_estimate_row(w, pooled, "pooled");
        }
    }

    if (cfg.svg) {
        svg::Series s;
        s.name = cfg.estimator;
        s.y = curve_tau;
        bool has_ci = false;
        for (double v : curve_lo)
            if (!std::isnan(v)) has_ci = true;
        if (has_ci) {
            s.band_lo = curve_lo;
            s.band_hi = curve_hi;
        }
        svg::line_chart((std::filesystem::path(cfg.out) / "estimates.svg").string(),
                        "Estimated effect by distance", cfg.d_grid, {s}, "distance", "effect");
        svg::heatmap((std::filesystem::path(cfg.out) / "estimates_heatmap.svg").string(),
                     "Estimates by distance and period", cfg.d_grid, ts, heat, "distance",
                     "period");
        outputs.push_back("estimates.svg");
        outputs.push_back("estimates_heatmap.svg");
    }
    write_manifest(cfg, outputs);
    return 0;
}

int cmd_replicate(const RunConfig& cfg) {
    SimConfig sc = sim_config(cfg);
    HistorySpec h = resolve_history(cfg, sc.rollout_period, sc.n_periods);
    std::vector<int> ts = resolve_t(cfg, sc.n_periods);
    EstimatorSpec spec;
    spec.kind = parse_estimator(cfg.estimator);
    spec.coord_poly_degree = cfg.coord_poly;
    spec.clip_lo = cfg.clip_lo;
    spec.clip_hi = cfg.clip_hi;
    spec.kernel = parse_kernel(cfg.kernel);
    spec.cutoff = cfg.cutoff;
    spec.ci_level = cfg.level;
    if (cfg.variance == "hc0")
        spec.variance = EstimatorSpec::Var::hc0;
    else if (cfg.variance == "spatial")
        spec.variance = EstimatorSpec::Var::spatial;
    else if (cfg.variance == "twoway")
        throw ConfigError("replicate supports hc0/spatial variance; twoway is pooled-only");

    ReplicationTable table =
        replicate(sc, h, cfg.d_grid, ts, spec, cfg.reps, cfg.seed, cfg.truth_reps);

    std::filesystem::create_directories(cfg.out);
    {
        csv::Writer w((std::filesystem::path(cfg.out) / "replication.csv").string());
        for (const auto& name : {"estimator", "d", "t", "truth", "truth_se", "mean_est", "bias",
                                 "mc_se", "sd_est", "coverage", "n_ok"})
            w.field(std::string(name));
        w.end_row();
        for (const auto& cell : table.cells) {
            w.field(cfg.estimator);
            w.field(cell.d);
            w.field(static_cast<long long>(cell.t));
            w.field(cell.truth);
            w.field(cell.truth_se);
            w.field(cell.mean_est);
            w.field(cell.bias);
            w.field(cell.mc_se);
            w.field(cell.sd_est);
            w.field(cell.coverage);
            w.field(static_cast<long long>(cell.n_ok));
            w.end_row();
        }
    }
    if (cfg.svg) {
        svg::Series truth_s, est_s;
        truth_s.name = "truth";
        truth_s.color = "#888888";
        est_s.name = "mean " + cfg.estimator;
        est_s.color = "#aa2222";
        for (size_t di = 0; di < cfg.d_grid.size(); ++di) {
            const auto& cell = table.cells[table.cell_index(static_cast<int>(di),
                                                            static_cast<int>(ts.size()) - 1)];
            truth_s.y.push_back(cell.truth);
            est_s.y.push_back(cell.mean_est);
        }
        svg::line_chart((std::filesystem::path(cfg.out) / "replication.svg").string(),
                        "Mean estimate vs truth", cfg.d_grid, {truth_s, est_s}, "distance",
                        "effect");
    }
    write_manifest(cfg, {"replication.csv"});
    return 0;
}

int cmd_frt(const RunConfig& cfg) {
    EstimateContext ctx = load_context(cfg);
    if (!ctx.has_bundle)
        throw ConfigError("the randomization test needs an internally fitted assignment model");
    HistorySpec h = resolve_history(
        cfg, ctx.bundle.rollout_period > 0 ? ctx.bundle.rollout_period : 2, ctx.panel.n_periods);
    std::vector<int> ts = resolve_t(cfg, ctx.panel.n_periods);
    FrtOptions opts;
    opts.estimator = parse_estimator(cfg.estimator);
    opts.n_draws = cfg.frt_draws;
    opts.seed = split_seed(cfg.seed, 0xf127);
    opts.keep_draws = cfg.dump_draws;
    opts.refit_options.coord_poly_degree = cfg.coord_poly;
    opts.refit_options.clip_lo = cfg.clip_lo;
    opts.refit_options.clip_hi = cfg.clip_hi;

    std::filesystem::create_directories(cfg.out);
    std::vector<std::string> outputs = {"frt.csv"};
    csv::Writer w((std::filesystem::path(cfg.out) / "frt.csv").string());
    for (const auto& name : {"d", "t", "p_value", "tau_obs", "n_draws"})
        w.field(std::string(name));
    w.end_row();
    std::unique_ptr<csv::Writer> dw;
    if (cfg.dump_draws) {
        dw = std::make_unique<csv::Writer>(
            (std::filesystem::path(cfg.out) / "frt_draws.csv").string());
        for (const auto& name : {"d", "t", "draw", "tau"}) dw->field(std::string(name));
        dw->end_row();
        outputs.push_back("frt_draws.csv");
    }
    for (int t : ts)
        for (double d : cfg.d_grid) {
            SpilloverMapping mapping = circle_mean_weights(ctx.D, d, ctx.bw);
            HistorySpec ht = t < h.end ? h.truncated(t) : h;
            FrtResult res = randomization_test(ctx.panel, ctx.bundle, mapping, ht, t, opts);
            w.field(d);
            w.field(static_cast<long long>(t));
            w.field(res.p_value);
            w.field(res.tau_obs);
            w.field(static_cast<long long>(res.n_draws));
            w.end_row();
            if (dw)
                for (size_t k = 0; k < res.draws.size(); ++k) {
                    dw->field(d);
                    dw->field(static_cast<long long>(t));
                    dw->field(static_cast<long long>(k));
                    dw->field(res.draws[k]);
                    dw->end_row();
                }
        }
    write_manifest(cfg, outputs);
    return 0;
}

int cmd_did_compare(const RunConfig& cfg) {
    SimConfig sc = sim_config(cfg);
    auto rows = did_compare(sc, cfg.d_grid, cfg.reps, cfg.truth_reps, cfg.seed);
    std::filesystem::create_directories(cfg.out);
    {
        csv::Writer w((std::filesystem::path(cfg.out) / "did_compare.csv").string());
        for (const auto& name :
             {"d", "mean_did", "se_did", "truth", "bias", "oracle_bias", "oracle_se"})
            w.field(std::string(name));
        w.end_row();
        for (const auto& r : rows) {
            w.field(r.d);
            w.field(r.mean_did);
            w.field(r.se_did);
            w.field(r.truth);
            w.field(r.mean_did - r.truth);
            w.field(r.oracle_bias);
            w.field(r.oracle_se);
        }
    }
    if (cfg.svg) {
        svg::Series truth_s, did_s;
        truth_s.name = "truth";
        truth_s.color = "#888888";
        did_s.name = "mean DID";
        did_s.color = "#aa2222";
        for (const auto& r : rows) {
            truth_s.y.push_back(r.truth);
            did_s.y.push_back(r.mean_did);
        }
        svg::line_chart((std::filesystem::path(cfg.out) / "did_compare.svg").string(),
                        "DID vs truth", cfg.d_grid, {truth_s, did_s}, "distance", "effect");
    }
    write_manifest(cfg, {"did_compare.csv"});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Design-based direct and spillover effect estimation for TSCS panels"};
    app.require_subcommand(1);

    std::string config_path, d_grid_text, history_text, t_text, clip_text;
    RunConfig cfg;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config (or a manifest.json)");
        sub->add_option("--seed", cfg.seed, "RNG seed");
        sub->add_option("--out", cfg.out, "output directory");
        sub->add_option("--d-grid", d_grid_text, "distances: '0,1,2' or '0:8[:step]'");
        sub->add_option("--history", history_text, "'s-e:target:reference' or 'cohort:a:s-e'");
        sub->add_option("--t", t_text, "outcome periods, comma separated");
        sub->add_option("--estimator", cfg.estimator, "ht|hajek|augmented|did");
        sub->add_option("--variance", cfg.variance, "none|hc0|spatial|twoway");
        sub->add_option("--cutoff", cfg.cutoff, "HAC distance cutoff");
        sub->add_option("--time-cutoff", cfg.time_cutoff, "HAC period cutoff");
        sub->add_option("--kernel", cfg.kernel, "uniform|bartlett");
        sub->add_option("--clip", clip_text, "probability clip bounds 'lo,hi'");
        sub->add_option("--coord-poly", cfg.coord_poly, "coordinate polynomial degree");
        sub->add_option("--reps", cfg.reps, "replications (FRT draws for frt)");
        sub->add_option("--truth-reps", cfg.truth_reps, "truth oracle replications");
        sub->add_option("--level", cfg.level, "confidence level");
        sub->add_flag("--svg", cfg.svg, "emit SVG charts");
        return sub;
    };

    auto* c_sim = add_common(app.add_subcommand("simulate", "draw a panel and its truth curve"));
    auto* c_truth = add_common(app.add_subcommand("truth", "ground-truth effect curve"));
    auto* c_est = add_common(app.add_subcommand("estimate", "estimate effects on a panel"));
    auto* c_rep = add_common(app.add_subcommand("replicate", "bias/coverage study"));
    auto* c_frt = add_common(app.add_subcommand("frt", "Fisher randomization test"));
    auto* c_did = add_common(app.add_subcommand("did-compare", "DID vs truth with bias oracle"));
    (void)c_sim;
    (void)c_truth;
    (void)c_rep;
    (void)c_did;

    std::string input, distances, prob_column;
    bool dump_draws = false;
    for (auto* sub : {c_est, c_frt}) {
        sub->add_option("--input", input, "long-format panel CSV");
        sub->add_option("--distances", distances, "precomputed N x N distance CSV");
        sub->add_option("--prob-column", prob_column,
                        "use this panel column as externally estimated probabilities");
    }
    c_frt->add_flag("--dump-draws", dump_draws, "dump the FRT reference distribution");

    CLI11_PARSE(app, argc, argv);

    try {
        CLI::App* sub = app.get_subcommands().front();
        RunConfig file_cfg;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw ConfigError("cannot open config: " + config_path);
            json j = json::parse(in);
            if (j.contains("config")) j = j.at("config");  // manifest.json re-run
            file_cfg = RunConfig::from_json(j);
        }
        RunConfig run = file_cfg;
        run.command = sub->get_name();
        auto passed = [&](const std::string& flag) {
            const CLI::Option* opt = sub->get_option_no_throw(flag);
            return opt != nullptr && opt->count() > 0;
        };
        if (passed("--seed")) run.seed = cfg.seed;
        if (passed("--out") || run.out.empty()) run.out = cfg.out;
        if (passed("--d-grid")) run.d_grid = parse_d_grid(d_grid_text);
        if (passed("--history")) run.history = history_text;
        if (passed("--t")) {
            run.t_list.clear();
            for (const auto& part : split(t_text, ',')) run.t_list.push_back(std::stoi(part));
        }
        if (passed("--estimator")) run.estimator = cfg.estimator;
        if (passed("--variance")) run.variance = cfg.variance;
        if (passed("--cutoff")) run.cutoff = cfg.cutoff;
        if (passed("--time-cutoff")) run.time_cutoff = cfg.time_cutoff;
        if (passed("--kernel")) run.kernel = cfg.kernel;
        if (passed("--clip")) {
            auto parts = split(clip_text, ',');
            if (parts.size() != 2) throw ConfigError("--clip expects 'lo,hi'");
            run.clip_lo = csv::parse_double(parts[0], "--clip");
            run.clip_hi = csv::parse_double(parts[1], "--clip");
        }
        if (passed("--coord-poly")) run.coord_poly = cfg.coord_poly;
        if (passed("--reps")) {
            run.reps = cfg.reps;
            run.frt_draws = cfg.reps;
        }
        if (passed("--truth-reps")) run.truth_reps = cfg.truth_reps;
        if (passed("--level")) run.level = cfg.level;
        if (passed("--svg")) run.svg = cfg.svg;
        if (passed("--input")) run.input = input;
        if (passed("--distances")) run.distances = distances;
        if (passed("--prob-column")) run.prob_column = prob_column;
        if (sub == c_frt && dump_draws) run.dump_draws = true;

        if (!(run.level > 0 && run.level < 1)) throw ConfigError("level must lie in (0,1)");
        for (size_t k = 1; k < run.d_grid.size(); ++k)
            if (run.d_grid[k] <= run.d_grid[k - 1])
                throw ConfigError("d grid must be strictly increasing");
        if (!(run.clip_lo > 0 && run.clip_lo < run.clip_hi && run.clip_hi < 1))
            throw ConfigError("clip bounds must satisfy 0 < lo < hi < 1");

        if (run.command == "simulate") return cmd_simulate(run);
        if (run.command == "truth") return cmd_truth(run);
        if (run.command == "estimate") return cmd_estimate(run);
        if (run.command == "replicate") return cmd_replicate(run);
        if (run.command == "frt") return cmd_frt(run);
        if (run.command == "did-compare") return cmd_did_compare(run);
        throw ConfigError("unknown command: " + run.command);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
