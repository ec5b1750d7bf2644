// Acceptance suite: one pass/fail line per criterion. Exits nonzero when any
// criterion fails. Criterion 11 exercises the CLI binary, whose path comes in
// argv[1].

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "spillover/estimators.hpp"
#include "spillover/panel.hpp"
#include "spillover/propensity.hpp"
#include "spillover/simulation.hpp"
#include "spillover/variance.hpp"

using namespace spillover;

namespace {

int g_failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& detail) {
    printf("%s  criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", id, what.c_str(),
           detail.c_str());
    fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(double v) {
    char buf[64];
    snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// The staggered-design configuration shared by criteria 3, 5, and 7. The
// reference design's free knobs (surface scale, effect shape) are pinned at a
// desk-scale calibration with healthy overlap.
SimConfig staggered_config() {
    SimConfig cfg;
    cfg.rows = 20;
    cfg.cols = 20;
    cfg.n_periods = 5;
    cfg.alpha_scale = 1.5;
    cfg.effect.amplitude = 1.2;
    cfg.effect.range = 1.2;
    cfg.effect.max_radius = 1.5;
    cfg.seed = 814;
    return cfg;
}

// Two-period design for the DID comparison: one pre period, adoption in the
// second period with a per-unit probability driven only by the unit surface.
SimConfig did_config(bool heterogeneous, bool confounded) {
    SimConfig cfg;
    cfg.rows = 20;
    cfg.cols = 20;
    cfg.n_periods = 2;
    cfg.rollout_period = 2;
    cfg.assignment = "unit_bernoulli";
    cfg.unit_intercept = 0.0;
    cfg.alpha_scale = 1.5;
    cfg.effect.amplitude = 2.0;
    cfg.effect.range = 1.2;
    cfg.effect.max_radius = 2.5;
    cfg.heterogeneous = heterogeneous;
    cfg.confounded = confounded;
    cfg.confounding_strength = 0.8;
    cfg.lag_discount = 0.0;
    cfg.seed = 271;
    return cfg;
}

// ---------------------------------------------------------------------------
// Criterion 1: exact HT unbiasedness by full enumeration.
// ---------------------------------------------------------------------------

void criterion_1() {
    auto t0 = std::chrono::steady_clock::now();
    const int N = 4, T = 2, cells = N * T;
    Eigen::MatrixXd coords(N, 2);
    coords << 0, 0, 1, 0, 0, 1, 1, 1;  // 2x2 grid
    DistanceMatrix D = distance_matrix(coords);
    Eigen::MatrixXd prob(N, T);
    prob << 0.3, 0.55, 0.5, 0.4, 0.62, 0.5, 0.45, 0.35;

    // Arbitrary fixed interference table: outcomes indexed by the full
    // assignment bitmask (unit-major, period-minor bits).
    Rng rng(20240817);
    std::vector<Eigen::MatrixXd> table(1 << cells);
    for (auto& y : table) {
        y.resize(N, T);
        for (int i = 0; i < N; ++i)
            for (int t = 0; t < T; ++t) y(i, t) = 2.0 * rng.normal();
    }
    auto z_of = [&](int mask, int i, int t) { return (mask >> (i * T + t)) & 1; };
    auto mask_prob = [&](int mask) {
        double p = 1;
        for (int i = 0; i < N; ++i)
            for (int t = 0; t < T; ++t)
                p *= z_of(mask, i, t) ? prob(i, t) : 1 - prob(i, t);
        return p;
    };
    HistorySpec h(1, 2, {1, 1}, {0, 0});

    double worst = 0;
    for (double d : {0.0, 1.0}) {
        SpilloverMapping m = circle_mean_weights(D, d, 0.25);
        // Marginalized estimand by enumeration over the other units' cells.
        double estimand = 0;
        int n_supported = 0;
        for (int i = 0; i < N; ++i) {
            if (!m.supported[i]) continue;
            ++n_supported;
            double ei = 0;
            for (int mask = 0; mask < (1 << cells); ++mask) {
                // enumerate configurations with unit i all-control, weight by
                // the other units' probabilities, then force both histories
                bool i_clear = true;
                for (int t = 0; t < T; ++t) i_clear = i_clear && !z_of(mask, i, t);
                if (!i_clear) continue;
                double p_others = 1;
                for (int j = 0; j < N; ++j) {
                    if (j == i) continue;
                    for (int t = 0; t < T; ++t)
                        p_others *= z_of(mask, j, t) ? prob(j, t) : 1 - prob(j, t);
                }
                int forced = mask | (1 << (i * T + 0)) | (1 << (i * T + 1));
                auto mu_at = [&](int full) {
                    double mu = 0;
                    for (size_t q = 0; q < m.indices[i].size(); ++q)
                        mu += m.weights[i][q] * table[full](m.indices[i][q], 1);
                    return mu;
                };
                ei += p_others * (mu_at(forced) - mu_at(mask));
            }
            estimand += ei;
        }
        estimand /= n_supported;

        // Expectation of the estimator over every assignment.
        HistoryPropensity w;
        w.w_target.resize(N);
        w.w_reference.resize(N);
        for (int i = 0; i < N; ++i) {
            w.w_target(i) = prob(i, 0) * prob(i, 1);
            w.w_reference(i) = (1 - prob(i, 0)) * (1 - prob(i, 1));
        }
        double expect = 0;
        for (int mask = 0; mask < (1 << cells); ++mask) {
            Eigen::MatrixXd y = table[mask];
            Eigen::MatrixXi z(N, T);
            for (int i = 0; i < N; ++i)
                for (int t = 0; t < T; ++t) z(i, t) = z_of(mask, i, t);
            PanelDataset panel;
            panel.n_units = N;
            panel.n_periods = T;
            panel.outcomes = y;
            panel.treatments = z;
            panel.coords = coords;
            panel.unit_ids = {"1", "2", "3", "4"};
            panel.period_ids = {"1", "2"};
            try {
                expect += mask_prob(mask) * eate_ht(panel, m, h, 2, w).tau;
            } catch (const NoSupport&) {
                // no unit matches either history: the HT sum is zero
            }
        }
        worst = std::max(worst, std::abs(expect - estimand));
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(1, worst <= 1e-12 && secs < 1.0, "exact HT unbiasedness over 256 assignments",
           "max |E[tau_HT] - tau| = " + fmt(worst) + ", " + fmt(secs) + " s");
}

// ---------------------------------------------------------------------------
// Criterion 2: Hajek <-> WLS identity on random instances.
// ---------------------------------------------------------------------------

void criterion_2() {
    auto t0 = std::chrono::steady_clock::now();
    double worst = 0;
    int done = 0;
    Rng size_rng(77);
    for (int rep = 0; rep < 100; ++rep) {
        int n = 4 + size_rng.uniform_int(97);
        Rng rng(split_seed(4100, rep));
        Eigen::MatrixXd y(n, 1);
        Eigen::MatrixXi z(n, 1);
        HistoryPropensity w;
        w.w_target.resize(n);
        w.w_reference.resize(n);
        int nt = 0;
        for (int i = 0; i < n; ++i) {
            y(i, 0) = 3 * rng.normal();
            z(i, 0) = rng.uniform() < 0.45;
            nt += z(i, 0);
            w.w_target(i) = 0.05 + 0.9 * rng.uniform();
            w.w_reference(i) = 0.05 + 0.9 * rng.uniform();
        }
        if (nt == 0) z(0, 0) = 1;
        if (nt == n) z(0, 0) = 0;
        PanelDataset panel;
        panel.n_units = n;
        panel.n_periods = 1;
        panel.outcomes = y;
        panel.treatments = z;
        panel.coords.resize(n, 2);
        for (int i = 0; i < n; ++i) {
            panel.coords(i, 0) = 10 * rng.uniform();
            panel.coords(i, 1) = 10 * rng.uniform();
            panel.unit_ids.push_back(std::to_string(i));
        }
        panel.period_ids = {"1"};
        HistorySpec h(1, 1, {1}, {0});
        double hajek, wls;
        try {
            SpilloverMapping m =
                rep % 3 == 0 ? range_mean_weights(distance_matrix(panel.coords), 3.0)
                             : identity_mapping(n);
            hajek = eate_hajek(panel, m, h, 1, w).tau;
            wls = hajek_wls(panel, m, h, 1, w).tau;
        } catch (const Error&) {
            continue;  // degenerate draw (empty ring or arm); carries no content
        }
        worst = std::max(worst, std::abs(hajek - wls) / std::max(1.0, std::abs(hajek)));
        ++done;
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(2, worst <= 1e-10 && secs < 5.0 && done >= 95, "Hajek equals its WLS representation",
           fmt(done) + " instances, max rel diff = " + fmt(worst) + ", " + fmt(secs) + " s");
}

// ---------------------------------------------------------------------------
// Criteria 3 and 5: Hajek bias on the staggered design, clean and restored.
// ---------------------------------------------------------------------------

struct BiasRun {
    bool pass = true;
    double worst_ratio = 0;
    double peak = 0;
};

BiasRun bias_run(const SimConfig& cfg, int coord_poly, int reps, std::uint64_t seed) {
    HistorySpec h = HistorySpec::staggered(3, 1, 5);
    std::vector<double> grid = {0, 1, 2, 3, 4, 5, 6, 7, 8};
    EstimatorSpec spec;
    spec.coord_poly_degree = coord_poly;
    ReplicationTable rt = replicate(cfg, h, grid, {5}, spec, reps, seed, 100);
    BiasRun out;
    for (const auto& c : rt.cells) out.peak = std::max(out.peak, std::abs(c.truth));
    for (const auto& c : rt.cells) {
        double tol = std::max(3 * c.mc_se, 0.05 * out.peak);
        out.worst_ratio = std::max(out.worst_ratio, std::abs(c.bias) / tol);
        if (std::abs(c.bias) > tol) out.pass = false;
    }
    return out;
}

void criterion_3() {
    auto t0 = std::chrono::steady_clock::now();
    BiasRun run = bias_run(staggered_config(), 0, 500, 92011);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(3, run.pass, "Hajek bias negligible under sequential ignorability",
           "500 reps, worst |bias|/tol = " + fmt(run.worst_ratio) + ", peak EATE = " +
               fmt(run.peak) + ", " + fmt(secs) + " s");
}

void criterion_5() {
    SimConfig cfg = staggered_config();
    cfg.confounded = true;
    cfg.confounding_strength = 0.2;
    BiasRun restored = bias_run(cfg, 2, 500, 92013);
    BiasRun raw = bias_run(cfg, 0, 300, 92014);
    report(5, restored.pass,
           "quadratic coordinate adjustment restores the bias under confounding",
           "restored worst |bias|/tol = " + fmt(restored.worst_ratio) +
               ", unadjusted worst = " + fmt(raw.worst_ratio));
}

// ---------------------------------------------------------------------------
// Criteria 4 and 6: DID bias and its oracle on the two-period design.
// ---------------------------------------------------------------------------

void criterion_4() {
    SimConfig cfg = did_config(true, true);
    auto rows = did_compare(cfg, {0, 1, 2}, 500, 400, 5117);
    bool pass = true;
    std::string detail;
    for (const auto& r : rows) {
        double bias = r.mean_did - r.truth;
        double comb = 3 * std::sqrt(r.se_did * r.se_did + r.oracle_se * r.oracle_se);
        bool upward = bias > 3 * r.se_did;
        bool sign_ok = r.oracle_bias > 0;
        bool agree = std::abs(bias - r.oracle_bias) <= comb;
        if (!(upward && sign_ok && agree)) pass = false;
        detail += "d=" + fmt(r.d) + ": bias " + fmt(bias) + " vs oracle " + fmt(r.oracle_bias) +
                  "; ";
    }
    report(4, pass, "DID exceeds the truth and matches the bias oracle", detail);
}

void criterion_6() {
    SimConfig cfg = did_config(false, false);
    // Short effect reach keeps the O(1/N) finite-sample coupling between a
    // unit's arm and its neighbors' treated counts well below the MC noise.
    cfg.effect.amplitude = 0.4;
    cfg.effect.max_radius = 1.5;
    auto rows = did_compare(cfg, {0, 1, 2}, 500, 200, 5119);
    bool pass = true;
    std::string detail;
    for (const auto& r : rows) {
        double bias = r.mean_did - r.truth;
        if (std::abs(bias) > 3 * r.se_did) pass = false;
        detail += "d=" + fmt(r.d) + ": bias " + fmt(bias) + " (3se " + fmt(3 * r.se_did) + "); ";
    }
    report(6, pass, "DID bias vanishes for homogeneous effects", detail);
}

// ---------------------------------------------------------------------------
// Criterion 7: augmentation does not hurt efficiency (paired seeds).
// ---------------------------------------------------------------------------

void criterion_7() {
    SimConfig cfg = staggered_config();
    cfg.heterogeneous = false;
    cfg.lag_discount = 0.0;  // the contemporaneous additive model is correct
    cfg.effect.amplitude = 3.0;
    cfg.effect.max_radius = 2.5;
    HistorySpec h = HistorySpec::staggered(3, 1, 5);
    std::vector<double> grid = {0, 1, 2};
    const int reps = 500;
    EstimatorSpec hajek_spec;
    EstimatorSpec aug_spec;
    aug_spec.kind = EstimatorKind::augmented;
    aug_spec.model_d_grid = {0, 1, 2, 3};
    // identical seeds => identical panels => paired comparison
    ReplicationTable rh = replicate(cfg, h, grid, {5}, hajek_spec, reps, 90201, 50);
    ReplicationTable ra = replicate(cfg, h, grid, {5}, aug_spec, reps, 90201, 50);

    bool pass = true;
    std::string detail;
    Rng boot(31);
    for (size_t di = 0; di < grid.size(); ++di) {
        int cell = rh.cell_index(static_cast<int>(di), 0);
        std::vector<double> a, b;
        for (int r = 0; r < reps; ++r) {
            double va = ra.draws(r, cell), vb = rh.draws(r, cell);
            if (!std::isnan(va) && !std::isnan(vb)) {
                a.push_back(va);
                b.push_back(vb);
            }
        }
        auto var_of = [](const std::vector<double>& v, const std::vector<int>& idx) {
            double m = 0;
            for (int k : idx) m += v[k];
            m /= idx.size();
            double s = 0;
            for (int k : idx) s += (v[k] - m) * (v[k] - m);
            return s / (idx.size() - 1);
        };
        // one-sided bootstrap: Var(augmented) < Var(hajek) at 95% confidence
        const int B = 2000;
        std::vector<double> diffs(B);
        std::vector<int> idx(a.size());
        for (int bb = 0; bb < B; ++bb) {
            for (size_t k = 0; k < a.size(); ++k) idx[k] = boot.uniform_int(static_cast<int>(a.size()));
            diffs[bb] = var_of(a, idx) - var_of(b, idx);
        }
        std::sort(diffs.begin(), diffs.end());
        double q95 = diffs[static_cast<int>(0.95 * B)];
        std::vector<int> all(a.size());
        for (size_t k = 0; k < a.size(); ++k) all[k] = static_cast<int>(k);
        detail += "d=" + fmt(grid[di]) + ": var " + fmt(var_of(a, all)) + " vs " +
                  fmt(var_of(b, all)) + "; ";
        if (q95 >= 0) pass = false;
    }
    report(7, pass, "augmented estimator is more efficient (95% bootstrap)", detail);
}

// ---------------------------------------------------------------------------
// Criterion 8: spatial HAC degeneracy at cutoff zero.
// ---------------------------------------------------------------------------

void criterion_8() {
    double worst = 0;
    for (int rep = 0; rep < 25; ++rep) {
        Rng rng(split_seed(8800, rep));
        int n = 10 + rng.uniform_int(80);
        Eigen::MatrixXd y(n, 1);
        Eigen::MatrixXi z(n, 1);
        HistoryPropensity w;
        w.w_target.resize(n);
        w.w_reference.resize(n);
        PanelDataset panel;
        panel.coords.resize(n, 2);
        int nt = 0;
        for (int i = 0; i < n; ++i) {
            y(i, 0) = rng.normal();
            z(i, 0) = rng.uniform() < 0.5;
            nt += z(i, 0);
            w.w_target(i) = 0.1 + 0.8 * rng.uniform();
            w.w_reference(i) = 0.1 + 0.8 * rng.uniform();
            panel.coords(i, 0) = 5 * rng.uniform();
            panel.coords(i, 1) = 5 * rng.uniform();
            panel.unit_ids.push_back(std::to_string(i));
        }
        if (nt == 0) z(0, 0) = 1;
        if (nt == n) z(0, 0) = 0;
        panel.n_units = n;
        panel.n_periods = 1;
        panel.outcomes = y;
        panel.treatments = z;
        panel.period_ids = {"1"};
        DistanceMatrix D = distance_matrix(panel.coords);
        WlsRepresentation rep_w =
            hajek_wls(panel, identity_mapping(n), HistorySpec(1, 1, {1}, {0}), 1, w);
        VarianceEstimate v = spatial_hac(rep_w, D, 0.0);
        double hc0 = rep_w.psi.squaredNorm();
        worst = std::max(worst, std::abs(v.value - hc0) / std::max(hc0, 1e-300));
    }
    report(8, worst <= 1e-12, "spatial HAC at cutoff 0 equals HC0",
           "max rel diff over 25 instances = " + fmt(worst));
}

// ---------------------------------------------------------------------------
// Criterion 9: CI calibration with and without the interference cutoff.
// ---------------------------------------------------------------------------

void criterion_9() {
    // Bernoulli design with strong spatial interference; the analytic CIs
    // treat the fitted weights as known, so the design keeps the nuisance
    // share of the variance negligible.
    SimConfig cfg;
    cfg.rows = 20;
    cfg.cols = 20;
    cfg.n_periods = 2;
    cfg.rollout_period = 2;
    cfg.assignment = "unit_bernoulli";
    cfg.unit_intercept = logit(0.35);
    cfg.alpha_scale = 1.5;
    cfg.effect.amplitude = 5.0;
    cfg.effect.range = 1.5;
    cfg.effect.max_radius = 2.5;
    cfg.heterogeneous = false;
    cfg.lag_discount = 0.0;
    cfg.seed = 606;
    HistorySpec h = HistorySpec::staggered(2, 2, 2);
    const int reps = 500;

    EstimatorSpec with_cutoff;
    with_cutoff.variance = EstimatorSpec::Var::spatial;
    with_cutoff.cutoff = 6.0;
    ReplicationTable rt = replicate(cfg, h, {1.0}, {2}, with_cutoff, reps, 90909, 50);
    EstimatorSpec hc0;
    hc0.variance = EstimatorSpec::Var::hc0;
    ReplicationTable r0 = replicate(cfg, h, {1.0}, {2}, hc0, reps, 90909, 50);

    double cov_cut = rt.cells[0].coverage, cov_0 = r0.cells[0].coverage;
    bool pass = cov_cut >= 0.90 && cov_cut <= 0.99 && cov_0 < 0.90;
    report(9, pass, "spatial-HAC CIs calibrate; cutoff-0 CIs undercover",
           "coverage " + fmt(cov_cut) + " with cutoff 6 vs " + fmt(cov_0) + " at cutoff 0, bias " +
               fmt(rt.cells[0].bias) + ", sd " + fmt(rt.cells[0].sd_est));
}

// ---------------------------------------------------------------------------
// Criterion 10: FRT null calibration (KS uniformity at the 5% level).
// ---------------------------------------------------------------------------

void criterion_10() {
    auto t0 = std::chrono::steady_clock::now();
    SimConfig cfg;
    cfg.rows = 12;
    cfg.cols = 12;
    cfg.n_periods = 4;
    cfg.rollout_period = 3;
    cfg.alpha_scale = 1.5;
    cfg.effect.amplitude = 0.0;
    cfg.seed = 515;
    SimSurface surface = make_surface(cfg);
    SpilloverMapping m = circle_mean_weights(surface.D, 1.0, 0.5);
    HistorySpec h = HistorySpec::staggered(3, 1, 3);

    const int n_sims = 500;
    std::vector<double> pvals;
    pvals.reserve(n_sims);
    for (int s = 0; s < n_sims; ++s) {
        SimTruth draw = draw_panel(surface, cfg, split_seed(1666, s));
        PropensityFit fit = estimate_propensities(draw.panel, {});
        FrtOptions opts;
        opts.n_draws = 199;
        opts.seed = split_seed(1777, s);
        opts.parallel = false;
        try {
            pvals.push_back(
                randomization_test(draw.panel, fit.bundle, m, h, 3, opts).p_value);
        } catch (const Error&) {
        }
    }
    std::sort(pvals.begin(), pvals.end());
    double ks = 0;
    const double n = static_cast<double>(pvals.size());
    for (size_t k = 0; k < pvals.size(); ++k) {
        double u = pvals[k];
        ks = std::max(ks, std::abs((k + 1) / n - u));
        ks = std::max(ks, std::abs(u - k / n));
    }
    double crit = 1.3581 / std::sqrt(n);  // 5% asymptotic KS critical value
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(10, ks <= crit && pvals.size() >= 490, "FRT p-values are uniform under the null",
           "KS = " + fmt(ks) + " vs crit " + fmt(crit) + " over " + fmt(n) + " sims, " +
               fmt(secs) + " s");
}

// ---------------------------------------------------------------------------
// Criterion 11: byte-identical outputs when rerun from the manifest.
// ---------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void criterion_11(const char* cli) {
    namespace fs = std::filesystem;
    if (!cli) {
        report(11, false, "manifest reruns are byte-identical", "CLI path not provided");
        return;
    }
    fs::path base = fs::temp_directory_path() / "spillover_acceptance";
    fs::remove_all(base);
    fs::create_directories(base);
    auto run = [&](const std::string& args) {
        std::string cmd = std::string(cli) + " " + args + " > /dev/null 2>&1";
        return std::system(cmd.c_str()) == 0;
    };
    std::string A = (base / "a").string(), B = (base / "b").string();
    std::string C = (base / "c").string(), Dd = (base / "d").string();
    bool ok = true;
    std::string detail;
    // simulate, then rerun from its manifest
    ok = ok && run("simulate --out " + A + " --seed 31 --truth-reps 25 --d-grid 0:4");
    ok = ok && run("simulate --config " + A + "/manifest.json --out " + B);
    for (const char* f : {"panel.csv", "truth.csv"}) {
        if (!ok) break;
        if (slurp(A + "/" + f) != slurp(B + "/" + f) || slurp(A + "/" + f).empty()) {
            ok = false;
            detail = std::string(f) + " differs after manifest rerun";
        }
    }
    // estimate with variance, rerun from manifest
    if (ok) {
        ok = run("estimate --input " + A + "/panel.csv --out " + C +
                 " --d-grid 0:4 --variance spatial --cutoff 4 --seed 7");
        ok = ok && run("estimate --config " + C + "/manifest.json --out " + Dd);
        if (ok && (slurp(C + "/estimates.csv") != slurp(Dd + "/estimates.csv") ||
                   slurp(C + "/estimates.csv").empty())) {
            ok = false;
            detail = "estimates.csv differs after manifest rerun";
        }
    }
    // frt determinism
    if (ok) {
        std::string E = (base / "e").string(), F = (base / "f").string();
        ok = run("frt --input " + A + "/panel.csv --out " + E +
                 " --d-grid 0,1 --reps 59 --seed 11");
        ok = ok && run("frt --config " + E + "/manifest.json --out " + F);
        if (ok && slurp(E + "/frt.csv") != slurp(F + "/frt.csv")) {
            ok = false;
            detail = "frt.csv differs after manifest rerun";
        }
    }
    if (ok) detail = "simulate/estimate/frt outputs identical";
    report(11, ok, "manifest reruns are byte-identical", detail);
}

}  // namespace

int main(int argc, char** argv) {
    printf("acceptance suite\n");
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_11(argc > 1 ? argv[1] : nullptr);
    printf("%d criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
