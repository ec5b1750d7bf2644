#include <cmath>

#include "doctest.h"
#include "spillover/simulation.hpp"
#include "test_helpers.hpp"

using namespace spillover;

TEST_CASE("kriging interpolates anchors and reproduces constants") {
    std::vector<int> anchors = {3, 17, 29, 41, 55};
    SUBCASE("constant anchors give a constant field") {
        Eigen::VectorXd v = Eigen::VectorXd::Constant(5, 2.75);
        Eigen::VectorXd field = krige_grid(8, 8, anchors, v, 4.0, 1.0, 1e-10);
        CHECK((field.array() - 2.75).abs().maxCoeff() <= 1e-8);
    }
    SUBCASE("field equals anchor values at anchor cells") {
        Eigen::VectorXd v(5);
        v << 1.0, -0.5, 2.0, 0.3, -1.7;
        Eigen::VectorXd field = krige_grid(8, 8, anchors, v, 4.0, 1.0, 1e-10);
        for (size_t k = 0; k < anchors.size(); ++k)
            CHECK(field(anchors[k]) == doctest::Approx(v(k)).epsilon(1e-6));
    }
}

TEST_CASE("gp_surface is deterministic and spatially autocorrelated") {
    Eigen::VectorXd a = gp_surface(20, 20, 16, 8.0, 1.0, 1e-10, 99);
    Eigen::VectorXd b = gp_surface(20, 20, 16, 8.0, 1.0, 1e-10, 99);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    Eigen::VectorXd c = gp_surface(20, 20, 16, 8.0, 1.0, 1e-10, 100);
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);

    // Neighbor correlation along rows should be clearly positive.
    double mean = a.mean();
    double num = 0, den = 0;
    for (int r = 0; r < 20; ++r)
        for (int col = 0; col + 1 < 20; ++col) {
            double u = a(r * 20 + col) - mean, v = a(r * 20 + col + 1) - mean;
            num += u * v;
        }
    den = (a.array() - mean).square().sum();
    CHECK(num / den > 0.2);
}

TEST_CASE("received effect arithmetic") {
    SimConfig cfg;
    cfg.rows = 5;
    cfg.cols = 5;
    cfg.n_periods = 3;
    cfg.heterogeneous = true;
    cfg.effect.amplitude = 2.0;
    cfg.effect.range = 1.5;
    cfg.effect.max_radius = 2.0;
    SimSurface s = make_surface(cfg);

    SUBCASE("single treated unit, lag off: neighbor uplift is effect(r) times its scale") {
        SimConfig c0 = cfg;
        c0.lag_discount = 0.0;
        Eigen::MatrixXi z = Eigen::MatrixXi::Zero(25, 3);
        z(12, 1) = 1;  // center treated in period 2 only
        Eigen::MatrixXd e = received_effects(s, c0, z);
        CHECK(e.col(0).cwiseAbs().maxCoeff() == 0.0);
        CHECK(e.col(2).cwiseAbs().maxCoeff() == 0.0);
        for (int i = 0; i < 25; ++i) {
            double expect = s.scale(i) * cfg.effect(s.D.dist(i, 12));
            CHECK(e(i, 1) == doctest::Approx(expect).epsilon(1e-13));
        }
        // Corner (0,0) is 2*sqrt(2) > 2 away from the center: truncated to zero.
        CHECK(e(0, 1) == 0.0);
    }
    SUBCASE("geometric carryover at the discount rate") {
        Eigen::MatrixXi z = Eigen::MatrixXi::Zero(25, 3);
        z(12, 0) = 1;
        Eigen::MatrixXd e = received_effects(s, cfg, z);
        for (int i = 0; i < 25; ++i) {
            CHECK(e(i, 1) == doctest::Approx(cfg.lag_discount * e(i, 0)).epsilon(1e-13));
            CHECK(e(i, 2) ==
                  doctest::Approx(cfg.lag_discount * cfg.lag_discount * e(i, 0)).epsilon(1e-13));
        }
    }
    SUBCASE("zero amplitude leaves outcomes untouched") {
        SimConfig c0 = cfg;
        c0.effect.amplitude = 0.0;
        SimSurface s0 = make_surface(c0);
        SimTruth t = draw_panel(s0, c0, 5);
        CHECK(t.received.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("simulated panels are bit-deterministic per seed") {
    SimConfig cfg;
    cfg.rows = 8;
    cfg.cols = 8;
    cfg.seed = 4242;
    SimTruth a = simulate_panel(cfg);
    SimTruth b = simulate_panel(cfg);
    CHECK((a.panel.outcomes - b.panel.outcomes).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.panel.treatments - b.panel.treatments).cwiseAbs().maxCoeff() == 0);
    cfg.seed = 4243;
    SimTruth c = simulate_panel(cfg);
    CHECK((a.panel.outcomes - c.panel.outcomes).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("bounded-outcome guard counts violations under absurd amplitudes") {
    SimConfig cfg;
    cfg.rows = 6;
    cfg.cols = 6;
    cfg.effect.amplitude = 1e5;
    cfg.seed = 7;
    SimTruth t = simulate_panel(cfg);
    CHECK(t.n_bound_violations > 0);
}

TEST_CASE("treated counts match the reference design within ten percent") {
    // About 85 treated units in the rollout period, about 210 by period 5.
    SimConfig cfg;  // defaults are the reference design
    const int n_seeds = 120;
    double c3 = 0, c5 = 0;
    SimSurface surface = make_surface(cfg);
    for (int s = 0; s < n_seeds; ++s) {
        SimTruth t = draw_panel(surface, cfg, split_seed(31337, s));
        c3 += t.panel.treatments.col(2).sum();
        c5 += t.panel.treatments.col(4).sum();
    }
    c3 /= n_seeds;
    c5 /= n_seeds;
    CHECK(c3 >= 85.0 * 0.9);
    CHECK(c3 <= 85.0 * 1.1);
    CHECK(c5 >= 210.0 * 0.9);
    CHECK(c5 <= 210.0 * 1.1);
}

TEST_CASE("true EATE oracle") {
    SUBCASE("zero amplitude gives a zero curve") {
        SimConfig cfg;
        cfg.rows = 8;
        cfg.cols = 8;
        cfg.n_periods = 3;
        cfg.effect.amplitude = 0.0;
        TrueEffectCurve curve = true_eate_mc(cfg, HistorySpec::staggered(3, 1, 3), {0, 1, 2}, 3,
                                             20, 11);
        CHECK(curve.eate.cwiseAbs().maxCoeff() <= 1e-12);
    }
    SUBCASE("additive homogeneous effect with lag off recovers the effect function") {
        SimConfig cfg;
        cfg.rows = 10;
        cfg.cols = 10;
        cfg.n_periods = 3;
        cfg.heterogeneous = false;
        cfg.lag_discount = 0.0;
        HistorySpec h = HistorySpec::staggered(3, 3, 3);
        // Narrow bins isolate the exact lattice distances 1, 2, 3.
        TrueEffectCurve curve = true_eate_mc(cfg, h, {1, 2, 3}, 3, 10, 13, 0.1);
        for (int k = 0; k < 3; ++k)
            CHECK(curve.eate(k) == doctest::Approx(cfg.effect(k + 1.0)).epsilon(1e-10));
    }
    SUBCASE("heterogeneity and carryover amplify the effect function") {
        SimConfig cfg;
        cfg.rows = 12;
        cfg.cols = 12;
        HistorySpec h = HistorySpec::staggered(3, 1, 5);
        TrueEffectCurve curve = true_eate_mc(cfg, h, {0, 1, 2, 3}, 5, 10, 13);
        double kappa = 1.0 + cfg.lag_discount + cfg.lag_discount * cfg.lag_discount;
        CHECK(curve.eate(0) > cfg.effect(0.0));
        CHECK(curve.eate(0) <= 2.0 * kappa * cfg.effect(0.0) + 1e-9);
        // monotone decay over the grid
        CHECK(curve.eate(0) > curve.eate(1));
        CHECK(curve.eate(1) > curve.eate(2));
    }
    SUBCASE("direct-effect pipeline agrees at d=0 (two independent oracles)") {
        SimConfig cfg;
        cfg.rows = 6;
        cfg.cols = 6;
        cfg.n_periods = 4;
        cfg.rollout_period = 3;
        cfg.seed = 321;
        HistorySpec h = HistorySpec::staggered(3, 1, 4);
        const int reps = 8;
        const std::uint64_t seed = 909;
        TrueEffectCurve curve = true_eate_mc(cfg, h, {0.0}, 4, reps, seed);
        // Independent route: force each unit's own history and rebuild the full
        // received-effect matrices from scratch.
        SimSurface surface = make_surface(cfg);
        double acc = 0;
        for (int r = 0; r < reps; ++r) {
            SimTruth draw = draw_panel(surface, cfg, split_seed(seed, r));
            double rep_acc = 0;
            for (int i = 0; i < 36; ++i) {
                Eigen::MatrixXi zf = draw.panel.treatments, zr = draw.panel.treatments;
                for (int per = h.start; per <= h.end; ++per) {
                    zf(i, per - 1) = h.target[per - h.start];
                    zr(i, per - 1) = h.reference[per - h.start];
                }
                Eigen::MatrixXd ef = received_effects(surface, cfg, zf);
                Eigen::MatrixXd er = received_effects(surface, cfg, zr);
                rep_acc += ef(i, 3) - er(i, 3);
            }
            acc += rep_acc / 36;
        }
        acc /= reps;
        CHECK(curve.eate(0) == doctest::Approx(acc).epsilon(1e-9));
    }
    SUBCASE("parallel and serial oracle agree bitwise") {
        SimConfig cfg;
        cfg.rows = 6;
        cfg.cols = 6;
        cfg.n_periods = 3;
        HistorySpec h = HistorySpec::staggered(3, 1, 3);
        TrueEffectCurve a = true_eate_mc(cfg, h, {0, 1}, 3, 6, 5, std::nullopt, true);
        TrueEffectCurve b = true_eate_mc(cfg, h, {0, 1}, 3, 6, 5, std::nullopt, false);
        CHECK((a.eate - b.eate).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("null DGP: all four estimators center on zero") {
    SimConfig cfg;
    cfg.rows = 10;
    cfg.cols = 10;
    cfg.n_periods = 4;
    cfg.rollout_period = 3;
    cfg.effect.amplitude = 0.0;
    cfg.seed = 2024;
    HistorySpec h = HistorySpec::staggered(3, 1, 4);
    std::vector<double> d_grid = {0, 1, 2};
    const int reps = 120;
    for (auto kind : {EstimatorKind::horvitz_thompson, EstimatorKind::hajek,
                      EstimatorKind::augmented, EstimatorKind::did}) {
        EstimatorSpec spec;
        spec.kind = kind;
        ReplicationTable table = replicate(cfg, h, d_grid, {4}, spec, reps, 555, 10);
        for (const auto& cell : table.cells) {
            INFO("estimator ", to_string(kind), " d=", cell.d);
            CHECK(std::abs(cell.mean_est) <= 3.0 * cell.mc_se + 1e-9);
            CHECK(cell.truth == doctest::Approx(0.0));
        }
    }
}

TEST_CASE("replicate is deterministic and thread-count independent") {
    SimConfig cfg;
    cfg.rows = 8;
    cfg.cols = 8;
    cfg.n_periods = 4;
    cfg.rollout_period = 3;
    cfg.seed = 99;
    HistorySpec h = HistorySpec::staggered(3, 1, 4);
    EstimatorSpec spec;
    ReplicationTable a = replicate(cfg, h, {0, 1}, {4}, spec, 8, 77, 5, true);
    ReplicationTable b = replicate(cfg, h, {0, 1}, {4}, spec, 8, 77, 5, false);
    for (size_t c = 0; c < a.cells.size(); ++c) {
        CHECK(a.cells[c].mean_est == b.cells[c].mean_est);
        CHECK(a.cells[c].truth == b.cells[c].truth);
    }
}

TEST_CASE("config JSON round trip") {
    SimConfig cfg;
    cfg.rows = 11;
    cfg.confounded = true;
    cfg.effect.amplitude = 0.77;
    cfg.seed = 31;
    SimConfig back = SimConfig::from_json_string(cfg.to_json_string());
    CHECK(back.rows == 11);
    CHECK(back.confounded);
    CHECK(back.effect.amplitude == 0.77);
    CHECK(back.seed == 31);
    CHECK(back.to_json_string() == cfg.to_json_string());
}
